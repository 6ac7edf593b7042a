#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "celltraffic/ingest.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/rng.hpp"
#include "support/tempdir.hpp"

using namespace celltraffic;

namespace {

constexpr std::int64_t kT0 = 1383260400000;

TrafficRecord rec(std::int64_t cell, std::int64_t t, std::array<double, kNumChannels> a) {
  return {cell, t, a};
}

GridGeometry grid_of(std::initializer_list<std::int64_t> ids) {
  GridGeometry g;
  double lon = 9.0;
  for (auto id : ids) g.cells[id] = {lon += 0.01, 45.0};
  g.origin = {9.0, 45.0};
  return g;
}

}  // namespace

TEST(ParseCdrLine, EmptyFieldReadsAsZero) {
  const auto r = parse_cdr_line("1\t1383260400000\t39\t0.27\t\t0.11\t0.30\t8.14");
  EXPECT_EQ(r.cell_id, 1);
  EXPECT_EQ(r.interval_start_ms, kT0);
  EXPECT_EQ(r.activity[0], 0.27);
  EXPECT_EQ(r.activity[1], 0.0);
  EXPECT_EQ(r.activity[4], 8.14);
}

TEST(ParseCdrLine, FiveChannelsMapInOrder) {
  const auto r = parse_cdr_line("5\t1383260400000\t39\t1\t2\t3\t4\t5");
  for (std::size_t c = 0; c < kNumChannels; ++c) EXPECT_EQ(r.activity[c], static_cast<double>(c + 1));
}

TEST(ParseCdrLine, RejectsCellIdBelowOne) {
  try {
    parse_cdr_line("0\t1383260400000\t39\t0\t0\t0\t0\t0", 17);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 17u);
  }
}

TEST(ParseCdrLine, RejectsNegativeActivityAndMalformedFields) {
  EXPECT_THROW(parse_cdr_line("1\t1383260400000\t39\t-1\t0\t0\t0\t0"), ParseError);
  EXPECT_THROW(parse_cdr_line("1\tnoon\t39\t0\t0\t0\t0\t0"), ParseError);
  EXPECT_THROW(parse_cdr_line("1\t1383260400000\t39\t0\t0\t0\t0"), ParseError);
  EXPECT_THROW(parse_cdr_line("1\t1383260400000\t39\tabc\t0\t0\t0\t0"), ParseError);
}

TEST(ParseCdrText, SkipsBlankLinesAndReportsLineNumbers) {
  const std::string text = "1\t1383260400000\t39\t1\t1\t1\t1\t1\n\n2\t1383260400000\t39\t1\t1\t1\t-1\t1\n";
  try {
    parse_cdr_text(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadCdrFile, MissingFileIsIoErrorAndParseErrorNamesFile) {
  EXPECT_THROW(load_cdr_file("/nonexistent/cdr.tsv"), IoError);
  testutil::TempDir dir;
  io::write_file_atomic(dir / "bad.tsv", "1\t1383260400000\t39\tx\t0\t0\t0\t0\n");
  try {
    load_cdr_file(dir / "bad.tsv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.tsv:1"), std::string::npos) << e.what();
  }
}

TEST(ProjectWgs84, OriginMapsToZero) {
  const auto p = project_wgs84(9.0, 45.0, {9.0, 45.0});
  EXPECT_EQ(p.x, 0.0);
  EXPECT_EQ(p.y, 0.0);
}

TEST(ProjectWgs84, HundredthDegreeDistances) {
  const double y_expected = 6371000.0 * 0.01 * std::numbers::pi / 180.0;
  const auto north = project_wgs84(9.0, 45.01, {9.0, 45.0});
  EXPECT_NEAR(north.y, y_expected, 1e-6);
  EXPECT_NEAR(north.y, 1111.95, 0.005);
  EXPECT_NEAR(north.x, 0.0, 1e-9);
  const auto east = project_wgs84(9.01, 45.0, {9.0, 45.0});
  EXPECT_NEAR(east.x, y_expected * std::cos(std::numbers::pi / 4.0), 1e-6);
  EXPECT_NEAR(east.x, 786.26, 0.01);  // 786.267 truncated
  EXPECT_NEAR(east.y, 0.0, 1e-9);
}

TEST(ProjectWgs84, RejectsOutOfRangeCoordinates) {
  EXPECT_THROW(project_wgs84(181.0, 0.0, {0.0, 0.0}), DomainError);
  EXPECT_THROW(project_wgs84(0.0, -91.0, {0.0, 0.0}), DomainError);
}

TEST(ProjectWgs84, DistanceIsSymmetric) {
  Rng rng(11);
  const LonLat origin{9.19, 45.46};
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = project_wgs84(rng.uniform(9.0, 9.4), rng.uniform(45.3, 45.6), origin);
    const auto b = project_wgs84(rng.uniform(9.0, 9.4), rng.uniform(45.3, 45.6), origin);
    EXPECT_EQ(std::hypot(a.x - b.x, a.y - b.y), std::hypot(b.x - a.x, b.y - a.y));
  }
}

TEST(GridCsv, ParsesAndRejectsBadInput) {
  const auto g = parse_grid_csv("cell_id,lon,lat\n1,9.0,45.0\n2,9.2,45.2\n");
  ASSERT_EQ(g.cells.size(), 2u);
  EXPECT_DOUBLE_EQ(g.origin.lon, 9.1);
  EXPECT_DOUBLE_EQ(g.origin.lat, 45.1);
  EXPECT_THROW(parse_grid_csv("id,lon,lat\n1,9,45\n"), ParseError);
  EXPECT_THROW(parse_grid_csv("cell_id,lon,lat\n1,200,45\n"), ParseError);
  EXPECT_THROW(parse_grid_csv("cell_id,lon,lat\n1,9,45\n1,9,45\n"), ParseError);
  EXPECT_THROW(load_grid_csv("/nonexistent/grid.csv"), IoError);
}

TEST(BuildSnapshots, SumsDuplicateKeys) {
  const std::vector<TrafficRecord> r{rec(7, kT0, {0, 0, 0, 0, 1.0}), rec(7, kT0, {0, 0, 0, 0, 2.5})};
  const auto s = build_snapshots(r, grid_of({7}));
  ASSERT_EQ(s.length(), 1u);
  EXPECT_EQ(s.snapshots[0].features(0, kInternetChannel), 3.5);
}

TEST(BuildSnapshots, SilentCellGetsZeroRow) {
  const std::vector<TrafficRecord> r{rec(1, kT0, {1, 1, 1, 1, 1}), rec(1, kT0 + kTenMinutesMs, {2, 2, 2, 2, 2})};
  const auto s = build_snapshots(r, grid_of({1, 2}));
  ASSERT_EQ(s.num_nodes(), 2);
  for (const auto& snap : s.snapshots) EXPECT_TRUE(snap.features.row(1).isZero(0.0));
}

TEST(BuildSnapshots, GapBecomesZeroSnapshot) {
  const std::vector<TrafficRecord> r{rec(1, kT0, {1, 1, 1, 1, 1}), rec(1, kT0 + 2 * kTenMinutesMs, {2, 2, 2, 2, 2})};
  const auto s = build_snapshots(r, grid_of({1}));
  ASSERT_EQ(s.length(), 3u);
  EXPECT_TRUE(s.snapshots[1].features.isZero(0.0));
  EXPECT_EQ(s.snapshots[1].timestamp_ms, kT0 + kTenMinutesMs);
}

TEST(BuildSnapshots, RowsFollowAscendingCellId) {
  const std::vector<TrafficRecord> r{rec(9, kT0, {9, 0, 0, 0, 0}), rec(3, kT0, {3, 0, 0, 0, 0})};
  const auto s = build_snapshots(r, grid_of({9, 3, 5}));
  EXPECT_EQ(s.node_ids, (std::vector<std::int64_t>{3, 5, 9}));
  EXPECT_EQ(s.snapshots[0].features(0, 0), 3.0);
  EXPECT_EQ(s.snapshots[0].features(2, 0), 9.0);
}

TEST(BuildSnapshots, Errors) {
  const std::vector<TrafficRecord> none;
  EXPECT_THROW(build_snapshots(none, grid_of({1})), DomainError);
  const std::vector<TrafficRecord> r{rec(4, kT0, {}), rec(8, kT0, {})};
  try {
    build_snapshots(r, grid_of({1}));
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("4,8"), std::string::npos) << e.what();
  }
}

// Random record streams: count and mass conservation, order independence.
TEST(BuildSnapshots, PropertiesOnRandomStreams) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<TrafficRecord> r;
    std::int64_t lo = INT64_MAX, hi = INT64_MIN;
    const int count = 5 + static_cast<int>(rng.below(40));
    for (int i = 0; i < count; ++i) {
      const auto slot = static_cast<std::int64_t>(rng.below(12));
      const auto t = kT0 + slot * kTenMinutesMs;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
      std::array<double, kNumChannels> a{};
      for (auto& v : a) v = rng.uniform(0.0, 5.0);
      r.push_back(rec(1 + static_cast<std::int64_t>(rng.below(4)), t, a));
    }
    const auto grid = grid_of({1, 2, 3, 4});
    const auto s = build_snapshots(r, grid);
    EXPECT_EQ(s.length(), static_cast<std::size_t>((hi - lo) / kTenMinutesMs + 1));
    for (const auto& snap : s.snapshots) {
      double expected = 0.0;
      for (const auto& x : r)
        if (x.interval_start_ms == snap.timestamp_ms)
          for (double v : x.activity) expected += v;
      EXPECT_NEAR(snap.features.sum(), expected, 1e-9 * (1.0 + expected));
    }
    auto shuffled = r;
    rng.shuffle(shuffled);
    const auto s2 = build_snapshots(shuffled, grid);
    for (std::size_t t = 0; t < s.length(); ++t) EXPECT_EQ(s.snapshots[t].features, s2.snapshots[t].features);
  }
}

TEST(SplitSeries, FloorArithmetic) {
  SnapshotSeries s;
  s.node_ids = {1};
  for (int t = 0; t < 10; ++t) s.snapshots.push_back({kT0 + t * kTenMinutesMs, Matrix::Constant(1, 1, t)});
  const auto [a, b] = split_series(s, 0.8);
  EXPECT_EQ(a.length(), 8u);
  EXPECT_EQ(b.length(), 2u);
  EXPECT_EQ(b.snapshots[0].features(0, 0), 8.0);

  SnapshotSeries two = s;
  two.snapshots.resize(2);
  const auto [c, d] = split_series(two, 0.5);
  EXPECT_EQ(c.length(), 1u);
  EXPECT_EQ(d.length(), 1u);

  SnapshotSeries three = s;
  three.snapshots.resize(3);
  EXPECT_THROW(split_series(three, 0.1), DomainError);
  EXPECT_THROW(split_series(three, 1.0), DomainError);
}

TEST(SnapshotCache, RoundTripIsBitIdentical) {
  SnapshotSeries s;
  s.node_ids = {2, 5, 11};
  Rng rng(5);
  for (int t = 0; t < 4; ++t) {
    Matrix f(3, 5);
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = rng.normal() * 1e3;
    f(0, 0) = 0.1 + 0.2;  // not exactly representable in short decimal
    s.snapshots.push_back({kT0 + t * kTenMinutesMs, f});
  }
  testutil::TempDir dir;
  save_snapshot_cache(s, dir.path());
  const auto back = load_snapshot_cache(dir.path());
  EXPECT_EQ(back.node_ids, s.node_ids);
  EXPECT_EQ(back.interval_ms, s.interval_ms);
  ASSERT_EQ(back.length(), s.length());
  for (std::size_t t = 0; t < s.length(); ++t) {
    EXPECT_EQ(back.snapshots[t].timestamp_ms, s.snapshots[t].timestamp_ms);
    EXPECT_EQ(std::memcmp(back.snapshots[t].features.data(), s.snapshots[t].features.data(), 15 * sizeof(double)), 0);
  }
}

TEST(SnapshotCache, PayloadIsLittleEndianRowMajor) {
  SnapshotSeries s;
  s.node_ids = {1, 2};
  Matrix f(2, 2);
  f << 1.0, 2.0, 3.0, 4.0;
  s.snapshots.push_back({kT0, f});
  testutil::TempDir dir;
  save_snapshot_cache(s, dir.path());
  const auto bytes = io::read_file(dir / (std::to_string(kT0) + ".f64"));
  ASSERT_EQ(bytes.size(), 32u);
  EXPECT_EQ(io::read_f64_le(bytes, 8), 2.0);
  EXPECT_EQ(io::read_f64_le(bytes, 16), 3.0);
  // 1.0 == 0x3FF0000000000000: exponent byte last in little-endian order.
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0xF0);
}

TEST(SnapshotCache, MissingManifestIsIoError) {
  testutil::TempDir dir;
  EXPECT_THROW(load_snapshot_cache(dir.path()), IoError);
}
