#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "celltraffic/errors.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/linalg.hpp"

namespace celltraffic {

inline constexpr std::size_t kNumChannels = 5;
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "sms_in", "sms_out", "call_in", "call_out", "internet"};
inline constexpr std::size_t kInternetChannel = 4;
inline constexpr std::int64_t kTenMinutesMs = 10 * 60 * 1000;
inline constexpr double kEarthRadiusM = 6371000.0;

inline std::size_t channel_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumChannels; ++i)
    if (kChannelNames[i] == name) return i;
  throw DomainError("unknown channel '" + std::string(name) + "'");
}

struct TrafficRecord {
  std::int64_t cell_id = 0;
  std::int64_t interval_start_ms = 0;
  std::array<double, kNumChannels> activity{};
};

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;
};

struct GridGeometry {
  std::map<std::int64_t, LonLat> cells;
  LonLat origin;
};

struct Snapshot {
  std::int64_t timestamp_ms = 0;
  Matrix features;  // N x d, rows in ascending cell_id order
};

struct SnapshotSeries {
  std::vector<Snapshot> snapshots;
  std::int64_t interval_ms = kTenMinutesMs;
  std::vector<std::int64_t> node_ids;

  std::size_t length() const { return snapshots.size(); }
  Index num_nodes() const { return static_cast<Index>(node_ids.size()); }
  Index num_features() const { return snapshots.empty() ? 0 : snapshots.front().features.cols(); }
};

/// Parses one tab-separated CDR line:
/// cell_id, interval_start_ms, country_code, sms_in, sms_out, call_in, call_out, internet.
/// Empty activity cells read as 0. The country code is validated when present
/// but not kept; records sharing (cell, interval) are summed later.
inline TrafficRecord parse_cdr_line(std::string_view line, std::size_t line_no = 1) {
  line = io::trim(line);
  const auto fields = io::split(line, '\t');
  if (fields.size() != 3 + kNumChannels)
    throw ParseError("expected 8 tab-separated fields, got " + std::to_string(fields.size()), line_no);

  TrafficRecord rec;
  const auto cell = io::parse_int<std::int64_t>(fields[0]);
  if (!cell || *cell < 1) throw ParseError("malformed cell_id '" + std::string(fields[0]) + "'", line_no);
  rec.cell_id = *cell;

  const auto ts = io::parse_int<std::int64_t>(fields[1]);
  if (!ts) throw ParseError("malformed interval_start '" + std::string(fields[1]) + "'", line_no);
  rec.interval_start_ms = *ts;

  if (!io::trim(fields[2]).empty() && !io::parse_int<std::int64_t>(fields[2]))
    throw ParseError("malformed country_code '" + std::string(fields[2]) + "'", line_no);

  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto raw = io::trim(fields[3 + c]);
    if (raw.empty()) continue;
    const auto v = io::parse_double(raw);
    if (!v || !std::isfinite(*v))
      throw ParseError("malformed " + std::string(kChannelNames[c]) + " '" + std::string(raw) + "'", line_no);
    if (*v < 0.0) throw ParseError("negative " + std::string(kChannelNames[c]) + " activity", line_no);
    rec.activity[c] = *v;
  }
  return rec;
}

inline std::vector<TrafficRecord> parse_cdr_text(std::string_view text) {
  std::vector<TrafficRecord> records;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    records.push_back(parse_cdr_line(line, line_no));
  }
  return records;
}

inline std::vector<TrafficRecord> load_cdr_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("CDR file not found: " + path.string());
  try {
    return parse_cdr_text(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path.string());
  }
}

inline bool valid_lon_lat(double lon, double lat) {
  return std::isfinite(lon) && std::isfinite(lat) && lon >= -180.0 && lon <= 180.0 && lat >= -90.0 &&
         lat <= 90.0;
}

/// Local equirectangular projection about `origin`:
/// y = R * dlat, x = R * cos(lat0) * dlon, radians, R = 6371000 m.
inline PlanarPoint project_wgs84(double lon, double lat, LonLat origin) {
  if (!valid_lon_lat(lon, lat))
    throw DomainError("coordinate out of WGS84 range: lon=" + io::format_double(lon) +
                      " lat=" + io::format_double(lat));
  if (!valid_lon_lat(origin.lon, origin.lat)) throw DomainError("projection origin out of WGS84 range");
  constexpr double deg = std::numbers::pi / 180.0;
  return {kEarthRadiusM * std::cos(origin.lat * deg) * (lon - origin.lon) * deg,
          kEarthRadiusM * (lat - origin.lat) * deg};
}

/// Grid CSV with header `cell_id,lon,lat`. The projection origin defaults to
/// the mean of all cell centroids.
inline GridGeometry parse_grid_csv(std::string_view text) {
  GridGeometry grid;
  std::size_t line_no = 0;
  bool header_seen = false;
  double sum_lon = 0.0, sum_lat = 0.0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    line = io::trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "cell_id,lon,lat") throw ParseError("expected header 'cell_id,lon,lat'", line_no);
      header_seen = true;
      continue;
    }
    const auto f = io::split(line, ',');
    if (f.size() != 3) throw ParseError("expected 3 comma-separated fields", line_no);
    const auto id = io::parse_int<std::int64_t>(f[0]);
    const auto lon = io::parse_double(f[1]);
    const auto lat = io::parse_double(f[2]);
    if (!id || *id < 1) throw ParseError("malformed cell_id", line_no);
    if (!lon || !lat || !valid_lon_lat(*lon, *lat)) throw ParseError("coordinate out of WGS84 range", line_no);
    if (!grid.cells.emplace(*id, LonLat{*lon, *lat}).second)
      throw ParseError("duplicate cell_id " + std::to_string(*id), line_no);
    sum_lon += *lon;
    sum_lat += *lat;
  }
  if (grid.cells.empty()) throw DomainError("grid file has no cells");
  const auto n = static_cast<double>(grid.cells.size());
  grid.origin = {sum_lon / n, sum_lat / n};
  return grid;
}

inline GridGeometry load_grid_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("grid file not found: " + path.string());
  try {
    return parse_grid_csv(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path.string());
  }
}

/// Planar coordinates (meters) for `node_ids`, in that order.
inline Matrix project_grid(const GridGeometry& grid, std::span<const std::int64_t> node_ids) {
  Matrix coords(static_cast<Index>(node_ids.size()), 2);
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    const auto it = grid.cells.find(node_ids[i]);
    if (it == grid.cells.end()) throw DomainError("cell " + std::to_string(node_ids[i]) + " not in grid");
    const auto p = project_wgs84(it->second.lon, it->second.lat, grid.origin);
    coords(static_cast<Index>(i), 0) = p.x;
    coords(static_cast<Index>(i), 1) = p.y;
  }
  return coords;
}

/// Assembles a gap-free series covering every grid cell. Records are binned
/// into `interval_ms` slots counted from the earliest record; duplicates of a
/// (cell, slot) key are summed in a canonical order, so the result does not
/// depend on record order. Cells or slots without records stay zero.
inline SnapshotSeries build_snapshots(std::span<const TrafficRecord> records, const GridGeometry& grid,
                                      std::int64_t interval_ms = kTenMinutesMs) {
  if (records.empty()) throw DomainError("no records");
  if (interval_ms <= 0) throw DomainError("interval must be positive");

  std::vector<std::int64_t> missing;
  for (const auto& r : records)
    if (!grid.cells.contains(r.cell_id)) missing.push_back(r.cell_id);
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string list;
    for (auto id : missing) list += (list.empty() ? "" : ",") + std::to_string(id);
    throw DomainError("records reference cells absent from grid: " + list);
  }

  SnapshotSeries series;
  series.interval_ms = interval_ms;
  for (const auto& [id, _] : grid.cells) series.node_ids.push_back(id);

  std::map<std::int64_t, Index> row_of;
  for (std::size_t i = 0; i < series.node_ids.size(); ++i)
    row_of[series.node_ids[i]] = static_cast<Index>(i);

  const auto [lo, hi] = std::minmax_element(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.interval_start_ms < b.interval_start_ms;
  });
  const std::int64_t t0 = lo->interval_start_ms;
  const auto slot_of = [&](std::int64_t t) { return (t - t0) / interval_ms; };
  const std::int64_t count = slot_of(hi->interval_start_ms) + 1;

  std::vector<const TrafficRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [&](const TrafficRecord* a, const TrafficRecord* b) {
    return std::tie(a->interval_start_ms, a->cell_id, a->activity) <
           std::tie(b->interval_start_ms, b->cell_id, b->activity);
  });

  const auto n = static_cast<Index>(series.node_ids.size());
  series.snapshots.resize(static_cast<std::size_t>(count));
  for (std::int64_t s = 0; s < count; ++s) {
    auto& snap = series.snapshots[static_cast<std::size_t>(s)];
    snap.timestamp_ms = t0 + s * interval_ms;
    snap.features = Matrix::Zero(n, static_cast<Index>(kNumChannels));
  }
  for (const TrafficRecord* r : order) {
    auto& feats = series.snapshots[static_cast<std::size_t>(slot_of(r->interval_start_ms))].features;
    const Index row = row_of.at(r->cell_id);
    for (std::size_t c = 0; c < kNumChannels; ++c) feats(row, static_cast<Index>(c)) += r->activity[c];
  }
  return series;
}

/// Temporal prefix/suffix split at floor(T * train_fraction).
inline std::pair<SnapshotSeries, SnapshotSeries> split_series(const SnapshotSeries& series,
                                                              double train_fraction) {
  if (series.length() < 2) throw DomainError("series needs at least 2 snapshots to split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train fraction must be in (0,1)");
  const auto cut = static_cast<std::size_t>(std::floor(static_cast<double>(series.length()) * train_fraction));
  if (cut == 0) throw DomainError("train fraction leaves the train split empty");
  if (cut >= series.length()) throw DomainError("train fraction leaves the test split empty");

  SnapshotSeries train{{}, series.interval_ms, series.node_ids};
  SnapshotSeries test{{}, series.interval_ms, series.node_ids};
  train.snapshots.assign(series.snapshots.begin(), series.snapshots.begin() + static_cast<std::ptrdiff_t>(cut));
  test.snapshots.assign(series.snapshots.begin() + static_cast<std::ptrdiff_t>(cut), series.snapshots.end());
  return {std::move(train), std::move(test)};
}

// --- snapshot cache -------------------------------------------------------
//
// <dir>/manifest.json   {"interval_ms", "start_ms", "count", "node_ids", "d"}
// <dir>/<timestamp>.f64 N*d little-endian doubles, row-major

inline std::string snapshot_file_name(std::int64_t timestamp_ms) {
  return std::to_string(timestamp_ms) + ".f64";
}

inline void save_snapshot_cache(const SnapshotSeries& series, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (series.snapshots.empty()) throw DomainError("cannot cache an empty series");
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".f64") fs::remove(entry.path());

  const Index n = series.num_nodes();
  const Index d = series.num_features();
  for (const auto& snap : series.snapshots) {
    if (snap.features.rows() != n || snap.features.cols() != d)
      throw ShapeError("snapshot " + std::to_string(snap.timestamp_ms) + " has shape " +
                       shape_str(snap.features));
    std::string payload;
    payload.reserve(static_cast<std::size_t>(n * d) * 8);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) io::append_f64_le(payload, snap.features(i, j));
    io::write_file_atomic(dir / snapshot_file_name(snap.timestamp_ms), payload);
  }

  nlohmann::ordered_json manifest;
  manifest["format"] = "celltraffic-snapshots";
  manifest["version"] = 1;
  manifest["interval_ms"] = series.interval_ms;
  manifest["start_ms"] = series.snapshots.front().timestamp_ms;
  manifest["count"] = series.snapshots.size();
  manifest["d"] = d;
  manifest["node_ids"] = series.node_ids;
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline SnapshotSeries load_snapshot_cache(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("snapshot cache manifest not found: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest " + manifest_path.string() + ": " + e.what());
  }

  SnapshotSeries series;
  series.interval_ms = manifest.at("interval_ms").get<std::int64_t>();
  series.node_ids = manifest.at("node_ids").get<std::vector<std::int64_t>>();
  const auto start = manifest.at("start_ms").get<std::int64_t>();
  const auto count = manifest.at("count").get<std::size_t>();
  const auto d = manifest.at("d").get<Index>();
  const auto n = series.num_nodes();
  const auto expected_bytes = static_cast<std::size_t>(n * d) * 8;

  series.snapshots.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    auto& snap = series.snapshots[s];
    snap.timestamp_ms = start + static_cast<std::int64_t>(s) * series.interval_ms;
    const auto bytes = io::read_file(dir / snapshot_file_name(snap.timestamp_ms));
    if (bytes.size() != expected_bytes)
      throw IoError("snapshot " + std::to_string(snap.timestamp_ms) + " has " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(expected_bytes));
    snap.features.resize(n, d);
    std::size_t off = 0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j, off += 8) snap.features(i, j) = io::read_f64_le(bytes, off);
  }
  return series;
}

}  // namespace celltraffic
