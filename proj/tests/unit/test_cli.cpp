#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "celltraffic/cli.hpp"
#include "support/tempdir.hpp"

using namespace celltraffic;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "celltraffic");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::size_t line_count(const fs::path& p) {
  const auto text = io::read_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const char* kGrid = "cell_id,lon,lat\n1,9.100,45.460\n2,9.103,45.460\n3,9.100,45.462\n";

std::string cdr_line(int cell, long long t, double internet) {
  return std::to_string(cell) + "\t" + std::to_string(t) + "\t39\t0.1\t0.2\t\t0.4\t" + io::format_double(internet) + "\n";
}

}  // namespace

TEST(Cli, IngestSmallInput) {
  testutil::TempDir dir;
  std::string cdr;
  for (int c = 1; c <= 3; ++c)
    for (long long t : {0LL, 600000LL}) cdr += cdr_line(c, t, c + 0.5);
  io::write_file_atomic(dir / "cdr.tsv", cdr);
  io::write_file_atomic(dir / "grid.csv", kGrid);
  const auto r = run({"ingest", "--cdr", (dir / "cdr.tsv").string(), "--grid", (dir / "grid.csv").string(), "--out",
                      (dir / "data").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("N=3 d=5 T=2"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "data" / "manifest.json"));
  EXPECT_EQ(line_count(dir / "data" / "nodes.csv"), 4u);
  EXPECT_TRUE(fs::exists(dir / "data" / "resolved_config.txt"));
}

TEST(Cli, IngestInputErrors) {
  testutil::TempDir dir;
  io::write_file_atomic(dir / "empty.tsv", "");
  io::write_file_atomic(dir / "grid.csv", kGrid);
  const auto missing = (dir / "nope.csv").string();
  auto r = run({"ingest", "--cdr", (dir / "empty.tsv").string(), "--grid", missing, "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;

  r = run({"ingest", "--cdr", (dir / "empty.tsv").string(), "--grid", (dir / "grid.csv").string(), "--out",
           (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no records"), std::string::npos) << r.err;

  io::write_file_atomic(dir / "bad.tsv", cdr_line(1, 0, 1.0) + "1\t600000\t39\tx\t0\t0\t0\t0\n");
  r = run({"ingest", "--cdr", (dir / "bad.tsv").string(), "--grid", (dir / "grid.csv").string(), "--out",
           (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.tsv:2"), std::string::npos) << r.err;

  EXPECT_EQ(run({"ingest", "--grid", (dir / "grid.csv").string()}).code, 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"classify", "--no-such-key", "1"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);

  testutil::TempDir dir;
  io::write_file_atomic(dir / "cfg.txt", "# comment\nhidden = 4\nbogus = 1\n");
  auto r = run({"classify", "--config", (dir / "cfg.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("cfg.txt:3"), std::string::npos) << r.err;

  io::write_file_atomic(dir / "dup.txt", "hidden = 4\nhidden = 5\n");
  EXPECT_EQ(run({"classify", "--config", (dir / "dup.txt").string()}).code, 2);
  EXPECT_EQ(run({"classify", "--config", (dir / "missing.txt").string()}).code, 2);
  EXPECT_EQ(run({"classify", "--fixture", "tiny_6", "--hidden", "many", "--out", (dir / "o").string()}).code, 2);
}

TEST(Cli, MissingCacheSuggestsIngest) {
  testutil::TempDir dir;
  const auto r = run({"classify", "--data", (dir / "none").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("celltraffic ingest"), std::string::npos) << r.err;
}

TEST(Cli, ClassifyOnFixture) {
  testutil::TempDir dir;
  const auto r = run({"classify", "--fixture", "two_hotspots_100", "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "predictions.csv"), 101u);
  EXPECT_EQ(line_count(dir / "history.csv"), 201u);
  EXPECT_TRUE(fs::exists(dir / "accuracy.svg"));
  EXPECT_TRUE(fs::exists(dir / "classifier.ckpt"));
  EXPECT_NE(io::read_file(dir / "resolved_config.txt").find("epochs = 200"), std::string::npos);
  EXPECT_NE(r.out.find("heldout_accuracy"), std::string::npos);
}

TEST(Cli, ConfigPrecedenceAndResolvedRoundTrip) {
  testutil::TempDir dir;
  io::write_file_atomic(dir / "cfg.txt", "hidden = 4\nepochs = 30\nfixture = two_hotspots_100\n");
  const auto first = (dir / "a").string();
  auto r = run({"classify", "--config", (dir / "cfg.txt").string(), "--hidden", "6", "--out", first});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto resolved = io::read_file(dir / "a" / "resolved_config.txt");
  EXPECT_NE(resolved.find("hidden = 6\n"), std::string::npos);
  EXPECT_NE(resolved.find("epochs = 30\n"), std::string::npos);
  EXPECT_EQ(resolved.find("kappa = auto"), std::string::npos) << resolved;

  r = run({"classify", "--config", (dir / "a" / "resolved_config.txt").string(), "--out", (dir / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_file(dir / "b" / "predictions.csv"), io::read_file(dir / "a" / "predictions.csv"));
  EXPECT_EQ(io::read_file(dir / "b" / "classifier.ckpt"), io::read_file(dir / "a" / "classifier.ckpt"));
}

TEST(Cli, SweepWritesRowsAndPlot) {
  testutil::TempDir dir;
  const auto r = run({"sweep", "--fixture", "tiny_6", "--target_channel", "1", "--param", "m", "--values", "1,3,6",
                      "--epochs", "3", "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "sweep.csv"), 4u);
  EXPECT_TRUE(fs::exists(dir / "sweep.svg"));
  for (int m : {1, 3, 6}) EXPECT_TRUE(fs::exists(dir / ("loss_m" + std::to_string(m) + ".csv")));
  EXPECT_EQ(
      run({"sweep", "--fixture", "tiny_6", "--target_channel", "1", "--param", "q", "--out", dir.path().string()}).code,
      2);
}

TEST(Cli, ForecastWindowTooLong) {
  testutil::TempDir dir;
  const auto r = run({"forecast", "--fixture", "tiny_6", "--target_channel", "1", "--m", "10", "--k", "5", "--out",
                      dir.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("m + k"), std::string::npos) << r.err;
}

TEST(Cli, NumericFailureExitsWithThree) {
  testutil::TempDir dir;
  const auto r = run({"forecast", "--fixture", "tiny_6", "--target_channel", "1", "--m", "2", "--k", "1", "--lr",
                      "1e300", "--epochs", "5", "--out", dir.path().string()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("numeric failure"), std::string::npos) << r.err;
}

TEST(Cli, PipelineOnIngestedData) {
  testutil::TempDir dir;
  std::string cdr;
  for (long long t = 0; t < 12; ++t)
    for (int c = 1; c <= 3; ++c) cdr += cdr_line(c, t * 600000, 1.0 + c + std::sin(0.5 * static_cast<double>(t)));
  io::write_file_atomic(dir / "cdr.tsv", cdr);
  io::write_file_atomic(dir / "grid.csv", kGrid);
  const auto data = (dir / "data").string();
  ASSERT_EQ(run({"ingest", "--cdr", (dir / "cdr.tsv").string(), "--grid", (dir / "grid.csv").string(), "--out", data}).code, 0);

  EXPECT_EQ(run({"embed", "--data", data, "--out", (dir / "e").string()}).code, 2);  // no graph yet
  auto r = run({"graph", "--data", data, "--out", data});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("N=3"), std::string::npos);

  r = run({"embed", "--data", data, "--d_emb", "1", "--out", (dir / "e").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "e" / "embedding.csv"), 4u);
  EXPECT_TRUE(fs::exists(dir / "e" / "eigenvalues.csv"));

  r = run({"embed", "--data", data, "--embed_method", "gcn_method2", "--gcn_hidden", "none", "--out", (dir / "g").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "g" / "embedding.svg"));

  r = run({"forecast", "--data", data, "--m", "2", "--k", "1", "--epochs", "4", "--out", (dir / "f").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_file(dir / "f" / "metrics.csv").rfind("m,k,rmse,mae\n2,1,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "f" / "loss.svg"));
  EXPECT_TRUE(fs::exists(dir / "f" / "forecaster.ckpt"));
}

TEST(Cli, GaussianGraphAndIsolatedNodes) {
  testutil::TempDir dir;
  auto r = run({"graph", "--fixture", "two_hotspots_100", "--graph_kind", "gaussian", "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto resolved = io::read_file(dir / "resolved_config.txt");
  EXPECT_EQ(resolved.find("edge_radius_m = auto"), std::string::npos);
  EXPECT_EQ(resolved.find("sigma_m = auto"), std::string::npos);

  r = run({"graph", "--fixture", "two_hotspots_100", "--edge_radius_m", "1", "--propagation", "method2", "--out",
           dir.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("isolated"), std::string::npos) << r.err;
}

TEST(Plot, DeterministicPolylinePerCurve) {
  const plot::Curve a{"a", {{0, 1}, {1, 2}, {2, 0.5}}}, b{"b<&>", {{0, 3}, {2, 4}}};
  const auto svg = plot::render_line_plot({a, b}, {"title", "x", "y"});
  EXPECT_EQ(svg, plot::render_line_plot({a, b}, {"title", "x", "y"}));
  std::size_t count = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++count;
  EXPECT_EQ(count, 2u);
  const auto start = svg.find("points=\"") + 8;
  const auto pts = svg.substr(start, svg.find('"', start) - start);
  EXPECT_EQ(std::count(pts.begin(), pts.end(), ','), 3);
  EXPECT_NE(svg.find("b&lt;&amp;&gt;"), std::string::npos);
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0, true);
}

TEST(Plot, RejectsBadInput) {
  EXPECT_THROW(plot::render_line_plot({{"nan", {{0, 1}, {1, NAN}}}}), DomainError);
  EXPECT_THROW(plot::render_line_plot({{"one", {{0, 1}}}}), DomainError);
  EXPECT_THROW(plot::render_line_plot({}), DomainError);
  EXPECT_THROW(plot::render_scatter_plot({{0, 1}, {1, 2}}, {1}), DomainError);
  EXPECT_THROW(plot::render_scatter_plot({{0, INFINITY}}, {}), DomainError);
}

TEST(Plot, FlatCurveStillRenders) {
  const auto svg = plot::render_line_plot({{"flat", {{1, 2}, {2, 2}, {3, 2}}}});
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
}
