#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "celltraffic/errors.hpp"
#include "celltraffic/graph.hpp"
#include "celltraffic/ingest.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/linalg.hpp"
#include "celltraffic/rng.hpp"

namespace celltraffic {

struct SynthConfig {
  Index n_nodes = 100;
  Index n_days = 1;
  std::uint64_t seed = 7;
  Index hotspot_count = 2;
  double hotspot_radius = 2000.0;  // meters
  double daily_amplitude = 10.0;
  double base_level = 1.0;
  double noise_sigma = 0.5;    // white measurement noise
  Index slots_per_day = 144;
  double region_size = 10000.0;  // side of the square region, meters
  Index n_channels = static_cast<Index>(kNumChannels);
  double drift_sigma = 0.0;  // stationary std of a per-node AR(1) component
  double drift_rho = 0.9;    // its lag-1 autocorrelation
  std::int64_t start_ms = 1383260400000;
  std::int64_t interval_ms = kTenMinutesMs;
};

inline void to_json(nlohmann::ordered_json& j, const SynthConfig& c) {
  j = {{"n_nodes", c.n_nodes},         {"n_days", c.n_days},
       {"seed", c.seed},               {"hotspot_count", c.hotspot_count},
       {"hotspot_radius", c.hotspot_radius}, {"daily_amplitude", c.daily_amplitude},
       {"base_level", c.base_level},   {"noise_sigma", c.noise_sigma},
       {"slots_per_day", c.slots_per_day}, {"region_size", c.region_size},
       {"n_channels", c.n_channels},   {"drift_sigma", c.drift_sigma},
       {"drift_rho", c.drift_rho},     {"start_ms", c.start_ms},
       {"interval_ms", c.interval_ms}};
}

struct SynthData {
  Matrix coords;  // N x 2, meters
  SnapshotSeries series;
  std::vector<Index> hotspot_nodes;
};

/// Deterministic spatio-temporal traffic generator. Draw order (all from one
/// Rng(seed)): node x,y uniform in the region; distinct hotspot centre nodes;
/// one uniform phase per hotspot; then for each slot, node and channel an
/// AR(1) drift innovation followed by a white-noise draw.
///
/// value(i, t, c) = base + sum_h A * (1 + sin(2 pi t / S + phase_h + c pi/8)) / 2
///                         * exp(-d(i, h)^2 / (2 r^2))
///                  + drift(i, c, t) + noise, clamped at 0.
inline SynthData generate_synthetic(const SynthConfig& cfg) {
  if (cfg.n_nodes < 1 || cfg.n_days < 1) throw DomainError("synthetic config needs n_nodes, n_days >= 1");
  if (cfg.slots_per_day < 2) throw DomainError("slots_per_day must be >= 2");
  if (cfg.noise_sigma < 0.0 || cfg.drift_sigma < 0.0) throw DomainError("noise scales must be >= 0");
  if (cfg.hotspot_count < 0 || cfg.hotspot_count > cfg.n_nodes) throw DomainError("hotspot_count out of range");
  if (!(cfg.drift_rho >= 0.0 && cfg.drift_rho < 1.0)) throw DomainError("drift_rho must be in [0,1)");
  if (cfg.n_channels < 1) throw DomainError("n_channels must be >= 1");

  Rng rng(cfg.seed);
  const Index n = cfg.n_nodes;
  const Index d = cfg.n_channels;
  SynthData out;
  out.coords.resize(n, 2);
  for (Index i = 0; i < n; ++i) {
    out.coords(i, 0) = rng.uniform(0.0, cfg.region_size);
    out.coords(i, 1) = rng.uniform(0.0, cfg.region_size);
  }
  while (static_cast<Index>(out.hotspot_nodes.size()) < cfg.hotspot_count) {
    const auto c = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    if (std::find(out.hotspot_nodes.begin(), out.hotspot_nodes.end(), c) == out.hotspot_nodes.end())
      out.hotspot_nodes.push_back(c);
  }
  std::vector<double> phase;
  for (Index h = 0; h < cfg.hotspot_count; ++h) phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));

  // Spatial footprint of each hotspot at each node.
  Matrix footprint(n, cfg.hotspot_count);
  const double r2 = cfg.hotspot_radius * cfg.hotspot_radius;
  for (Index i = 0; i < n; ++i)
    for (Index h = 0; h < cfg.hotspot_count; ++h) {
      const Index c = out.hotspot_nodes[static_cast<std::size_t>(h)];
      const double dx = out.coords(i, 0) - out.coords(c, 0);
      const double dy = out.coords(i, 1) - out.coords(c, 1);
      footprint(i, h) = std::exp(-(dx * dx + dy * dy) / (2.0 * r2));
    }

  const Index T = cfg.n_days * cfg.slots_per_day;
  const double innovation = cfg.drift_sigma * std::sqrt(1.0 - cfg.drift_rho * cfg.drift_rho);
  Matrix drift = Matrix::Zero(n, d);

  out.series.interval_ms = cfg.interval_ms;
  for (Index i = 0; i < n; ++i) out.series.node_ids.push_back(i + 1);
  out.series.snapshots.resize(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    auto& snap = out.series.snapshots[static_cast<std::size_t>(t)];
    snap.timestamp_ms = cfg.start_ms + t * cfg.interval_ms;
    snap.features.resize(n, d);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(t % cfg.slots_per_day) /
                         static_cast<double>(cfg.slots_per_day);
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < d; ++c) {
        const double z_drift = rng.normal();
        const double z_noise = rng.normal();
        drift(i, c) = t == 0 ? cfg.drift_sigma * z_drift : cfg.drift_rho * drift(i, c) + innovation * z_drift;
        double bump = 0.0;
        for (Index h = 0; h < cfg.hotspot_count; ++h) {
          const double a = 0.5 * cfg.daily_amplitude *
                           (1.0 + std::sin(angle + phase[static_cast<std::size_t>(h)] +
                                           static_cast<double>(c) * std::numbers::pi / 8.0));
          bump += a * footprint(i, h);
        }
        const double v = cfg.base_level + bump + drift(i, c) + cfg.noise_sigma * z_noise;
        snap.features(i, c) = std::max(0.0, v);
      }
  }
  return out;
}

// --- committed fixtures ---------------------------------------------------

struct Fixture {
  std::string name;
  Matrix coords;
  SnapshotSeries series;
  Graph graph;
  nlohmann::json meta;
};

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"tiny_6", "two_hotspots_100", "periodic_200"};
  return names;
}

inline SynthConfig fixture_config(const std::string& name) {
  SynthConfig c;
  c.seed = 7;
  if (name == "tiny_6") {
    c.n_nodes = 6;
    c.n_days = 1;
    c.slots_per_day = 12;
    c.n_channels = 2;
    c.hotspot_count = 1;
    c.hotspot_radius = 300.0;
    c.region_size = 1000.0;
    c.daily_amplitude = 4.0;
    c.base_level = 1.0;
    c.noise_sigma = 0.3;
  } else if (name == "two_hotspots_100") {
    c.n_nodes = 100;
    c.n_days = 1;
    c.hotspot_count = 2;
    c.hotspot_radius = 2500.0;
    c.daily_amplitude = 10.0;
    c.base_level = 1.0;
    c.noise_sigma = 0.5;
  } else if (name == "periodic_200") {
    c.n_nodes = 200;
    c.n_days = 7;
    c.hotspot_count = 4;
    c.hotspot_radius = 2000.0;
    c.daily_amplitude = 10.0;
    c.base_level = 2.0;
    c.noise_sigma = 1.5;
    c.drift_sigma = 3.0;
    c.drift_rho = 0.99;
  } else {
    throw DomainError("unknown fixture '" + name + "'");
  }
  return c;
}

/// Fixture graph rule: unit-weight proximity graph with radius twice the
/// median nearest-neighbour distance.
inline double default_edge_radius(const Matrix& coords) { return 2.0 * median_nearest_neighbor_distance(coords); }

inline std::filesystem::path default_fixture_root() {
  if (const char* env = std::getenv("CELLTRAFFIC_FIXTURE_DIR")) return env;
#ifdef CELLTRAFFIC_FIXTURE_DIR
  return CELLTRAFFIC_FIXTURE_DIR;
#else
  return "fixtures";
#endif
}

namespace detail {

inline std::vector<std::filesystem::path> fixture_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "meta.json") files.push_back(e.path().filename());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace detail

/// Regenerates fixture `name` under `root/name` (cache format + graph CSVs +
/// meta.json with per-file FNV-1a checksums).
inline void write_fixture(const std::string& name, const std::filesystem::path& root) {
  const SynthConfig cfg = fixture_config(name);
  const SynthData data = generate_synthetic(cfg);
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  save_snapshot_cache(data.series, dir);
  const double radius = default_edge_radius(data.coords);
  const Graph g = build_epsilon_graph(data.coords, radius, data.series.node_ids);
  save_graph(g, dir);

  nlohmann::ordered_json meta;
  meta["name"] = name;
  meta["n_nodes"] = data.series.num_nodes();
  meta["n_features"] = data.series.num_features();
  meta["length"] = data.series.length();
  meta["edge_radius_m"] = radius;
  meta["n_edges"] = g.num_edges();
  meta["hotspot_nodes"] = data.hotspot_nodes;
  meta["synth"] = cfg;
  nlohmann::ordered_json sums = nlohmann::ordered_json::object();
  for (const auto& f : detail::fixture_files(dir)) sums[f.string()] = io::hex64(io::fnv1a64(io::read_file(dir / f)));
  meta["checksums"] = sums;
  io::write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

/// Loads a committed fixture, verifying every file checksum first.
inline Fixture fixture(const std::string& name, const std::filesystem::path& root = default_fixture_root()) {
  const auto& names = fixture_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) throw DomainError("unknown fixture '" + name + "'");
  const auto dir = root / name;
  if (!std::filesystem::exists(dir / "meta.json")) throw IoError("fixture not found: " + dir.string());

  Fixture fx;
  fx.name = name;
  fx.meta = nlohmann::json::parse(io::read_file(dir / "meta.json"));
  for (const auto& [file, sum] : fx.meta.at("checksums").items()) {
    const auto actual = io::hex64(io::fnv1a64(io::read_file(dir / file)));
    if (actual != sum.get<std::string>()) throw IoError("fixture " + name + ": checksum mismatch for " + file);
  }
  fx.series = load_snapshot_cache(dir);
  fx.graph = load_graph(dir);
  fx.coords = fx.graph.coords;
  return fx;
}

}  // namespace celltraffic
