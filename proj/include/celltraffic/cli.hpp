#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "celltraffic/classify.hpp"
#include "celltraffic/embedding.hpp"
#include "celltraffic/errors.hpp"
#include "celltraffic/forecast.hpp"
#include "celltraffic/graph.hpp"
#include "celltraffic/ingest.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/nn/checkpoint.hpp"
#include "celltraffic/plot.hpp"
#include "celltraffic/synth.hpp"

namespace celltraffic::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

struct KeySpec {
  const char* name;
  const char* fallback;
  const char* help;
};

// "auto" marks values resolved at run time; the resolved value is what lands
// in resolved_config.txt.
inline const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys{
      {"cdr", "", "raw CDR file (ingest)"},
      {"grid", "", "grid centroid CSV cell_id,lon,lat (ingest)"},
      {"data", "", "snapshot cache directory"},
      {"graph", "auto", "graph directory (auto: same as data)"},
      {"fixture", "", "use a committed fixture for data and graph"},
      {"out", "out", "output directory"},
      {"interval_ms", "600000", "snapshot interval in ms"},
      {"graph_kind", "epsilon", "epsilon | gaussian"},
      {"edge_radius_m", "auto", "epsilon-graph radius in meters (auto: 2x median NN distance)"},
      {"sigma_m", "auto", "gaussian kernel width in meters (auto: edge_radius_m)"},
      {"weight_floor", "0.1", "gaussian weights at or below this are dropped"},
      {"propagation", "method1", "method1 | method2"},
      {"method2_self_loops", "false", "method2 on A + I"},
      {"method2_repair", "false", "method2 maps isolated-node degrees to zero instead of failing"},
      {"snapshot", "peak", "feature snapshot: peak | mean | <index>"},
      {"features", "all", "feature columns: all | comma list of indices"},
      {"embed_method", "laplacian", "laplacian | gcn_method1 | gcn_method2"},
      {"d_emb", "2", "embedding dimension"},
      {"gcn_hidden", "16", "hidden widths of the forward-only GCN stack (comma list or none)"},
      {"feature_sigma", "0", "reweight graph by feature similarity when > 0 (laplacian)"},
      {"balance", "0.5", "target positive fraction when kappa is auto"},
      {"kappa", "auto", "high-demand threshold"},
      {"label_channel", "internet", "channel name or index used for labels"},
      {"label_fraction", "0.3", "fraction of nodes with visible labels"},
      {"hidden", "16", "classifier hidden width"},
      {"dropout_rate", "0.5", "classifier dropout rate"},
      {"bias", "false", "add bias terms to every layer"},
      {"epochs", "auto", "training epochs (auto: 200 classify, 50 forecast)"},
      {"m", "3", "input window length"},
      {"k", "3", "prediction horizon"},
      {"target_channel", "internet", "channel name or index to forecast"},
      {"batch", "16", "forecast mini-batch size"},
      {"kernel_width", "3", "temporal kernel width"},
      {"c1", "16", "first temporal conv channels"},
      {"c2", "16", "graph conv channels"},
      {"c3", "8", "second temporal conv channels"},
      {"train_fraction", "0.8", "leading fraction of the series used for training"},
      {"normalize", "true", "per-channel z-score from the train split"},
      {"param", "m", "sweep parameter: m | k"},
      {"values", "1,3,6", "sweep values"},
      {"lr", "0.001", "Adam learning rate"},
      {"beta1", "0.9", "Adam beta1"},
      {"beta2", "0.999", "Adam beta2"},
      {"adam_eps", "1e-8", "Adam epsilon"},
      {"seed", "7", "seed for every randomized step"},
  };
  return keys;
}

class RunConfig {
public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.fallback;
  }

  static bool known(const std::string& key) {
    const auto& keys = config_keys();
    return std::any_of(keys.begin(), keys.end(), [&](const KeySpec& k) { return key == k.name; });
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw UsageError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
  }

  bool is_auto(const std::string& key) const { return get(key) == "auto"; }
  bool empty(const std::string& key) const { return get(key).empty(); }

  double number(const std::string& key) const {
    const auto v = io::parse_double(get(key));
    if (!v || !std::isfinite(*v)) throw UsageError(bad(key, "a number"));
    return *v;
  }

  Index integer(const std::string& key) const {
    const auto v = io::parse_int<Index>(get(key));
    if (!v) throw UsageError(bad(key, "an integer"));
    return *v;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const auto v = io::parse_int<std::uint64_t>(get(key));
    if (!v) throw UsageError(bad(key, "a non-negative integer"));
    return *v;
  }

  bool flag(const std::string& key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError(bad(key, "true or false"));
  }

  std::vector<Index> index_list(const std::string& key) const {
    std::vector<Index> out;
    if (get(key) == "none") return out;
    for (auto part : io::split(get(key), ',')) {
      const auto v = io::parse_int<Index>(io::trim(part));
      if (!v) throw UsageError(bad(key, "a comma-separated list of integers"));
      out.push_back(*v);
    }
    return out;
  }

  /// `key = value` lines in declaration order.
  std::string text() const {
    std::string out;
    for (const auto& k : config_keys()) out += std::string(k.name) + " = " + values_.at(k.name) + "\n";
    return out;
  }

  /// Flat `key = value` text; `#` starts a comment. Unknown or repeated keys
  /// are rejected.
  void merge_text(std::string_view text, const std::string& origin) {
    std::map<std::string, std::size_t> seen;
    std::size_t line_no = 0;
    for (auto line : io::split(text, '\n')) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = io::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no, origin);
      const std::string key(io::trim(line.substr(0, eq)));
      const std::string value(io::trim(line.substr(eq + 1)));
      if (!known(key)) throw ParseError("unknown config key '" + key + "'", line_no, origin);
      if (!seen.emplace(key, line_no).second) throw ParseError("config key '" + key + "' repeated", line_no, origin);
      values_[key] = value;
    }
  }

  void merge_file(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
    merge_text(io::read_file(path), path.string());
  }

private:
  std::string bad(const std::string& key, const char* expected) const {
    return "config key '" + key + "' must be " + expected + ", got '" + get(key) + "'";
  }

  std::map<std::string, std::string> values_;
};

// --- shared helpers -------------------------------------------------------

inline std::size_t channel_of(const RunConfig& cfg, const std::string& key, Index d) {
  const auto& v = cfg.get(key);
  std::size_t c = 0;
  if (const auto idx = io::parse_int<std::size_t>(v)) {
    c = *idx;
  } else {
    c = channel_index(v);
  }
  if (c >= static_cast<std::size_t>(d))
    throw DomainError(key + " " + v + " out of range for " + std::to_string(d) + " feature channels");
  return c;
}

inline nn::AdamHyper adam_of(const RunConfig& cfg) {
  nn::AdamHyper h;
  h.lr = cfg.number("lr");
  h.beta1 = cfg.number("beta1");
  h.beta2 = cfg.number("beta2");
  h.eps = cfg.number("adam_eps");
  return h;
}

inline PropagationKind propagation_of(const RunConfig& cfg) {
  const auto& v = cfg.get("propagation");
  if (v == "method1") return PropagationKind::method1;
  if (v == "method2") return PropagationKind::method2;
  throw UsageError("propagation must be method1 or method2, got '" + v + "'");
}

inline Method2Options method2_of(const RunConfig& cfg) {
  return {cfg.flag("method2_repair"), cfg.flag("method2_self_loops")};
}

inline int epochs_of(RunConfig& cfg, int fallback) {
  if (cfg.is_auto("epochs")) cfg.set("epochs", std::to_string(fallback));
  const Index e = cfg.integer("epochs");
  if (e < 1) throw DomainError("epochs must be >= 1");
  return static_cast<int>(e);
}

inline fs::path output_dir(const RunConfig& cfg) {
  if (cfg.empty("out")) throw UsageError("config key 'out' must name a directory");
  fs::path out = cfg.get("out");
  fs::create_directories(out);
  return out;
}

inline void write_resolved(const RunConfig& cfg, const fs::path& out) {
  io::write_file_atomic(out / "resolved_config.txt", cfg.text());
}

struct Inputs {
  SnapshotSeries series;
  Graph graph;
};

inline SnapshotSeries load_series(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json"))
    throw IoError("no snapshot cache at " + dir.string() + "; run `celltraffic ingest` first");
  return load_snapshot_cache(dir);
}

/// Snapshot cache plus graph, either from a fixture or from `data`/`graph`.
inline Inputs load_inputs(const RunConfig& cfg) {
  Inputs in;
  if (!cfg.empty("fixture")) {
    auto fx = fixture(cfg.get("fixture"));
    in.series = std::move(fx.series);
    in.graph = std::move(fx.graph);
    return in;
  }
  if (cfg.empty("data")) throw UsageError("set --data to a snapshot cache (or --fixture)");
  in.series = load_series(cfg.get("data"));
  const fs::path graph_dir = cfg.is_auto("graph") ? fs::path(cfg.get("data")) : fs::path(cfg.get("graph"));
  if (!fs::exists(graph_dir / "edges.csv"))
    throw IoError("no graph at " + graph_dir.string() + "; run `celltraffic graph` first");
  in.graph = load_graph(graph_dir);
  if (in.graph.node_ids != in.series.node_ids)
    throw DomainError("graph nodes in " + graph_dir.string() + " do not match the snapshot cache");
  return in;
}

/// peak: snapshot with the largest total on `channel`; mean: time average;
/// otherwise a snapshot index.
inline Matrix select_snapshot(const SnapshotSeries& series, const std::string& spec, std::size_t channel) {
  if (series.length() == 0) throw DomainError("snapshot series is empty");
  if (spec == "mean") {
    Matrix acc = Matrix::Zero(series.num_nodes(), series.num_features());
    for (const auto& s : series.snapshots) acc += s.features;
    return acc / static_cast<double>(series.length());
  }
  if (spec == "peak") {
    std::size_t best = 0;
    double best_sum = -1.0;
    for (std::size_t t = 0; t < series.length(); ++t) {
      const double s = series.snapshots[t].features.col(static_cast<Index>(channel)).sum();
      if (s > best_sum) {
        best_sum = s;
        best = t;
      }
    }
    return series.snapshots[best].features;
  }
  const auto idx = io::parse_int<std::size_t>(spec);
  if (!idx) throw UsageError("snapshot must be peak, mean or an index, got '" + spec + "'");
  if (*idx >= series.length())
    throw DomainError("snapshot " + spec + " out of range for T=" + std::to_string(series.length()));
  return series.snapshots[*idx].features;
}

inline Matrix feature_matrix(const RunConfig& cfg, const Matrix& snapshot) {
  if (cfg.get("features") == "all") return snapshot;
  std::vector<std::size_t> subset;
  for (Index c : cfg.index_list("features")) {
    if (c < 0) throw DomainError("feature index " + std::to_string(c) + " out of range");
    subset.push_back(static_cast<std::size_t>(c));
  }
  return select_features(snapshot, subset);
}

inline std::string stats_line(const std::string& label, double v) { return label + ": " + io::format_double(v) + "\n"; }

// --- commands -------------------------------------------------------------

inline void cmd_ingest(RunConfig& cfg, std::ostream& out) {
  if (cfg.empty("cdr")) throw UsageError("ingest needs --cdr");
  if (cfg.empty("grid")) throw UsageError("ingest needs --grid");
  const auto records = load_cdr_file(cfg.get("cdr"));
  const auto grid = load_grid_csv(cfg.get("grid"));
  const auto series = build_snapshots(records, grid, cfg.integer("interval_ms"));
  const fs::path dir = output_dir(cfg);
  save_snapshot_cache(series, dir);
  const Graph nodes{project_grid(grid, series.node_ids), SparseMatrix(series.num_nodes(), series.num_nodes()),
                    series.node_ids};
  io::write_file_atomic(dir / "nodes.csv", nodes_csv(nodes));
  write_resolved(cfg, dir);
  out << "N=" << series.num_nodes() << " d=" << series.num_features() << " T=" << series.length()
      << " interval_ms=" << series.interval_ms << "\n";
}

inline void cmd_graph(RunConfig& cfg, std::ostream& out) {
  std::vector<std::int64_t> ids;
  Matrix coords;
  if (!cfg.empty("fixture")) {
    auto fx = fixture(cfg.get("fixture"));
    ids = fx.graph.node_ids;
    coords = fx.coords;
  } else {
    if (cfg.empty("data")) throw UsageError("set --data to an ingested directory (or --fixture)");
    const fs::path nodes = fs::path(cfg.get("data")) / "nodes.csv";
    if (!fs::exists(nodes)) throw IoError("no node coordinates at " + nodes.string() + "; run `celltraffic ingest` first");
    std::tie(ids, coords) = parse_nodes_csv(io::read_file(nodes));
  }
  if (cfg.is_auto("edge_radius_m")) cfg.set("edge_radius_m", io::format_double(default_edge_radius(coords)));
  if (cfg.is_auto("sigma_m")) cfg.set("sigma_m", cfg.get("edge_radius_m"));

  Graph g;
  const auto& kind = cfg.get("graph_kind");
  if (kind == "epsilon")
    g = build_epsilon_graph(coords, cfg.number("edge_radius_m"), ids);
  else if (kind == "gaussian")
    g = build_gaussian_graph(coords, cfg.number("sigma_m"), cfg.number("weight_floor"), ids);
  else
    throw UsageError("graph_kind must be epsilon or gaussian, got '" + kind + "'");
  make_propagation(g, propagation_of(cfg), method2_of(cfg));  // fail early on isolated nodes

  const fs::path dir = output_dir(cfg);
  save_graph(g, dir);
  write_resolved(cfg, dir);
  const Vector deg = degree(g, false);
  out << "N=" << g.size() << " edges=" << g.num_edges() << " kind=" << kind
      << " isolated=" << (deg.array() == 0.0).count() << "\n";
  out << stats_line("mean_degree", deg.mean());
}

inline void cmd_embed(RunConfig& cfg, std::ostream& out) {
  const Inputs in = load_inputs(cfg);
  const Index d = in.series.num_features();
  const Index d_emb = cfg.integer("d_emb");
  const auto& method = cfg.get("embed_method");
  const std::size_t label_c = channel_of(cfg, "label_channel", d);
  const Matrix snapshot = select_snapshot(in.series, cfg.get("snapshot"), label_c);
  const Matrix X = standardize_columns(feature_matrix(cfg, snapshot));

  EmbeddingResult emb;
  if (method == "laplacian") {
    const double sigma_f = cfg.number("feature_sigma");
    emb = laplacian_eigenmap(sigma_f > 0.0 ? reweight_by_features(in.graph, X, sigma_f) : in.graph, d_emb);
  } else if (method == "gcn_method1" || method == "gcn_method2") {
    cfg.set("propagation", method == "gcn_method1" ? "method1" : "method2");
    auto dims = cfg.index_list("gcn_hidden");
    dims.push_back(d_emb);
    emb = gcn_embed(make_propagation(in.graph, propagation_of(cfg), method2_of(cfg)), X, dims,
                    cfg.unsigned_integer("seed"));
  } else {
    throw UsageError("embed_method must be laplacian, gcn_method1 or gcn_method2, got '" + method + "'");
  }

  std::vector<double> label_values(static_cast<std::size_t>(snapshot.rows()));
  for (Index i = 0; i < snapshot.rows(); ++i) label_values[static_cast<std::size_t>(i)] = snapshot(i, static_cast<Index>(label_c));
  if (cfg.is_auto("kappa")) cfg.set("kappa", io::format_double(choose_kappa(label_values, cfg.number("balance"))));
  const auto labels = make_labels(snapshot, label_c, cfg.number("kappa"));

  const fs::path dir = output_dir(cfg);
  io::write_file_atomic(dir / "embedding.csv", embedding_csv(emb, in.graph.node_ids));
  if (method == "laplacian") {
    std::string ev = "index,eigenvalue\n";
    for (Index i = 0; i < emb.eigenvalues.size(); ++i) ev += std::to_string(i) + "," + io::format_double(emb.eigenvalues(i)) + "\n";
    io::write_file_atomic(dir / "eigenvalues.csv", ev);
    out << "zero_eigenvalues=" << count_zero_eigenvalues(emb.eigenvalues) << "\n";
  }
  if (d_emb >= 2) {
    std::vector<std::pair<double, double>> pts;
    for (Index i = 0; i < emb.coords.rows(); ++i) pts.emplace_back(emb.coords(i, 0), emb.coords(i, 1));
    plot::emit_scatter_plot(pts, labels, dir / "embedding.svg", {method + " embedding", "e1", "e2"});
  }
  write_resolved(cfg, dir);
  out << "N=" << emb.coords.rows() << " d_emb=" << emb.coords.cols() << " method=" << method << "\n";
}

inline void cmd_classify(RunConfig& cfg, std::ostream& out) {
  const Inputs in = load_inputs(cfg);
  const std::size_t label_c = channel_of(cfg, "label_channel", in.series.num_features());
  const Matrix snapshot = select_snapshot(in.series, cfg.get("snapshot"), label_c);
  const Matrix X = standardize_columns(feature_matrix(cfg, snapshot));

  std::vector<double> values(static_cast<std::size_t>(snapshot.rows()));
  for (Index i = 0; i < snapshot.rows(); ++i) values[static_cast<std::size_t>(i)] = snapshot(i, static_cast<Index>(label_c));
  if (cfg.is_auto("kappa")) cfg.set("kappa", io::format_double(choose_kappa(values, cfg.number("balance"))));

  ClassifierConfig cc;
  cc.hidden = cfg.integer("hidden");
  cc.dropout_rate = cfg.number("dropout_rate");
  cc.epochs = epochs_of(cfg, 200);
  cc.bias = cfg.flag("bias");
  cc.adam = adam_of(cfg);
  cc.seed = cfg.unsigned_integer("seed");
  cc.propagation = propagation_of(cfg);
  cc.method2 = method2_of(cfg);

  LabeledNodes labeled;
  labeled.kappa = cfg.number("kappa");
  labeled.labels = make_labels(snapshot, label_c, labeled.kappa);
  std::tie(labeled.train_mask, labeled.eval_mask) =
      sample_label_masks(labeled.labels.size(), cfg.number("label_fraction"), cc.seed);

  const auto result = train_classifier(in.graph, X, labeled, cc);
  const auto L = make_propagation(in.graph, cc.propagation, cc.method2);
  const Matrix probs = classifier_forward(result.model, L.values, X, nn::Mode::eval);
  const double train_acc = accuracy(probs, labeled.labels, labeled.train_mask);
  const double eval_acc = accuracy(probs, labeled.labels, labeled.eval_mask);

  const fs::path dir = output_dir(cfg);
  io::write_file_atomic(dir / "predictions.csv", predictions_csv(in.graph.node_ids, labeled.labels, probs));
  io::write_file_atomic(dir / "history.csv", classifier_history_csv(result.history));
  plot::Curve tr{"train", {}}, ev{"held-out", {}};
  for (const auto& h : result.history) {
    tr.points.emplace_back(h.epoch, h.train_accuracy);
    ev.points.emplace_back(h.epoch, h.eval_accuracy);
  }
  if (tr.points.size() >= 2)
    plot::emit_line_plot({tr, ev}, dir / "accuracy.svg", {"classification accuracy", "epoch", "accuracy"});
  nn::save_checkpoint(dir / "classifier.ckpt", result.model.named_parameters());
  write_resolved(cfg, dir);
  const auto positives = std::count(labeled.labels.begin(), labeled.labels.end(), 1);
  out << "N=" << labeled.labels.size() << " positives=" << positives << " kappa=" << io::format_double(labeled.kappa)
      << "\n";
  out << stats_line("train_accuracy", train_acc) << stats_line("heldout_accuracy", eval_acc);
}

inline ForecastConfig forecast_config(RunConfig& cfg, Index d) {
  ForecastConfig fc;
  fc.kernel_width = cfg.integer("kernel_width");
  fc.c1 = cfg.integer("c1");
  fc.c2 = cfg.integer("c2");
  fc.c3 = cfg.integer("c3");
  fc.bias = cfg.flag("bias");
  fc.batch = cfg.integer("batch");
  fc.epochs = epochs_of(cfg, 50);
  fc.adam = adam_of(cfg);
  fc.seed = cfg.unsigned_integer("seed");
  fc.propagation = propagation_of(cfg);
  fc.method2 = method2_of(cfg);
  fc.train_fraction = cfg.number("train_fraction");
  fc.target_channel = channel_of(cfg, "target_channel", d);
  fc.normalize = cfg.flag("normalize");
  return fc;
}

inline plot::Curve epoch_curve(const std::string& label, const MetricsReport& r) {
  plot::Curve c{label, {}};
  for (std::size_t e = 0; e < r.per_epoch_loss.size(); ++e) c.points.emplace_back(static_cast<double>(e + 1), r.per_epoch_loss[e]);
  return c;
}

inline void cmd_forecast(RunConfig& cfg, std::ostream& out) {
  const Inputs in = load_inputs(cfg);
  const ForecastConfig fc = forecast_config(cfg, in.series.num_features());
  const Index m = cfg.integer("m"), k = cfg.integer("k");
  const auto run = run_forecast(in.graph, in.series, m, k, fc);

  const fs::path dir = output_dir(cfg);
  io::write_file_atomic(dir / "metrics.csv", "m,k,rmse,mae\n" + std::to_string(m) + "," + std::to_string(k) + "," +
                                                 io::format_double(run.report.rmse) + "," +
                                                 io::format_double(run.report.mae) + "\n");
  io::write_file_atomic(dir / "loss_history.csv", loss_history_csv(run.report));
  const auto curve = epoch_curve("train loss", run.report);
  if (curve.points.size() >= 2) plot::emit_line_plot({curve}, dir / "loss.svg", {"forecast training loss", "epoch", "loss"});
  nn::save_checkpoint(dir / "forecaster.ckpt", run.model.named_parameters());
  write_resolved(cfg, dir);
  out << "m=" << m << " k=" << k << "\n"
      << stats_line("rmse", run.report.rmse) << stats_line("mae", run.report.mae)
      << stats_line("sec_per_epoch", run.report.mean_sec_per_epoch());
}

inline void cmd_sweep(RunConfig& cfg, std::ostream& out) {
  const Inputs in = load_inputs(cfg);
  const ForecastConfig fc = forecast_config(cfg, in.series.num_features());
  const auto& param = cfg.get("param");
  const auto values = cfg.index_list("values");
  std::vector<SweepRow> rows;
  if (param == "m")
    rows = sweep_memory(in.graph, in.series, values, cfg.integer("k"), fc);
  else if (param == "k")
    rows = sweep_horizon(in.graph, in.series, cfg.integer("m"), values, fc);
  else
    throw UsageError("param must be m or k, got '" + param + "'");

  const fs::path dir = output_dir(cfg);
  io::write_file_atomic(dir / "sweep.csv", sweep_csv(rows));
  plot::Curve rmse{"RMSE", {}}, mae{"MAE", {}};
  for (const auto& r : rows) {
    rmse.points.emplace_back(static_cast<double>(r.param), r.report.rmse);
    mae.points.emplace_back(static_cast<double>(r.param), r.report.mae);
    io::write_file_atomic(dir / ("loss_" + param + std::to_string(r.param) + ".csv"), loss_history_csv(r.report));
  }
  if (rows.size() >= 2) plot::emit_line_plot({rmse, mae}, dir / "sweep.svg", {param + " sweep", param, "error"});
  write_resolved(cfg, dir);
  for (const auto& r : rows)
    out << param << "=" << r.param << " rmse=" << io::format_double(r.report.rmse)
        << " mae=" << io::format_double(r.report.mae) << " sec_per_epoch=" << r.report.mean_sec_per_epoch() << "\n";
}

// --- entry point ------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"ingest", "graph", "embed", "classify", "forecast", "sweep"};
  return names;
}

/// Exit codes: 0 ok, 2 usage or input error, 3 numeric failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Cellular traffic graph learning toolkit", "celltraffic"};
  std::string command;
  std::string config_path;
  app.add_option("command", command, "ingest | graph | embed | classify | forecast | sweep")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "flat key = value config file");
  std::vector<std::pair<std::string, std::string>> overrides(config_keys().size());
  std::vector<CLI::Option*> options;
  for (std::size_t i = 0; i < config_keys().size(); ++i) {
    const auto& k = config_keys()[i];
    overrides[i].first = k.name;
    options.push_back(app.add_option(std::string("--") + k.name, overrides[i].second,
                                     std::string(k.help) + " [" + k.fallback + "]"));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInput;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (std::size_t i = 0; i < options.size(); ++i)
      if (options[i]->count() > 0) cfg.set(overrides[i].first, overrides[i].second);

    try {
      if (command == "ingest") cmd_ingest(cfg, out);
      else if (command == "graph") cmd_graph(cfg, out);
      else if (command == "embed") cmd_embed(cfg, out);
      else if (command == "classify") cmd_classify(cfg, out);
      else if (command == "forecast") cmd_forecast(cfg, out);
      else cmd_sweep(cfg, out);
    } catch (const NumericError& e) {
      err << "error: numeric failure in " << command << ": " << e.what() << "\n";
      return kExitNumeric;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed metadata: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace celltraffic::cli
