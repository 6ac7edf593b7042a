#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "celltraffic/errors.hpp"
#include "celltraffic/graph.hpp"
#include "celltraffic/ingest.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/linalg.hpp"
#include "celltraffic/nn/adam.hpp"
#include "celltraffic/nn/checkpoint.hpp"
#include "celltraffic/nn/layers.hpp"
#include "celltraffic/nn/loss.hpp"
#include "celltraffic/rng.hpp"

namespace celltraffic {

/// B input windows (m steps of N x d) with targets (k x N, one channel).
struct WindowBatch {
  std::vector<std::vector<Matrix>> inputs;
  std::vector<Matrix> targets;
  std::vector<std::size_t> window_start_indices;
  Index m = 0;
  Index k = 0;

  std::size_t size() const { return inputs.size(); }
};

/// Stride-1 windows: window i reads snapshots [i, i+m) and targets the
/// channel over [i+m, i+m+k). Only windows whose first target step is at or
/// after `first_target` are kept, which lets evaluation windows borrow
/// history from before a split point.
inline WindowBatch build_windows(const SnapshotSeries& series, Index m, Index k, std::size_t target_channel,
                                 std::size_t first_target = 0) {
  const auto T = static_cast<Index>(series.length());
  if (m < 1 || k < 1) throw DomainError("window sizes must be >= 1 (m=" + std::to_string(m) + ", k=" + std::to_string(k) + ")");
  if (m + k > T)
    throw DomainError("window m + k exceeds series length: m=" + std::to_string(m) + " k=" + std::to_string(k) +
                      " T=" + std::to_string(T));
  if (target_channel >= static_cast<std::size_t>(series.num_features()))
    throw DomainError("target channel " + std::to_string(target_channel) + " out of range");

  WindowBatch batch;
  batch.m = m;
  batch.k = k;
  const auto c = static_cast<Index>(target_channel);
  for (Index i = 0; i + m + k <= T; ++i) {
    if (static_cast<std::size_t>(i + m) < first_target) continue;
    std::vector<Matrix> in;
    in.reserve(static_cast<std::size_t>(m));
    for (Index t = i; t < i + m; ++t) in.push_back(series.snapshots[static_cast<std::size_t>(t)].features);
    Matrix target(k, series.num_nodes());
    for (Index s = 0; s < k; ++s) target.row(s) = series.snapshots[static_cast<std::size_t>(i + m + s)].features.col(c).transpose();
    batch.inputs.push_back(std::move(in));
    batch.targets.push_back(std::move(target));
    batch.window_start_indices.push_back(static_cast<std::size_t>(i));
  }
  return batch;
}

/// Per-channel affine normalization (z-score); identity when default built.
struct ChannelScaler {
  Vector mean;
  Vector scale;

  static ChannelScaler identity(Index d) { return {Vector::Zero(d), Vector::Ones(d)}; }

  /// Statistics over every node and snapshot of `series`.
  static ChannelScaler fit(const SnapshotSeries& series) {
    const Index d = series.num_features();
    Vector sum = Vector::Zero(d), sq = Vector::Zero(d);
    double count = 0.0;
    for (const auto& s : series.snapshots) {
      sum += s.features.colwise().sum().transpose();
      count += static_cast<double>(s.features.rows());
    }
    const Vector mean = sum / count;
    for (const auto& s : series.snapshots)
      sq += (s.features.rowwise() - mean.transpose()).cwiseAbs2().colwise().sum().transpose();
    Vector scale = (sq / count).cwiseSqrt();
    for (Index j = 0; j < d; ++j)
      if (!(scale(j) > 0.0)) scale(j) = 1.0;
    return {mean, scale};
  }

  Matrix forward(const Matrix& features) const {
    return (features.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }

  Matrix forward_channel(const Matrix& values, Index c) const { return (values.array() - mean(c)) / scale(c); }
  Matrix inverse_channel(const Matrix& values, Index c) const { return values.array() * scale(c) + mean(c); }
};

struct ForecastConfig {
  Index kernel_width = 3;
  Index c1 = 16;
  Index c2 = 16;
  Index c3 = 8;
  bool bias = false;
  Index batch = 16;
  int epochs = 50;
  nn::AdamHyper adam;
  std::uint64_t seed = 7;
  PropagationKind propagation = PropagationKind::method1;
  Method2Options method2;
  double train_fraction = 0.8;
  std::size_t target_channel = kInternetChannel;
  bool normalize = true;
};

/// Largest kernel width <= `requested` that leaves at least one time step
/// after both temporal convolutions: m - 2(K - 1) >= 1.
inline Index effective_kernel_width(Index m, Index requested) {
  return std::max<Index>(1, std::min(requested, (m - 1) / 2 + 1));
}

/// temporal conv -> graph conv per step -> temporal conv -> per-node dense
/// head over the flattened remaining time axis. Weights live in normalized
/// units; `scaler` maps raw features in and the target channel back out.
struct ForecastModel {
  Index m = 0, k = 0, d = 0, kernel_width = 1;
  std::size_t target_channel = kInternetChannel;
  nn::LayerParams temporal_in;   // (K*d) x c1
  nn::LayerParams spatial;       // c1 x c2
  nn::LayerParams temporal_out;  // (K*c2) x c3
  nn::LayerParams head;          // (T2*c3) x k
  ChannelScaler scaler;

  Index remaining_steps() const { return m - 2 * (kernel_width - 1); }

  std::vector<nn::LayerParams*> layers() { return {&temporal_in, &spatial, &temporal_out, &head}; }
  std::vector<const nn::LayerParams*> layers() const { return {&temporal_in, &spatial, &temporal_out, &head}; }

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> p;
    for (auto* l : layers()) {
      p.push_back(&l->weight);
      if (l->bias) p.push_back(&*l->bias);
    }
    return p;
  }

  std::vector<nn::NamedMatrix> named_parameters() const {
    std::vector<nn::NamedMatrix> out;
    for (const auto* l : layers()) {
      out.push_back({l->name + ".weight", l->weight});
      if (l->bias) out.push_back({l->name + ".bias", *l->bias});
    }
    out.push_back({"scaler.mean", Matrix(scaler.mean.transpose())});
    out.push_back({"scaler.scale", Matrix(scaler.scale.transpose())});
    return out;
  }
};

inline ForecastModel init_forecaster(Index m, Index k, Index d, const ForecastConfig& cfg) {
  if (m < 1 || k < 1 || d < 1) throw DomainError("forecaster needs m, k, d >= 1");
  ForecastModel model;
  model.m = m;
  model.k = k;
  model.d = d;
  model.kernel_width = effective_kernel_width(m, cfg.kernel_width);
  model.target_channel = cfg.target_channel;
  if (model.remaining_steps() < 1) throw ShapeError("kernel width leaves no time steps");
  const Index K = model.kernel_width;
  Rng rng = derive_rng(cfg.seed, 0x464F5245ULL);
  const auto layer = [&](std::string name, Index rows, Index fan_in, Index fan_out) {
    nn::LayerParams p{std::move(name), nn::glorot_uniform(rows, fan_out, fan_in, fan_out, rng), std::nullopt};
    if (cfg.bias) p.bias = Matrix::Zero(1, fan_out);
    return p;
  };
  model.temporal_in = layer("temporal_in", K * d, K * d, cfg.c1);
  model.spatial = layer("spatial", cfg.c1, cfg.c1, cfg.c2);
  model.temporal_out = layer("temporal_out", K * cfg.c2, K * cfg.c2, cfg.c3);
  const Index flat = model.remaining_steps() * cfg.c3;
  model.head = layer("head", flat, flat, k);
  model.scaler = ChannelScaler::identity(d);
  return model;
}

/// Forward/backward over one window in normalized units.
class ForecastNet {
public:
  Matrix forward(const ForecastModel& model, const SparseMatrix& L, const std::vector<Matrix>& window) {
    if (static_cast<Index>(window.size()) != model.m)
      throw ShapeError("window has " + std::to_string(window.size()) + " steps, model expects " + std::to_string(model.m));
    for (const auto& w : window)
      if (w.cols() != model.d || w.rows() != L.rows())
        throw ShapeError("window step " + shape_str(w) + " vs model d=" + std::to_string(model.d) + ", L " + shape_str(L));
    model_ = &model;
    const auto bias = [](const nn::LayerParams& p) { return p.bias ? &*p.bias : nullptr; };

    tin_ = nn::TemporalConv(model.kernel_width);
    const auto h1 = tin_.forward(window, model.temporal_in.weight, bias(model.temporal_in));
    spatial_.assign(h1.size(), nn::GraphConv(nn::Activation::relu));
    std::vector<Matrix> h2(h1.size());
    for (std::size_t t = 0; t < h1.size(); ++t)
      h2[t] = spatial_[t].forward(L, h1[t], model.spatial.weight, bias(model.spatial));
    tout_ = nn::TemporalConv(model.kernel_width);
    const auto h3 = tout_.forward(h2, model.temporal_out.weight, bias(model.temporal_out));

    const Index c3 = model.temporal_out.weight.cols();
    Matrix flat(L.rows(), static_cast<Index>(h3.size()) * c3);
    for (std::size_t t = 0; t < h3.size(); ++t) flat.middleCols(static_cast<Index>(t) * c3, c3) = h3[t];
    const Matrix y = head_.forward(flat, model.head.weight, bias(model.head));
    Matrix pred = y.transpose();
    require_finite(pred, "forecast forward");
    return pred;
  }

  /// `grad_pred` is k x N; result follows ForecastModel::parameters() order.
  std::vector<Matrix> backward(const Matrix& grad_pred) const {
    if (model_ == nullptr) throw UsageError("forecast backward called without forward");
    const auto gh = head_.backward(grad_pred.transpose());
    const Index c3 = model_->temporal_out.weight.cols();
    const Index steps = gh.input.cols() / c3;
    std::vector<Matrix> g3(static_cast<std::size_t>(steps));
    for (Index t = 0; t < steps; ++t) g3[static_cast<std::size_t>(t)] = gh.input.middleCols(t * c3, c3);
    const auto gout = tout_.backward(g3);

    Matrix gw_spatial = Matrix::Zero(model_->spatial.weight.rows(), model_->spatial.weight.cols());
    Matrix gb_spatial = Matrix::Zero(1, model_->spatial.weight.cols());
    std::vector<Matrix> g1(spatial_.size());
    for (std::size_t t = 0; t < spatial_.size(); ++t) {
      auto gs = spatial_[t].backward(gout.input[t]);
      gw_spatial += gs.weight;
      if (model_->spatial.bias) gb_spatial += gs.bias;
      g1[t] = std::move(gs.input);
    }
    const auto gin = tin_.backward(g1);

    std::vector<Matrix> out;
    const auto push = [&](const nn::LayerParams& p, const Matrix& gw, const Matrix& gb) {
      out.push_back(gw);
      if (p.bias) out.push_back(gb);
    };
    push(model_->temporal_in, gin.weight, gin.bias);
    push(model_->spatial, gw_spatial, gb_spatial);
    push(model_->temporal_out, gout.weight, gout.bias);
    push(model_->head, gh.weight, gh.bias);
    for (const auto& g : out) require_finite(g, "forecast backward");
    return out;
  }

private:
  const ForecastModel* model_ = nullptr;
  nn::TemporalConv tin_{1};
  std::vector<nn::GraphConv> spatial_;
  nn::TemporalConv tout_{1};
  nn::Dense head_;
};

/// Prediction (k x N, raw units) for one raw-unit window.
inline Matrix forecast_forward(const ForecastModel& model, const SparseMatrix& L, const std::vector<Matrix>& window) {
  std::vector<Matrix> normalized;
  normalized.reserve(window.size());
  for (const auto& w : window) {
    if (w.cols() != model.scaler.mean.size()) throw ShapeError("window feature width does not match model");
    normalized.push_back(model.scaler.forward(w));
  }
  ForecastNet net;
  const Matrix pred = net.forward(model, L, normalized);
  return model.scaler.inverse_channel(pred, static_cast<Index>(model.target_channel));
}

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::vector<double> per_epoch_loss;
  std::vector<double> per_step_loss;
  std::vector<double> wall_time_per_epoch;

  double mean_sec_per_epoch() const {
    if (wall_time_per_epoch.empty()) return 0.0;
    double s = 0.0;
    for (double t : wall_time_per_epoch) s += t;
    return s / static_cast<double>(wall_time_per_epoch.size());
  }
};

/// rmse and mae from accumulated sums; enforces rmse >= mae up to rounding.
inline MetricsReport make_metrics(double sum_sq, double sum_abs, double count) {
  if (!(count > 0.0)) throw DomainError("metrics over an empty set");
  MetricsReport r;
  r.rmse = std::sqrt(sum_sq / count);
  r.mae = sum_abs / count;
  require_finite(r.rmse, "rmse");
  if (r.rmse < r.mae * (1.0 - 1e-12)) throw NumericError("rmse < mae: accumulated sums are inconsistent");
  return r;
}

inline MetricsReport error_metrics(const std::vector<Matrix>& preds, const std::vector<Matrix>& targets) {
  if (preds.size() != targets.size()) throw ShapeError("prediction and target counts differ");
  if (preds.empty()) throw DomainError("metrics over an empty set");
  double sq = 0.0, ab = 0.0, count = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].rows() != targets[i].rows() || preds[i].cols() != targets[i].cols())
      throw ShapeError("prediction " + shape_str(preds[i]) + " vs target " + shape_str(targets[i]));
    const Matrix e = preds[i] - targets[i];
    sq += e.squaredNorm();
    ab += e.cwiseAbs().sum();
    count += static_cast<double>(e.size());
  }
  return make_metrics(sq, ab, count);
}

/// RMSE and MAE in raw units over every (window, step, node).
inline MetricsReport evaluate_forecaster(const ForecastModel& model, const SparseMatrix& L, const WindowBatch& windows) {
  if (windows.size() == 0) throw DomainError("evaluation batch is empty");
  std::vector<Matrix> preds;
  preds.reserve(windows.size());
  for (const auto& w : windows.inputs) preds.push_back(forecast_forward(model, L, w));
  return error_metrics(preds, windows.targets);
}

struct ForecastTraining {
  ForecastModel model;
  MetricsReport history;  // per-step / per-epoch loss and timing; rmse/mae unset
};

/// Mini-batch Adam over seeded-shuffled stride-1 windows of `train_series`,
/// loss = mean over the batch of l2_loss(prediction, target) in normalized
/// units.
inline ForecastTraining train_forecaster(const Graph& graph, const SnapshotSeries& train_series, Index m, Index k,
                                         const ForecastConfig& cfg) {
  if (cfg.batch < 1) throw DomainError("batch size must be >= 1");
  if (train_series.num_nodes() != graph.size()) throw ShapeError("series nodes do not match graph size");
  WindowBatch windows = build_windows(train_series, m, k, cfg.target_channel);
  const PropagationMatrix L = make_propagation(graph, cfg.propagation, cfg.method2);

  ForecastTraining out{init_forecaster(m, k, train_series.num_features(), cfg), {}};
  ForecastModel& model = out.model;
  if (cfg.normalize) model.scaler = ChannelScaler::fit(train_series);
  const auto c = static_cast<Index>(cfg.target_channel);
  for (auto& in : windows.inputs)
    for (auto& step : in) step = model.scaler.forward(step);
  for (auto& t : windows.targets) t = model.scaler.forward_channel(t, c);

  nn::AdamState adam;
  adam.hyper = cfg.adam;
  Rng rng = derive_rng(cfg.seed, 0x53485546ULL);
  ForecastNet net;
  const auto params = model.parameters();
  std::vector<Matrix> grads;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = rng.permutation(windows.size());
    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch));
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      double loss = 0.0;
      grads.clear();
      try {
        for (std::size_t b = b0; b < b1; ++b) {
          const std::size_t w = order[b];
          const Matrix pred = net.forward(model, L.values, windows.inputs[w]);
          loss += inv * nn::l2_loss(pred, windows.targets[w]);
          auto g = net.backward(inv * nn::l2_loss_grad(pred, windows.targets[w]));
          if (grads.empty()) {
            grads = std::move(g);
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) grads[i] += g[i];
          }
        }
        require_finite(loss, "forecast loss");
        nn::adam_step(params, grads, adam);
      } catch (const NumericError& e) {
        throw NumericError("forecast epoch " + std::to_string(epoch) + " step " + std::to_string(steps) + ": " + e.what());
      }
      out.history.per_step_loss.push_back(loss);
      epoch_loss += loss;
      ++steps;
    }
    out.history.per_epoch_loss.push_back(epoch_loss / static_cast<double>(steps));
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    out.history.wall_time_per_epoch.push_back(std::max(elapsed.count(), 1e-9));
  }
  return out;
}

struct ForecastRun {
  ForecastModel model;
  MetricsReport report;  // test rmse/mae plus training history
};

/// Train on the prefix split, evaluate on every window whose targets start at
/// or after the split point. Test windows may read history from the train
/// span, so every m sees the same set of target snapshots.
inline ForecastRun run_forecast(const Graph& graph, const SnapshotSeries& series, Index m, Index k,
                                const ForecastConfig& cfg) {
  auto [train, test] = split_series(series, cfg.train_fraction);
  const std::size_t cut = train.length();
  auto trained = train_forecaster(graph, train, m, k, cfg);
  const WindowBatch test_windows = build_windows(series, m, k, cfg.target_channel, cut);
  const PropagationMatrix L = make_propagation(graph, cfg.propagation, cfg.method2);
  MetricsReport report = evaluate_forecaster(trained.model, L.values, test_windows);
  ForecastRun run{std::move(trained.model), std::move(report)};
  run.report.per_epoch_loss = std::move(trained.history.per_epoch_loss);
  run.report.per_step_loss = std::move(trained.history.per_step_loss);
  run.report.wall_time_per_epoch = std::move(trained.history.wall_time_per_epoch);
  return run;
}

struct SweepRow {
  Index param = 0;
  MetricsReport report;
};

inline std::vector<SweepRow> sweep_memory(const Graph& graph, const SnapshotSeries& series,
                                          const std::vector<Index>& m_values, Index k, const ForecastConfig& cfg) {
  if (m_values.empty()) throw DomainError("memory sweep needs at least one m");
  std::vector<SweepRow> rows;
  for (Index m : m_values) rows.push_back({m, run_forecast(graph, series, m, k, cfg).report});
  return rows;
}

inline std::vector<SweepRow> sweep_horizon(const Graph& graph, const SnapshotSeries& series, Index m,
                                           const std::vector<Index>& k_values, const ForecastConfig& cfg) {
  if (k_values.empty()) throw DomainError("horizon sweep needs at least one k");
  std::vector<SweepRow> rows;
  for (Index k : k_values) rows.push_back({k, run_forecast(graph, series, m, k, cfg).report});
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "param,rmse,mae,sec_per_epoch\n";
  for (const auto& r : rows)
    out += std::to_string(r.param) + "," + io::format_double(r.report.rmse) + "," + io::format_double(r.report.mae) +
           "," + io::format_double(r.report.mean_sec_per_epoch()) + "\n";
  return out;
}

inline std::string loss_history_csv(const MetricsReport& report) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < report.per_step_loss.size(); ++i)
    out += std::to_string(i) + "," + io::format_double(report.per_step_loss[i]) + "\n";
  return out;
}

}  // namespace celltraffic
