#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "celltraffic/errors.hpp"
#include "celltraffic/graph.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/linalg.hpp"
#include "celltraffic/nn/adam.hpp"
#include "celltraffic/nn/checkpoint.hpp"
#include "celltraffic/nn/layers.hpp"
#include "celltraffic/nn/loss.hpp"
#include "celltraffic/rng.hpp"

namespace celltraffic {

struct LabeledNodes {
  nn::Labels labels;
  nn::Mask train_mask;  // labels visible to training
  nn::Mask eval_mask;   // held-out nodes
  double kappa = 0.0;
};

/// label = 1 iff features(i, channel) >= kappa.
inline nn::Labels make_labels(const Matrix& features, std::size_t channel, double kappa) {
  if (channel >= static_cast<std::size_t>(features.cols()))
    throw DomainError("label channel " + std::to_string(channel) + " out of range");
  nn::Labels y(static_cast<std::size_t>(features.rows()));
  for (Index i = 0; i < features.rows(); ++i)
    y[static_cast<std::size_t>(i)] = features(i, static_cast<Index>(channel)) >= kappa ? 1 : 0;
  return y;
}

/// Empirical (1 - balance)-quantile with midpoint interpolation, so that
/// roughly `balance` of the values end up at or above the threshold.
inline double choose_kappa(std::span<const double> values, double balance) {
  if (!(balance > 0.0 && balance < 1.0)) throw DomainError("balance must be in (0,1)");
  if (values.empty()) throw DomainError("choose_kappa on empty values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  if (v.front() == v.back()) throw DomainError("all values equal; cannot choose a class threshold");
  const double pos = (1.0 - balance) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return 0.5 * (v[lo] + v[hi]);
}

/// Seeded uniform node sample: round(visible_fraction * N) nodes form the
/// train mask, the rest the eval mask. Both sides must be non-empty.
inline std::pair<nn::Mask, nn::Mask> sample_label_masks(std::size_t n, double visible_fraction, std::uint64_t seed) {
  if (!(visible_fraction > 0.0 && visible_fraction < 1.0)) throw DomainError("label fraction must be in (0,1)");
  const auto visible = static_cast<std::size_t>(std::llround(visible_fraction * static_cast<double>(n)));
  if (visible == 0 || visible >= n) throw DomainError("label fraction leaves the train or held-out set empty");
  Rng rng = derive_rng(seed, 0x4D41534BULL);
  const auto perm = rng.permutation(n);
  nn::Mask train(n, 0), eval(n, 1);
  for (std::size_t k = 0; k < visible; ++k) {
    train[perm[k]] = 1;
    eval[perm[k]] = 0;
  }
  return {train, eval};
}

/// Column z-score; zero-variance columns are only centered.
inline Matrix standardize_columns(const Matrix& X) {
  Matrix out = X;
  for (Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    const double var = (X.col(j).array() - mean).square().mean();
    out.col(j).array() -= mean;
    if (var > 0.0) out.col(j) /= std::sqrt(var);
  }
  return out;
}

struct ClassifierModel {
  nn::LayerParams layer1;  // d -> h
  nn::LayerParams layer2;  // h -> 2
  double dropout_rate = 0.5;
  PropagationKind propagation = PropagationKind::method1;

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> p{&layer1.weight};
    if (layer1.bias) p.push_back(&*layer1.bias);
    p.push_back(&layer2.weight);
    if (layer2.bias) p.push_back(&*layer2.bias);
    return p;
  }

  std::vector<nn::NamedMatrix> named_parameters() const {
    std::vector<nn::NamedMatrix> out{{layer1.name + ".weight", layer1.weight}};
    if (layer1.bias) out.push_back({layer1.name + ".bias", *layer1.bias});
    out.push_back({layer2.name + ".weight", layer2.weight});
    if (layer2.bias) out.push_back({layer2.name + ".bias", *layer2.bias});
    return out;
  }
};

inline ClassifierModel init_classifier(Index in_features, Index hidden, double dropout_rate, bool with_bias,
                                       std::uint64_t seed, PropagationKind kind = PropagationKind::method1) {
  if (hidden < 1) throw DomainError("hidden width must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw DomainError("dropout rate must be in [0,1)");
  Rng rng = derive_rng(seed, 0x494E4954ULL);
  ClassifierModel m;
  m.layer1 = nn::make_layer("layer1", in_features, hidden, with_bias, rng);
  m.layer2 = nn::make_layer("layer2", hidden, 2, with_bias, rng);
  m.dropout_rate = dropout_rate;
  m.propagation = kind;
  return m;
}

/// softmax(L * dropout(ReLU(L X W1)) * W2) with cached intermediates for a
/// hand-derived backward pass.
class ClassifierNet {
public:
  Matrix forward(const ClassifierModel& model, const SparseMatrix& L, const Matrix& X, nn::Mode mode,
                 std::uint64_t dropout_seed = 0) {
    model_ = &model;
    const Matrix h1 = conv1_.forward(L, X, model.layer1.weight, model.layer1.bias ? &*model.layer1.bias : nullptr);
    const Matrix dropped = drop_.forward(h1, model.dropout_rate, mode, dropout_seed);
    const Matrix logits = conv2_.forward(L, dropped, model.layer2.weight, model.layer2.bias ? &*model.layer2.bias : nullptr);
    probs_ = nn::softmax_rows(logits);
    require_finite(probs_, "classifier forward");
    return probs_;
  }

  /// Gradients in ClassifierModel::parameters() order.
  std::vector<Matrix> backward(const Matrix& grad_probs) const {
    if (model_ == nullptr) throw UsageError("classifier backward called without forward");
    const Matrix g_logits = nn::softmax_rows_backward(probs_, grad_probs);
    const auto g2 = conv2_.backward(g_logits);
    const auto g1 = conv1_.backward(drop_.backward(g2.input));
    std::vector<Matrix> out{g1.weight};
    if (model_->layer1.bias) out.push_back(g1.bias);
    out.push_back(g2.weight);
    if (model_->layer2.bias) out.push_back(g2.bias);
    for (const auto& g : out) require_finite(g, "classifier backward");
    return out;
  }

private:
  const ClassifierModel* model_ = nullptr;
  nn::GraphConv conv1_{nn::Activation::relu};
  nn::GraphConv conv2_{nn::Activation::identity};
  nn::Dropout drop_;
  Matrix probs_;
};

inline Matrix classifier_forward(const ClassifierModel& model, const SparseMatrix& L, const Matrix& X, nn::Mode mode,
                                 std::uint64_t dropout_seed = 0) {
  ClassifierNet net;
  return net.forward(model, L, X, mode, dropout_seed);
}

/// Argmax accuracy over masked nodes; ties go to class 0.
inline double accuracy(const Matrix& probs, std::span<const int> labels, std::span<const std::uint8_t> mask) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() || labels.size() != mask.size())
    throw ShapeError("accuracy: probs, labels and mask lengths differ");
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    const int pred = probs(static_cast<Index>(i), 1) > probs(static_cast<Index>(i), 0) ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  if (total == 0) throw DomainError("accuracy mask selects no nodes");
  return static_cast<double>(correct) / static_cast<double>(total);
}

struct ClassifierConfig {
  Index hidden = 16;
  double dropout_rate = 0.5;
  int epochs = 200;
  bool bias = false;
  nn::AdamHyper adam;
  std::uint64_t seed = 7;
  PropagationKind propagation = PropagationKind::method1;
  Method2Options method2;
};

struct ClassifierEpoch {
  int epoch = 0;
  double loss = 0.0;            // training objective (train mode, train mask)
  double train_accuracy = 0.0;  // eval mode
  double eval_accuracy = 0.0;   // eval mode, held-out mask
};

struct ClassifierResult {
  ClassifierModel model;
  std::vector<ClassifierEpoch> history;
};

/// Full-batch Adam on masked cross-entropy over the train mask.
inline ClassifierResult train_classifier(const Graph& graph, const Matrix& X, const LabeledNodes& labeled,
                                         const ClassifierConfig& config) {
  if (X.rows() != graph.size()) throw ShapeError("feature rows " + std::to_string(X.rows()) + " vs graph size " +
                                                 std::to_string(graph.size()));
  if (std::none_of(labeled.train_mask.begin(), labeled.train_mask.end(), [](auto m) { return m != 0; }))
    throw DomainError("train mask selects no nodes");
  const bool has_eval = std::any_of(labeled.eval_mask.begin(), labeled.eval_mask.end(), [](auto m) { return m != 0; });

  const PropagationMatrix L = make_propagation(graph, config.propagation, config.method2);
  ClassifierResult result{init_classifier(X.cols(), config.hidden, config.dropout_rate, config.bias, config.seed,
                                          config.propagation),
                          {}};
  nn::AdamState adam;
  adam.hyper = config.adam;
  ClassifierNet net;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ClassifierEpoch rec;
    rec.epoch = epoch;
    try {
      const auto seed = Rng::splitmix64(config.seed ^ (0xD50ULL + static_cast<std::uint64_t>(epoch)));
      const Matrix probs = net.forward(result.model, L.values, X, nn::Mode::train, seed);
      rec.loss = nn::masked_cross_entropy(probs, labeled.labels, labeled.train_mask);
      require_finite(rec.loss, "classifier loss");
      const auto grads = net.backward(nn::masked_cross_entropy_grad(probs, labeled.labels, labeled.train_mask));
      const Matrix eval_probs = classifier_forward(result.model, L.values, X, nn::Mode::eval);
      rec.train_accuracy = accuracy(eval_probs, labeled.labels, labeled.train_mask);
      rec.eval_accuracy = has_eval ? accuracy(eval_probs, labeled.labels, labeled.eval_mask) : 0.0;
      const auto params = result.model.parameters();
      nn::adam_step(params, grads, adam);
    } catch (const NumericError& e) {
      throw NumericError("classifier epoch " + std::to_string(epoch) + ": " + e.what());
    }
    result.history.push_back(rec);
  }
  return result;
}

inline std::string predictions_csv(const std::vector<std::int64_t>& node_ids, const nn::Labels& labels,
                                   const Matrix& probs) {
  std::string out = "cell_id,label_true,label_pred,p_high\n";
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    const auto r = static_cast<Index>(i);
    const int pred = probs(r, 1) > probs(r, 0) ? 1 : 0;
    out += std::to_string(node_ids[i]) + "," + std::to_string(labels[i]) + "," + std::to_string(pred) + "," +
           io::format_double(probs(r, 1)) + "\n";
  }
  return out;
}

inline std::string classifier_history_csv(const std::vector<ClassifierEpoch>& history) {
  std::string out = "epoch,loss,train_accuracy,eval_accuracy\n";
  for (const auto& h : history)
    out += std::to_string(h.epoch) + "," + io::format_double(h.loss) + "," + io::format_double(h.train_accuracy) + "," +
           io::format_double(h.eval_accuracy) + "\n";
  return out;
}

}  // namespace celltraffic
