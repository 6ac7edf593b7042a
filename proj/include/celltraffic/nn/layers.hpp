#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "celltraffic/errors.hpp"
#include "celltraffic/linalg.hpp"
#include "celltraffic/rng.hpp"

namespace celltraffic::nn {

enum class Activation { relu, identity };
enum class Mode { train, eval };

/// Named weight matrix with an optional 1 x fan_out bias row.
struct LayerParams {
  std::string name;
  Matrix weight;
  std::optional<Matrix> bias;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(Index rows, Index cols, Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-limit, limit);
  return w;
}

inline LayerParams make_layer(std::string name, Index fan_in, Index fan_out, bool with_bias, Rng& rng) {
  LayerParams p{std::move(name), glorot_uniform(fan_in, fan_out, fan_in, fan_out, rng), std::nullopt};
  if (with_bias) p.bias = Matrix::Zero(1, fan_out);
  return p;
}

inline Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

inline Matrix relu_mask(const Matrix& z) { return (z.array() > 0.0).cast<double>().matrix(); }

inline Matrix apply(Activation act, const Matrix& z) { return act == Activation::relu ? relu(z) : z; }

inline Matrix activation_backward(Activation act, const Matrix& pre, const Matrix& grad_out) {
  if (act == Activation::identity) return grad_out;
  return grad_out.cwiseProduct(relu_mask(pre));
}

inline void check_bias(const Matrix* bias, Index cols, const char* who) {
  if (bias != nullptr && (bias->rows() != 1 || bias->cols() != cols))
    throw ShapeError(std::string(who) + ": bias " + shape_str(*bias) + " does not match width " + std::to_string(cols));
}

// --- graph convolution ----------------------------------------------------

struct GraphConvGrads {
  Matrix input;
  Matrix weight;
  Matrix bias;  // empty when the layer has no bias
};

/// act(L * H * W [+ b]). The layer keeps the propagated input L*H and the
/// pre-activation for backward; L and W must outlive the backward call.
class GraphConv {
public:
  explicit GraphConv(Activation act = Activation::relu) : act_(act) {}

  Matrix forward(const SparseMatrix& L, const Matrix& H, const Matrix& W, const Matrix* bias = nullptr) {
    if (L.rows() != L.cols() || L.cols() != H.rows() || H.cols() != W.rows())
      throw ShapeError("graph_conv: L " + shape_str(L) + ", H " + shape_str(H) + ", W " + shape_str(W));
    check_bias(bias, W.cols(), "graph_conv");
    L_ = &L;
    W_ = &W;
    has_bias_ = bias != nullptr;
    propagated_ = L * H;
    pre_ = propagated_ * W;
    if (bias) pre_.rowwise() += bias->row(0);
    return apply(act_, pre_);
  }

  GraphConvGrads backward(const Matrix& grad_out) const {
    if (L_ == nullptr) throw UsageError("graph_conv backward called without a forward cache");
    if (grad_out.rows() != pre_.rows() || grad_out.cols() != pre_.cols())
      throw ShapeError("graph_conv backward: grad " + shape_str(grad_out) + " vs output " + shape_str(pre_));
    const Matrix g = activation_backward(act_, pre_, grad_out);
    GraphConvGrads out;
    out.weight = propagated_.transpose() * g;
    out.input = L_->transpose() * (g * W_->transpose());
    if (has_bias_) out.bias = g.colwise().sum();
    return out;
  }

  const Matrix& pre_activation() const { return pre_; }

private:
  Activation act_;
  const SparseMatrix* L_ = nullptr;
  const Matrix* W_ = nullptr;
  bool has_bias_ = false;
  Matrix propagated_;
  Matrix pre_;
};

/// ReLU(L * H * W), no cache.
inline Matrix graph_conv_forward(const SparseMatrix& L, const Matrix& H, const Matrix& W) {
  GraphConv layer;
  return layer.forward(L, H, W);
}

// --- dense ----------------------------------------------------------------

struct DenseGrads {
  Matrix input;
  Matrix weight;
  Matrix bias;
};

class Dense {
public:
  Matrix forward(const Matrix& X, const Matrix& W, const Matrix* bias = nullptr) {
    if (X.cols() != W.rows()) throw ShapeError("dense: X " + shape_str(X) + ", W " + shape_str(W));
    check_bias(bias, W.cols(), "dense");
    X_ = X;
    W_ = &W;
    has_bias_ = bias != nullptr;
    Matrix y = X * W;
    if (bias) y.rowwise() += bias->row(0);
    return y;
  }

  DenseGrads backward(const Matrix& grad_out) const {
    if (W_ == nullptr) throw UsageError("dense backward called without a forward cache");
    DenseGrads g;
    g.weight = X_.transpose() * grad_out;
    g.input = grad_out * W_->transpose();
    if (has_bias_) g.bias = grad_out.colwise().sum();
    return g;
  }

private:
  const Matrix* W_ = nullptr;
  bool has_bias_ = false;
  Matrix X_;
};

// --- temporal convolution -------------------------------------------------

/// Valid (unpadded) correlation along the time axis of an m x N matrix with
/// one kernel shared by every node: out(t, n) = sum_tau k(tau) X(t + tau, n).
class TemporalConv1d {
public:
  Matrix forward(const Matrix& X, const Vector& kernel) {
    const Index kt = kernel.size();
    if (kt < 1 || kt > X.rows())
      throw ShapeError("temporal_conv1d: kernel width " + std::to_string(kt) + " vs time length " +
                       std::to_string(X.rows()));
    X_ = X;
    kernel_ = kernel;
    const Index out_len = X.rows() - kt + 1;
    Matrix out = Matrix::Zero(out_len, X.cols());
    for (Index t = 0; t < out_len; ++t)
      for (Index tau = 0; tau < kt; ++tau) out.row(t) += kernel(tau) * X.row(t + tau);
    return out;
  }

  std::pair<Matrix, Vector> backward(const Matrix& grad_out) const {
    if (kernel_.size() == 0) throw UsageError("temporal_conv1d backward called without a forward cache");
    const Index kt = kernel_.size();
    Matrix gx = Matrix::Zero(X_.rows(), X_.cols());
    Vector gk = Vector::Zero(kt);
    for (Index t = 0; t < grad_out.rows(); ++t)
      for (Index tau = 0; tau < kt; ++tau) {
        gx.row(t + tau) += kernel_(tau) * grad_out.row(t);
        gk(tau) += grad_out.row(t).dot(X_.row(t + tau));
      }
    return {gx, gk};
  }

private:
  Matrix X_;
  Vector kernel_;
};

inline Matrix temporal_conv1d_forward(const Matrix& X, const Vector& kernel) {
  TemporalConv1d layer;
  return layer.forward(X, kernel);
}

/// Channel-mixing temporal convolution over a sequence of N x c_in node
/// feature matrices. The weight stacks one c_in x c_out block per kernel tap
/// ((K * c_in) x c_out); output step t is
/// act(sum_tau X[t + tau] * W_tau [+ b]) for t in [0, m - K].
struct TemporalConvGrads {
  std::vector<Matrix> input;
  Matrix weight;
  Matrix bias;
};

class TemporalConv {
public:
  explicit TemporalConv(Index width, Activation act = Activation::relu) : width_(width), act_(act) {}

  Index width() const { return width_; }

  std::vector<Matrix> forward(const std::vector<Matrix>& steps, const Matrix& W, const Matrix* bias = nullptr) {
    const auto m = static_cast<Index>(steps.size());
    if (width_ < 1 || width_ > m)
      throw ShapeError("temporal_conv: kernel width " + std::to_string(width_) + " vs time length " + std::to_string(m));
    const Index c_in = steps.front().cols();
    if (W.rows() != width_ * c_in)
      throw ShapeError("temporal_conv: weight " + shape_str(W) + " for width " + std::to_string(width_) +
                       " and " + std::to_string(c_in) + " input channels");
    check_bias(bias, W.cols(), "temporal_conv");
    inputs_ = steps;
    W_ = &W;
    has_bias_ = bias != nullptr;
    const Index out_len = m - width_ + 1;
    pre_.assign(static_cast<std::size_t>(out_len), Matrix());
    std::vector<Matrix> out(static_cast<std::size_t>(out_len));
    for (Index t = 0; t < out_len; ++t) {
      Matrix z = Matrix::Zero(steps.front().rows(), W.cols());
      for (Index tau = 0; tau < width_; ++tau)
        z.noalias() += steps[static_cast<std::size_t>(t + tau)] * W.middleRows(tau * c_in, c_in);
      if (bias) z.rowwise() += bias->row(0);
      out[static_cast<std::size_t>(t)] = apply(act_, z);
      pre_[static_cast<std::size_t>(t)] = std::move(z);
    }
    return out;
  }

  TemporalConvGrads backward(const std::vector<Matrix>& grad_out) const {
    if (W_ == nullptr) throw UsageError("temporal_conv backward called without a forward cache");
    if (grad_out.size() != pre_.size()) throw ShapeError("temporal_conv backward: wrong number of steps");
    const Index c_in = inputs_.front().cols();
    TemporalConvGrads g;
    g.weight = Matrix::Zero(W_->rows(), W_->cols());
    g.input.assign(inputs_.size(), Matrix::Zero(inputs_.front().rows(), c_in));
    if (has_bias_) g.bias = Matrix::Zero(1, W_->cols());
    for (std::size_t t = 0; t < pre_.size(); ++t) {
      const Matrix gz = activation_backward(act_, pre_[t], grad_out[t]);
      for (Index tau = 0; tau < width_; ++tau) {
        const auto src = t + static_cast<std::size_t>(tau);
        g.weight.middleRows(tau * c_in, c_in).noalias() += inputs_[src].transpose() * gz;
        g.input[src].noalias() += gz * W_->middleRows(tau * c_in, c_in).transpose();
      }
      if (has_bias_) g.bias += gz.colwise().sum();
    }
    return g;
  }

private:
  Index width_;
  Activation act_;
  const Matrix* W_ = nullptr;
  bool has_bias_ = false;
  std::vector<Matrix> inputs_;
  std::vector<Matrix> pre_;
};

// --- dropout --------------------------------------------------------------

/// Inverted dropout. In train mode each entry is zeroed with probability
/// `rate` and survivors are scaled by 1 / (1 - rate); eval mode is identity.
/// The mask is a pure function of `seed`.
class Dropout {
public:
  Matrix forward(const Matrix& H, double rate, Mode mode, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout rate must be in [0,1)");
    if (mode == Mode::eval || rate == 0.0) {
      scale_ = Matrix::Ones(H.rows(), H.cols());
      return H;
    }
    Rng rng(seed);
    const double keep = 1.0 / (1.0 - rate);
    scale_.resize(H.rows(), H.cols());
    for (Index i = 0; i < H.rows(); ++i)
      for (Index j = 0; j < H.cols(); ++j) scale_(i, j) = rng.uniform() < rate ? 0.0 : keep;
    return H.cwiseProduct(scale_);
  }

  Matrix backward(const Matrix& grad_out) const {
    if (scale_.size() == 0) throw UsageError("dropout backward called without a forward cache");
    return grad_out.cwiseProduct(scale_);
  }

  const Matrix& scale() const { return scale_; }

private:
  Matrix scale_;
};

inline Matrix dropout(const Matrix& H, double rate, Mode mode, std::uint64_t seed) {
  Dropout d;
  return d.forward(H, rate, mode, seed);
}

// --- softmax --------------------------------------------------------------

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// Gradient w.r.t. logits given softmax output `probs` and dLoss/dprobs.
inline Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs) {
  const Vector dot = probs.cwiseProduct(grad_probs).rowwise().sum();
  Matrix g = grad_probs;
  g.colwise() -= dot;
  return probs.cwiseProduct(g);
}

}  // namespace celltraffic::nn
