#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "celltraffic/errors.hpp"
#include "celltraffic/linalg.hpp"

namespace celltraffic::nn {

using Labels = std::vector<int>;
using Mask = std::vector<std::uint8_t>;

inline constexpr double kProbClamp = 1e-12;

namespace detail {

inline std::size_t check_masked(const Matrix& probs, std::span<const int> labels, std::span<const std::uint8_t> mask) {
  if (probs.cols() != 2) throw ShapeError("cross entropy expects N x 2 probabilities, got " + shape_str(probs));
  if (static_cast<std::size_t>(probs.rows()) != labels.size() || labels.size() != mask.size())
    throw ShapeError("cross entropy: probs, labels and mask lengths differ");
  const auto count = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
  if (count == 0) throw DomainError("cross entropy mask selects no nodes");
  return count;
}

}  // namespace detail

/// Mean over masked nodes of -[y log p1 + (1 - y) log(1 - p1)], with p1
/// clamped to [1e-12, 1 - 1e-12].
inline double masked_cross_entropy(const Matrix& probs, std::span<const int> labels, std::span<const std::uint8_t> mask) {
  const auto count = detail::check_masked(probs, labels, mask);
  double total = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double p = std::clamp(probs(i, 1), kProbClamp, 1.0 - kProbClamp);
    total -= labels[static_cast<std::size_t>(i)] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(count);
}

/// dLoss/dprobs of masked_cross_entropy. Only column 1 (p1) carries gradient;
/// unmasked rows and clamped entries are zero.
inline Matrix masked_cross_entropy_grad(const Matrix& probs, std::span<const int> labels,
                                        std::span<const std::uint8_t> mask) {
  const auto count = static_cast<double>(detail::check_masked(probs, labels, mask));
  Matrix g = Matrix::Zero(probs.rows(), probs.cols());
  for (Index i = 0; i < probs.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double p = probs(i, 1);
    if (p < kProbClamp || p > 1.0 - kProbClamp) continue;
    g(i, 1) = (labels[static_cast<std::size_t>(i)] == 1 ? -1.0 / p : 1.0 / (1.0 - p)) / count;
  }
  return g;
}

/// Mean squared entrywise difference.
inline double l2_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("l2_loss: pred " + shape_str(pred) + " vs target " + shape_str(target));
  if (pred.size() == 0) throw DomainError("l2_loss on empty tensors");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

inline Matrix l2_loss_grad(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("l2_loss: pred " + shape_str(pred) + " vs target " + shape_str(target));
  return 2.0 * (pred - target) / static_cast<double>(pred.size());
}

}  // namespace celltraffic::nn
