#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "celltraffic/errors.hpp"
#include "celltraffic/linalg.hpp"

namespace celltraffic::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  AdamHyper hyper;
};

/// One bias-corrected Adam update in place. Moment buffers are created on
/// the first call.
inline void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameter set");

  const auto& h = state.hyper;
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  constexpr double tiny = std::numeric_limits<double>::min();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ShapeError("adam: gradient " + shape_str(g) + " for parameter " + shape_str(p));
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g.cwiseAbs2();
    const auto m_hat = state.m[i].array() / c1;
    const auto denom = ((state.v[i].array() / c2).sqrt() + h.eps).max(tiny);
    p.array() -= h.lr * m_hat / denom;
  }
}

}  // namespace celltraffic::nn
