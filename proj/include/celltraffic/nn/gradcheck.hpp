#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>

#include "celltraffic/errors.hpp"
#include "celltraffic/linalg.hpp"
#include "celltraffic/rng.hpp"

namespace celltraffic::nn {

struct GradCheckOptions {
  double h = 1e-5;
  std::size_t max_coords_per_param = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0;
};

/// Compares `analytic` against central differences (f(t+h) - f(t-h)) / 2h
/// of the scalar `loss`, perturbing each parameter coordinate in place and
/// restoring it. Returns max |a - n| / max(|a|, |n|, 1e-8).
inline double gradient_check(const std::function<double()>& loss, std::span<Matrix* const> params,
                             std::span<const Matrix> analytic, GradCheckOptions opts = {}) {
  if (params.size() != analytic.size()) throw ShapeError("gradient_check: parameter and gradient counts differ");
  Rng rng(opts.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& a = analytic[k];
    if (a.rows() != p.rows() || a.cols() != p.cols())
      throw ShapeError("gradient_check: gradient " + shape_str(a) + " for parameter " + shape_str(p));

    std::vector<Index> coords(static_cast<std::size_t>(p.size()));
    for (Index c = 0; c < p.size(); ++c) coords[static_cast<std::size_t>(c)] = c;
    if (opts.max_coords_per_param > 0 && coords.size() > opts.max_coords_per_param) {
      rng.shuffle(coords);
      coords.resize(opts.max_coords_per_param);
    }
    for (Index c : coords) {
      double* x = p.data() + c;
      const double saved = *x;
      *x = saved + opts.h;
      const double up = loss();
      *x = saved - opts.h;
      const double down = loss();
      *x = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("gradient_check: non-finite loss");
      const double numeric = (up - down) / (2.0 * opts.h);
      const double an = a.data()[c];
      const double err = std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), 1e-8});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace celltraffic::nn
