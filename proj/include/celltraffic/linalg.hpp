#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <string>

#include "celltraffic/errors.hpp"

namespace celltraffic {

// All numeric work is double precision and row-major so that payloads map
// directly onto the on-disk little-endian layout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;
using Index = Eigen::Index;

inline std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

inline std::string shape_str(const SparseMatrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& context) {
  if (!m.allFinite()) throw NumericError("non-finite value in " + context);
}

inline void require_finite(double v, const std::string& context) {
  if (!std::isfinite(v)) throw NumericError("non-finite value in " + context);
}

}  // namespace celltraffic
