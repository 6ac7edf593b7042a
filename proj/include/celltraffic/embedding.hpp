#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "celltraffic/errors.hpp"
#include "celltraffic/graph.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/linalg.hpp"
#include "celltraffic/nn/layers.hpp"
#include "celltraffic/rng.hpp"

namespace celltraffic {

enum class EmbeddingMethod { laplacian, gcn_method1, gcn_method2 };

inline const char* to_string(EmbeddingMethod m) {
  switch (m) {
    case EmbeddingMethod::laplacian: return "laplacian";
    case EmbeddingMethod::gcn_method1: return "gcn_method1";
    case EmbeddingMethod::gcn_method2: return "gcn_method2";
  }
  return "?";
}

struct EmbeddingResult {
  Matrix coords;  // N x d_emb
  EmbeddingMethod method = EmbeddingMethod::laplacian;
  std::vector<std::size_t> feature_subset;
  Vector eigenvalues;  // full ascending spectrum, laplacian method only
};

inline constexpr double kZeroEigenvalueTol = 1e-10;

/// Symmetric normalized Laplacian D^-1/2 (D - A) D^-1/2. Isolated nodes get
/// an all-zero row and column, so each connected component (isolated nodes
/// included) contributes one zero eigenvalue.
inline Matrix normalized_laplacian(const Graph& graph) {
  const Index n = graph.size();
  const Vector d = degree(graph, false);
  Vector s(n);
  for (Index i = 0; i < n; ++i) s(i) = d(i) > 0.0 ? 1.0 / std::sqrt(d(i)) : 0.0;
  Matrix l = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    if (d(i) > 0.0) l(i, i) = 1.0;
    for (SparseMatrix::InnerIterator it(graph.adjacency, i); it; ++it) l(i, it.col()) = -it.value() * s(i) * s(it.col());
  }
  return 0.5 * (l + l.transpose());
}

/// Laplacian eigenmap: eigenvectors of the `d_emb` smallest nonzero
/// eigenvalues of the normalized Laplacian, unit norm, sign fixed so the
/// largest-magnitude entry is positive. Dense solver.
inline EmbeddingResult laplacian_eigenmap(const Graph& graph, Index d_emb) {
  const Index n = graph.size();
  if (d_emb < 1 || d_emb >= n)
    throw DomainError("embedding dimension " + std::to_string(d_emb) + " must be in [1, N-1] for N=" + std::to_string(n));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(normalized_laplacian(graph));
  if (solver.info() != Eigen::Success) throw NumericError("laplacian eigensolver did not converge");

  EmbeddingResult out;
  out.method = EmbeddingMethod::laplacian;
  out.eigenvalues = solver.eigenvalues();
  out.coords.resize(n, d_emb);
  Index filled = 0;
  for (Index k = 0; k < n && filled < d_emb; ++k) {
    if (out.eigenvalues(k) < kZeroEigenvalueTol) continue;
    Vector v = solver.eigenvectors().col(k);
    v.normalize();
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.coords.col(filled++) = v;
  }
  if (filled < d_emb)
    throw DomainError("graph has only " + std::to_string(filled) + " nonzero Laplacian eigenvalues, asked for " +
                      std::to_string(d_emb));
  return out;
}

inline Index count_zero_eigenvalues(const Vector& eigenvalues, double tol = kZeroEigenvalueTol) {
  return (eigenvalues.array().abs() < tol).count();
}

/// w_ij <- w_ij * exp(-||f_i - f_j||^2 / sigma_f^2); lets a structure-only
/// eigenmap see node features.
inline Graph reweight_by_features(const Graph& graph, const Matrix& features, double sigma_f) {
  if (features.rows() != graph.size()) throw ShapeError("feature rows do not match graph size");
  if (!(sigma_f > 0.0)) throw DomainError("feature sigma must be positive");
  std::vector<Triplet> t;
  for (Index i = 0; i < graph.adjacency.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(graph.adjacency, i); it; ++it) {
      const Index j = it.col();
      const double w = it.value() * std::exp(-(features.row(i) - features.row(j)).squaredNorm() / (sigma_f * sigma_f));
      if (w > 0.0) t.emplace_back(i, j, w);
    }
  Graph out{graph.coords, SparseMatrix(graph.size(), graph.size()), graph.node_ids};
  out.adjacency.setFromTriplets(t.begin(), t.end());
  out.adjacency.makeCompressed();
  return out;
}

inline Matrix select_features(const Matrix& X, const std::vector<std::size_t>& subset) {
  if (subset.empty()) throw DomainError("feature subset is empty");
  std::set<std::size_t> seen;
  Matrix out(X.rows(), static_cast<Index>(subset.size()));
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const auto c = subset[k];
    if (c >= static_cast<std::size_t>(X.cols()))
      throw DomainError("feature index " + std::to_string(c) + " out of range [0," + std::to_string(X.cols()) + ")");
    if (!seen.insert(c).second) throw DomainError("feature index " + std::to_string(c) + " repeated");
    out.col(static_cast<Index>(k)) = X.col(static_cast<Index>(c));
  }
  return out;
}

/// Forward-only stack of ReLU(L H W) layers with seeded Glorot weights.
/// `layer_dims` lists the output width of each layer; the last is d_emb.
inline EmbeddingResult gcn_embed(const PropagationMatrix& L, const Matrix& X, const std::vector<Index>& layer_dims,
                                 std::uint64_t seed) {
  if (layer_dims.empty()) throw DomainError("gcn_embed needs at least one layer");
  Rng rng(seed);
  Matrix h = X;
  for (Index width : layer_dims) {
    if (width < 1) throw ShapeError("layer width must be positive");
    const Matrix w = nn::glorot_uniform(h.cols(), width, h.cols(), width, rng);
    h = nn::graph_conv_forward(L.values, h, w);
  }
  require_finite(h, "gcn_embed");
  EmbeddingResult out;
  out.coords = std::move(h);
  out.method = L.kind == PropagationKind::method1 ? EmbeddingMethod::gcn_method1 : EmbeddingMethod::gcn_method2;
  return out;
}

inline std::string embedding_csv(const EmbeddingResult& e, const std::vector<std::int64_t>& node_ids) {
  if (static_cast<Index>(node_ids.size()) != e.coords.rows()) throw ShapeError("node id count does not match embedding");
  std::string out = "cell_id";
  for (Index j = 0; j < e.coords.cols(); ++j) out += ",e" + std::to_string(j + 1);
  out += "\n";
  for (Index i = 0; i < e.coords.rows(); ++i) {
    out += std::to_string(node_ids[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < e.coords.cols(); ++j) out += "," + io::format_double(e.coords(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace celltraffic
