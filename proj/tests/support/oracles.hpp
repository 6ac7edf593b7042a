#pragma once

// Independent dense reference implementations used as test oracles. These
// deliberately avoid the library's sparse code paths and Eigen solvers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "celltraffic/graph.hpp"
#include "celltraffic/linalg.hpp"
#include "celltraffic/rng.hpp"

namespace oracle {

using celltraffic::Index;
using celltraffic::Matrix;
using celltraffic::SparseMatrix;
using celltraffic::Vector;

inline Matrix to_dense(const SparseMatrix& s) {
  Matrix d = Matrix::Zero(s.rows(), s.cols());
  for (Index i = 0; i < s.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(s, i); it; ++it) d(i, it.col()) = it.value();
  return d;
}

inline SparseMatrix to_sparse(const Matrix& d) {
  std::vector<celltraffic::Triplet> t;
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = 0; j < d.cols(); ++j)
      if (d(i, j) != 0.0) t.emplace_back(i, j, d(i, j));
  SparseMatrix s(d.rows(), d.cols());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

inline Matrix random_coords(Index n, std::uint64_t seed, double side = 1000.0) {
  celltraffic::Rng rng(seed);
  Matrix c(n, 2);
  for (Index i = 0; i < n; ++i) {
    c(i, 0) = rng.uniform(0.0, side);
    c(i, 1) = rng.uniform(0.0, side);
  }
  return c;
}

inline Matrix random_matrix(Index r, Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  celltraffic::Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline double dist(const Matrix& c, Index i, Index j) {
  return std::hypot(c(i, 0) - c(j, 0), c(i, 1) - c(j, 1));
}

inline Matrix epsilon_adjacency(const Matrix& c, double eps) {
  const Index n = c.rows();
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && dist(c, i, j) < eps) a(i, j) = 1.0;
  return a;
}

inline Matrix gaussian_adjacency(const Matrix& c, double sigma, double floor) {
  const Index n = c.rows();
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dd = dist(c, i, j);
      const double w = std::exp(-(dd * dd) / (sigma * sigma));
      if (w > floor) a(i, j) = w;
    }
  return a;
}

inline Matrix method1(const Matrix& a) {
  const Index n = a.rows();
  Matrix l(n, n);
  for (Index i = 0; i < n; ++i) {
    double row = 1.0;
    for (Index j = 0; j < n; ++j) row += a(i, j);
    for (Index j = 0; j < n; ++j) l(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) / row;
  }
  return l;
}

inline Matrix method2(const Matrix& a) {
  const Index n = a.rows();
  std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) deg[static_cast<std::size_t>(i)] += a(i, j);
  Matrix l = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (a(i, j) != 0.0) l(i, j) = a(i, j) / std::sqrt(deg[static_cast<std::size_t>(i)] * deg[static_cast<std::size_t>(j)]);
  return l;
}

// Explicit triple loops, then ReLU.
inline Matrix graph_conv(const Matrix& L, const Matrix& H, const Matrix& W) {
  const Index n = L.rows(), f = H.cols(), o = W.cols();
  Matrix lh = Matrix::Zero(n, f);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < n; ++k)
      for (Index j = 0; j < f; ++j) lh(i, j) += L(i, k) * H(k, j);
  Matrix out = Matrix::Zero(n, o);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < o; ++j) {
      double s = 0.0;
      for (Index k = 0; k < f; ++k) s += lh(i, k) * W(k, j);
      out(i, j) = s > 0.0 ? s : 0.0;
    }
  return out;
}

inline Matrix normalized_laplacian(const Matrix& a) {
  const Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) deg[static_cast<std::size_t>(i)] += a(i, j);
  for (Index i = 0; i < n; ++i) {
    const double di = deg[static_cast<std::size_t>(i)];
    if (di > 0.0) l(i, i) = 1.0;
    for (Index j = 0; j < n; ++j) {
      const double dj = deg[static_cast<std::size_t>(j)];
      if (a(i, j) != 0.0 && di > 0.0 && dj > 0.0) l(i, j) = -a(i, j) / std::sqrt(di * dj);
    }
  }
  return l;
}

// Cyclic Jacobi rotations; returns ascending eigenvalues of a symmetric matrix.
inline std::vector<double> jacobi_eigenvalues(Matrix s, int sweeps = 100) {
  const Index n = s.rows();
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    if (off < 1e-30) break;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(s(p, q)) < 1e-300) continue;
        const double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
        for (Index k = 0; k < n; ++k) {
          const double skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (Index k = 0; k < n; ++k) {
          const double spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = s(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }
  std::size_t components() {
    std::size_t c = 0;
    for (std::size_t i = 0; i < parent_.size(); ++i) c += find(i) == i ? 1 : 0;
    return c;
  }

private:
  std::vector<std::size_t> parent_;
};

inline std::size_t count_components(const Matrix& a) {
  UnionFind uf(static_cast<std::size_t>(a.rows()));
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) uf.unite(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return uf.components();
}

inline celltraffic::Graph graph_from_dense(const Matrix& a, const Matrix& coords = {}) {
  celltraffic::Graph g;
  g.adjacency = to_sparse(a);
  g.coords = coords.size() ? coords : Matrix::Zero(a.rows(), 2);
  for (Index i = 0; i < a.rows(); ++i) g.node_ids.push_back(i + 1);
  return g;
}

inline celltraffic::Graph random_graph(Index n, double p, std::uint64_t seed) {
  celltraffic::Rng rng(seed);
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform() < p) a(i, j) = a(j, i) = rng.uniform(0.1, 2.0);
  return graph_from_dense(a);
}

// Central difference of a scalar function of one matrix.
template <class F>
Matrix numeric_gradient(F&& f, Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f();
    x.data()[i] = saved - h;
    const double down = f();
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const Matrix& a, const Matrix& n) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = n.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-8}));
  }
  return worst;
}

}  // namespace oracle
