#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "celltraffic/errors.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/linalg.hpp"

namespace celltraffic {

/// Spatial graph over base-station nodes. `adjacency` is symmetric with an
/// empty diagonal and stores only strictly positive weights.
struct Graph {
  Matrix coords;  // N x 2, meters
  SparseMatrix adjacency;
  std::vector<std::int64_t> node_ids;

  Index size() const { return coords.rows(); }
  Index num_edges() const { return adjacency.nonZeros() / 2; }
};

enum class PropagationKind { method1, method2 };

inline const char* to_string(PropagationKind k) { return k == PropagationKind::method1 ? "method1" : "method2"; }

struct PropagationMatrix {
  SparseMatrix values;
  PropagationKind kind = PropagationKind::method1;
};

struct Method2Options {
  bool repair_isolated = false;  // map 0^{-1/2} to 0 instead of failing
  bool self_loops = false;       // use A + I and its degrees
};

namespace detail {

inline void check_coords(const Matrix& coords) {
  if (coords.cols() != 2) throw ShapeError("coordinates must be N x 2, got " + shape_str(coords));
  if (coords.rows() < 1) throw DomainError("graph needs at least one node");
  if (!coords.allFinite()) throw DomainError("non-finite node coordinates");
}

inline double squared_distance(const Matrix& c, Index i, Index j) {
  const double dx = c(i, 0) - c(j, 0);
  const double dy = c(i, 1) - c(j, 1);
  return dx * dx + dy * dy;
}

struct PairDistance {
  Index i, j;
  double d2;
};

inline constexpr Index kSpatialIndexThreshold = 2000;

/// All pairs i < j whose squared distance is <= radius^2 (callers apply the
/// exact edge predicate). Brute force for small N, uniform grid buckets of
/// side `radius` otherwise. Output is sorted by (i, j) either way.
inline std::vector<PairDistance> candidate_pairs(const Matrix& coords, double radius) {
  const Index n = coords.rows();
  std::vector<PairDistance> out;
  const double r2 = radius * radius;
  if (n <= kSpatialIndexThreshold || !std::isfinite(radius) || radius <= 0.0) {
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        const double d2 = squared_distance(coords, i, j);
        if (d2 <= r2) out.push_back({i, j, d2});
      }
    return out;
  }

  const double x0 = coords.col(0).minCoeff();
  const double y0 = coords.col(1).minCoeff();
  const auto cell_of = [&](Index i) {
    return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor((coords(i, 0) - x0) / radius)),
                                                 static_cast<std::int64_t>(std::floor((coords(i, 1) - y0) / radius))};
  };
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Index>> buckets;
  for (Index i = 0; i < n; ++i) buckets[cell_of(i)].push_back(i);

  for (Index i = 0; i < n; ++i) {
    const auto [cx, cy] = cell_of(i);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = buckets.find({cx + dx, cy + dy});
        if (it == buckets.end()) continue;
        for (Index j : it->second) {
          if (j <= i) continue;
          const double d2 = squared_distance(coords, i, j);
          if (d2 <= r2) out.push_back({i, j, d2});
        }
      }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
  return out;
}

inline SparseMatrix symmetric_from_upper(Index n, const std::vector<Triplet>& upper) {
  std::vector<Triplet> all;
  all.reserve(upper.size() * 2);
  for (const auto& t : upper) {
    all.push_back(t);
    all.emplace_back(t.col(), t.row(), t.value());
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(all.begin(), all.end());
  a.makeCompressed();
  return a;
}

inline std::vector<std::int64_t> default_ids(Index n) {
  std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  return ids;
}

}  // namespace detail

/// Unit-weight proximity graph: edge (i, j), i != j, iff ||x_i - x_j|| < epsilon.
inline Graph build_epsilon_graph(const Matrix& coords, double epsilon, std::vector<std::int64_t> node_ids = {}) {
  detail::check_coords(coords);
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("edge radius must be positive and finite");
  const Index n = coords.rows();
  if (node_ids.empty()) node_ids = detail::default_ids(n);
  if (static_cast<Index>(node_ids.size()) != n) throw ShapeError("node_ids size does not match coordinates");

  std::vector<Triplet> upper;
  for (const auto& p : detail::candidate_pairs(coords, epsilon))
    if (std::sqrt(p.d2) < epsilon) upper.emplace_back(p.i, p.j, 1.0);
  return {coords, detail::symmetric_from_upper(n, upper), std::move(node_ids)};
}

/// Gaussian-kernel graph: w_ij = exp(-||x_i - x_j||^2 / sigma^2) when that
/// value exceeds `weight_floor` and i != j.
inline Graph build_gaussian_graph(const Matrix& coords, double sigma, double weight_floor,
                                  std::vector<std::int64_t> node_ids = {}) {
  detail::check_coords(coords);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive and finite");
  if (!(weight_floor > 0.0 && weight_floor < 1.0)) throw DomainError("weight floor must be in (0,1)");
  const Index n = coords.rows();
  if (node_ids.empty()) node_ids = detail::default_ids(n);
  if (static_cast<Index>(node_ids.size()) != n) throw ShapeError("node_ids size does not match coordinates");

  // exp(-d^2/s^2) > floor  <=>  d < s * sqrt(-ln floor); widen slightly, the
  // exact predicate below decides.
  const double radius = sigma * std::sqrt(-std::log(weight_floor)) * (1.0 + 1e-9);
  const double s2 = sigma * sigma;
  std::vector<Triplet> upper;
  for (const auto& p : detail::candidate_pairs(coords, radius)) {
    const double w = std::exp(-p.d2 / s2);
    if (w > weight_floor) upper.emplace_back(p.i, p.j, w);
  }
  return {coords, detail::symmetric_from_upper(n, upper), std::move(node_ids)};
}

/// Median over nodes of the distance to the nearest other node.
inline double median_nearest_neighbor_distance(const Matrix& coords) {
  detail::check_coords(coords);
  const Index n = coords.rows();
  if (n < 2) throw DomainError("nearest-neighbor distance needs at least two nodes");
  std::vector<double> nn(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double d = std::sqrt(detail::squared_distance(coords, i, j));
      nn[static_cast<std::size_t>(i)] = std::min(nn[static_cast<std::size_t>(i)], d);
      nn[static_cast<std::size_t>(j)] = std::min(nn[static_cast<std::size_t>(j)], d);
    }
  std::sort(nn.begin(), nn.end());
  const auto m = nn.size();
  return m % 2 == 1 ? nn[m / 2] : 0.5 * (nn[m / 2 - 1] + nn[m / 2]);
}

inline Vector degree(const Graph& graph, bool with_self_loops) {
  Vector d = Vector::Zero(graph.size());
  for (Index i = 0; i < graph.adjacency.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(graph.adjacency, i); it; ++it) d(i) += it.value();
  if (with_self_loops) d.array() += 1.0;
  return d;
}

/// L1 = D^-1 (A + I), with D the degree of A + I. Rows sum to one.
inline PropagationMatrix propagation_method1(const Graph& graph) {
  const Index n = graph.size();
  const Vector d = degree(graph, true);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(graph.adjacency.nonZeros() + n));
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, 1.0 / d(i));
    for (SparseMatrix::InnerIterator it(graph.adjacency, i); it; ++it)
      t.emplace_back(i, it.col(), it.value() / d(i));
  }
  PropagationMatrix p{SparseMatrix(n, n), PropagationKind::method1};
  p.values.setFromTriplets(t.begin(), t.end());
  p.values.makeCompressed();
  return p;
}

/// L2 = D^-1/2 A D^-1/2 on the plain adjacency (A + I with `self_loops`).
/// Each entry is evaluated as w_ij * min(s_i, s_j) * max(s_i, s_j) with
/// s = D^-1/2, which makes the result exactly symmetric in floating point.
inline PropagationMatrix propagation_method2(const Graph& graph, Method2Options opts = {}) {
  const Index n = graph.size();
  const Vector d = degree(graph, opts.self_loops);
  Vector s(n);
  for (Index i = 0; i < n; ++i) {
    if (d(i) > 0.0) {
      s(i) = 1.0 / std::sqrt(d(i));
    } else if (opts.repair_isolated) {
      s(i) = 0.0;
    } else {
      const auto id = i < static_cast<Index>(graph.node_ids.size()) ? graph.node_ids[static_cast<std::size_t>(i)] : i;
      throw DomainError("node " + std::to_string(id) + " is isolated; method 2 needs degree > 0 (enable repair)");
    }
  }
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    if (opts.self_loops && s(i) > 0.0) t.emplace_back(i, i, s(i) * s(i));
    for (SparseMatrix::InnerIterator it(graph.adjacency, i); it; ++it) {
      const Index j = it.col();
      const double a = std::min(s(i), s(j));
      const double b = std::max(s(i), s(j));
      const double v = it.value() * a * b;
      if (v != 0.0) t.emplace_back(i, j, v);
    }
  }
  PropagationMatrix p{SparseMatrix(n, n), PropagationKind::method2};
  p.values.setFromTriplets(t.begin(), t.end());
  p.values.makeCompressed();
  return p;
}

inline PropagationMatrix make_propagation(const Graph& graph, PropagationKind kind, Method2Options opts = {}) {
  return kind == PropagationKind::method1 ? propagation_method1(graph) : propagation_method2(graph, opts);
}

// --- CSV export / import --------------------------------------------------

inline std::string nodes_csv(const Graph& g) {
  std::string out = "cell_id,x,y\n";
  for (Index i = 0; i < g.size(); ++i)
    out += std::to_string(g.node_ids[static_cast<std::size_t>(i)]) + "," + io::format_double(g.coords(i, 0)) + "," +
           io::format_double(g.coords(i, 1)) + "\n";
  return out;
}

/// One line per undirected edge with src < dst (cell ids), ordered by (src, dst).
inline std::string edges_csv(const Graph& g) {
  std::vector<std::tuple<std::int64_t, std::int64_t, double>> rows;
  for (Index i = 0; i < g.adjacency.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(g.adjacency, i); it; ++it) {
      const auto a = g.node_ids[static_cast<std::size_t>(i)];
      const auto b = g.node_ids[static_cast<std::size_t>(it.col())];
      if (a < b) rows.emplace_back(a, b, it.value());
    }
  std::sort(rows.begin(), rows.end());
  std::string out = "src,dst,weight\n";
  for (const auto& [a, b, w] : rows) out += std::to_string(a) + "," + std::to_string(b) + "," + io::format_double(w) + "\n";
  return out;
}

inline void save_graph(const Graph& g, const std::filesystem::path& dir) {
  io::write_file_atomic(dir / "nodes.csv", nodes_csv(g));
  io::write_file_atomic(dir / "edges.csv", edges_csv(g));
}

/// Parses `cell_id,x,y` rows (planar meters).
inline std::pair<std::vector<std::int64_t>, Matrix> parse_nodes_csv(std::string_view text) {
  std::vector<std::int64_t> ids;
  std::vector<std::pair<double, double>> xy;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    line = io::trim(line);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "cell_id,x,y") throw ParseError("expected header 'cell_id,x,y'", line_no);
      continue;
    }
    const auto f = io::split(line, ',');
    if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
    const auto id = io::parse_int<std::int64_t>(f[0]);
    const auto x = io::parse_double(f[1]);
    const auto y = io::parse_double(f[2]);
    if (!id || !x || !y) throw ParseError("malformed node row", line_no);
    ids.push_back(*id);
    xy.emplace_back(*x, *y);
  }
  Matrix coords(static_cast<Index>(xy.size()), 2);
  for (std::size_t i = 0; i < xy.size(); ++i) {
    coords(static_cast<Index>(i), 0) = xy[i].first;
    coords(static_cast<Index>(i), 1) = xy[i].second;
  }
  return {std::move(ids), std::move(coords)};
}

inline Graph load_graph(const std::filesystem::path& dir) {
  const auto nodes_path = dir / "nodes.csv";
  const auto edges_path = dir / "edges.csv";
  if (!std::filesystem::exists(nodes_path)) throw IoError("node file not found: " + nodes_path.string());
  if (!std::filesystem::exists(edges_path)) throw IoError("edge file not found: " + edges_path.string());
  auto [ids, coords] = parse_nodes_csv(io::read_file(nodes_path));
  std::unordered_map<std::int64_t, Index> index_of;
  for (std::size_t i = 0; i < ids.size(); ++i) index_of[ids[i]] = static_cast<Index>(i);

  std::vector<Triplet> upper;
  std::size_t line_no = 0;
  const std::string edges_text = io::read_file(edges_path);
  for (auto line : io::split(edges_text, '\n')) {
    ++line_no;
    line = io::trim(line);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "src,dst,weight") throw ParseError("expected header 'src,dst,weight'", line_no);
      continue;
    }
    const auto f = io::split(line, ',');
    if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
    const auto a = io::parse_int<std::int64_t>(f[0]);
    const auto b = io::parse_int<std::int64_t>(f[1]);
    const auto w = io::parse_double(f[2]);
    if (!a || !b || !w) throw ParseError("malformed edge row", line_no);
    if (!(*a < *b)) throw ParseError("edge rows must have src < dst", line_no);
    if (!(*w > 0.0)) throw ParseError("edge weight must be positive", line_no);
    if (!index_of.contains(*a) || !index_of.contains(*b)) throw ParseError("edge references unknown node", line_no);
    upper.emplace_back(index_of[*a], index_of[*b], *w);
  }
  const auto n = coords.rows();
  return {std::move(coords), detail::symmetric_from_upper(n, upper), std::move(ids)};
}

}  // namespace celltraffic
