#pragma once

#include "heatgeo/core.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

// =============================================================================
// k-NN affinity graphs and graph Laplacians.
//
// Directed k-NN Gaussian affinities are symmetrized by elementwise max, so
// every directed neighbor edge survives. With adaptive bandwidth the kernel
// scale of edge (i, j) is sigma_i * sigma_j, sigma_i being the distance from
// x_i to its k-th neighbor.
// =============================================================================

namespace heatgeo {

enum class LaplacianKind { Combinatorial, SymmetricNormalized, RandomWalk };

inline const char* to_string(LaplacianKind kind) {
  switch (kind) {
    case LaplacianKind::Combinatorial: return "combinatorial";
    case LaplacianKind::SymmetricNormalized: return "symmetric";
    case LaplacianKind::RandomWalk: return "random-walk";
  }
  return "unknown";
}

inline LaplacianKind parse_laplacian_kind(const std::string& s) {
  if (s == "combinatorial") return LaplacianKind::Combinatorial;
  if (s == "symmetric" || s == "normalized") return LaplacianKind::SymmetricNormalized;
  if (s == "random-walk" || s == "rw") return LaplacianKind::RandomWalk;
  throw ParameterError("unknown laplacian kind '" + s + "'");
}

/// Kernel bandwidth: a fixed epsilon (W_ij = exp(-d^2/eps)) or adaptive.
struct Bandwidth {
  std::optional<double> fixed;  // nullopt means adaptive

  static Bandwidth adaptive() { return {}; }
  static Bandwidth constant(double eps) { return {eps}; }
  bool is_adaptive() const { return !fixed.has_value(); }
};

/// Symmetric adjacency with the edge lengths that produced it.
struct Adjacency {
  SparseMatrix weights;    // zero diagonal, nonnegative, symmetric
  SparseMatrix distances;  // ambient Euclidean length of each kept edge
  std::vector<int> component;  // connected-component id per vertex
  int num_components = 0;
  std::size_t floored_bandwidths = 0;  // sigma_i hit the 1e-12 floor

  Index size() const { return weights.rows(); }
  bool connected() const { return num_components == 1; }
  Vector degrees() const { return weights * Vector::Ones(weights.cols()); }
};

inline constexpr double kBandwidthFloor = 1e-12;

namespace detail {

inline std::vector<int> label_components(const SparseMatrix& w, int& count) {
  const Index n = w.rows();
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  count = 0;
  std::vector<Index> stack;
  for (Index s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (SparseMatrix::InnerIterator it(w, v); it; ++it) {
        if (comp[it.row()] < 0) {
          comp[it.row()] = count;
          stack.push_back(it.row());
        }
      }
    }
    ++count;
  }
  return comp;
}

}  // namespace detail

/// Connected components of any structurally symmetric sparse matrix.
inline std::vector<int> connected_components(const SparseMatrix& w, int* count = nullptr) {
  int c = 0;
  auto comp = detail::label_components(w, c);
  if (count) *count = c;
  return comp;
}

/// Build the max-symmetrized Gaussian k-NN graph of a point cloud.
/// Ties in distance are broken by lower index, so results are deterministic.
inline Adjacency build_knn_graph(const PointCloud& points, int k,
                                 Bandwidth bandwidth = Bandwidth::adaptive()) {
  points.validate();
  const Index n = points.size();
  if (k < 1) throw ParameterError("k must be positive");
  if (k >= n)
    throw ParameterError("k = " + std::to_string(k) + " must be smaller than n = " +
                         std::to_string(n));
  if (bandwidth.fixed && !(*bandwidth.fixed > 0.0))
    throw ParameterError("bandwidth must be positive");

  const Matrix d2 = pairwise_squared_distances(points.data);

  std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));
  Vector sigma(n);
  Adjacency adj;
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), Index{0});
    // self first, then by distance
    auto closer = [&](Index a, Index b) {
      if (a == i || b == i) return a == i && b != i;
      if (d2(i, a) != d2(i, b)) return d2(i, a) < d2(i, b);
      return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + k + 1, order.end(), closer);
    nbrs[i].assign(order.begin() + 1, order.begin() + k + 1);
    double s = std::sqrt(d2(i, nbrs[i].back()));
    if (s < kBandwidthFloor) {
      s = kBandwidthFloor;
      ++adj.floored_bandwidths;
    }
    sigma(i) = s;
  }

  auto eps = [&](Index i, Index j) {
    return bandwidth.fixed ? *bandwidth.fixed : sigma(i) * sigma(j);
  };

  // Directed kernel values are symmetric in (i, j) for both bandwidth modes,
  // so the max-symmetrization reduces to taking the union of directed edges.
  std::vector<Eigen::Triplet<double>> wt, dt;
  std::vector<std::vector<Index>> undirected(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    for (Index j : nbrs[i]) {
      undirected[i].push_back(j);
      undirected[j].push_back(i);
    }
  for (Index i = 0; i < n; ++i) {
    auto& row = undirected[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (Index j : row) {
      wt.emplace_back(i, j, std::exp(-d2(i, j) / eps(i, j)));
      dt.emplace_back(i, j, std::sqrt(d2(i, j)));
    }
  }
  adj.weights.resize(n, n);
  adj.weights.setFromTriplets(wt.begin(), wt.end());
  adj.distances.resize(n, n);
  adj.distances.setFromTriplets(dt.begin(), dt.end());
  adj.component = detail::label_components(adj.weights, adj.num_components);
  return adj;
}

/// Graph Laplacian. For the random-walk kind the stored matrix is the
/// symmetric normalized Laplacian; L_rw = Q^{-1/2} L_sym Q^{1/2} is recovered
/// through the degree vector.
struct Laplacian {
  LaplacianKind kind = LaplacianKind::Combinatorial;
  SparseMatrix matrix;  // symmetric
  Vector degrees;

  Index size() const { return matrix.rows(); }

  /// The operator whose exponential is the heat kernel, as a dense matrix.
  Matrix dense_operator() const {
    Matrix l = Matrix(matrix);
    if (kind == LaplacianKind::RandomWalk) {
      const Vector s = degrees.cwiseSqrt();
      l = s.cwiseInverse().asDiagonal() * l * s.asDiagonal();
    }
    return l;
  }
};

inline Laplacian laplacian(const SparseMatrix& w, LaplacianKind kind) {
  if (w.rows() != w.cols()) throw ParameterError("adjacency must be square");
  const Index n = w.rows();
  const Vector deg = w * Vector::Ones(n);
  for (Index i = 0; i < n; ++i) {
    if (!(deg(i) > 0.0))
      throw ParameterError("vertex " + std::to_string(i) +
                           " is isolated (zero degree); Laplacian undefined");
  }

  Laplacian out;
  out.kind = kind;
  out.degrees = deg;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(w.nonZeros() + n));
  if (kind == LaplacianKind::Combinatorial) {
    for (Index i = 0; i < n; ++i) trip.emplace_back(i, i, deg(i));
    for (Index c = 0; c < w.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(w, c); it; ++it)
        if (it.row() != it.col()) trip.emplace_back(it.row(), it.col(), -it.value());
  } else {
    const Vector inv_sqrt = deg.cwiseSqrt().cwiseInverse();
    for (Index i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
    for (Index c = 0; c < w.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(w, c); it; ++it)
        trip.emplace_back(it.row(), it.col(),
                          -inv_sqrt(it.row()) * it.value() * inv_sqrt(it.col()));
  }
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(trip.begin(), trip.end());
  return out;
}

inline Laplacian laplacian(const Adjacency& adj, LaplacianKind kind) {
  return laplacian(adj.weights, kind);
}

}  // namespace heatgeo
