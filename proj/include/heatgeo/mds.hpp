#pragma once

#include "heatgeo/core.hpp"
#include "heatgeo/distance.hpp"
#include "heatgeo/rng.hpp"

#include <cmath>
#include <optional>
#include <vector>

// Metric multidimensional scaling.
//
// Stress is sqrt(sum_{i<j} w_ij (d_ij - ||y_i - y_j||)^2), unnormalized.
// SMACOF iterates the Guttman transform Y <- V^+ B(Y) Y, which never
// increases the weighted stress.

namespace heatgeo {

struct Embedding {
  Matrix coords;
  double stress = 0.0;
  std::vector<double> trace;  // stress per iteration, starting with the initial layout
  bool converged = false;
  bool degenerate = false;    // all-zero input distances

  Index size() const { return coords.rows(); }
  Index dims() const { return coords.cols(); }
};

struct MdsConfig {
  int dims = 2;
  int max_iters = 300;
  double rel_tol = 1e-6;
  std::optional<Matrix> weights;
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_distance_matrix(const Matrix& d) {
  if (d.rows() != d.cols()) throw ParameterError("distance matrix must be square");
  if (!d.allFinite()) throw ParameterError("distance matrix has non-finite entries");
  if (d.size() > 0 && d.minCoeff() < 0.0) throw ParameterError("distance matrix has negative entries");
}

inline void check_weights(const Matrix& w, Index n) {
  if (w.rows() != n || w.cols() != n) throw ParameterError("weights must be n x n");
  if (!w.allFinite() || w.minCoeff() < 0.0) throw ParameterError("weights must be finite and nonnegative");
  if (max_abs_asymmetry(w) > 1e-8 * std::max(1.0, w.cwiseAbs().maxCoeff()))
    throw ParameterError("weights must be symmetric");
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index j = 0; j < n; ++j)
      if (j != i) s += w(i, j);
    if (!(s > 0.0)) throw ParameterError("weight row " + std::to_string(i) + " sums to zero");
  }
}

}  // namespace detail

/// Euclidean distances between the rows of an embedding.
inline Matrix embedding_distances(const Matrix& y) { return pairwise_row_distances(y); }

inline double stress(const Matrix& d, const Matrix& y, const Matrix* weights = nullptr) {
  const Matrix e = embedding_distances(y);
  double s = 0.0;
  for (Index j = 0; j < d.cols(); ++j)
    for (Index i = 0; i < j; ++i) {
      const double r = d(i, j) - e(i, j);
      s += (weights ? (*weights)(i, j) : 1.0) * r * r;
    }
  return std::sqrt(s);
}

/// Classical (Torgerson) MDS. Each axis is sign-normalized so that its
/// largest-magnitude coordinate is positive.
inline Embedding classic_mds(const Matrix& d, int dims) {
  detail::check_distance_matrix(d);
  const Index n = d.rows();
  if (dims < 1) throw ParameterError("output dimension must be >= 1");
  if (n < dims + 1) throw ParameterError("classic MDS needs n >= k + 1");

  Embedding out;
  out.coords = Matrix::Zero(n, dims);
  if (d.cwiseAbs().maxCoeff() == 0.0) {
    out.degenerate = true;
    out.converged = true;
    out.trace = {0.0};
    return out;
  }
  const Matrix sq = d.cwiseProduct(d);
  const Vector row_mean = sq.rowwise().mean();
  const Vector col_mean = sq.colwise().mean().transpose();
  const double all_mean = sq.mean();
  Matrix b = -0.5 * ((sq.colwise() - row_mean).rowwise() - col_mean.transpose()).array() - 0.5 * all_mean;
  b = 0.5 * (b + b.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success) throw NumericalError("classic MDS eigendecomposition failed");
  for (int a = 0; a < dims; ++a) {
    const Index col = n - 1 - a;  // eigenvalues ascend
    const double lam = std::max(0.0, es.eigenvalues()(col));
    Vector axis = es.eigenvectors().col(col) * std::sqrt(lam);
    Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    out.coords.col(a) = axis;
  }
  out.stress = stress(d, out.coords);
  out.trace = {out.stress};
  out.converged = true;
  return out;
}

inline Embedding classic_mds(const DistanceMatrix& d, int dims) { return classic_mds(d.values, dims); }

/// SMACOF stress majorization, initialized by classic MDS unless `init` is given.
inline Embedding smacof(const Matrix& d, const MdsConfig& cfg, const std::optional<Matrix>& init = std::nullopt) {
  detail::check_distance_matrix(d);
  const Index n = d.rows();
  if (cfg.dims < 1) throw ParameterError("output dimension must be >= 1");
  if (cfg.max_iters < 1) throw ParameterError("max_iters must be >= 1");
  if (!(cfg.rel_tol > 0.0)) throw ParameterError("rel_tol must be positive");
  const Matrix* w = nullptr;
  if (cfg.weights) {
    detail::check_weights(*cfg.weights, n);
    w = &*cfg.weights;
  }

  Matrix y;
  if (init) {
    if (init->rows() != n || init->cols() != cfg.dims) throw ParameterError("init has wrong shape");
    y = *init;
  } else {
    y = classic_mds(d, cfg.dims).coords;
  }
  // Degenerate axes (zero variance) cannot move under the Guttman transform;
  // give them a tiny seeded spread.
  {
    Rng rng(cfg.seed, 0x6d6473);
    const double spread = std::max(1e-12, 1e-4 * d.maxCoeff());
    for (Index a = 0; a < y.cols(); ++a) {
      const Vector c = y.col(a).array() - y.col(a).mean();
      if (c.norm() <= 1e-12 * std::max(1.0, d.maxCoeff()))
        for (Index i = 0; i < n; ++i) y(i, a) += spread * rng.uniform(-1.0, 1.0);
    }
  }

  // Weighted case: V = diag(rowsum W) - W, applied through (V + 11^T/n)^{-1}.
  Eigen::LDLT<Matrix> vplus;
  if (w) {
    Matrix v = -*w;
    v.diagonal().setZero();
    for (Index i = 0; i < n; ++i) v(i, i) = -v.row(i).sum();
    v.array() += 1.0 / static_cast<double>(n);
    vplus.compute(v);
    if (vplus.info() != Eigen::Success) throw NumericalError("SMACOF: weight Laplacian factorization failed");
  }

  Embedding out;
  double prev = stress(d, y, w);
  out.trace.push_back(prev);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (prev == 0.0) {
      out.converged = true;
      break;
    }
    const Matrix e = embedding_distances(y);
    Matrix bmat(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) {
        if (i == j || e(i, j) <= 0.0) {
          bmat(i, j) = 0.0;
        } else {
          bmat(i, j) = -(w ? (*w)(i, j) : 1.0) * d(i, j) / e(i, j);
        }
      }
    for (Index i = 0; i < n; ++i) bmat(i, i) = -bmat.row(i).sum();
    Matrix next = bmat * y;
    if (w) {
      next = vplus.solve(next);
      next.rowwise() -= next.colwise().mean();
    } else {
      next /= static_cast<double>(n);
    }
    const double cur = stress(d, next, w);
    // Guard against rounding-level increases so the trace stays monotone.
    if (cur > prev) {
      out.converged = true;
      break;
    }
    y.swap(next);
    out.trace.push_back(cur);
    const double rel = (prev - cur) / prev;
    prev = cur;
    if (rel < cfg.rel_tol) {
      out.converged = true;
      break;
    }
  }
  out.coords = std::move(y);
  out.stress = prev;
  return out;
}

inline Embedding smacof(const DistanceMatrix& d, const MdsConfig& cfg,
                        const std::optional<Matrix>& init = std::nullopt) {
  return smacof(d.values, cfg, init);
}

}  // namespace heatgeo
