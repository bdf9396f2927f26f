#pragma once

#include "heatgeo/core.hpp"
#include "heatgeo/graph.hpp"
#include "heatgeo/heat.hpp"

#include <cmath>
#include <string>

// =============================================================================
// Dissimilarities built from diffusion operators.
//
//   heat-geodesic   d_t(i,j)^2 = -4t log h_ij - sigma 4t log(2 / (h_ii + h_jj))
//   triplet         DT(i,j) = || D(i,.) - D(j,.) ||_2
//   diffusion map   DM(i,j)^2 = sum_k (P^t_ik - P^t_jk)^2 / pi_k
//   PHATE potential PH(i,j) = || log P^t(i,.) - log P^t(j,.) ||_2
//
// Every kernel entry is floored (default 1e-12) before a log. Polynomial
// heat approximations ring slightly below zero far from the diagonal; the
// floor turns those into a saturated, finite distance.
// =============================================================================

namespace heatgeo {

enum class DistanceSource {
  HeatGeodesic,
  Triplet,
  DiffusionMap,
  PhatePotential,
  ShortestPath,
  GroundTruth,
  Embedding,
  External
};

inline const char* to_string(DistanceSource s) {
  switch (s) {
    case DistanceSource::HeatGeodesic: return "heat-geodesic";
    case DistanceSource::Triplet: return "triplet";
    case DistanceSource::DiffusionMap: return "diffusion-map";
    case DistanceSource::PhatePotential: return "phate-potential";
    case DistanceSource::ShortestPath: return "shortest-path";
    case DistanceSource::GroundTruth: return "ground-truth";
    case DistanceSource::Embedding: return "embedding";
    case DistanceSource::External: return "external";
  }
  return "unknown";
}

/// Dense symmetric nonnegative dissimilarity with a zero diagonal.
struct DistanceMatrix {
  Matrix values;
  DistanceSource source = DistanceSource::External;
  double time = 0.0;
  double sigma = 0.0;
  double rho = 0.0;

  Index size() const { return values.rows(); }

  /// Symmetric within 1e-8, exact zero diagonal, finite and nonnegative.
  bool valid() const {
    if (values.rows() != values.cols()) return false;
    if (!values.allFinite() || values.minCoeff() < 0.0) return false;
    if (values.diagonal().cwiseAbs().maxCoeff() != 0.0) return false;
    return max_abs_asymmetry(values) <= 1e-8;
  }
};

struct HarnackParams {
  double sigma = 1.0;   // volume-correction strength
  double rho = 0.0;     // triplet interpolation weight
  double floor = 1e-12; // kernel floor before log

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be >= 0");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("rho must lie in [0, 1]");
    if (!(floor > 0.0)) throw ParameterError("floor must be positive");
  }
};

struct HeatGeodesicResult {
  DistanceMatrix distances;
  Matrix squared;               // s_ij before the square root; diagonal keeps the log-kernel term
  std::size_t floored = 0;      // kernel entries raised to the floor
  std::size_t clamped = 0;      // negative squared dissimilarities set to 0
};

/// Heat-geodesic dissimilarity with Harnack volume correction. Kernels of the
/// random-walk kind are symmetrized by averaging with their transpose first.
inline HeatGeodesicResult heat_geodesic(const HeatKernel& heat, const HarnackParams& params) {
  params.validate();
  const Index n = heat.size();
  if (heat.matrix.cols() != n) throw ParameterError("heat kernel must be square");
  Matrix h = heat.symmetric_kind() ? heat.matrix : Matrix(0.5 * (heat.matrix + heat.matrix.transpose()));

  HeatGeodesicResult out;
  for (Index i = 0; i < h.size(); ++i) {
    double& v = h.data()[i];
    if (!(v >= params.floor)) {
      v = params.floor;
      ++out.floored;
    }
  }
  const double scale = 4.0 * heat.time;
  const Vector diag = h.diagonal();
  Matrix s(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      double v = -scale * std::log(h(i, j));
      if (params.sigma != 0.0) v -= params.sigma * scale * std::log(2.0 / (diag(i) + diag(j)));
      if (i == j) {
        s(i, j) = v;
        continue;
      }
      if (v < 0.0) {
        v = 0.0;
        ++out.clamped;
      }
      s(i, j) = v;
    }
  }
  // Symmetric kernels give a symmetric s up to rounding in h; enforce it.
  s = 0.5 * (s + s.transpose()).eval();
  out.squared = s;
  s.diagonal().setZero();
  out.distances.values = s.cwiseSqrt();
  out.distances.source = DistanceSource::HeatGeodesic;
  out.distances.time = heat.time;
  out.distances.sigma = params.sigma;
  return out;
}

/// Row-difference (triplet) distance of any square matrix.
inline DistanceMatrix triplet_distance(const Matrix& d) {
  if (d.rows() != d.cols()) throw ParameterError("triplet distance needs a square matrix");
  DistanceMatrix out;
  out.values = pairwise_row_distances(d);
  out.source = DistanceSource::Triplet;
  return out;
}

inline DistanceMatrix triplet_distance(const DistanceMatrix& d) {
  auto out = triplet_distance(d.values);
  out.time = d.time;
  out.sigma = d.sigma;
  return out;
}

/// (1 - rho) D + rho DT, entrywise.
inline DistanceMatrix interpolate(const DistanceMatrix& d, const DistanceMatrix& dt, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("rho must lie in [0, 1]");
  if (d.size() != dt.size()) throw ParameterError("interpolate: dimension mismatch");
  DistanceMatrix out = d;
  if (rho == 0.0) return out;
  if (rho == 1.0) {
    out.values = dt.values;
  } else {
    out.values = (1.0 - rho) * d.values + rho * dt.values;
  }
  out.rho = rho;
  return out;
}

/// Dense random-walk matrix P = Q^{-1} W.
inline Matrix random_walk_matrix(const SparseMatrix& w) {
  const Vector deg = w * Vector::Ones(w.cols());
  for (Index i = 0; i < deg.size(); ++i)
    if (!(deg(i) > 0.0)) throw ParameterError("vertex " + std::to_string(i) + " has zero degree");
  return deg.cwiseInverse().asDiagonal() * Matrix(w);
}

/// P^t for a nonnegative integer t.
inline Matrix random_walk_power(const SparseMatrix& w, int t) {
  if (t < 0) throw ParameterError("random-walk power must be nonnegative");
  const Vector deg = w * Vector::Ones(w.cols());
  const SparseMatrix p = SparseMatrix(deg.cwiseInverse().asDiagonal() * w);
  Matrix out = Matrix::Identity(w.rows(), w.cols());
  for (int k = 0; k < t; ++k) out = (p.transpose() * out.transpose()).transpose();
  return out;
}

enum class DiffusionWeighting {
  Standard,  // sum diff^2 / pi
  Literal    // || diff / pi ||^2, elementwise division before the norm
};

inline DistanceMatrix diffusion_map_distance(const SparseMatrix& w, int t,
                                             DiffusionWeighting weighting = DiffusionWeighting::Standard) {
  if (t < 1) throw ParameterError("diffusion-map time must be a positive integer");
  int ncomp = 0;
  connected_components(w, &ncomp);
  if (ncomp != 1)
    throw ParameterError("diffusion-map distance needs a connected graph (" + std::to_string(ncomp) +
                         " components)");
  const Vector deg = w * Vector::Ones(w.cols());
  const Vector pi = deg / deg.sum();
  const Matrix pt = random_walk_power(w, t);
  const Vector scale = weighting == DiffusionWeighting::Standard ? Vector(pi.cwiseSqrt().cwiseInverse())
                                                                 : Vector(pi.cwiseInverse());
  DistanceMatrix out;
  out.values = pairwise_row_distances(pt * scale.asDiagonal());
  out.source = DistanceSource::DiffusionMap;
  out.time = t;
  return out;
}

/// PHATE potential distance of a diffusion operator (rows = distributions).
inline DistanceMatrix phate_potential(const Matrix& diffusion, double floor = 1e-12) {
  if (diffusion.rows() != diffusion.cols()) throw ParameterError("phate potential: square matrix expected");
  if (!(floor > 0.0)) throw ParameterError("floor must be positive");
  const Matrix logs = diffusion.cwiseMax(floor).array().log().matrix();
  DistanceMatrix out;
  out.values = pairwise_row_distances(logs);
  out.source = DistanceSource::PhatePotential;
  return out;
}

inline DistanceMatrix phate_potential(const HeatKernel& heat, double floor = 1e-12) {
  auto out = phate_potential(heat.matrix, floor);
  out.time = heat.time;
  return out;
}

/// Poisson pmf m_t(k) = t^k e^{-t} / k!.
inline double poisson_pmf(double t, int k) {
  if (t == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(t) - t - std::lgamma(k + 1.0));
}

/// Truncation order whose Poisson tail mass is negligible (< 1e-10 in practice).
inline int poisson_truncation(double t) {
  return static_cast<int>(std::ceil(t + 12.0 * std::sqrt(t) + 20.0));
}

struct MultiscaleKernel {
  Matrix kernel;
  double tail_mass = 0.0;
  int max_order = 0;
};

/// sum_{k<=kmax} m_t(k) P^k, which converges to exp(-t L_rw).
inline MultiscaleKernel poisson_multiscale_kernel(const SparseMatrix& w, double t, int kmax) {
  detail::check_time(t);
  if (kmax < 0) throw ParameterError("kmax must be nonnegative");
  const Index n = w.rows();
  const Vector deg = w * Vector::Ones(n);
  for (Index i = 0; i < n; ++i)
    if (!(deg(i) > 0.0)) throw ParameterError("vertex " + std::to_string(i) + " has zero degree");
  const SparseMatrix pt = SparseMatrix(deg.cwiseInverse().asDiagonal() * w).transpose();

  MultiscaleKernel out;
  out.max_order = kmax;
  // Accumulate transposes so each step is a sparse-times-dense product.
  Matrix power_t = Matrix::Identity(n, n);
  Matrix acc_t = poisson_pmf(t, 0) * power_t;
  double mass = poisson_pmf(t, 0);
  for (int k = 1; k <= kmax; ++k) {
    power_t = pt * power_t;
    const double m = poisson_pmf(t, k);
    acc_t += m * power_t;
    mass += m;
  }
  out.kernel = acc_t.transpose();
  out.tail_mass = std::max(0.0, 1.0 - mass);
  return out;
}

}  // namespace heatgeo
