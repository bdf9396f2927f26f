#pragma once

#include "heatgeo/core.hpp"
#include "heatgeo/distance.hpp"
#include "heatgeo/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

// =============================================================================
// Synthetic benchmarks with analytic ground-truth geodesics.
//
// Swiss roll: (t, h) in [3pi/2, 9pi/2] x [0, 5] mapped to (t cos t, h, t sin t).
// The surface is developable, so geodesics are planar distances after
// unrolling t to arc length s(t) = (t sqrt(1 + t^2) + asinh t) / 2.
//
// Tree: Brownian branches (per-step N(0, 2^2) increments per coordinate);
// branches 1.. are translated to start at a random point of branch 0.
// Geodesics accumulate step lengths along the unique path through the glue
// points.
// =============================================================================

namespace heatgeo {

struct GroundTruthBundle {
  PointCloud cloud;
  DistanceMatrix geodesics;
  nlohmann::json params;
};

inline constexpr double kSwissRollT0 = 1.5 * std::numbers::pi;
inline constexpr double kSwissRollT1 = 4.5 * std::numbers::pi;
inline constexpr double kSwissRollWidth = 5.0;

/// Arc length of the spiral r = t from 0 to t.
inline double swiss_roll_arclength(double t) {
  return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t));
}

inline Eigen::Vector3d swiss_roll_map(double t, double h) {
  return {t * std::cos(t), h, t * std::sin(t)};
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of R's diagonal folded into Q.
inline Matrix haar_rotation(Index dim, Rng& rng) {
  Matrix g(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

struct SwissRollParams {
  int n = 500;
  double noise_sd = 0.0;
  int ambient_dim = 3;
  bool clustered = false;
  std::uint64_t seed = 0;
};

inline GroundTruthBundle swiss_roll(const SwissRollParams& p) {
  if (p.n < 10) throw ParameterError("swiss roll needs n >= 10");
  if (p.ambient_dim < 3) throw ParameterError("swiss roll ambient dimension must be >= 3");
  if (!(p.noise_sd >= 0.0)) throw ParameterError("noise_sd must be >= 0");
  const Index n = p.n, dim = p.ambient_dim;
  Rng latent_rng(p.seed, 1), rot_rng(p.seed, 2), noise_rng(p.seed, 3);

  Vector t(n), h(n);
  std::vector<int> labels;
  if (p.clustered) labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (p.clustered) {
      const int c = latent_rng.uniform() < 0.5 ? 0 : 1;
      labels[i] = c;
      t(i) = latent_rng.normal(c == 0 ? 7.0 : 12.0, 1.0);
      h(i) = latent_rng.normal(0.5 * kSwissRollWidth, 1.0);
    } else {
      t(i) = latent_rng.uniform(kSwissRollT0, kSwissRollT1);
      h(i) = latent_rng.uniform(0.0, kSwissRollWidth);
    }
  }

  Matrix x = Matrix::Zero(n, dim);
  for (Index i = 0; i < n; ++i) x.row(i).head<3>() = swiss_roll_map(t(i), h(i)).transpose();
  if (dim > 3) x = x * haar_rotation(dim, rot_rng);
  if (p.noise_sd > 0.0)
    for (Index j = 0; j < dim; ++j)
      for (Index i = 0; i < n; ++i) x(i, j) += noise_rng.normal(0.0, p.noise_sd);

  GroundTruthBundle b;
  b.cloud.data = std::move(x);
  if (p.clustered) b.cloud.labels = std::move(labels);
  Vector s(n);
  for (Index i = 0; i < n; ++i) s(i) = swiss_roll_arclength(t(i));
  b.geodesics.values = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < j; ++i) {
      const double g = std::hypot(s(i) - s(j), h(i) - h(j));
      b.geodesics.values(i, j) = g;
      b.geodesics.values(j, i) = g;
    }
  b.geodesics.source = DistanceSource::GroundTruth;
  b.params = {{"dataset", "swiss-roll"}, {"n", p.n},          {"noise_sd", p.noise_sd},
              {"ambient_dim", p.ambient_dim}, {"clustered", p.clustered}, {"seed", p.seed},
              {"t0", kSwissRollT0},          {"t1", kSwissRollT1},        {"width", kSwissRollWidth}};
  return b;
}

struct TreeParams {
  int branch_len = 500;
  int n_branches = 5;
  int dim = 5;
  double noise_sd = 0.0;
  double step_sd = 2.0;
  std::uint64_t seed = 0;
};

inline GroundTruthBundle tree(const TreeParams& p) {
  if (p.branch_len < 2) throw ParameterError("tree branch length must be >= 2");
  if (p.n_branches < 2) throw ParameterError("tree needs at least 2 branches");
  if (p.dim < 1) throw ParameterError("tree dimension must be >= 1");
  if (!(p.noise_sd >= 0.0)) throw ParameterError("noise_sd must be >= 0");
  const Index len = p.branch_len, nb = p.n_branches, dim = p.dim, n = len * nb;
  Rng walk_rng(p.seed, 1), glue_rng(p.seed, 2), noise_rng(p.seed, 3);

  Matrix x(n, dim);
  Matrix arclen(nb, len);  // cumulative step length from the branch start
  std::vector<Index> glue(static_cast<std::size_t>(nb), 0);
  for (Index b = 0; b < nb; ++b) {
    Vector pos = Vector::Zero(dim);
    if (b > 0) {
      glue[b] = glue_rng.integer(0, len - 1);
      pos = x.row(glue[b]).transpose();  // branch 0 occupies rows [0, len)
    }
    x.row(b * len) = pos.transpose();
    arclen(b, 0) = 0.0;
    for (Index i = 1; i < len; ++i) {
      Vector step(dim);
      for (Index j = 0; j < dim; ++j) step(j) = walk_rng.normal(0.0, p.step_sd);
      pos += step;
      x.row(b * len + i) = pos.transpose();
      arclen(b, i) = arclen(b, i - 1) + step.norm();
    }
  }

  // Distance from (branch a, index i) to the main-branch position m.
  auto to_main = [&](Index a, Index i, Index m) {
    if (a == 0) return std::abs(arclen(0, i) - arclen(0, m));
    return arclen(a, i) + std::abs(arclen(0, glue[a]) - arclen(0, m));
  };
  GroundTruthBundle bundle;
  bundle.geodesics.values = Matrix::Zero(n, n);
  for (Index a = 0; a < nb; ++a)
    for (Index i = 0; i < len; ++i)
      for (Index b = 0; b < nb; ++b)
        for (Index j = 0; j < len; ++j) {
          double g;
          if (a == b) {
            g = std::abs(arclen(a, i) - arclen(a, j));
          } else if (b == 0) {
            g = to_main(a, i, j);
          } else {
            g = arclen(b, j) + to_main(a, i, glue[b]);
          }
          bundle.geodesics.values(a * len + i, b * len + j) = g;
        }
  // mirror so rounding cannot break exact symmetry
  bundle.geodesics.values = bundle.geodesics.values.triangularView<Eigen::Upper>();
  bundle.geodesics.values.triangularView<Eigen::StrictlyLower>() = bundle.geodesics.values.transpose();
  bundle.geodesics.source = DistanceSource::GroundTruth;

  if (p.noise_sd > 0.0)
    for (Index j = 0; j < dim; ++j)
      for (Index i = 0; i < n; ++i) x(i, j) += noise_rng.normal(0.0, p.noise_sd);

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i / len);
  bundle.cloud.data = std::move(x);
  bundle.cloud.labels = std::move(labels);
  std::vector<Index> glue_json(glue.begin(), glue.end());
  bundle.params = {{"dataset", "tree"}, {"branch_len", p.branch_len}, {"n_branches", p.n_branches},
                   {"dim", p.dim},       {"noise_sd", p.noise_sd},     {"step_sd", p.step_sd},
                   {"seed", p.seed},     {"glue_index", glue_json}};
  return bundle;
}

struct DriftParams {
  int n_per_time = 200;
  int n_times = 3;
  int dim = 5;
  double drift_step = 3.0;
  double spread = 1.0;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian blobs whose mean moves drift_step along the first axis
/// per timepoint. Timepoints are 0..n_times-1.
inline PointCloud timepoint_drift(const DriftParams& p) {
  if (p.n_times < 3) throw ParameterError("timepoint drift needs at least 3 timepoints");
  if (p.n_per_time < 1) throw ParameterError("n_per_time must be positive");
  if (p.dim < 1) throw ParameterError("dimension must be >= 1");
  const Index n = static_cast<Index>(p.n_per_time) * p.n_times;
  Rng rng(p.seed, 1);
  PointCloud c;
  c.data.resize(n, p.dim);
  std::vector<int> tp(static_cast<std::size_t>(n));
  for (int time = 0; time < p.n_times; ++time)
    for (int k = 0; k < p.n_per_time; ++k) {
      const Index i = static_cast<Index>(time) * p.n_per_time + k;
      tp[i] = time;
      for (Index j = 0; j < p.dim; ++j)
        c.data(i, j) = rng.normal(j == 0 ? p.drift_step * time : 0.0, p.spread);
    }
  c.timepoints = std::move(tp);
  return c;
}

}  // namespace heatgeo
