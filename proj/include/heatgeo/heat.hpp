#pragma once

#include "heatgeo/core.hpp"
#include "heatgeo/graph.hpp"
#include "heatgeo/kneedle.hpp"
#include "heatgeo/rng.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

// =============================================================================
// Graph heat kernels H_t = exp(-t L).
//
// Three routes:
//   exact      dense eigendecomposition, H_t = Psi exp(-t Lambda) Psi^T
//   chebyshev  H_t ~ b_0/2 + sum_k b_k T_k(L - I) on a spectrum in [0, 2];
//              b_k = 2 (-1)^k e^{-t} I_k(t). The T_k terms do not depend on t,
//              so several times share one polynomial recurrence.
//   euler      K backward-Euler steps, H_t ~ (I + (t/K) L)^{-K}, with one
//              sparse Cholesky factorization reused for every step and column
//
// The combinatorial Laplacian is rescaled to spectrum [0, 2] before the
// Chebyshev expansion: L' = (2/lmax) L, t' = (lmax/2) t.
// =============================================================================

namespace heatgeo {

enum class HeatMethod { Exact, Chebyshev, Euler };

inline const char* to_string(HeatMethod m) {
  switch (m) {
    case HeatMethod::Exact: return "exact";
    case HeatMethod::Chebyshev: return "chebyshev";
    case HeatMethod::Euler: return "euler";
  }
  return "unknown";
}

inline HeatMethod parse_heat_method(const std::string& s) {
  if (s == "exact") return HeatMethod::Exact;
  if (s == "chebyshev" || s == "cheb") return HeatMethod::Chebyshev;
  if (s == "euler") return HeatMethod::Euler;
  throw ParameterError("unknown heat method '" + s + "'");
}

struct HeatKernel {
  Matrix matrix;
  double time = 0.0;
  LaplacianKind kind = LaplacianKind::Combinatorial;
  HeatMethod method = HeatMethod::Exact;
  int order = 0;  // K for the approximations

  Index size() const { return matrix.rows(); }
  bool symmetric_kind() const { return kind != LaplacianKind::RandomWalk; }
};

inline constexpr Index kMaxDenseEigen = 5000;
inline constexpr int kDefaultChebyshevOrder = 30;

namespace detail {

inline void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t))
    throw ParameterError("diffusion time must be a finite nonnegative number");
}

inline void check_symmetric(const SparseMatrix& m) {
  const SparseMatrix diff = m - SparseMatrix(m.transpose());
  double asym = 0.0;
  for (Index c = 0; c < diff.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(diff, c); it; ++it)
      asym = std::max(asym, std::abs(it.value()));
  double scale = 1.0;
  for (Index c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      scale = std::max(scale, std::abs(it.value()));
  if (asym > 1e-12 * scale) throw ParameterError("Laplacian is not symmetric");
}

// L_rw kernels are similarity transforms of the L_sym kernel.
inline void to_random_walk(Matrix& h, const Vector& degrees) {
  const Vector s = degrees.cwiseSqrt();
  h = s.cwiseInverse().asDiagonal() * h * s.asDiagonal();
}

}  // namespace detail

/// e^{-t} I_k(t) for k = 0..order, by Miller's downward recurrence normalized
/// with the identity I_0(t) + 2 sum_{k>=1} I_k(t) = e^t.
inline std::vector<double> scaled_bessel_i(int order, double t) {
  if (order < 0) throw ParameterError("Bessel order must be nonnegative");
  detail::check_time(t);
  std::vector<double> out(static_cast<std::size_t>(order) + 1, 0.0);
  if (t == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const int start = order + static_cast<int>(std::ceil(t + 30.0 * std::sqrt(t + 1.0))) + 40;
  std::vector<double> v(static_cast<std::size_t>(start) + 2, 0.0);
  v[start + 1] = 0.0;
  v[start] = 1e-300;
  double sum = 0.0;
  for (int k = start; k >= 1; --k) {
    v[k - 1] = (2.0 * k / t) * v[k] + v[k + 1];
    if (v[k - 1] > 1e250) {
      for (int j = k - 1; j <= start; ++j) v[j] *= 1e-250;
      sum *= 1e-250;
    }
    sum += 2.0 * v[k];
  }
  sum += v[0];
  for (int k = 0; k <= order; ++k) out[k] = v[k] / sum;
  return out;
}

/// Chebyshev coefficients b_{t,k}, k = 0..order, of exp(-t(y + 1)) on [-1, 1].
inline std::vector<double> chebyshev_heat_coefficients(int order, double t) {
  auto b = scaled_bessel_i(order, t);
  for (std::size_t k = 0; k < b.size(); ++k) b[k] *= (k % 2 == 0 ? 2.0 : -2.0);
  return b;
}

/// Eigendecomposition of a Laplacian, reusable across diffusion times.
class HeatSpectrum {
 public:
  explicit HeatSpectrum(const Laplacian& lap) : kind_(lap.kind), degrees_(lap.degrees) {
    if (lap.size() > kMaxDenseEigen)
      throw ParameterError("exact heat kernel limited to n <= " + std::to_string(kMaxDenseEigen));
    detail::check_symmetric(lap.matrix);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(lap.matrix));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }

  const Vector& eigenvalues() const { return values_; }
  const Matrix& eigenvectors() const { return vectors_; }

  HeatKernel kernel(double t) const {
    detail::check_time(t);
    HeatKernel h;
    h.time = t;
    h.kind = kind_;
    h.method = HeatMethod::Exact;
    const Vector decay = (-t * values_.array()).exp().matrix();
    h.matrix = vectors_ * decay.asDiagonal() * vectors_.transpose();
    if (kind_ == LaplacianKind::RandomWalk) detail::to_random_walk(h.matrix, degrees_);
    return h;
  }

 private:
  LaplacianKind kind_;
  Vector degrees_;
  Vector values_;
  Matrix vectors_;
};

namespace detail {

// e^{-tL} = e^{-tc} e^{t(cI - L)} with cI - L entrywise nonnegative: every
// Taylor term and every squaring adds nonnegative numbers, so even entries far
// below machine epsilon keep full relative accuracy. Returns nullopt when L
// has a positive off-diagonal entry.
inline std::optional<Matrix> nonnegative_expm(const Matrix& l, double t) {
  const Index n = l.rows();
  const double c = l.diagonal().maxCoeff();
  Matrix m = -l;
  m.diagonal().array() += c;
  if (m.minCoeff() < 0.0) return std::nullopt;
  const double norm = m.colwise().sum().maxCoeff();
  int squarings = 0;
  double s = t;
  while (s * norm > 0.5) {
    s *= 0.5;
    ++squarings;
  }
  const Matrix a = s * m;
  Matrix term = Matrix::Identity(n, n);
  Matrix e = term;
  for (int k = 1; k <= 30; ++k) {
    term = (a * term) / static_cast<double>(k);
    e += term;
    if (k >= 24 && term.maxCoeff() <= 1e-18 * e.maxCoeff()) break;
  }
  e *= std::exp(-s * c);
  for (int i = 0; i < squarings; ++i) e = (e * e).eval();
  return Matrix(0.5 * (e + e.transpose()));
}

}  // namespace detail

/// H_t = Psi e^{-t Lambda} Psi^T. Evaluated by scaling and squaring on the
/// nonnegative shift of L (see detail::nonnegative_expm), which agrees with
/// the eigendecomposition to rounding but resolves tiny entries; falls back to
/// the eigendecomposition otherwise.
inline HeatKernel exact_heat(const Laplacian& lap, double t) {
  detail::check_time(t);
  detail::check_symmetric(lap.matrix);
  if (t == 0.0) return HeatKernel{Matrix::Identity(lap.size(), lap.size()), 0.0, lap.kind, HeatMethod::Exact, 0};
  if (lap.size() > kMaxDenseEigen)
    throw ParameterError("exact heat kernel limited to n <= " + std::to_string(kMaxDenseEigen));
  auto h = detail::nonnegative_expm(Matrix(lap.matrix), t);
  if (!h) return HeatSpectrum(lap).kernel(t);
  HeatKernel out{std::move(*h), t, lap.kind, HeatMethod::Exact, 0};
  if (lap.kind == LaplacianKind::RandomWalk) detail::to_random_walk(out.matrix, lap.degrees);
  return out;
}

/// Upper estimate of the largest Laplacian eigenvalue: at least `iterations`
/// power steps, continued until the Rayleigh quotient settles (relative change
/// below 1e-9, at most 5000 steps), inflated by 5% and capped by the
/// Gershgorin bound.
inline double estimate_lambda_max(const SparseMatrix& l, int iterations = 20) {
  const Index n = l.rows();
  double gersh = 0.0;
  Vector absrow = Vector::Zero(n);
  for (Index c = 0; c < l.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(l, c); it; ++it) absrow(it.row()) += std::abs(it.value());
  gersh = absrow.maxCoeff();
  if (!(gersh > 0.0)) return 0.0;

  Rng rng(0x5eed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  v.normalize();
  double rayleigh = 0.0;
  for (int it = 0; it < std::max(iterations, 5000); ++it) {
    Vector w = l * v;
    const double prev = rayleigh;
    rayleigh = v.dot(w);
    const double nw = w.norm();
    if (!(nw > 0.0)) break;
    v = w / nw;
    if (it >= iterations && std::abs(rayleigh - prev) <= 1e-9 * std::abs(rayleigh)) break;
  }
  return std::min(gersh, 1.05 * rayleigh);
}

/// Chebyshev polynomial operator for one Laplacian: the shifted operator
/// A = (2/lmax) L - I (lmax = 2 for the normalized kinds) and its time scale.
class ChebyshevOperator {
 public:
  explicit ChebyshevOperator(const Laplacian& lap) {
    detail::check_symmetric(lap.matrix);
    const Index n = lap.size();
    double scale = 1.0;
    if (lap.kind == LaplacianKind::Combinatorial) {
      lambda_max_ = estimate_lambda_max(lap.matrix);
      if (!(lambda_max_ > 0.0)) lambda_max_ = 2.0;
      scale = 2.0 / lambda_max_;
    } else {
      lambda_max_ = 2.0;
    }
    time_scale_ = 1.0 / scale;
    SparseMatrix eye(n, n);
    eye.setIdentity();
    shifted_ = scale * lap.matrix - eye;
    // Rayleigh check on the rescaled operator: its spectrum must lie in [-1, 1].
    Rng rng(0xc4eb);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
    v.normalize();
    for (int it = 0; it < 20; ++it) {
      Vector w = shifted_ * v + v;
      const double nw = w.norm();
      if (!(nw > 0.0)) break;
      v = w / nw;
    }
    const double top = v.dot(shifted_ * v);
    if (top > 1.0 + 1e-6)
      throw NumericalError("spectral radius exceeds 2 after rescaling (" + std::to_string(top + 1.0) +
                           ")");
  }

  double lambda_max() const { return lambda_max_; }
  double time_scale() const { return time_scale_; }

  /// Apply p_K(L, t) to a block of right-hand sides for every t in `times`.
  std::vector<Matrix> apply(std::span<const double> times, int order, const Matrix& rhs) const {
    if (order < 1) throw ParameterError("Chebyshev order K must be >= 1");
    std::vector<std::vector<double>> coeffs;
    coeffs.reserve(times.size());
    for (double t : times) {
      detail::check_time(t);
      coeffs.push_back(chebyshev_heat_coefficients(order, t * time_scale_));
    }
    std::vector<Matrix> out(times.size());
    for (std::size_t s = 0; s < times.size(); ++s) out[s] = (0.5 * coeffs[s][0]) * rhs;

    Matrix prev = rhs;
    Matrix cur = shifted_ * rhs;
    for (std::size_t s = 0; s < times.size(); ++s) out[s] += coeffs[s][1] * cur;
    for (int k = 2; k <= order; ++k) {
      Matrix next = 2.0 * (shifted_ * cur) - prev;
      prev.swap(cur);
      cur.swap(next);
      for (std::size_t s = 0; s < times.size(); ++s) out[s] += coeffs[s][k] * cur;
    }
    return out;
  }

 private:
  SparseMatrix shifted_;
  double lambda_max_ = 2.0;
  double time_scale_ = 1.0;
};

/// Chebyshev heat kernels for several diffusion times sharing one recurrence.
inline std::vector<HeatKernel> chebyshev_heat(const Laplacian& lap, std::span<const double> times,
                                              int order = kDefaultChebyshevOrder) {
  if (order < 1) throw ParameterError("Chebyshev order K must be >= 1");
  ChebyshevOperator op(lap);
  const Index n = lap.size();
  Matrix rhs = Matrix::Identity(n, n);
  if (lap.kind == LaplacianKind::RandomWalk) {
    // H_rw = Q^{-1/2} H_sym Q^{1/2}; fold the right factor into the rhs.
    rhs = lap.degrees.cwiseSqrt().asDiagonal();
  }
  auto mats = op.apply(times, order, rhs);
  std::vector<HeatKernel> out;
  out.reserve(times.size());
  for (std::size_t s = 0; s < times.size(); ++s) {
    HeatKernel h{std::move(mats[s]), times[s], lap.kind, HeatMethod::Chebyshev, order};
    if (lap.kind == LaplacianKind::RandomWalk)
      h.matrix = lap.degrees.cwiseSqrt().cwiseInverse().asDiagonal() * h.matrix;
    out.push_back(std::move(h));
  }
  return out;
}

inline HeatKernel chebyshev_heat(const Laplacian& lap, double t, int order = kDefaultChebyshevOrder) {
  const double times[] = {t};
  return std::move(chebyshev_heat(lap, std::span<const double>(times, 1), order).front());
}

/// Backward-Euler heat kernel (I + (t/K) L)^{-K}.
inline HeatKernel euler_heat(const Laplacian& lap, double t, int steps) {
  detail::check_time(t);
  if (steps < 1) throw ParameterError("Euler step count K must be >= 1");
  detail::check_symmetric(lap.matrix);
  const Index n = lap.size();
  HeatKernel h{Matrix::Identity(n, n), t, lap.kind, HeatMethod::Euler, steps};
  if (t == 0.0) return h;

  SparseMatrix a(n, n);
  a.setIdentity();
  a += (t / steps) * lap.matrix;
  Eigen::SimplicialLLT<SparseMatrix> chol(a);
  if (chol.info() != Eigen::Success) throw NumericalError("Euler: Cholesky factorization failed");

  Matrix x = h.matrix;
  if (lap.kind == LaplacianKind::RandomWalk) x = lap.degrees.cwiseSqrt().asDiagonal();
  for (int k = 0; k < steps; ++k) {
    Matrix next = chol.solve(x);
    if (chol.info() != Eigen::Success) throw NumericalError("Euler: triangular solve failed");
    const double residual = (a * next - x).norm() / std::max(1.0, x.norm());
    if (!(residual < 1e-8)) {
      std::ostringstream msg;
      msg << "Euler: solve did not converge at step " << k << " (relative residual " << residual
          << ")";
      throw NumericalError(msg.str());
    }
    x.swap(next);
  }
  if (lap.kind == LaplacianKind::RandomWalk)
    x = lap.degrees.cwiseSqrt().cwiseInverse().asDiagonal() * x;
  h.matrix = std::move(x);
  return h;
}

/// Dispatch on the heat method; `order` is the polynomial order or Euler
/// step count and is ignored for the exact route.
inline HeatKernel heat_kernel(const Laplacian& lap, double t, HeatMethod method,
                              int order = kDefaultChebyshevOrder) {
  switch (method) {
    case HeatMethod::Exact: return exact_heat(lap, t);
    case HeatMethod::Chebyshev: return chebyshev_heat(lap, t, order);
    case HeatMethod::Euler: return euler_heat(lap, t, order);
  }
  throw ParameterError("unknown heat method");
}

/// -sum h log h over positive entries; nonpositive entries contribute 0.
inline double entropy_of(const Matrix& m) {
  double s = 0.0;
  const double* p = m.data();
  for (Index i = 0; i < m.size(); ++i)
    if (p[i] > 0.0) s -= p[i] * std::log(p[i]);
  return s;
}

inline double heat_entropy(const HeatKernel& h) { return entropy_of(h.matrix); }

struct TimeSelection {
  std::vector<double> grid;
  std::vector<double> entropies;
  double chosen = 0.0;
  bool knee_found = false;  // false: fell back to the grid midpoint
};

/// `count` log-spaced values in [lo, hi].
inline std::vector<double> log_spaced(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) throw ParameterError("invalid log-spaced grid");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    g[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline std::vector<double> default_time_grid() { return log_spaced(0.05, 200.0, 20); }

/// Entropy of the Chebyshev heat kernel at every grid time. Columns are
/// processed in blocks so only one block per time is held in memory.
inline std::vector<double> chebyshev_entropies(const Laplacian& lap, std::span<const double> grid,
                                               int order, Index block = 256) {
  ChebyshevOperator op(lap);
  const Index n = lap.size();
  std::vector<double> ent(grid.size(), 0.0);
  const Vector sqrt_deg = lap.degrees.cwiseSqrt();
  for (Index c0 = 0; c0 < n; c0 += block) {
    const Index bc = std::min(block, n - c0);
    Matrix rhs = Matrix::Zero(n, bc);
    for (Index j = 0; j < bc; ++j)
      rhs(c0 + j, j) = lap.kind == LaplacianKind::RandomWalk ? sqrt_deg(c0 + j) : 1.0;
    auto cols = op.apply(grid, order, rhs);
    for (std::size_t s = 0; s < grid.size(); ++s) {
      if (lap.kind == LaplacianKind::RandomWalk)
        cols[s] = sqrt_deg.cwiseInverse().asDiagonal() * cols[s];
      ent[s] += entropy_of(cols[s]);
    }
  }
  return ent;
}

/// Pick the diffusion time at the knee of t -> entropy(H_t).
inline TimeSelection select_time_knee(const Laplacian& lap, std::span<const double> grid,
                                      int order = kDefaultChebyshevOrder) {
  if (grid.size() < 5) throw ParameterError("time grid needs at least 5 points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw ParameterError("time grid values must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw ParameterError("time grid must be strictly increasing");
  }
  TimeSelection sel;
  sel.grid.assign(grid.begin(), grid.end());
  sel.entropies = chebyshev_entropies(lap, grid, order);
  const auto knee = find_knee(sel.grid, sel.entropies);
  if (knee.index) {
    sel.chosen = sel.grid[*knee.index];
    sel.knee_found = true;
  } else {
    sel.chosen = sel.grid[sel.grid.size() / 2];
  }
  return sel;
}

}  // namespace heatgeo
