#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace heatgeo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

/// Bad input or configuration supplied by the caller.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical stage failed (factorization, convergence, spectral bounds).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed external data (CSV, binary kernels).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n x d observations with optional integer labels and timepoint tags.
struct PointCloud {
  Matrix data;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<int>> timepoints;

  Index size() const { return data.rows(); }
  Index dim() const { return data.cols(); }

  void validate() const {
    if (data.rows() < 2) throw ParameterError("point cloud needs at least 2 points");
    if (data.cols() < 1) throw ParameterError("point cloud needs at least 1 dimension");
    if (!data.allFinite()) throw ParameterError("point cloud contains non-finite entries");
    auto n = static_cast<std::size_t>(data.rows());
    if (labels && labels->size() != n)
      throw ParameterError("labels length does not match number of points");
    if (timepoints && timepoints->size() != n)
      throw ParameterError("timepoints length does not match number of points");
  }
};

inline double max_abs_asymmetry(const Matrix& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Squared row distances by direct differences (no Gram shortcut), so the
/// result is exactly symmetric and free of cancellation for close points.
inline Matrix pairwise_squared_distances(const Matrix& x) {
  const Index n = x.rows();
  const Matrix cols = x.transpose();
  Matrix out = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double v = (cols.col(i) - cols.col(j)).squaredNorm();
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

/// Exact row-difference distances ||x_i - x_j||, evaluated without the Gram
/// shortcut so identical rows give exactly 0.
inline Matrix pairwise_row_distances(const Matrix& x) {
  const Index n = x.rows();
  const Matrix cols = x.transpose();
  Matrix out = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double v = (cols.col(i) - cols.col(j)).norm();
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

}  // namespace heatgeo
