#pragma once

#include "heatgeo/core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

// Knee detection for increasing concave curves (Satopaa et al. "Kneedle").
//
//   1. smooth: shape-preserving monotone cubic (PCHIP) resampled on a uniform
//      x grid with as many points as the input
//   2. normalize x and y to [0, 1]
//   3. difference curve y_d = y_norm - x_norm
//   4. a local maximum of y_d is a knee once y_d falls below
//      y_d(max) - S * mean(diff(x_norm)) before the next local maximum
//
// The knee location is reported as the nearest input abscissa.

namespace heatgeo {

struct KneeResult {
  std::optional<std::size_t> index;  // into the input x
  double x = 0.0;                    // knee abscissa on the smoothed grid
  std::vector<double> difference;    // y_d on the uniform grid
};

namespace detail {

// Fritsch-Carlson slopes for a monotone piecewise cubic Hermite interpolant.
inline std::vector<double> pchip_slopes(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<double> h(n - 1), delta(n - 1), m(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  if (n == 2) {
    m[0] = m[1] = delta[0];
    return m;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      m[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(s) > std::abs(3.0 * d0)) return 3.0 * d0;
    return s;
  };
  m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return m;
}

}  // namespace detail

/// Evaluate the PCHIP interpolant of (x, y) at the points in `at`.
inline std::vector<double> pchip(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> at) {
  const auto m = detail::pchip_slopes(x, y);
  std::vector<double> out;
  out.reserve(at.size());
  for (double q : at) {
    auto it = std::upper_bound(x.begin(), x.end(), q);
    std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
    i = std::min(i, x.size() - 2);
    const double h = x[i + 1] - x[i];
    const double s = (q - x[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    out.push_back((2 * s3 - 3 * s2 + 1) * y[i] + (s3 - 2 * s2 + s) * h * m[i] +
                  (-2 * s3 + 3 * s2) * y[i + 1] + (s3 - s2) * h * m[i + 1]);
  }
  return out;
}

inline KneeResult find_knee(std::span<const double> x, std::span<const double> y,
                            double sensitivity = 1.0) {
  const std::size_t n = x.size();
  if (n != y.size()) throw ParameterError("knee: x and y differ in length");
  if (n < 3) throw ParameterError("knee: need at least 3 points");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x[i] > x[i - 1])) throw ParameterError("knee: x must be strictly increasing");

  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = x.front() + (x.back() - x.front()) * static_cast<double>(i) / static_cast<double>(n - 1);
  xs.back() = x.back();
  std::vector<double> ys = pchip(x, y, xs);

  KneeResult res;
  const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
  const double yrange = *ymax - *ymin;
  const double xrange = xs.back() - xs.front();
  res.difference.assign(n, 0.0);
  if (!(yrange > 0.0)) return res;
  for (std::size_t i = 0; i < n; ++i)
    res.difference[i] = (ys[i] - *ymin) / yrange - (xs[i] - xs.front()) / xrange;

  const auto& yd = res.difference;
  // Flat stretches of the difference curve are numerical ties, not maxima.
  const double tie = 1e-12;
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (yd[i] - yd[i - 1] > -tie && yd[i] - yd[i + 1] > tie && yd[i] > tie) maxima.push_back(i);

  const double step = 1.0 / static_cast<double>(n - 1);  // mean diff of x_norm
  for (std::size_t a = 0; a < maxima.size(); ++a) {
    const std::size_t i = maxima[a];
    const double threshold = yd[i] - sensitivity * step;
    const std::size_t stop = a + 1 < maxima.size() ? maxima[a + 1] : n;
    for (std::size_t j = i + 1; j < stop; ++j) {
      if (yd[j] < threshold) {
        res.x = xs[i];
        std::size_t best = 0;
        for (std::size_t k = 1; k < n; ++k)
          if (std::abs(x[k] - res.x) < std::abs(x[best] - res.x)) best = k;
        res.index = best;
        return res;
      }
    }
  }
  return res;
}

}  // namespace heatgeo
