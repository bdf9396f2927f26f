#pragma once

#include "heatgeo/core.hpp"
#include "heatgeo/distance.hpp"
#include "heatgeo/graph.hpp"
#include "heatgeo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace heatgeo {

// ---------------------------------------------------------------------------
// Distance-recovery scores
// ---------------------------------------------------------------------------

struct RowCorrelations {
  double pearson = 0.0;
  double spearman = 0.0;
  std::size_t constant_rows = 0;  // rows whose correlation was defined as 0
};

namespace detail {

inline void check_same_square(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols()) throw ParameterError("matrices must be square");
  if (a.rows() != b.rows()) throw ParameterError("matrix dimensions differ");
}

/// Pearson correlation; nullopt when either vector is constant.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace detail

/// Ranks starting at 1; ties receive their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Mean per-row Pearson and Spearman correlation, diagonal excluded.
inline RowCorrelations row_correlations(const Matrix& d, const Matrix& dhat) {
  detail::check_same_square(d, dhat);
  const Index n = d.rows();
  if (n < 3) throw ParameterError("row correlations need n >= 3");
  RowCorrelations out;
  std::vector<double> a(static_cast<std::size_t>(n - 1)), b(a.size());
  for (Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      a[c] = d(i, j);
      b[c] = dhat(i, j);
      ++c;
    }
    const auto p = detail::pearson(a, b);
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const auto s = detail::pearson(ra, rb);
    if (!p || !s) ++out.constant_rows;
    out.pearson += p.value_or(0.0);
    out.spearman += s.value_or(0.0);
  }
  out.pearson /= static_cast<double>(n);
  out.spearman /= static_cast<double>(n);
  return out;
}

inline RowCorrelations row_correlations(const DistanceMatrix& d, const DistanceMatrix& dhat) {
  return row_correlations(d.values, dhat.values);
}

struct NormDiffs {
  double frob = 0.0;  // of D/||D||_F - Dhat/||Dhat||_F
  double max = 0.0;
  double raw_frob = 0.0;
  double raw_max = 0.0;
  bool normalized = true;  // false when either matrix is all zero
};

inline NormDiffs norm_diffs(const Matrix& d, const Matrix& dhat) {
  detail::check_same_square(d, dhat);
  NormDiffs out;
  const Matrix diff = d - dhat;
  out.raw_frob = diff.norm();
  out.raw_max = diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0;
  const double nd = d.norm(), nh = dhat.norm();
  if (!(nd > 0.0) || !(nh > 0.0)) {
    out.normalized = false;
    out.frob = out.raw_frob;
    out.max = out.raw_max;
    return out;
  }
  const Matrix nd_diff = d / nd - dhat / nh;
  out.frob = nd_diff.norm();
  out.max = nd_diff.cwiseAbs().maxCoeff();
  return out;
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeds, best inertia over `restarts`.
inline KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts = 10,
                           int max_iters = 300) {
  const Index n = x.rows();
  if (k < 1) throw ParameterError("k-means needs k >= 1");
  if (k >= n) throw ParameterError("n_clusters must be smaller than n");
  if (restarts < 1) throw ParameterError("restarts must be >= 1");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(seed, 0x6b6d + static_cast<std::uint64_t>(r));
    Matrix c(k, x.cols());
    c.row(0) = x.row(rng.integer(0, n - 1));
    Vector dmin = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
    for (int j = 1; j < k; ++j) {
      const double total = dmin.sum();
      Index pick = 0;
      if (total > 0.0) {
        double u = rng.uniform(0.0, total);
        for (pick = 0; pick < n - 1; ++pick) {
          u -= dmin(pick);
          if (u < 0.0) break;
        }
      } else {
        pick = rng.integer(0, n - 1);
      }
      c.row(j) = x.row(pick);
      dmin = dmin.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
    }

    std::vector<int> lab(static_cast<std::size_t>(n), -1);
    double inertia = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      bool changed = false;
      inertia = 0.0;
      for (Index i = 0; i < n; ++i) {
        int arg = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
          const double dd = (x.row(i) - c.row(j)).squaredNorm();
          if (dd < bd) {
            bd = dd;
            arg = j;
          }
        }
        if (lab[i] != arg) changed = true;
        lab[i] = arg;
        inertia += bd;
      }
      if (!changed && it > 0) break;
      Matrix sum = Matrix::Zero(k, x.cols());
      std::vector<Index> count(static_cast<std::size_t>(k), 0);
      for (Index i = 0; i < n; ++i) {
        sum.row(lab[i]) += x.row(i);
        ++count[lab[i]];
      }
      for (int j = 0; j < k; ++j)
        if (count[j] > 0) c.row(j) = sum.row(j) / static_cast<double>(count[j]);
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = lab;
      best.centers = c;
    }
  }
  return best;
}

namespace detail {

struct Contingency {
  std::vector<std::vector<double>> table;  // classes x clusters
  std::vector<double> a, b;                // row and column sums
  double n = 0.0;
};

inline Contingency contingency(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw ParameterError("label vectors differ in length");
  if (truth.empty()) throw ParameterError("label vectors are empty");
  std::map<int, std::size_t> ti, pi;
  for (int v : truth) ti.emplace(v, 0);
  for (int v : pred) pi.emplace(v, 0);
  std::size_t c = 0;
  for (auto& [k, v] : ti) v = c++;
  c = 0;
  for (auto& [k, v] : pi) v = c++;
  Contingency out;
  out.table.assign(ti.size(), std::vector<double>(pi.size(), 0.0));
  for (std::size_t i = 0; i < truth.size(); ++i) out.table[ti[truth[i]]][pi[pred[i]]] += 1.0;
  out.a.assign(ti.size(), 0.0);
  out.b.assign(pi.size(), 0.0);
  for (std::size_t r = 0; r < ti.size(); ++r)
    for (std::size_t s = 0; s < pi.size(); ++s) {
      out.a[r] += out.table[r][s];
      out.b[s] += out.table[r][s];
    }
  out.n = static_cast<double>(truth.size());
  return out;
}

inline double entropy_counts(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  return h;
}

inline double mutual_information(const Contingency& ct) {
  double mi = 0.0;
  for (std::size_t r = 0; r < ct.a.size(); ++r)
    for (std::size_t s = 0; s < ct.b.size(); ++s) {
      const double nij = ct.table[r][s];
      if (nij > 0.0) mi += (nij / ct.n) * std::log(ct.n * nij / (ct.a[r] * ct.b[s]));
    }
  return mi;
}

/// Expected mutual information under the hypergeometric permutation model.
inline double expected_mutual_information(const Contingency& ct) {
  const double n = ct.n;
  double emi = 0.0;
  for (double ai : ct.a)
    for (double bj : ct.b) {
      const double lo = std::max(1.0, ai + bj - n), hi = std::min(ai, bj);
      for (double nij = lo; nij <= hi; nij += 1.0) {
        const double logp = std::lgamma(ai + 1) + std::lgamma(bj + 1) + std::lgamma(n - ai + 1) +
                            std::lgamma(n - bj + 1) - std::lgamma(n + 1) - std::lgamma(nij + 1) -
                            std::lgamma(ai - nij + 1) - std::lgamma(bj - nij + 1) -
                            std::lgamma(n - ai - bj + nij + 1);
        emi += (nij / n) * std::log(n * nij / (ai * bj)) * std::exp(logp);
      }
    }
  return emi;
}

}  // namespace detail

/// 1 - H(C|K)/H(C); 1 when the true labeling has a single class.
inline double homogeneity(std::span<const int> truth, std::span<const int> pred) {
  const auto ct = detail::contingency(truth, pred);
  const double hc = detail::entropy_counts(ct.a, ct.n);
  if (hc == 0.0) return 1.0;
  return detail::mutual_information(ct) / hc;
}

/// Adjusted mutual information with arithmetic-mean normalization.
inline double adjusted_mutual_info(std::span<const int> truth, std::span<const int> pred) {
  const auto ct = detail::contingency(truth, pred);
  if ((ct.a.size() == 1 && ct.b.size() == 1) || (ct.a.size() == ct.n && ct.b.size() == ct.n)) return 1.0;
  const double mi = detail::mutual_information(ct);
  const double emi = detail::expected_mutual_information(ct);
  const double hu = detail::entropy_counts(ct.a, ct.n), hv = detail::entropy_counts(ct.b, ct.n);
  double denom = 0.5 * (hu + hv) - emi;
  const double tiny = std::numeric_limits<double>::epsilon();
  if (std::abs(denom) < tiny) denom = denom < 0.0 ? -tiny : tiny;
  return (mi - emi) / denom;
}

inline double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred) {
  const auto ct = detail::contingency(truth, pred);
  auto c2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& row : ct.table)
    for (double v : row) sum_ij += c2(v);
  for (double v : ct.a) sum_a += c2(v);
  for (double v : ct.b) sum_b += c2(v);
  const double expected = sum_a * sum_b / c2(ct.n);
  const double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) return 1.0;
  return (sum_ij - expected) / (maximum - expected);
}

struct ClusteringScores {
  double homogeneity = 0.0;
  double ami = 0.0;
  double ari = 0.0;
  std::vector<int> predicted;
};

/// k-means on the embedding coordinates, scored against the true labels.
inline ClusteringScores clustering_scores(const Matrix& coords, std::span<const int> truth, int n_clusters,
                                          std::uint64_t seed) {
  if (n_clusters < 2) throw ParameterError("n_clusters must be >= 2");
  if (static_cast<Index>(truth.size()) != coords.rows()) throw ParameterError("labels do not match embedding size");
  if (n_clusters >= coords.rows()) throw ParameterError("n_clusters must be smaller than n");
  if (std::set<int>(truth.begin(), truth.end()).size() < 2)
    throw ParameterError("true labels must cover at least 2 classes");
  ClusteringScores s;
  s.predicted = kmeans(coords, n_clusters, seed).labels;
  s.homogeneity = homogeneity(truth, s.predicted);
  s.ami = adjusted_mutual_info(truth, s.predicted);
  s.ari = adjusted_rand_index(truth, s.predicted);
  return s;
}

// ---------------------------------------------------------------------------
// Optimal assignment and transport
// ---------------------------------------------------------------------------

/// Minimum-cost perfect matching of a square cost matrix (Hungarian method
/// with potentials, O(n^3)). Returns assignment[row] = column.
inline std::vector<Index> hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ParameterError("assignment cost must be square");
  if (!cost.allFinite()) throw ParameterError("assignment cost must be finite");
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<Index> assignment(static_cast<std::size_t>(n), 0);
  for (Index j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

/// Cross Euclidean (or squared Euclidean) distances between rows of a and b.
inline Matrix cross_distances(const Matrix& a, const Matrix& b, bool squared = false) {
  if (a.cols() != b.cols()) throw ParameterError("point sets differ in dimension");
  Matrix c(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j)
    for (Index i = 0; i < a.rows(); ++i) {
      const double d2 = (a.row(i) - b.row(j)).squaredNorm();
      c(i, j) = squared ? d2 : std::sqrt(d2);
    }
  return c;
}

/// Earth mover's distance between two equal-size uniform point multisets with
/// Euclidean ground metric: mean matched distance of the optimal assignment.
inline double emd_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ParameterError("EMD needs equal-size point sets");
  if (a.rows() == 0) throw ParameterError("EMD of empty point sets");
  const Matrix c = cross_distances(a, b);
  const auto match = hungarian(c);
  double total = 0.0;
  for (Index i = 0; i < a.rows(); ++i) total += c(i, match[i]);
  return total / static_cast<double>(a.rows());
}

namespace detail {

inline Matrix subsample_rows(const Matrix& x, const std::vector<Index>& rows, Index m, Rng& rng) {
  std::vector<Index> pick = rows;
  std::shuffle(pick.begin(), pick.end(), rng.engine());
  pick.resize(static_cast<std::size_t>(m));
  std::sort(pick.begin(), pick.end());
  Matrix out(m, x.cols());
  for (Index i = 0; i < m; ++i) out.row(i) = x.row(pick[i]);
  return out;
}

}  // namespace detail

struct InterpolationResult {
  double emd = 0.0;
  Index sample_size = 0;
  Matrix predicted;
};

namespace detail {

// Midpoint prediction from `source`, scored against held-out rows of `truth`.
inline InterpolationResult interpolate_and_score(const Matrix& source, const Matrix& truth,
                                                 std::span<const int> timepoints, int held_out, std::uint64_t seed,
                                                 Index cap) {
  if (static_cast<Index>(timepoints.size()) != source.rows())
    throw ParameterError("timepoints do not match embedding size");
  if (cap < 1) throw ParameterError("subsample cap must be positive");
  std::set<int> times(timepoints.begin(), timepoints.end());
  auto it = times.find(held_out);
  if (it == times.end()) throw ParameterError("held-out timepoint " + std::to_string(held_out) + " not present");
  if (it == times.begin() || std::next(it) == times.end())
    throw ParameterError("held-out timepoint " + std::to_string(held_out) + " lacks an adjacent timepoint");
  const int before = *std::prev(it), after = *std::next(it);
  std::vector<Index> rb, rh, ra;
  for (Index i = 0; i < source.rows(); ++i) {
    if (timepoints[i] == before) rb.push_back(i);
    if (timepoints[i] == held_out) rh.push_back(i);
    if (timepoints[i] == after) ra.push_back(i);
  }
  const Index m = std::min({static_cast<Index>(rb.size()), static_cast<Index>(ra.size()),
                            static_cast<Index>(rh.size()), cap});
  Rng rng(seed, 0x656d64);
  const Matrix xb = subsample_rows(source, rb, m, rng);
  const Matrix xa = subsample_rows(source, ra, m, rng);
  const Matrix xh = subsample_rows(truth, rh, m, rng);
  const auto match = hungarian(cross_distances(xb, xa, true));
  InterpolationResult out;
  out.sample_size = m;
  out.predicted.resize(m, source.cols());
  for (Index i = 0; i < m; ++i) out.predicted.row(i) = 0.5 * (xb.row(i) + xa.row(match[i]));
  out.emd = emd_equal(out.predicted, xh);
  return out;
}

}  // namespace detail

/// Held-out timepoint prediction by McCann midpoint interpolation between the
/// adjacent timepoints, scored by EMD against the true held-out points.
inline InterpolationResult interpolation_emd(const Matrix& coords, std::span<const int> timepoints, int held_out,
                                             std::uint64_t seed, Index cap = 500) {
  return detail::interpolate_and_score(coords, coords, timepoints, held_out, seed, cap);
}

/// Embedding rows permuted across points, which breaks the link between
/// coordinates and timepoints.
inline Matrix shuffled_rows(const Matrix& coords, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(coords.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed, 0x73687566);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  Matrix out(coords.rows(), coords.cols());
  for (Index i = 0; i < coords.rows(); ++i) out.row(i) = coords.row(perm[i]);
  return out;
}

/// Shuffled-embedding control: the prediction is built from a row-shuffled
/// copy of the embedding, the held-out truth from the embedding itself.
inline InterpolationResult interpolation_emd_control(const Matrix& coords, std::span<const int> timepoints,
                                                     int held_out, std::uint64_t seed, Index cap = 500) {
  return detail::interpolate_and_score(shuffled_rows(coords, seed), coords, timepoints, held_out, seed, cap);
}

// ---------------------------------------------------------------------------
// Shortest-path baseline
// ---------------------------------------------------------------------------

/// All-pairs Dijkstra over a sparse matrix of nonnegative edge lengths.
inline DistanceMatrix shortest_path_baseline(const SparseMatrix& lengths) {
  const Index n = lengths.rows();
  if (lengths.cols() != n) throw ParameterError("edge-length matrix must be square");
  int ncomp = 0;
  const auto comp = connected_components(lengths, &ncomp);
  if (ncomp != 1) {
    std::string msg = "shortest paths need a connected graph; components:";
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(ncomp));
    for (Index i = 0; i < n; ++i) members[comp[i]].push_back(i);
    for (int c = 0; c < ncomp; ++c) {
      msg += " {";
      const std::size_t shown = std::min<std::size_t>(members[c].size(), 8);
      for (std::size_t k = 0; k < shown; ++k) msg += (k ? "," : "") + std::to_string(members[c][k]);
      if (members[c].size() > shown) msg += ",...";
      msg += "}";
    }
    throw ParameterError(msg);
  }
  DistanceMatrix out;
  out.values.resize(n, n);
  out.source = DistanceSource::ShortestPath;
  using Item = std::pair<double, Index>;
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (Index s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[s] = 0.0;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
      const auto [du, u] = pq.top();
      pq.pop();
      if (du > dist[u]) continue;
      for (SparseMatrix::InnerIterator it(lengths, u); it; ++it) {
        const double nd = du + it.value();
        if (nd < dist[it.row()]) {
          dist[it.row()] = nd;
          pq.emplace(nd, it.row());
        }
      }
    }
    for (Index j = 0; j < n; ++j) out.values(s, j) = dist[j];
  }
  out.values = 0.5 * (out.values + out.values.transpose()).eval();
  out.values.diagonal().setZero();
  return out;
}

inline DistanceMatrix shortest_path_baseline(const Adjacency& adj) { return shortest_path_baseline(adj.distances); }

}  // namespace heatgeo
