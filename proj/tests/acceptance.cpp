// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "heatgeo/heatgeo.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

using namespace heatgeo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt("%.3f", v[i]);
  return s + "]";
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double pearson_to(const Matrix& truth, const Matrix& est) { return row_correlations(truth, est).pearson; }

SparseMatrix cycle(int n) {
  SparseMatrix w(n, n);
  for (int i = 0; i < n; ++i) {
    w.insert(i, (i + 1) % n) = 1;
    w.insert((i + 1) % n, i) = 1;
  }
  return w;
}

// Connected k-NN graph on Gaussian points; resamples until connected.
Adjacency random_knn_graph(Index n, std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed, 100 + attempt);
    PointCloud pc;
    pc.data.resize(n, 3);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < 3; ++j) pc.data(i, j) = rng.normal();
    auto adj = build_knn_graph(pc, 5);
    if (adj.connected()) return adj;
  }
}

// ---------------------------------------------------------------------------

void swiss_roll_recovery() {
  const auto t0 = Clock::now();
  std::vector<double> hg, sp;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = swiss_roll({500, 0.1, 10, false, seed});
    hg.push_back(pearson_to(data.geodesics.values, heatgeo_distances(data.cloud, {}).distances.values));
    sp.push_back(pearson_to(data.geodesics.values, shortest_path_baseline(build_knn_graph(data.cloud, 10)).values));
  }
  const double secs = seconds_since(t0);
  const double m = mean(hg), b = mean(sp);
  report(1, "swiss roll distance recovery", m >= 0.95 && m >= b - 0.05 && secs < 60.0,
         fmt("heatgeo mean pearson %.4f %s (need >= 0.95 and >= shortest path %.4f - 0.05), %.1f s (< 60 s)", m,
             list(hg).c_str(), b, secs));
}

void noisy_swiss_roll() {
  std::vector<double> hg, ph;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = swiss_roll({500, 1.0, 10, false, seed});
    hg.push_back(pearson_to(data.geodesics.values, heatgeo_distances(data.cloud, {}).distances.values));
    MethodConfig mc;
    mc.method = Method::PhatePotential;
    ph.push_back(pearson_to(data.geodesics.values, method_distances(data.cloud, mc).values));
  }
  const double m = mean(hg), b = mean(ph);
  report(2, "noisy swiss roll", m >= 0.55 && m <= 0.90 && m > b,
         fmt("heatgeo mean pearson %.4f %s (need in [0.55, 0.90] and > phate potential %.4f %s)", m,
             list(hg).c_str(), b, list(ph).c_str()));
}

// Hyperparameters chosen on validation seeds 0-4, scored on test seeds 5-9.
struct GridScores {
  std::map<std::string, std::vector<std::optional<double>>> pearson, spearman;

  void add(const std::string& key, int seed, std::optional<std::pair<double, double>> v) {
    auto& p = pearson[key];
    auto& s = spearman[key];
    p.resize(10);
    s.resize(10);
    if (v) {
      p[seed] = v->first;
      s[seed] = v->second;
    }
  }

  // best validation config -> (config, test pearson mean, test spearman mean, test count)
  std::tuple<std::string, double, double, int> select() const {
    std::string best;
    double best_score = -1e300;
    for (const auto& [key, v] : pearson) {
      std::vector<double> val;
      bool ok = true;
      for (int s = 0; s < 5; ++s) {
        if (v[s]) val.push_back(*v[s]);
        else ok = false;
      }
      if (ok && mean(val) > best_score) {
        best_score = mean(val);
        best = key;
      }
    }
    if (best.empty()) return {"none", std::nan(""), std::nan(""), 0};
    std::vector<double> p, s;
    for (int seed = 5; seed < 10; ++seed)
      if (pearson.at(best)[seed]) {
        p.push_back(*pearson.at(best)[seed]);
        s.push_back(*spearman.at(best)[seed]);
      }
    return {best, mean(p), mean(s), static_cast<int>(p.size())};
  }
};

void tree_recovery() {
  const auto t0 = Clock::now();
  GridScores heat, dm;
  const std::vector<double> times = {0.1, 1.0, 10.0, 50.0};
  for (int seed = 0; seed < 10; ++seed) {
    const auto data = tree({100, 5, 5, 5.0, 2.0, static_cast<std::uint64_t>(seed)});
    const Matrix& g = data.geodesics.values;
    for (int k : {5, 10, 15}) {
      const auto adj = build_knn_graph(data.cloud, k);
      const auto lap = laplacian(adj, LaplacianKind::Combinatorial);
      auto kernels = chebyshev_heat(lap, times, kDefaultChebyshevOrder);
      const auto sel = select_time_knee(lap, default_time_grid(), kDefaultChebyshevOrder);
      kernels.push_back(chebyshev_heat(lap, sel.chosen, kDefaultChebyshevOrder));
      for (std::size_t ti = 0; ti < kernels.size(); ++ti)
        for (double sigma : {0.0, 0.5, 1.0, 1.5}) {
          const auto d = heat_geodesic(kernels[ti], {sigma, 0.0, 1e-12}).distances.values;
          const auto r = row_correlations(g, d);
          const std::string t = ti < times.size() ? fmt("%g", times[ti]) : "auto";
          heat.add(fmt("k=%d t=%s sigma=%g", k, t.c_str(), sigma), seed, std::pair{r.pearson, r.spearman});
        }
      for (int t : {1, 5, 10, 20}) {
        std::optional<std::pair<double, double>> v;
        try {
          const auto r = row_correlations(g, diffusion_map_distance(adj.weights, t).values);
          v = std::pair{r.pearson, r.spearman};
        } catch (const ParameterError&) {
          // disconnected graph: the diffusion-map distance is undefined
        }
        dm.add(fmt("k=%d t=%d", k, t), seed, v);
      }
    }
  }
  const auto [hk, hp, hs, hn] = heat.select();
  const auto [dk, dp, ds, dn] = dm.select();
  report(3, "tree distance recovery", std::abs(hp - 0.82) <= 0.10 && hp > dp,
         fmt("test pearson %.4f spearman %.4f over %d seeds with {%s} (need within 0.82 +/- 0.10 and > "
             "diffusion map %.4f over %d seeds with {%s}), %.1f s",
             hp, hs, hn, hk.c_str(), dp, dn, dk.c_str(), seconds_since(t0)));
}

void clustering() {
  std::vector<double> h;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = swiss_roll({500, 0.1, 10, true, seed});
    PipelineConfig cfg;
    cfg.seed = seed;
    const auto r = heatgeo_embed(data.cloud, cfg);
    h.push_back(clustering_scores(r.embedding.coords, *data.cloud.labels, 2, seed).homogeneity);
  }
  report(4, "clustering", mean(h) >= 0.70,
         fmt("mean homogeneity %.4f %s (need >= 0.70)", mean(h), list(h).c_str()));
}

void chebyshev_fidelity() {
  const auto t0 = Clock::now();
  double worst40 = 0.0;
  int monotonicity_violations = 0;
  for (std::uint64_t g = 0; g < 20; ++g) {
    const Index n = 20 + static_cast<Index>(g % 4) * 10;
    const auto lap = laplacian(random_knn_graph(n, g), LaplacianKind::SymmetricNormalized);
    for (double t : {0.5, 5.0, 20.0}) {
      const Matrix exact = exact_heat(lap, t).matrix;
      double prev = std::numeric_limits<double>::infinity();
      for (int k : {5, 10, 20, 40}) {
        const double err = (chebyshev_heat(lap, t, k).matrix - exact).cwiseAbs().maxCoeff();
        if (err > prev + 1e-12) ++monotonicity_violations;
        prev = err;
        if (k == 40) worst40 = std::max(worst40, err);
      }
    }
  }
  const double secs = seconds_since(t0);
  report(5, "chebyshev fidelity", worst40 <= 1e-6 && monotonicity_violations == 0 && secs < 10.0,
         fmt("max error at K=40 %.2e (<= 1e-6), %d increases in K (need 0), %.2f s (< 10 s)", worst40,
             monotonicity_violations, secs));
}

void poisson_identity() {
  double worst = 0.0, worst_tail = 0.0;
  for (std::uint64_t g = 0; g < 10; ++g) {
    const auto adj = random_knn_graph(50, 1000 + g);
    const auto lap = laplacian(adj, LaplacianKind::RandomWalk);
    for (double t : {1.0, 5.0}) {
      const auto mk = poisson_multiscale_kernel(adj.weights, t, poisson_truncation(t));
      worst = std::max(worst, (mk.kernel - exact_heat(lap, t).matrix).cwiseAbs().maxCoeff());
      worst_tail = std::max(worst_tail, mk.tail_mass);
    }
  }
  report(6, "poisson multiscale identity", worst <= 1e-6 && worst_tail < 1e-10,
         fmt("max deviation %.2e (<= 1e-6), max tail mass %.2e (< 1e-10)", worst, worst_tail));
}

void order_preservation() {
  long violations = 0, checked = 0;
  for (int n : {8, 16, 32}) {
    const auto lap = laplacian(cycle(n), LaplacianKind::Combinatorial);
    for (double t : {0.5, 2.0}) {
      const Matrix d = heat_geodesic(exact_heat(lap, t), {0.0, 0.0, 1e-300}).distances.values;
      for (int x = 0; x < n; ++x)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            const int ha = std::min(std::abs(a - x), n - std::abs(a - x));
            const int hb = std::min(std::abs(b - x), n - std::abs(b - x));
            if (ha < hb) {
              ++checked;
              if (!(d(x, a) < d(x, b))) ++violations;
            }
          }
    }
  }
  report(7, "order preservation", violations == 0,
         fmt("%ld violations in %ld ordered comparisons (need 0)", violations, checked));
}

void triplet_robustness() {
  Rng rng(7);
  int violations = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const Index n = 20;
    Matrix d = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = rng.uniform(0.1, 5.0);
    const Matrix dt = triplet_distance(d).values;
    const auto i = rng.integer(0, n - 1);
    auto j = rng.integer(0, n - 2);
    if (j >= i) ++j;
    for (double eps : {0.01, 0.1, 1.0}) {
      Matrix dp = d;
      dp(i, j) += eps;
      dp(j, i) += eps;
      const double lhs = std::pow(triplet_distance(dp).values(i, j) / dt(i, j), 2);
      const double rhs = std::pow((d(i, j) + eps) / d(i, j), 2);
      if (lhs > rhs) ++violations;
    }
  }
  report(8, "triplet robustness", violations == 0, fmt("%d violations in 300 perturbations (need 0)", violations));
}

void knee_quality() {
  std::vector<double> ratios;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = swiss_roll({500, 0.1, 10, false, seed});
    const auto lap = laplacian(build_knn_graph(data.cloud, 10), LaplacianKind::Combinatorial);
    const auto grid = default_time_grid();
    const auto sel = select_time_knee(lap, grid, kDefaultChebyshevOrder);
    const auto kernels = chebyshev_heat(lap, grid, kDefaultChebyshevOrder);
    double best = -1.0, chosen = std::nan("");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double p = pearson_to(data.geodesics.values, heat_geodesic(kernels[i], {1.0, 0.0, 1e-12}).distances.values);
      best = std::max(best, p);
      if (grid[i] == sel.chosen) chosen = p;
    }
    ratios.push_back(chosen / best);
    detail += fmt("%s t=%.3g %.3f/%.3f", seed ? ";" : "", sel.chosen, chosen, best);
  }
  const double worst = *std::min_element(ratios.begin(), ratios.end());
  report(9, "knee time quality", worst >= 0.90,
         fmt("worst knee/best pearson ratio %.4f over 5 seeds (need >= 0.90): %s", worst, detail.c_str()));
}

void smacof_property() {
  Rng rng(99);
  int nonmonotone = 0;
  double worst_realizable = 0.0;
  for (int p = 0; p < 50; ++p) {
    const Index n = 5 + rng.integer(0, 30);
    Matrix x(n, 3);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
    Matrix d = pairwise_row_distances(x);
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = d(i, j) * rng.uniform(0.5, 1.5);
    MdsConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(p);
    const auto e = smacof(d, cfg);
    for (std::size_t k = 1; k < e.trace.size(); ++k)
      if (e.trace[k] > e.trace[k - 1]) {
        ++nonmonotone;
        break;
      }
    Matrix y(n, 2);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < 2; ++j) y(i, j) = rng.normal();
    worst_realizable = std::max(worst_realizable, smacof(pairwise_row_distances(y), cfg).stress);
  }
  report(10, "smacof", nonmonotone == 0 && worst_realizable <= 1e-8,
         fmt("%d of 50 traces increase (need 0); worst realizable stress %.2e (<= 1e-8)", nonmonotone,
             worst_realizable));
}

void eigenmap_coordinates() {
  double worst = 0.0;
  for (std::uint64_t g = 0; g < 10; ++g) {
    const auto lap = laplacian(random_knn_graph(30, 2000 + g), LaplacianKind::Combinatorial);
    const HeatSpectrum eig(lap);
    for (double t : {0.5, 2.0, 8.0}) {
      const Matrix dm = pairwise_row_distances(eig.kernel(t).matrix);
      const Vector decay = (-t * eig.eigenvalues().array()).exp().matrix();
      const Matrix coords = eig.eigenvectors() * decay.asDiagonal();
      worst = std::max(worst, (dm - pairwise_row_distances(coords)).cwiseAbs().maxCoeff());
    }
  }
  report(11, "diffusion distance via eigenmaps", worst <= 1e-8, fmt("max deviation %.2e (<= 1e-8)", worst));
}

void interpolation() {
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto cloud = timepoint_drift({200, 3, 5, 3.0, 1.0, seed});
    PipelineConfig cfg;
    cfg.seed = seed;
    const auto r = heatgeo_embed(cloud, cfg);
    const double emd = interpolation_emd(r.embedding.coords, *cloud.timepoints, 1, seed).emd;
    const double ctl = interpolation_emd_control(r.embedding.coords, *cloud.timepoints, 1, seed).emd;
    ratios.push_back(emd / ctl);
  }
  const double worst = *std::max_element(ratios.begin(), ratios.end());
  report(12, "interpolation emd", worst <= 0.8,
         fmt("emd / shuffled-embedding control per seed %s (need every seed <= 0.8)", list(ratios).c_str()));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {
      swiss_roll_recovery, noisy_swiss_roll,   tree_recovery,  clustering,      chebyshev_fidelity, poisson_identity,
      order_preservation,  triplet_robustness, knee_quality,   smacof_property, eigenmap_coordinates,     interpolation};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), "criterion", false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
