#pragma once

#include "heatgeo/core.hpp"
#include "heatgeo/distance.hpp"
#include "heatgeo/graph.hpp"
#include "heatgeo/heat.hpp"
#include "heatgeo/mds.hpp"
#include "heatgeo/metrics.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

// End-to-end heat-geodesic embedding:
//   k-NN graph -> Laplacian -> t (knee of the entropy curve unless fixed)
//   -> heat kernel -> heat-geodesic distance -> triplet interpolation -> SMACOF

namespace heatgeo {

/// Which matrix the triplet row-difference is taken of. Squared uses
/// m = -4t log H (- sigma 4t log V), so that rho = 1, sigma = 0 reproduces
/// 4t times the PHATE potential of H_t.
enum class TripletBasis { Squared, Distance };

inline TripletBasis parse_triplet_basis(const std::string& s) {
  if (s == "squared") return TripletBasis::Squared;
  if (s == "distance") return TripletBasis::Distance;
  throw ParameterError("unknown triplet basis '" + s + "' (expected squared or distance)");
}

inline const char* to_string(TripletBasis b) { return b == TripletBasis::Squared ? "squared" : "distance"; }

struct PipelineConfig {
  int knn = 10;
  Bandwidth bandwidth = Bandwidth::adaptive();
  LaplacianKind laplacian = LaplacianKind::Combinatorial;
  HeatMethod method = HeatMethod::Chebyshev;
  int order = kDefaultChebyshevOrder;
  std::optional<double> time;  // nullopt selects t at the entropy knee
  std::vector<double> time_grid = default_time_grid();
  double sigma = 1.0;
  double rho = 0.0;
  TripletBasis triplet_basis = TripletBasis::Squared;
  double floor = 1e-12;
  int dims = 2;
  bool weighted = false;
  int max_iters = 300;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    if (knn < 1) throw ParameterError("knn must be positive");
    if (order < 1) throw ParameterError("order must be >= 1");
    if (time && !(*time > 0.0 && std::isfinite(*time))) throw ParameterError("t must be positive");
    HarnackParams{sigma, rho, floor}.validate();
    if (dims < 1) throw ParameterError("output dimension must be >= 1");
  }
};

struct PipelineResult {
  Embedding embedding;
  DistanceMatrix distances;  // the matrix handed to MDS
  HeatKernel heat;
  std::optional<TimeSelection> selection;
  double time = 0.0;
  std::size_t floored = 0;
  std::size_t clamped = 0;
  int num_components = 0;
  std::size_t floored_bandwidths = 0;
};

/// Heat-geodesic distances (no embedding), shared by the pipeline and the
/// benchmark's distance-only evaluations. `stage`, when given, names the step
/// currently running so callers can report where a failure happened.
inline PipelineResult heatgeo_distances(const PointCloud& points, const PipelineConfig& cfg,
                                        std::string* stage = nullptr) {
  auto enter = [stage](const char* name) {
    if (stage) *stage = name;
  };
  enter("config");
  cfg.validate();
  enter("graph");
  const Adjacency adj = build_knn_graph(points, cfg.knn, cfg.bandwidth);
  enter("laplacian");
  const Laplacian lap = laplacian(adj, cfg.laplacian);

  PipelineResult out;
  out.num_components = adj.num_components;
  out.floored_bandwidths = adj.floored_bandwidths;
  if (cfg.time) {
    out.time = *cfg.time;
  } else {
    enter("time-selection");
    out.selection = select_time_knee(lap, cfg.time_grid, cfg.order);
    out.time = out.selection->chosen;
  }
  enter("heat-kernel");
  out.heat = heat_kernel(lap, out.time, cfg.method, cfg.order);

  enter("heat-geodesic");
  const HarnackParams hp{cfg.sigma, cfg.rho, cfg.floor};
  auto hg = heat_geodesic(out.heat, hp);
  out.floored = hg.floored;
  out.clamped = hg.clamped;
  if (cfg.rho > 0.0) {
    enter("triplet");
    const DistanceMatrix trip = cfg.triplet_basis == TripletBasis::Squared ? triplet_distance(hg.squared)
                                                                           : triplet_distance(hg.distances);
    out.distances = interpolate(hg.distances, trip, cfg.rho);
    out.distances.time = out.time;
    out.distances.sigma = cfg.sigma;
  } else {
    out.distances = std::move(hg.distances);
  }
  return out;
}

/// Heat-kernel MDS weights: symmetrized, negatives from polynomial ringing
/// removed, zero diagonal.
inline Matrix heat_weights(const HeatKernel& heat) {
  Matrix w = 0.5 * (heat.matrix + heat.matrix.transpose());
  w = w.cwiseMax(0.0);
  w.diagonal().setZero();
  return w;
}

inline PipelineResult heatgeo_embed(const PointCloud& points, const PipelineConfig& cfg,
                                    std::string* stage = nullptr) {
  PipelineResult out = heatgeo_distances(points, cfg, stage);
  if (stage) *stage = "mds";
  MdsConfig mc;
  mc.dims = cfg.dims;
  mc.max_iters = cfg.max_iters;
  mc.rel_tol = cfg.rel_tol;
  mc.seed = cfg.seed;
  if (cfg.weighted) mc.weights = heat_weights(out.heat);
  out.embedding = smacof(out.distances, mc);
  return out;
}

// ---------------------------------------------------------------------------
// Method dispatch for benchmarks
// ---------------------------------------------------------------------------

enum class Method { HeatGeo, PhatePotential, DiffusionMap, ShortestPath };

inline Method parse_method(const std::string& s) {
  if (s == "heatgeo") return Method::HeatGeo;
  if (s == "phate-potential") return Method::PhatePotential;
  if (s == "diffusion-map") return Method::DiffusionMap;
  if (s == "shortest-path") return Method::ShortestPath;
  throw ParameterError("unknown method '" + s +
                       "' (expected heatgeo, phate-potential, diffusion-map or shortest-path)");
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::HeatGeo: return "heatgeo";
    case Method::PhatePotential: return "phate-potential";
    case Method::DiffusionMap: return "diffusion-map";
    case Method::ShortestPath: return "shortest-path";
  }
  return "unknown";
}

struct MethodConfig {
  Method method = Method::HeatGeo;
  PipelineConfig heatgeo;  // knn and bandwidth are shared by all methods
  int walk_steps = 10;     // t for the random-walk baselines
  DiffusionWeighting weighting = DiffusionWeighting::Standard;
};

/// Dissimilarity produced by a method; no embedding step.
inline DistanceMatrix method_distances(const PointCloud& points, const MethodConfig& mc) {
  switch (mc.method) {
    case Method::HeatGeo: return heatgeo_distances(points, mc.heatgeo).distances;
    case Method::PhatePotential: {
      const Adjacency adj = build_knn_graph(points, mc.heatgeo.knn, mc.heatgeo.bandwidth);
      auto d = phate_potential(random_walk_power(adj.weights, mc.walk_steps), mc.heatgeo.floor);
      d.time = mc.walk_steps;
      return d;
    }
    case Method::DiffusionMap: {
      const Adjacency adj = build_knn_graph(points, mc.heatgeo.knn, mc.heatgeo.bandwidth);
      return diffusion_map_distance(adj.weights, mc.walk_steps, mc.weighting);
    }
    case Method::ShortestPath: {
      const Adjacency adj = build_knn_graph(points, mc.heatgeo.knn, mc.heatgeo.bandwidth);
      return shortest_path_baseline(adj);
    }
  }
  throw ParameterError("unknown method");
}

}  // namespace heatgeo
