#include "heatgeo/datasets.hpp"
#include "heatgeo/mds.hpp"
#include "heatgeo/metrics.hpp"
#include "heatgeo/pipeline.hpp"
#include "heatgeo/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace heatgeo;

namespace {

Matrix unit_square_distances() {
  const double r2 = std::sqrt(2.0);
  Matrix d(4, 4);
  d << 0, 1, r2, 1, 1, 0, 1, r2, r2, 1, 0, 1, 1, r2, 1, 0;
  return d;
}

Matrix collinear3() {
  Matrix d(3, 3);
  d << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  return d;
}

Matrix random_points(Index n, Index d, Rng& rng) {
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
  return x;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

PointCloud two_blobs(Index per_blob, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud pc;
  pc.data.resize(2 * per_blob, 3);
  pc.labels.emplace();
  for (Index i = 0; i < 2 * per_blob; ++i) {
    const int c = i < per_blob ? 0 : 1;
    for (Index j = 0; j < 3; ++j) pc.data(i, j) = rng.normal(j == 0 ? 30.0 * c : 0.0, 1.0);
    pc.labels->push_back(c);
  }
  return pc;
}

}  // namespace

TEST(ClassicMds, TwoPoints) {
  Matrix d(2, 2);
  d << 0, 2, 2, 0;
  const auto e = classic_mds(d, 1);
  EXPECT_NEAR(std::abs(e.coords(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(e.coords(0, 0) + e.coords(1, 0), 0.0, 1e-12);
  EXPECT_GT(e.coords.col(0).maxCoeff(), 0.0);
}

TEST(ClassicMds, UnitSquareRecovered) {
  const auto e = classic_mds(unit_square_distances(), 2);
  EXPECT_LE((embedding_distances(e.coords) - unit_square_distances()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(e.stress, 1e-8);
}

TEST(ClassicMds, EuclideanRealizableHasZeroStress) {
  Rng rng(5);
  const Matrix x = random_points(15, 3, rng);
  const auto e = classic_mds(pairwise_row_distances(x), 3);
  EXPECT_LE(e.stress, 1e-8);
}

TEST(ClassicMds, AllZeroInputIsFlagged) {
  const auto e = classic_mds(Matrix::Zero(4, 4), 2);
  EXPECT_TRUE(e.degenerate);
  EXPECT_EQ(e.coords, Matrix::Zero(4, 2));
}

TEST(ClassicMds, Preconditions) {
  EXPECT_THROW(classic_mds(Matrix::Zero(2, 2), 2), ParameterError);
  EXPECT_THROW(classic_mds(Matrix::Zero(2, 3), 1), ParameterError);
  Matrix neg = collinear3();
  neg(0, 1) = neg(1, 0) = -1;
  EXPECT_THROW(classic_mds(neg, 1), ParameterError);
}

TEST(Smacof, CollinearIsExact) {
  MdsConfig cfg;
  cfg.dims = 1;
  const auto e = smacof(collinear3(), cfg);
  EXPECT_LE(e.stress, 1e-10);
  EXPECT_TRUE(non_increasing(e.trace));
}

TEST(Smacof, UnitSquareInOneDimensionMatchesOracle) {
  MdsConfig cfg;
  cfg.dims = 1;
  cfg.rel_tol = 1e-12;
  cfg.max_iters = 5000;
  // global optimum over all 1-D orderings (least squares per ordering);
  // SMACOF is a local method, so restart and keep the best
  const double oracle = 1.0823922002923938;
  Rng rng(11);
  double best = smacof(unit_square_distances(), cfg).stress;
  for (int r = 0; r < 20; ++r) {
    const auto e = smacof(unit_square_distances(), cfg, random_points(4, 1, rng));
    EXPECT_GE(e.stress, oracle - 1e-9);
    best = std::min(best, e.stress);
  }
  EXPECT_NEAR(best / oracle, 1.0, 0.01);
}

TEST(Smacof, TraceMonotoneOnRandomProblems) {
  Rng rng(77);
  for (int p = 0; p < 50; ++p) {
    const Index n = 5 + rng.integer(0, 20);
    Matrix d = pairwise_row_distances(random_points(n, 4, rng));
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = d(i, j) * rng.uniform(0.7, 1.3);
    MdsConfig cfg;
    cfg.dims = 2;
    cfg.seed = static_cast<std::uint64_t>(p);
    if (p % 2) {
      Matrix w(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = i; j < n; ++j) w(i, j) = w(j, i) = rng.uniform(0.1, 2.0);
      cfg.weights = w;
    }
    const auto e = smacof(d, cfg);
    EXPECT_TRUE(non_increasing(e.trace)) << "problem " << p;
    EXPECT_GE(e.stress, 0.0);
  }
}

TEST(Smacof, WeightedRealizableReachesZero) {
  Rng rng(3);
  const Matrix x = random_points(12, 2, rng);
  MdsConfig cfg;
  Matrix w(12, 12);
  for (Index i = 0; i < 12; ++i)
    for (Index j = i; j < 12; ++j) w(i, j) = w(j, i) = rng.uniform(0.5, 1.5);
  cfg.weights = w;
  EXPECT_LE(smacof(pairwise_row_distances(x), cfg).stress, 1e-8);
}

TEST(Smacof, ZeroWeightRowIsRejected) {
  MdsConfig cfg;
  Matrix w = Matrix::Ones(3, 3);
  w.row(2).setZero();
  w.col(2).setZero();
  cfg.weights = w;
  EXPECT_THROW(smacof(collinear3(), cfg), ParameterError);
}

TEST(Smacof, RigidMotionInvarianceOfStress) {
  Rng rng(9);
  const Matrix x = random_points(20, 2, rng);
  const Matrix d = pairwise_row_distances(random_points(20, 2, rng));
  const double theta = 0.83;
  Matrix rot(2, 2);
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Matrix moved = x * rot;
  moved.rowwise() += Eigen::RowVector2d(3.0, -7.5);
  EXPECT_NEAR(stress(d, x), stress(d, moved), 1e-10);
}

TEST(Smacof, DeterministicGivenSeed) {
  Rng rng(1);
  const Matrix d = pairwise_row_distances(random_points(25, 5, rng));
  MdsConfig cfg;
  cfg.seed = 42;
  EXPECT_EQ(smacof(d, cfg).coords, smacof(d, cfg).coords);
}

TEST(Smacof, InitShapeChecked) {
  MdsConfig cfg;
  EXPECT_THROW(smacof(collinear3(), cfg, Matrix::Zero(3, 1)), ParameterError);
}

TEST(Pipeline, PhateEndpoint) {
  auto bundle = swiss_roll({120, 0.05, 3, false, 4});
  PipelineConfig cfg;
  cfg.time = 3.0;
  cfg.rho = 1.0;
  cfg.sigma = 0.0;
  const auto r = heatgeo_distances(bundle.cloud, cfg);
  const Matrix ph = phate_potential(r.heat).values;
  EXPECT_LE((r.distances.values / (4.0 * 3.0) - ph).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, ph.maxCoeff()));
}

TEST(Pipeline, RhoZeroIsPlainHeatGeodesic) {
  auto bundle = swiss_roll({100, 0.05, 3, false, 2});
  PipelineConfig cfg;
  cfg.time = 2.0;
  const auto r = heatgeo_distances(bundle.cloud, cfg);
  EXPECT_EQ(r.distances.values, heat_geodesic(r.heat, {1.0, 0.0, 1e-12}).distances.values);
  EXPECT_TRUE(r.distances.valid());
}

TEST(Pipeline, AutoTimeComesFromGrid) {
  auto bundle = swiss_roll({150, 0.1, 3, false, 1});
  PipelineConfig cfg;
  const auto r = heatgeo_embed(bundle.cloud, cfg);
  ASSERT_TRUE(r.selection.has_value());
  EXPECT_EQ(r.time, r.selection->chosen);
  EXPECT_NE(std::find(cfg.time_grid.begin(), cfg.time_grid.end(), r.time), cfg.time_grid.end());
  EXPECT_EQ(r.embedding.coords.rows(), 150);
  EXPECT_EQ(r.embedding.coords.cols(), 2);
  EXPECT_TRUE(non_increasing(r.embedding.trace));
}

TEST(Pipeline, DeterministicEmbedding) {
  auto bundle = swiss_roll({120, 0.1, 3, false, 3});
  PipelineConfig cfg;
  cfg.seed = 5;
  EXPECT_EQ(heatgeo_embed(bundle.cloud, cfg).embedding.coords, heatgeo_embed(bundle.cloud, cfg).embedding.coords);
}

TEST(Pipeline, WeightedSeparatesBlobs) {
  const auto pc = two_blobs(60, 11);
  PipelineConfig cfg;
  cfg.weighted = true;
  cfg.time = 5.0;
  const auto r = heatgeo_embed(pc, cfg);
  const auto s = clustering_scores(r.embedding.coords, *pc.labels, 2, 0);
  EXPECT_DOUBLE_EQ(s.homogeneity, 1.0);
}

TEST(Pipeline, HeatWeightsFavourNearestNeighbours) {
  auto bundle = swiss_roll({150, 0.1, 3, false, 6});
  PipelineConfig cfg;
  cfg.time = 5.0;
  const auto r = heatgeo_distances(bundle.cloud, cfg);
  const Matrix w = heat_weights(r.heat);
  const auto adj = build_knn_graph(bundle.cloud, cfg.knn);
  const Matrix knn = Matrix(adj.weights);
  double heat_mass = 0.0, uniform_mass = 0.0;
  const double total = w.sum();
  const double uniform_each = total / (150.0 * 149.0);
  for (Index i = 0; i < 150; ++i)
    for (Index j = 0; j < 150; ++j)
      if (knn(i, j) > 0.0) {
        heat_mass += w(i, j);
        uniform_mass += uniform_each;
      }
  EXPECT_GT(heat_mass, uniform_mass);
}

TEST(Pipeline, ParameterValidation) {
  auto bundle = swiss_roll({50, 0.1, 3, false, 1});
  PipelineConfig cfg;
  cfg.rho = 1.5;
  EXPECT_THROW(heatgeo_embed(bundle.cloud, cfg), ParameterError);
  cfg.rho = 0.0;
  cfg.time = -1.0;
  EXPECT_THROW(heatgeo_embed(bundle.cloud, cfg), ParameterError);
  cfg.time.reset();
  cfg.knn = 50;
  EXPECT_THROW(heatgeo_embed(bundle.cloud, cfg), ParameterError);
}

TEST(Pipeline, MethodDispatch) {
  auto bundle = swiss_roll({80, 0.1, 3, false, 1});
  for (const char* name : {"heatgeo", "phate-potential", "diffusion-map", "shortest-path"}) {
    MethodConfig mc;
    mc.method = parse_method(name);
    mc.heatgeo.time = 2.0;
    const auto d = method_distances(bundle.cloud, mc);
    EXPECT_TRUE(d.valid()) << name;
    EXPECT_EQ(std::string(to_string(mc.method)), name);
  }
  EXPECT_THROW(parse_method("tsne"), ParameterError);
}
