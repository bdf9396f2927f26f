#include "heatgeo/graph.hpp"
#include "heatgeo/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace heatgeo;

namespace {

PointCloud line_points(std::initializer_list<double> xs) {
  PointCloud pc;
  pc.data.resize(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) pc.data(i++, 0) = x;
  return pc;
}

PointCloud random_cloud(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud pc;
  pc.data.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) pc.data(i, j) = rng.normal();
  return pc;
}

PointCloud unit_square() {
  PointCloud pc;
  pc.data.resize(4, 2);
  pc.data << 0, 0, 1, 0, 1, 1, 0, 1;
  return pc;
}

}  // namespace

TEST(KnnGraph, ThreePointsOnALine) {
  const auto adj = build_knn_graph(line_points({0, 1, 10}), 1, Bandwidth::constant(1.0));
  const Matrix w(adj.weights);
  EXPECT_DOUBLE_EQ(w(0, 1), std::exp(-1.0));
  EXPECT_EQ(w(0, 2), 0.0);
  // kept because point 3's nearest neighbour is point 2
  EXPECT_DOUBLE_EQ(w(1, 2), std::exp(-81.0));
  EXPECT_EQ(w, w.transpose());
  EXPECT_EQ(adj.num_components, 1);
}

TEST(KnnGraph, UnitSquareKeepsSidesOnly) {
  const Matrix w(build_knn_graph(unit_square(), 2, Bandwidth::constant(1.0)).weights);
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(w(i, (i + 1) % 4), std::exp(-1.0));
    EXPECT_DOUBLE_EQ(w(i, (i + 3) % 4), std::exp(-1.0));
    EXPECT_EQ(w(i, (i + 2) % 4), 0.0);
    EXPECT_EQ(w(i, i), 0.0);
  }
}

TEST(KnnGraph, HugeBandwidthGivesCompleteGraph) {
  const auto pc = random_cloud(6, 3, 1);
  const Matrix w(build_knn_graph(pc, 5, Bandwidth::constant(1e300)).weights);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(w(i, j), i == j ? 0.0 : 1.0);
}

TEST(KnnGraph, RejectsKAtLeastN) {
  EXPECT_THROW(build_knn_graph(random_cloud(5, 2, 0), 5), ParameterError);
  EXPECT_THROW(build_knn_graph(random_cloud(5, 2, 0), 0), ParameterError);
}

TEST(KnnGraph, RejectsNonFinitePoints) {
  auto pc = random_cloud(5, 2, 0);
  pc.data(2, 1) = std::nan("");
  EXPECT_THROW(build_knn_graph(pc, 2), ParameterError);
}

TEST(KnnGraph, DuplicatePointsFloorTheBandwidth) {
  const auto adj = build_knn_graph(line_points({0, 0, 5, 5.5}), 1);
  EXPECT_GE(adj.floored_bandwidths, 2u);
  EXPECT_TRUE(Matrix(adj.weights).allFinite());
}

TEST(KnnGraph, ReportsComponents) {
  const auto adj = build_knn_graph(line_points({0, 1, 100, 101}), 1);
  EXPECT_EQ(adj.num_components, 2);
  EXPECT_FALSE(adj.connected());
  EXPECT_EQ(adj.component[0], adj.component[1]);
  EXPECT_NE(adj.component[0], adj.component[2]);
}

TEST(KnnGraph, AdaptiveWeightsAreSymmetricAndNonnegative) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix w(build_knn_graph(random_cloud(40, 3, seed), 5).weights);
    EXPECT_EQ(w, w.transpose());
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_EQ(w.diagonal().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(KnnGraph, PermutationEquivariance) {
  const auto pc = random_cloud(30, 2, 7);
  std::vector<Index> perm(30);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(3);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  PointCloud shuffled;
  shuffled.data.resize(30, 2);
  for (Index i = 0; i < 30; ++i) shuffled.data.row(i) = pc.data.row(perm[i]);

  const Matrix w(build_knn_graph(pc, 4).weights);
  const Matrix ws(build_knn_graph(shuffled, 4).weights);
  const Matrix l = laplacian(build_knn_graph(pc, 4), LaplacianKind::SymmetricNormalized).dense_operator();
  const Matrix ls = laplacian(build_knn_graph(shuffled, 4), LaplacianKind::SymmetricNormalized).dense_operator();
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 30; ++j) {
      EXPECT_NEAR(ws(i, j), w(perm[i], perm[j]), 1e-15);
      EXPECT_NEAR(ls(i, j), l(perm[i], perm[j]), 1e-14);
    }
}

TEST(Laplacian, TriangleCombinatorial) {
  SparseMatrix w(3, 3);
  w.insert(0, 1) = w.insert(1, 0) = 1;
  w.insert(0, 2) = w.insert(2, 0) = 1;
  w.insert(1, 2) = w.insert(2, 1) = 1;
  const Matrix l = laplacian(w, LaplacianKind::Combinatorial).dense_operator();
  Matrix expected(3, 3);
  expected << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  EXPECT_EQ(l, expected);
  EXPECT_EQ((l * Vector::Ones(3)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Laplacian, TwoNodeCombinatorialAndNormalized) {
  SparseMatrix w(2, 2);
  w.insert(0, 1) = w.insert(1, 0) = 1;
  Matrix expected(2, 2);
  expected << 1, -1, -1, 1;
  EXPECT_EQ(laplacian(w, LaplacianKind::Combinatorial).dense_operator(), expected);
  EXPECT_EQ(laplacian(w, LaplacianKind::SymmetricNormalized).dense_operator(), expected);
}

TEST(Laplacian, IsolatedVertexIsNamed) {
  SparseMatrix w(3, 3);
  w.insert(0, 1) = w.insert(1, 0) = 1;
  try {
    laplacian(w, LaplacianKind::Combinatorial);
    FAIL() << "expected ParameterError";
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(Laplacian, RandomWalkIsSimilarToSymmetric) {
  const auto adj = build_knn_graph(random_cloud(20, 2, 4), 4);
  const Matrix w(adj.weights);
  const Vector deg = adj.degrees();
  const Matrix lrw = Matrix::Identity(20, 20) - deg.cwiseInverse().asDiagonal() * w;
  EXPECT_LE((laplacian(adj, LaplacianKind::RandomWalk).dense_operator() - lrw).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Laplacian, SpectralProperties) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto adj = build_knn_graph(random_cloud(50, 3, seed), 6);
    const auto comb = laplacian(adj, LaplacianKind::Combinatorial);
    const Matrix lc(comb.matrix);
    EXPECT_LE((lc * Vector::Ones(50)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(lc, lc.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> ec(lc);
    EXPECT_GE(ec.eigenvalues().minCoeff(), -1e-8);

    const Matrix ls(laplacian(adj, LaplacianKind::SymmetricNormalized).matrix);
    Eigen::SelfAdjointEigenSolver<Matrix> es(ls);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 2.0 + 1e-8);
  }
}

TEST(Laplacian, ParseKind) {
  EXPECT_EQ(parse_laplacian_kind("combinatorial"), LaplacianKind::Combinatorial);
  EXPECT_EQ(parse_laplacian_kind("symmetric"), LaplacianKind::SymmetricNormalized);
  EXPECT_EQ(parse_laplacian_kind("random-walk"), LaplacianKind::RandomWalk);
  EXPECT_THROW(parse_laplacian_kind("nope"), ParameterError);
}
