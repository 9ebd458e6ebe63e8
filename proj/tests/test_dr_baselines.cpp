#include "curvebench/dr_baselines.hpp"
#include "curvebench/field_estimation.hpp"
#include "curvebench/manifold_gen.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace curvebench;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0)
{
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      out(i, j) = normal(rng);
  return out;
}

// Grid of [0,1]^2 mapped into R^7 by x -> Q[:, :2] x + c.
Eigen::MatrixXd isometric_grid(std::size_t res, std::uint64_t seed)
{
  RandomStream rng(seed);
  const Eigen::MatrixXd q = sample_special_orthogonal(7, rng);
  const Eigen::MatrixXd grid = make_grid(2, res).points();
  Eigen::RowVectorXd c(7);
  c << 0.3, -1.0, 2.0, 0.5, 0.0, -0.7, 1.1;
  return (grid * q.leftCols(2).transpose()).rowwise() + c;
}

double max_distance_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
  return (pairwise_distances(a) - pairwise_distances(b)).cwiseAbs().maxCoeff();
}

double grid_score(const Eigen::MatrixXd& y, std::size_t res)
{
  const TensorGrid grid = TensorGrid::unit(2, res);
  return l2_curvature_score(estimate_curvature(grid, y, EstimationConfig{}).field, 2);
}

} // namespace

TEST(Pca, RecoversPlanarDataUpToRigidMotion)
{
  std::mt19937_64 rng(1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(40, 6);
  x.leftCols(2) = gaussian(rng, 40, 2);
  const auto r = pca_project(x, 2);
  EXPECT_EQ(r.method, "pca");
  EXPECT_EQ(r.Y.rows(), 40);
  EXPECT_LT(max_distance_change(r.Y, x), 1e-10);
}

TEST(Pca, SignConventionAndOrdering)
{
  std::mt19937_64 rng(2);
  Eigen::MatrixXd x = gaussian(rng, 200, 4);
  x.col(0) *= 5.0;
  x.col(2) *= 2.0;
  const auto a = pca_project(x, 3);
  const auto b = pca_project(-x, 3);
  // Negating the data flips every principal direction; the sign rule undoes it.
  EXPECT_LT((a.Y + b.Y).cwiseAbs().maxCoeff(), 1e-10);
  for (Eigen::Index c = 1; c < 3; ++c)
    EXPECT_GE(a.Y.col(c - 1).squaredNorm(), a.Y.col(c).squaredNorm());
  EXPECT_THROW(pca_project(x, 0), ArgumentError);
  EXPECT_THROW(pca_project(x, 5), ArgumentError);
}

TEST(Pca, DuplicateRowsStayDuplicate)
{
  std::mt19937_64 rng(3);
  Eigen::MatrixXd x = gaussian(rng, 30, 5);
  x.row(17) = x.row(4);
  const auto r = pca_project(x, 2);
  EXPECT_EQ(r.Y.row(17), r.Y.row(4));
}

TEST(Pca, ProjectionIsIdempotent)
{
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = gaussian(rng, 60, 7);
  const Eigen::MatrixXd y = pca_project(x, 3).Y;
  EXPECT_LT(max_distance_change(pca_project(y, 3).Y, y), 1e-10);
  const Eigen::MatrixXd t = truncated_svd_project(x, 3).Y;
  EXPECT_LT(max_distance_change(truncated_svd_project(t, 3).Y, t), 1e-10);
}

TEST(TruncatedSvd, AgreesWithPcaOnCenteredData)
{
  std::mt19937_64 rng(5);
  Eigen::MatrixXd x = gaussian(rng, 50, 6);
  x = x.rowwise() - x.colwise().mean();
  EXPECT_LT((truncated_svd_project(x, 3).Y - pca_project(x, 3).Y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(TruncatedSvd, RecoversLowRankExactly)
{
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd x = gaussian(rng, 40, 2) * gaussian(rng, 2, 7);
  const Eigen::MatrixXd y = truncated_svd_project(x, 2).Y;
  // Rank-2 data: the Gram matrix of the scores equals that of X.
  EXPECT_LT((y * y.transpose() - x * x.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::MatrixXd full = truncated_svd_project(x, 7).Y;
  EXPECT_LT((full * full.transpose() - x * x.transpose()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Mds, PlanarDataHasZeroStress)
{
  std::mt19937_64 rng(7);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(30, 7);
  x.leftCols(2) = gaussian(rng, 30, 2);
  RandomStream rs(1);
  x = x * sample_special_orthogonal(7, rs).transpose();
  const auto r = mds_project(x, 2);
  EXPECT_LT(r.diagnostics["normalized_stress"].get<double>(), 1e-6);
  EXPECT_LT(max_distance_change(r.Y, x), 1e-6);
}

TEST(Mds, TriangleEmbedsInThePlane)
{
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 7);
  x(0, 3) = 1.0;
  x(1, 4) = 1.0;
  x(2, 5) = 1.0;
  const auto r = mds_project(x, 2);
  EXPECT_LT(max_distance_change(r.Y, x), 1e-6);
}

TEST(Mds, StressIsMonotoneAndImprovesOnInitialization)
{
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = gaussian(rng, 80, 5);
  MdsOptions options;
  options.max_iter = 200;
  options.tol = 0.0;
  const auto r = mds_project(x, 2, options);
  const auto history = r.diagnostics["stress_history"].get<std::vector<double>>();
  ASSERT_GT(history.size(), 5u);
  for (std::size_t i = 1; i < history.size(); ++i)
    EXPECT_LE(history[i], history[i - 1]);
  EXPECT_LT(history.back(), history.front());
  EXPECT_NEAR(history.back(), mds_stress(pairwise_distances(x), r.Y) / (0.5 * pairwise_distances(x).squaredNorm()),
              1e-12);
}

TEST(Mds, Validation)
{
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 3);
  EXPECT_THROW(mds_project(x, 0), ArgumentError);
  EXPECT_THROW(mds_project(x, 2, MdsOptions{0, 1e-6}), ArgumentError);
  x(1, 1) = INFINITY;
  EXPECT_THROW(mds_project(x, 2), ArgumentError);
}

TEST(Npr, IdentityAndSimilarityArePerfect)
{
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = gaussian(rng, 200, 7);
  for (std::size_t kn : {1u, 5u, 10u, 50u}) {
    EXPECT_EQ(npr(x, x, kn), 1.0);
    EXPECT_EQ(npr(x, (2.0 * x).rowwise() + Eigen::RowVectorXd::Constant(7, 3.5), kn), 1.0);
  }
  EXPECT_THROW(npr(x, x, 0), ArgumentError);
  EXPECT_THROW(npr(x, x, 200), ArgumentError);
  EXPECT_THROW(npr(x, x.topRows(10), 3), ArgumentError);
}

TEST(Npr, InvariantUnderCommonSimilarity)
{
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd x = gaussian(rng, 120, 7);
  const Eigen::MatrixXd y = pca_project(x, 2).Y;
  RandomStream rs(3);
  const Eigen::MatrixXd q7 = sample_special_orthogonal(7, rs);
  const Eigen::MatrixXd q2 = sample_special_orthogonal(2, rs);
  const double base = npr(x, y, 10);
  EXPECT_GT(base, 0.0);
  EXPECT_LT(base, 1.0);
  EXPECT_NEAR(npr((3.0 * x * q7.transpose()).rowwise() + Eigen::RowVectorXd::Ones(7),
                  (3.0 * y * q2.transpose()).rowwise() + Eigen::RowVectorXd::Ones(2), 10),
              base, 1e-12);
}

TEST(Npr, RandomPermutationExpectation)
{
  // Brute-force Monte Carlo: each of the kn neighbors survives with
  // probability kn/(N-1) under a uniformly random relabeling.
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd x = gaussian(rng, 10, 3);
  std::vector<Eigen::Index> perm(10);
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd y(10, 3);
    for (Eigen::Index i = 0; i < 10; ++i)
      y.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    total += npr(x, y, 3);
  }
  EXPECT_NEAR(total / trials, 3.0 / 9.0, 0.05);
}

TEST(LinearIsometry, AllBuiltinsScoreFlatWithPerfectNpr)
{
  const std::size_t res = 32;
  const Eigen::MatrixXd x = isometric_grid(res, 21);
  MdsOptions options;
  options.max_iter = 50;
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  for (const auto& r : {pca_project(x, 2), truncated_svd_project(centered, 2), mds_project(x, 2, options)}) {
    EXPECT_LT(grid_score(r.Y, res), 1e-3) << r.method;
    EXPECT_EQ(npr(x, r.Y, 10), 1.0) << r.method;
  }
}
