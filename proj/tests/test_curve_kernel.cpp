#include "curvebench/curve_kernel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace curvebench;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double h = default_quadrature_step;

// Five-point central differences on the quadrature table (step h).
Eigen::Vector2d first_derivative(const PlaneCurve& c, std::size_t k)
{
  return (-c.quadrature_point(k + 2) + 8.0 * c.quadrature_point(k + 1) - 8.0 * c.quadrature_point(k - 1) +
          c.quadrature_point(k - 2)) /
         (12.0 * h);
}

Eigen::Vector2d second_derivative(const PlaneCurve& c, std::size_t k)
{
  return (-c.quadrature_point(k + 2) + 16.0 * c.quadrature_point(k + 1) - 30.0 * c.quadrature_point(k) +
          16.0 * c.quadrature_point(k - 1) - c.quadrature_point(k - 2)) /
         (12.0 * h * h);
}

std::vector<CurvatureSpec> suite_range()
{
  std::vector<CurvatureSpec> specs;
  for (auto f : all_families)
    for (double t : {1.2, 1.8})
      specs.emplace_back(f, t);
  return specs;
}

} // namespace

TEST(CurvatureValue, ClosedForms)
{
  EXPECT_EQ(curvature_value({CurvatureFamily::Flat, 1.8}, 3.7), 0.0);
  EXPECT_NEAR(curvature_value({CurvatureFamily::Circle, 1.2}, 0.5), 2.4 * pi, 1e-12);
  EXPECT_NEAR(curvature_value({CurvatureFamily::Logistic, 1.0}, 0.0), 5.0, 1e-12);
  EXPECT_NEAR(curvature_value({CurvatureFamily::Sine, 1.0}, 0.25), 5.0, 1e-12);
  EXPECT_NEAR(curvature_value({CurvatureFamily::Polyroll, 1.0}, 1.0), 16.0, 1e-12);
}

TEST(CurvatureValue, RejectsNonFinite)
{
  EXPECT_THROW(curvature_value({CurvatureFamily::Sine, 1.0}, NAN), DomainError);
  EXPECT_THROW(turning_angle({CurvatureFamily::Sine, 1.0}, INFINITY), DomainError);
  EXPECT_THROW(CurvatureSpec(CurvatureFamily::Sine, 0.0), ArgumentError);
  EXPECT_THROW(parse_family("spiral"), ArgumentError);
  EXPECT_EQ(parse_family("polyroll"), CurvatureFamily::Polyroll);
}

TEST(TurningAngle, AnalyticIntegrals)
{
  EXPECT_EQ(turning_angle({CurvatureFamily::Flat, 1.3}, 1.0), 0.0);
  EXPECT_NEAR(turning_angle({CurvatureFamily::Circle, 1.0}, 0.5), pi, 1e-12);
  EXPECT_NEAR(turning_angle({CurvatureFamily::Sine, 1.0}, 1.0), 0.0, 1e-12);
  // Antiderivative of polyroll: 4 theta / (2 theta + 1) ((s+1)^(2 theta + 1) - 1).
  const double theta = 1.8;
  const double exact = 4.0 * theta / (2.0 * theta + 1.0) * (std::pow(2.0, 2.0 * theta + 1.0) - 1.0);
  EXPECT_NEAR(turning_angle({CurvatureFamily::Polyroll, theta}, 1.0), exact, 1e-9);
  // Logistic: 10 theta (s + 2 log(1 + e^{-s/2}) - 2 log 2).
  const double logistic = 10.0 * 1.2 * (0.7 + 2.0 * std::log1p(std::exp(-0.35)) - 2.0 * std::log(2.0));
  EXPECT_NEAR(turning_angle({CurvatureFamily::Logistic, 1.2}, 0.7), logistic, 1e-12);
}

TEST(ReconstructCurve, FlatIsTheXAxis)
{
  const auto c = reconstruct_curve({CurvatureFamily::Flat, 1.0}, {0.0, 0.5, 1.0});
  ASSERT_EQ(c.points().size(), 3u);
  EXPECT_NEAR(c.points()[1].x(), 0.5, 1e-15);
  EXPECT_NEAR(c.points()[2].x(), 1.0, 1e-15);
  EXPECT_EQ(c.points()[2].y(), 0.0);
}

TEST(ReconstructCurve, CircleMatchesAnalyticArc)
{
  const auto c = reconstruct_curve({CurvatureFamily::Circle, 1.0}, {0.0, 0.5, 1.0});
  EXPECT_NEAR(c.points()[1].x(), 0.0, 1e-12);
  EXPECT_NEAR(c.points()[1].y(), 1.0 / pi, 1e-12);

  const double radius = 1.0 / (2.0 * pi);
  const Eigen::Vector2d center(0.0, radius);
  for (std::size_t k = 0; k < c.quadrature_size(); ++k)
    EXPECT_NEAR((c.quadrature_point(k) - center).norm(), radius, 10.0 * std::pow(h, 4));
  // Off-node queries stay on the circle too.
  for (double s : {0.0123, 0.31415, 0.77777})
    EXPECT_NEAR((c.point_at(s) - center).norm(), radius, 10.0 * std::pow(h, 4));
}

TEST(ReconstructCurve, RejectsBadGrids)
{
  const CurvatureSpec spec{CurvatureFamily::Sine, 1.2};
  EXPECT_THROW(reconstruct_curve(spec, {0.0, 0.5, 0.4}), ArgumentError);
  EXPECT_THROW(reconstruct_curve(spec, {0.0, 0.5, 0.5}), ArgumentError);
  EXPECT_THROW(reconstruct_curve(spec, {0.3}), ArgumentError);
  const auto c = reconstruct_curve(spec, {0.0, 1.0});
  EXPECT_THROW(c.point_at(1.01), DomainError);
  EXPECT_THROW(c.point_at(-0.01), DomainError);
}

TEST(ReconstructCurve, RigidNormalization)
{
  for (const auto& spec : suite_range()) {
    const auto c = reconstruct_curve(spec, {0.0, 1.0});
    EXPECT_EQ(c.point_at(0.0), Eigen::Vector2d::Zero());
    EXPECT_EQ(c.tangent_at(0.0), Eigen::Vector2d(1.0, 0.0));
    EXPECT_EQ(c.base_points(), (std::array<double, 3>{0.0, 0.0, 0.0}));
  }
}

TEST(ReconstructCurve, UnitSpeed)
{
  for (const auto& spec : suite_range()) {
    const auto c = reconstruct_curve(spec, {0.0, 1.0});
    for (std::size_t k = 2; k + 2 < c.quadrature_size(); ++k)
      ASSERT_NEAR(first_derivative(c, k).norm(), 1.0, 10.0 * h * h) << to_string(spec.family) << " " << spec.theta;
  }
}

TEST(ReconstructCurve, ChordSpeedForModerateCurvature)
{
  // Consecutive-sample chord speed is 1 - kappa^2 h^2 / 24, inside the
  // 10 h^2 band whenever |kappa| <= sqrt(240).
  for (const auto& spec : suite_range()) {
    if (spec.family == CurvatureFamily::Polyroll)
      continue;
    const auto c = reconstruct_curve(spec, {0.0, 1.0});
    for (std::size_t k = 1; k < c.quadrature_size(); ++k) {
      const double ds = c.quadrature_s(k) - c.quadrature_s(k - 1);
      const double speed = (c.quadrature_point(k) - c.quadrature_point(k - 1)).norm() / ds;
      ASSERT_NEAR(speed, 1.0, 10.0 * h * h) << to_string(spec.family) << " " << spec.theta;
    }
  }
}

TEST(ReconstructCurve, CurvatureRoundTrip)
{
  for (const auto& spec : suite_range()) {
    const auto c = reconstruct_curve(spec, {0.0, 1.0});
    for (std::size_t k = 50; k <= 950; k += 25) {
      const Eigen::Vector2d d1 = first_derivative(c, k);
      const Eigen::Vector2d normal(-d1.y(), d1.x());
      const double estimate = normal.dot(second_derivative(c, k));
      ASSERT_NEAR(estimate, curvature_value(spec, c.quadrature_s(k)), std::max(1e-3, 1e2 * h * h))
          << to_string(spec.family) << " " << spec.theta << " s=" << c.quadrature_s(k);
    }
  }
}

TEST(ReconstructCurve, SamplesMatchPointQueries)
{
  std::vector<double> grid;
  for (int i = 0; i < 32; ++i)
    grid.push_back(i / 31.0);
  const CurvatureSpec spec{CurvatureFamily::Logistic, 1.8};
  const auto c = reconstruct_curve(spec, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_EQ(c.points()[i], c.point_at(grid[i]));
  EXPECT_NEAR(c.angle_at(grid[17]), turning_angle(spec, grid[17]), 1e-10);
}
