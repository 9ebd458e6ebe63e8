#pragma once

// Closed-form curvature families and reconstruction of unit-speed plane
// curves from a prescribed curvature function.

#include "curvebench/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace curvebench {

enum class CurvatureFamily { Logistic, Polyroll, Sine, Circle, Flat };

inline constexpr std::array<CurvatureFamily, 5> all_families{
    CurvatureFamily::Logistic, CurvatureFamily::Polyroll, CurvatureFamily::Sine,
    CurvatureFamily::Circle, CurvatureFamily::Flat};

inline constexpr std::string_view to_string(CurvatureFamily family)
{
  switch (family) {
  case CurvatureFamily::Logistic: return "logistic";
  case CurvatureFamily::Polyroll: return "polyroll";
  case CurvatureFamily::Sine: return "sine";
  case CurvatureFamily::Circle: return "circle";
  case CurvatureFamily::Flat: return "flat";
  }
  return "flat";
}

inline CurvatureFamily parse_family(std::string_view name)
{
  for (auto family : all_families)
    if (to_string(family) == name)
      return family;
  throw ArgumentError("unknown curvature family '" + std::string(name) +
                      "' (expected logistic, polyroll, sine, circle or flat)");
}

/// One axis's curvature family plus its growth parameter.
struct CurvatureSpec
{
  CurvatureFamily family = CurvatureFamily::Flat;
  double theta = 1.0;

  CurvatureSpec() = default;
  CurvatureSpec(CurvatureFamily f, double t) : family(f), theta(t)
  {
    if (!std::isfinite(t) || t <= 0.0)
      throw ArgumentError("curvature parameter theta must be finite and positive");
  }

  friend bool operator==(const CurvatureSpec&, const CurvatureSpec&) = default;
};

inline constexpr double default_quadrature_step = 1e-3;

/// Signed curvature kappa(s) of the chosen family.
inline double curvature_value(const CurvatureSpec& spec, double s)
{
  if (!std::isfinite(s))
    throw DomainError("curvature_value: arc-length parameter must be finite");
  const double theta = spec.theta;
  switch (spec.family) {
  case CurvatureFamily::Logistic:
    return 10.0 * theta / (1.0 + std::exp(-0.5 * s));
  case CurvatureFamily::Polyroll:
    return 4.0 * theta * std::pow(s + 1.0, 2.0 * theta);
  case CurvatureFamily::Sine:
    return (5.0 + 10.0 * (theta - 1.0)) * std::sin(2.0 * std::numbers::pi * s);
  case CurvatureFamily::Circle:
    return 2.0 * std::numbers::pi * theta;
  case CurvatureFamily::Flat:
    return 0.0;
  }
  return 0.0;
}

namespace detail {

// Simpson panel of kappa over [a, a + w].
inline double simpson_angle(const CurvatureSpec& spec, double a, double w)
{
  return w / 6.0 *
         (curvature_value(spec, a) + 4.0 * curvature_value(spec, a + 0.5 * w) +
          curvature_value(spec, a + w));
}

struct CurveState
{
  double angle = 0.0;
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
};

inline Eigen::Vector2d unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

// One Simpson panel of width w for both the turning angle and the position.
inline CurveState advance(const CurvatureSpec& spec, double s0, const CurveState& from, double w)
{
  const double angle_mid = from.angle + simpson_angle(spec, s0, 0.5 * w);
  const double angle_end = from.angle + simpson_angle(spec, s0, w);
  CurveState to;
  to.angle = angle_end;
  to.point = from.point + w / 6.0 * (unit(from.angle) + 4.0 * unit(angle_mid) + unit(angle_end));
  return to;
}

} // namespace detail

/// Turning angle alpha(s) = integral of kappa over [0, s], composite Simpson
/// with panels no wider than `step`.
inline double turning_angle(const CurvatureSpec& spec, double s,
                            double step = default_quadrature_step)
{
  if (!std::isfinite(s))
    throw DomainError("turning_angle: arc-length parameter must be finite");
  if (!(step > 0.0))
    throw ArgumentError("turning_angle: quadrature step must be positive");
  if (s == 0.0)
    return 0.0;
  const auto panels = static_cast<std::size_t>(std::ceil(std::abs(s) / step));
  const double w = s / static_cast<double>(panels);
  double alpha = 0.0;
  for (std::size_t k = 0; k < panels; ++k)
    alpha += detail::simpson_angle(spec, static_cast<double>(k) * w, w);
  return alpha;
}

/// Arc-length parameterized plane curve with prescribed curvature, normalized
/// so that gamma(0) = (0, 0) and gamma'(0) = (1, 0).
///
/// The curve keeps its quadrature table (nodes k * step on [0, s_max]) so that
/// it can be evaluated anywhere in its domain; off-node queries finish with a
/// partial Simpson panel from the preceding node.
class PlaneCurve
{
public:
  PlaneCurve(const CurvatureSpec& spec, std::vector<double> s_values, double s_max,
             double step = default_quadrature_step)
    : spec_(spec), step_(step), s_values_(std::move(s_values))
  {
    if (!(step > 0.0) || !std::isfinite(step))
      throw ArgumentError("PlaneCurve: quadrature step must be positive");
    if (s_values_.size() < 2)
      throw ArgumentError("PlaneCurve: need at least two arc-length samples");
    for (std::size_t k = 0; k < s_values_.size(); ++k) {
      if (!std::isfinite(s_values_[k]))
        throw ArgumentError("PlaneCurve: arc-length samples must be finite");
      if (k > 0 && !(s_values_[k] > s_values_[k - 1]))
        throw ArgumentError("PlaneCurve: arc-length samples must be strictly increasing");
    }
    if (s_values_.front() < 0.0)
      throw DomainError("PlaneCurve: arc-length samples must be non-negative");
    s_max_ = std::max(s_max, s_values_.back());

    const auto nodes = static_cast<std::size_t>(std::ceil(s_max_ / step_ - 1e-9)) + 1;
    table_.resize(nodes);
    for (std::size_t k = 1; k < nodes; ++k) {
      const double a = node_s(k - 1);
      table_[k] = detail::advance(spec_, a, table_[k - 1], node_s(k) - a);
    }

    points_.reserve(s_values_.size());
    for (double s : s_values_)
      points_.push_back(point_at(s));
  }

  const CurvatureSpec& spec() const noexcept { return spec_; }
  double step() const noexcept { return step_; }
  double s_max() const noexcept { return s_max_; }
  const std::vector<double>& s_values() const noexcept { return s_values_; }
  const std::vector<Eigen::Vector2d>& points() const noexcept { return points_; }

  /// Integration base points (a1, a2, b); always zero.
  std::array<double, 3> base_points() const noexcept { return {0.0, 0.0, 0.0}; }

  std::size_t quadrature_size() const noexcept { return table_.size(); }
  double quadrature_s(std::size_t k) const noexcept { return node_s(k); }
  const Eigen::Vector2d& quadrature_point(std::size_t k) const noexcept { return table_[k].point; }

  Eigen::Vector2d point_at(double s) const { return state_at(s).point; }
  double angle_at(double s) const { return state_at(s).angle; }
  /// Unit tangent gamma'(s).
  Eigen::Vector2d tangent_at(double s) const { return detail::unit(angle_at(s)); }

private:
  double node_s(std::size_t k) const noexcept
  {
    return std::min(static_cast<double>(k) * step_, s_max_);
  }

  detail::CurveState state_at(double s) const
  {
    if (!std::isfinite(s) || s < 0.0 || s > s_max_)
      throw DomainError("PlaneCurve: arc-length " + std::to_string(s) + " outside [0, " +
                        std::to_string(s_max_) + "]");
    auto k = static_cast<std::size_t>(std::floor(s / step_));
    k = std::min(k, table_.size() - 1);
    while (k > 0 && node_s(k) > s)
      --k;
    const double w = s - node_s(k);
    if (w == 0.0)
      return table_[k];
    return detail::advance(spec_, node_s(k), table_[k], w);
  }

  CurvatureSpec spec_;
  double step_;
  double s_max_ = 0.0;
  std::vector<double> s_values_;
  std::vector<Eigen::Vector2d> points_;
  std::vector<detail::CurveState> table_;
};

/// Reconstruct gamma_kappa on `s_grid`; the curve stays queryable on
/// [0, max(1, s_grid.back())].
inline PlaneCurve reconstruct_curve(const CurvatureSpec& spec, std::vector<double> s_grid,
                                    double step = default_quadrature_step)
{
  const double s_max = s_grid.empty() ? 1.0 : std::max(1.0, s_grid.back());
  return PlaneCurve(spec, std::move(s_grid), s_max, step);
}

} // namespace curvebench
