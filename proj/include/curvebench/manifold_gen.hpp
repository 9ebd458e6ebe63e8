#pragma once

// The instance generator: padded arc-length curves assembled into an
// immersion R^n -> R^m, followed by a Haar-random rotation and a Gaussian
// translation.

#include "curvebench/curve_kernel.hpp"
#include "curvebench/errors.hpp"
#include "curvebench/grid.hpp"
#include "curvebench/random.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace curvebench {

inline std::string format_real(double value)
{
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%g", value);
  return buffer;
}

struct InstanceDescriptor
{
  std::size_t n = 2;
  std::size_t m = 7;
  std::vector<CurvatureFamily> families;
  std::vector<double> thetas;
  double eta = 0.01;
  std::uint64_t seed = 0;
  std::size_t grid_resolution = 32;
  std::string instance_id;

  /// Canonical identifier built from every field except the seed.
  std::string make_instance_id() const
  {
    std::string id;
    for (std::size_t i = 0; i < families.size(); ++i) {
      id += std::string(to_string(families[i]));
      id += i < thetas.size() ? format_real(thetas[i]) : std::string("?");
      id += '_';
    }
    id += "n" + std::to_string(n) + "_m" + std::to_string(m) + "_eta" + format_real(eta) + "_r" +
          std::to_string(grid_resolution);
    return id;
  }

  /// Throws ArgumentError naming the first offending field.
  void validate() const
  {
    if (n < 1)
      throw ArgumentError("instance field 'n' must be at least 1");
    if (m <= n)
      throw ArgumentError("instance field 'm' must exceed 'n'");
    if (families.size() != n)
      throw ArgumentError("instance field 'families' must have exactly n entries");
    if (thetas.size() != n)
      throw ArgumentError("instance field 'thetas' must have exactly n entries");
    for (double t : thetas)
      if (!std::isfinite(t) || t <= 0.0)
        throw ArgumentError("instance field 'thetas' must be finite and positive");
    if (!std::isfinite(eta) || eta < 0.0)
      throw ArgumentError("instance field 'eta' must be finite and non-negative");
    if (grid_resolution < 4)
      throw ArgumentError("instance field 'grid_resolution' must be at least 4");
    if (instance_id != make_instance_id())
      throw ArgumentError("instance field 'instance_id' does not match the other fields (expected '" +
                          make_instance_id() + "')");
  }

  CurvatureSpec axis_spec(std::size_t i) const { return {families.at(i), thetas.at(i)}; }

  friend bool operator==(const InstanceDescriptor&, const InstanceDescriptor&) = default;
};

/// Build a descriptor and fill in its identifier.
inline InstanceDescriptor make_descriptor(std::vector<CurvatureFamily> families,
                                          std::vector<double> thetas, std::size_t m, double eta,
                                          std::uint64_t seed, std::size_t grid_resolution)
{
  InstanceDescriptor d;
  d.n = families.size();
  d.m = m;
  d.families = std::move(families);
  d.thetas = std::move(thetas);
  d.eta = eta;
  d.seed = seed;
  d.grid_resolution = grid_resolution;
  d.instance_id = d.make_instance_id();
  d.validate();
  return d;
}

/// Haar-distributed rotation in SO(m): orthogonal factor of a Gaussian matrix
/// with the column signs fixed by diag(R) > 0, then one column reflected if
/// the determinant is negative.
inline Eigen::MatrixXd sample_special_orthogonal(std::size_t m, RandomStream& rng)
{
  if (m < 1)
    throw ArgumentError("sample_special_orthogonal: dimension must be at least 1");
  const auto dim = static_cast<Eigen::Index>(m);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd gaussian(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < dim; ++i)
      gaussian(i, j) = normal(rng);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j)
    if (r(j, j) < 0.0)
      q.col(j) = -q.col(j);
  if (q.determinant() < 0.0)
    q.col(0) = -q.col(0);
  return q;
}

/// A sampled immersion x -> R * sum_i pad_i(gamma_i(x_i)) + z.
struct ImmersionMap
{
  std::vector<PlaneCurve> curves;
  Eigen::MatrixXd rotation;
  Eigen::VectorXd translation;
  InstanceDescriptor descriptor;
};

struct MakegenOptions
{
  /// Test hook: replace the random rotation with the identity. The random
  /// stream is still consumed so the translation is unchanged.
  bool identity_rotation = false;
  double quadrature_step = default_quadrature_step;
};

inline ImmersionMap makegen(const InstanceDescriptor& descriptor, const MakegenOptions& options = {})
{
  descriptor.validate();
  ImmersionMap map;
  map.descriptor = descriptor;

  const std::vector<double> s_grid{0.0, 1.0};
  map.curves.reserve(descriptor.n);
  for (std::size_t i = 0; i < descriptor.n; ++i)
    map.curves.push_back(reconstruct_curve(descriptor.axis_spec(i), s_grid, options.quadrature_step));

  RandomStream rng(descriptor.seed);
  map.rotation = sample_special_orthogonal(descriptor.m, rng);
  if (options.identity_rotation)
    map.rotation.setIdentity();

  std::normal_distribution<double> normal(0.0, 1.0);
  map.translation.resize(static_cast<Eigen::Index>(descriptor.m));
  for (Eigen::Index k = 0; k < map.translation.size(); ++k)
    map.translation[k] = descriptor.eta * normal(rng);
  return map;
}

/// Phi_0(x): curve i placed at ambient coordinates (i, i+1), zero elsewhere.
inline Eigen::VectorXd unrotated_immersion(const ImmersionMap& map, const Eigen::Ref<const Eigen::VectorXd>& x)
{
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.descriptor.m));
  for (std::size_t i = 0; i < map.curves.size(); ++i) {
    const Eigen::Vector2d p = map.curves[i].point_at(x[static_cast<Eigen::Index>(i)]);
    v[static_cast<Eigen::Index>(i)] += p.x();
    v[static_cast<Eigen::Index>(i) + 1] += p.y();
  }
  return v;
}

inline PointCloud evaluate_immersion(const ImmersionMap& map, const PointCloud& grid)
{
  if (grid.dim() != map.descriptor.n)
    throw ArgumentError("evaluate_immersion: grid dimension " + std::to_string(grid.dim()) +
                        " does not match n = " + std::to_string(map.descriptor.n));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(map.descriptor.m));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Eigen::VectorXd v;
    try {
      v = unrotated_immersion(map, grid.row(k).transpose());
    } catch (const DomainError& e) {
      throw DomainError("evaluate_immersion: row " + std::to_string(k) + ": " + e.what());
    }
    out.row(static_cast<Eigen::Index>(k)) = (map.rotation * v + map.translation).transpose();
  }
  return PointCloud(std::move(out));
}

/// Analytic Jacobian of the immersion (m x n) at x.
inline Eigen::MatrixXd immersion_jacobian(const ImmersionMap& map, const Eigen::Ref<const Eigen::VectorXd>& x,
                                          bool apply_rotation = true)
{
  const auto m = static_cast<Eigen::Index>(map.descriptor.m);
  const auto n = static_cast<Eigen::Index>(map.descriptor.n);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d t = map.curves[static_cast<std::size_t>(i)].tangent_at(x[i]);
    jac(i, i) = t.x();
    jac(i + 1, i) = t.y();
  }
  if (apply_rotation)
    jac = map.rotation * jac;
  return jac;
}

/// The experiment suite: every multiset of two families times every ordered
/// pair of (easy, hard) thetas, immersed into R^7.
inline std::vector<InstanceDescriptor> enumerate_suite(double theta_easy = 1.2, double theta_hard = 1.8,
                                                       double eta = 0.01, std::uint64_t base_seed = 0,
                                                       std::size_t grid_resolution = 32)
{
  if (!(theta_easy > 0.0) || !(theta_hard > 0.0))
    throw ArgumentError("enumerate_suite: thetas must be positive");
  if (grid_resolution < 4)
    throw ArgumentError("enumerate_suite: grid resolution must be at least 4");
  const double levels[2] = {theta_easy, theta_hard};
  std::vector<InstanceDescriptor> suite;
  for (std::size_t a = 0; a < all_families.size(); ++a)
    for (std::size_t b = a; b < all_families.size(); ++b)
      for (double t1 : levels)
        for (double t2 : levels) {
          auto d = make_descriptor({all_families[a], all_families[b]}, {t1, t2}, 7, eta, 0,
                                   grid_resolution);
          d.seed = derive_seed(base_seed, d.instance_id);
          suite.push_back(std::move(d));
        }
  return suite;
}

} // namespace curvebench
