#pragma once

// Coordinate Riemannian geometry on open subsets of R^n: pullback metrics,
// Christoffel symbols, Riemann tensor components, sectional curvature and the
// L2 curvature score over a tensor grid.

#include "curvebench/errors.hpp"
#include "curvebench/grid.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace curvebench {

/// Dense n x n x n array, index (a, b, c).
class Array3
{
public:
  Array3() = default;
  explicit Array3(std::size_t n) : n_(n), data_(n * n * n, 0.0) {}

  std::size_t dim() const noexcept { return n_; }
  double& operator()(std::size_t a, std::size_t b, std::size_t c) { return data_[(a * n_ + b) * n_ + c]; }
  double operator()(std::size_t a, std::size_t b, std::size_t c) const { return data_[(a * n_ + b) * n_ + c]; }

private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Dense n^4 array, index (a, b, c, d).
class Array4
{
public:
  Array4() = default;
  explicit Array4(std::size_t n) : n_(n), data_(n * n * n * n, 0.0) {}

  std::size_t dim() const noexcept { return n_; }
  double& operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d)
  {
    return data_[((a * n_ + b) * n_ + c) * n_ + d];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const
  {
    return data_[((a * n_ + b) * n_ + c) * n_ + d];
  }

private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

enum class SectionalMode {
  Standard,  ///< K = g(R(e_i,e_j)e_i, e_j) / (g_ii g_jj - g_ij^2)
  PaperSqrt, ///< same numerator over sqrt(g_ii g_jj - g_ij^2)
};

inline constexpr std::size_t pair_count(std::size_t n) noexcept { return n * (n - 1) / 2; }
inline constexpr std::size_t upper_count(std::size_t n) noexcept { return n * (n + 1) / 2; }

/// Position of (i, j), i <= j, in the packed upper triangle.
inline constexpr std::size_t upper_index(std::size_t n, std::size_t i, std::size_t j) noexcept
{
  if (i > j)
    std::swap(i, j);
  return i * n - i * (i - 1) / 2 + (j - i);
}

/// (f^* g_0)_ij = df/dx_i . df/dx_j, with the columns of J the partials.
inline Eigen::MatrixXd pullback_from_jacobian(const Eigen::Ref<const Eigen::MatrixXd>& jacobian)
{
  return jacobian.transpose() * jacobian;
}

inline constexpr double min_metric_eigenvalue = 1e-10;

/// Ridge added before inversion: 1e-8 trace(g)/n when the smallest eigenvalue
/// drops below 1e-10, zero otherwise.
inline double metric_regularization(const Eigen::Ref<const Eigen::MatrixXd>& g)
{
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() >= min_metric_eigenvalue)
    return 0.0;
  return 1e-8 * g.trace() / static_cast<double>(g.rows());
}

/// Inverse of g + lambda Id; throws DegenerateMetricError when it is singular.
inline Eigen::MatrixXd regularized_inverse(const Eigen::Ref<const Eigen::MatrixXd>& g, double lambda,
                                           std::size_t node = 0)
{
  const auto n = g.rows();
  const Eigen::MatrixXd shifted = g + lambda * Eigen::MatrixXd::Identity(n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shifted);
  const auto& values = eig.eigenvalues();
  if (!values.allFinite() || values.minCoeff() <= 1e-15 * std::max(1.0, values.cwiseAbs().maxCoeff()))
    throw DegenerateMetricError("metric is singular at node " + std::to_string(node), node);
  return eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

/// Gamma(k, i, j) = Gamma^k_ij of the Levi-Civita connection.
/// `dg(i, j, k)` holds d g_ij / d x_k.
inline Array3 christoffel_at(const Eigen::Ref<const Eigen::MatrixXd>& g, const Array3& dg, double lambda,
                             std::size_t node = 0)
{
  const auto n = static_cast<std::size_t>(g.rows());
  const Eigen::MatrixXd inv = regularized_inverse(g, lambda, node);
  Array3 gamma(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        double sum = 0.0;
        for (std::size_t m = 0; m < n; ++m)
          sum += inv(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) *
                 (dg(m, i, j) + dg(m, j, i) - dg(i, j, m));
        gamma(k, i, j) = 0.5 * sum;
        gamma(k, j, i) = 0.5 * sum;
      }
  return gamma;
}

/// dGamma(i, l, j, k) = d Gamma^l_jk / d x_i, from the metric and its first
/// two derivatives (`d2g(i, j, k, l)` = d^2 g_ij / dx_k dx_l).
inline Array4 christoffel_derivative(const Eigen::Ref<const Eigen::MatrixXd>& g, const Array3& dg,
                                     const Array4& d2g, double lambda, std::size_t node = 0)
{
  const auto n = static_cast<std::size_t>(g.rows());
  const Eigen::MatrixXd inv = regularized_inverse(g, lambda, node);
  const auto at = [](const Eigen::MatrixXd& a, std::size_t r, std::size_t c) {
    return a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  };

  // d(g^-1)/dx_q = -g^-1 (dg/dx_q) g^-1
  std::vector<Eigen::MatrixXd> dinv(n);
  for (std::size_t q = 0; q < n; ++q) {
    Eigen::MatrixXd dq(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        dq(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = dg(a, b, q);
    dinv[q] = -inv * dq * inv;
  }

  Array4 out(n);
  for (std::size_t q = 0; q < n; ++q)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          double sum = 0.0;
          for (std::size_t m = 0; m < n; ++m) {
            const double s = dg(m, i, j) + dg(m, j, i) - dg(i, j, m);
            const double ds = d2g(m, i, j, q) + d2g(m, j, i, q) - d2g(i, j, m, q);
            sum += at(dinv[q], m, k) * s + at(inv, m, k) * ds;
          }
          out(q, k, i, j) = 0.5 * sum;
          out(q, k, j, i) = 0.5 * sum;
        }
  return out;
}

/// R(l, i, j, k) = R^l_ijk
///   = d_j Gamma^l_ik - d_i Gamma^l_jk + sum_p (Gamma^p_ik Gamma^l_jp - Gamma^p_jk Gamma^l_ip).
inline Array4 riemann_at(const Array3& gamma, const Array4& dgamma)
{
  const std::size_t n = gamma.dim();
  Array4 r(n);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          double sum = dgamma(j, l, i, k) - dgamma(i, l, j, k);
          for (std::size_t p = 0; p < n; ++p)
            sum += gamma(p, i, k) * gamma(l, j, p) - gamma(p, j, k) * gamma(l, i, p);
          r(l, i, j, k) = sum;
        }
  return r;
}

inline constexpr double min_plane_area = 1e-12;

/// Sectional curvature of every coordinate plane {e_i, e_j}, i < j, in the
/// order (0,1), (0,2), ..., (1,2), ...
inline std::vector<double> sectional_at(const Eigen::Ref<const Eigen::MatrixXd>& g, const Array4& r,
                                        SectionalMode mode = SectionalMode::Standard)
{
  const auto n = static_cast<std::size_t>(g.rows());
  const auto at = [&](std::size_t a, std::size_t b) {
    return g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  };
  std::vector<double> k;
  k.reserve(pair_count(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double area = at(i, i) * at(j, j) - at(i, j) * at(i, j);
      if (!(area > min_plane_area))
        throw DegeneratePlaneError("coordinate plane (" + std::to_string(i) + ", " + std::to_string(j) +
                                       ") is degenerate",
                                   i, j);
      double numerator = 0.0;
      for (std::size_t l = 0; l < n; ++l)
        numerator += r(l, i, j, i) * at(l, j);
      k.push_back(numerator / (mode == SectionalMode::Standard ? area : std::sqrt(area)));
    }
  return k;
}

/// Metric, first and second derivatives at one point.
struct MetricJet
{
  Eigen::MatrixXd g;
  Array3 dg;  ///< dg(i, j, k) = d_k g_ij
  Array4 d2g; ///< d2g(i, j, k, l) = d_k d_l g_ij
};

struct PointCurvature
{
  std::vector<double> sectional;
  double regularization = 0.0;
};

/// Full chain metric jet -> Christoffel -> Riemann -> sectional at one node.
inline PointCurvature curvature_from_jet(const MetricJet& jet, SectionalMode mode, std::size_t node = 0)
{
  PointCurvature out;
  out.regularization = metric_regularization(jet.g);
  const Array3 gamma = christoffel_at(jet.g, jet.dg, out.regularization, node);
  const Array4 dgamma = christoffel_derivative(jet.g, jet.dg, jet.d2g, out.regularization, node);
  const Array4 r = riemann_at(gamma, dgamma);
  const Eigen::MatrixXd shifted =
      jet.g + out.regularization * Eigen::MatrixXd::Identity(jet.g.rows(), jet.g.cols());
  out.sectional = sectional_at(shifted, r, mode);
  return out;
}

/// Grid of symmetric metrics, packed upper triangle per row.
struct MetricField
{
  TensorGrid grid;
  Eigen::MatrixXd values;             ///< N x n(n+1)/2
  std::vector<double> regularization; ///< lambda applied per node (empty = none)

  Eigen::MatrixXd at(std::size_t node) const
  {
    const std::size_t n = grid.dim();
    Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double v = values(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(upper_index(n, i, j)));
        g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    return g;
  }
};

struct SectionalCurvatureField
{
  TensorGrid grid;
  Eigen::MatrixXd values; ///< N x n(n-1)/2, pairs in sectional_at order
  SectionalMode mode = SectionalMode::Standard;
};

/// Trapezoidal weights of one axis restricted to [trim, extent - 1 - trim].
inline std::vector<double> trapezoid_weights(const std::vector<double>& nodes, std::size_t trim)
{
  std::vector<double> w(nodes.size(), 0.0);
  const std::size_t lo = trim;
  const std::size_t hi = nodes.size() - 1 - trim;
  for (std::size_t k = lo; k < hi; ++k) {
    const double h = nodes[k + 1] - nodes[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  return w;
}

/// sqrt( sum over pairs of the integral of K_ij^2 ) over the trimmed interior,
/// trapezoidal rule on the tensor grid.
inline double l2_curvature_score(const SectionalCurvatureField& field, std::size_t trim = 2)
{
  const TensorGrid& grid = field.grid;
  if (trim < 1)
    throw ArgumentError("l2_curvature_score: trim must be at least 1");
  for (std::size_t a = 0; a < grid.dim(); ++a)
    if (grid.extent(a) < 2 * trim + 2)
      throw ArgumentError("l2_curvature_score: fewer than two interior nodes remain on axis " +
                          std::to_string(a) + " after trimming " + std::to_string(trim) + " layers");
  if (static_cast<std::size_t>(field.values.rows()) != grid.size())
    throw ArgumentError("l2_curvature_score: field rows do not match the grid");

  std::vector<std::vector<double>> weights;
  for (std::size_t a = 0; a < grid.dim(); ++a)
    weights.push_back(trapezoid_weights(grid.axis(a), trim));

  std::vector<std::size_t> multi;
  double total = 0.0;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    grid.unravel(node, multi);
    double w = 1.0;
    for (std::size_t a = 0; a < grid.dim() && w != 0.0; ++a)
      w *= weights[a][multi[a]];
    if (w == 0.0)
      continue;
    total += w * field.values.row(static_cast<Eigen::Index>(node)).squaredNorm();
  }
  return std::sqrt(total);
}

} // namespace curvebench
