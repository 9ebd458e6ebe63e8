#pragma once

// Tensor-product cubic interpolating splines with not-a-knot end conditions,
// stored as B-spline coefficients so derivatives up to order three are exact
// piecewise polynomials.

#include "curvebench/errors.hpp"
#include "curvebench/grid.hpp"

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace curvebench {

/// Cubic B-spline basis on not-a-knot knots for one axis.
class CubicAxisBasis
{
public:
  static constexpr int degree = 3;
  static constexpr int max_order = 3;

  /// Weights of the basis functions first..first+count-1 for derivative
  /// orders 0..3 at a point.
  struct Weights
  {
    std::size_t first = 0;
    std::size_t count = 0;
    std::array<std::array<double, 5>, max_order + 1> w{};
  };

  CubicAxisBasis() = default;
  explicit CubicAxisBasis(std::vector<double> nodes) : nodes_(std::move(nodes))
  {
    const std::size_t n = nodes_.size();
    if (n < 4)
      throw ArgumentError("cubic spline needs at least 4 nodes per axis");
    knots_.reserve(n + 4);
    for (int r = 0; r < 4; ++r)
      knots_.push_back(nodes_.front());
    for (std::size_t k = 2; k + 2 < n; ++k)
      knots_.push_back(nodes_[k]);
    for (int r = 0; r < 4; ++r)
      knots_.push_back(nodes_.back());

    Eigen::MatrixXd colloc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = span(nodes_[i]);
      double d[max_order + 1][degree + 1];
      basis_derivatives(s, nodes_[i], d);
      for (int j = 0; j <= degree; ++j)
        colloc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s - degree + j)) = d[0][j];
    }
    lu_.compute(colloc);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<double>& nodes() const noexcept { return nodes_; }

  /// Interpolation coefficients for values at the nodes (one column per fiber).
  Eigen::MatrixXd solve(const Eigen::MatrixXd& values) const { return lu_.solve(values); }

  /// Basis weights at x. At interior breakpoints the (discontinuous) third
  /// derivative is the mean of its one-sided limits.
  Weights weights(double x) const
  {
    Weights out;
    const std::size_t s = span(x);
    double d[max_order + 1][degree + 1];
    basis_derivatives(s, x, d);
    out.first = s - degree;
    out.count = 4;
    for (int k = 0; k <= max_order; ++k)
      for (int j = 0; j <= degree; ++j)
        out.w[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = d[k][j];

    if (x == knots_[s] && s > static_cast<std::size_t>(degree)) {
      double left[max_order + 1][degree + 1];
      basis_derivatives(s - 1, x, left);
      // left piece covers indices s-4..s-1; shift the right piece by one.
      std::array<double, 5> third{};
      for (int j = 0; j <= degree; ++j) {
        third[static_cast<std::size_t>(j)] += 0.5 * left[3][j];
        third[static_cast<std::size_t>(j) + 1] += 0.5 * d[3][j];
      }
      for (int k = 0; k < max_order; ++k) {
        std::array<double, 5> shifted{};
        for (int j = 0; j <= degree; ++j)
          shifted[static_cast<std::size_t>(j) + 1] = d[k][j];
        out.w[static_cast<std::size_t>(k)] = shifted;
      }
      out.w[3] = third;
      out.first = s - degree - 1;
      out.count = 5;
    }
    return out;
  }

private:
  // Knot span s in [3, n-1] with knots[s] <= x < knots[s+1]; points outside
  // the domain use the end spans.
  std::size_t span(double x) const
  {
    const std::size_t last = nodes_.size() - 1;
    if (x >= knots_[last + 1])
      return last;
    if (x <= knots_[degree])
      return degree;
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  // Derivatives 0..3 of the four nonzero basis functions on span s.
  void basis_derivatives(std::size_t s, double x, double ders[max_order + 1][degree + 1]) const
  {
    constexpr int p = degree;
    double ndu[p + 1][p + 1];
    double left[p + 1];
    double right[p + 1];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[j] = x - knots_[s + 1 - static_cast<std::size_t>(j)];
      right[j] = knots_[s + static_cast<std::size_t>(j)] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        ndu[j][r] = right[r + 1] + left[j - r];
        const double temp = ndu[r][j - 1] / ndu[j][r];
        ndu[r][j] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      ndu[j][j] = saved;
    }
    for (int j = 0; j <= p; ++j)
      ders[0][j] = ndu[j][p];

    double a[2][p + 1];
    for (int r = 0; r <= p; ++r) {
      int s1 = 0;
      int s2 = 1;
      a[0][0] = 1.0;
      for (int k = 1; k <= max_order; ++k) {
        double d = 0.0;
        const int rk = r - k;
        const int pk = p - k;
        if (r >= k) {
          a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
          d = a[s2][0] * ndu[rk][pk];
        }
        const int j1 = rk >= -1 ? 1 : -rk;
        const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
        for (int j = j1; j <= j2; ++j) {
          a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
          d += a[s2][j] * ndu[rk + j][pk];
        }
        if (r <= pk) {
          a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
          d += a[s2][k] * ndu[r][pk];
        }
        ders[k][r] = d;
        std::swap(s1, s2);
      }
    }
    double factor = p;
    for (int k = 1; k <= max_order; ++k) {
      for (int j = 0; j <= p; ++j)
        ders[k][j] *= factor;
      factor *= (p - k);
    }
  }

  std::vector<double> nodes_;
  std::vector<double> knots_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// All multi-indices of n variables with total order <= max_order, ordered by
/// total order and then lexicographically.
class MultiIndexSet
{
public:
  MultiIndexSet(std::size_t n, int max_order) : n_(n), base_(max_order + 1)
  {
    std::vector<int> current(n, 0);
    for (int total = 0; total <= max_order; ++total)
      enumerate(0, total, current);
    lookup_.assign(static_cast<std::size_t>(ipow(base_, n)), npos);
    for (std::size_t k = 0; k < items_.size(); ++k)
      lookup_[encode(items_[k])] = k;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t size() const noexcept { return items_.size(); }
  const std::vector<int>& operator[](std::size_t k) const { return items_[k]; }

  std::size_t index(const std::vector<int>& orders) const
  {
    for (int o : orders)
      if (o < 0 || o >= base_)
        return npos;
    return lookup_[encode(orders)];
  }

  /// Index of the derivative with the given axes differentiated once each
  /// (repeats allowed), e.g. {0, 0, 1} = d^3 / dx0^2 dx1.
  std::size_t index_of_axes(std::initializer_list<std::size_t> axes) const
  {
    std::vector<int> orders(n_, 0);
    for (auto a : axes)
      ++orders[a];
    return index(orders);
  }

private:
  static long ipow(long b, std::size_t e)
  {
    long r = 1;
    while (e--)
      r *= b;
    return r;
  }

  std::size_t encode(const std::vector<int>& orders) const
  {
    std::size_t code = 0;
    for (int o : orders)
      code = code * static_cast<std::size_t>(base_) + static_cast<std::size_t>(o);
    return code;
  }

  void enumerate(std::size_t axis, int remaining, std::vector<int>& current)
  {
    if (axis + 1 == n_) {
      current[axis] = remaining;
      items_.push_back(current);
      return;
    }
    for (int o = remaining; o >= 0; --o) {
      current[axis] = o;
      enumerate(axis + 1, remaining - o, current);
    }
    current[axis] = 0;
  }

  std::size_t n_;
  int base_;
  std::vector<std::vector<int>> items_;
  std::vector<std::size_t> lookup_;
};

/// Per-component tensor-product cubic spline over a full tensor grid.
class SplineField
{
public:
  static constexpr int max_derivative_order = 3;

  SplineField() = default;

  /// `samples` has one row per grid node (row-major grid order) and one
  /// column per component.
  SplineField(TensorGrid grid, const Eigen::MatrixXd& samples) : grid_(std::move(grid))
  {
    if (static_cast<std::size_t>(samples.rows()) != grid_.size())
      throw ArgumentError("fit_spline: " + std::to_string(samples.rows()) + " sample rows for a grid of " +
                          std::to_string(grid_.size()) + " nodes");
    if (samples.cols() < 1)
      throw ArgumentError("fit_spline: need at least one component");
    if (!samples.allFinite())
      throw ArgumentError("fit_spline: samples must be finite");
    for (std::size_t a = 0; a < grid_.dim(); ++a)
      bases_.emplace_back(grid_.axis(a));

    // Fit deviations from the first node so constant data has exactly zero
    // coefficients and therefore exactly zero derivatives.
    offset_ = samples.row(0).transpose();
    coefficients_ = samples.rowwise() - offset_.transpose();
    const std::size_t n = grid_.dim();
    const auto c = samples.cols();
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t extent = grid_.extent(a);
      std::size_t inner = 1;
      for (std::size_t b = a + 1; b < n; ++b)
        inner *= grid_.extent(b);
      const std::size_t outer = grid_.size() / (extent * inner);
      // One column per (fiber, component).
      Eigen::MatrixXd block(static_cast<Eigen::Index>(extent), static_cast<Eigen::Index>(outer * inner) * c);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
          for (std::size_t k = 0; k < extent; ++k) {
            const auto row = static_cast<Eigen::Index>((o * extent + k) * inner + i);
            const auto col = static_cast<Eigen::Index>(o * inner + i) * c;
            block.block(static_cast<Eigen::Index>(k), col, 1, c) = coefficients_.row(row);
          }
      const Eigen::MatrixXd solved = bases_[a].solve(block);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
          for (std::size_t k = 0; k < extent; ++k) {
            const auto row = static_cast<Eigen::Index>((o * extent + k) * inner + i);
            const auto col = static_cast<Eigen::Index>(o * inner + i) * c;
            coefficients_.row(row) = solved.block(static_cast<Eigen::Index>(k), col, 1, c);
          }
    }
  }

  const TensorGrid& grid() const noexcept { return grid_; }
  std::size_t components() const noexcept { return static_cast<std::size_t>(coefficients_.cols()); }
  std::size_t dim() const noexcept { return grid_.dim(); }

  /// Mixed partial derivative with per-axis orders (each 0..3).
  Eigen::VectorXd derivative(const Eigen::Ref<const Eigen::VectorXd>& x, const std::vector<int>& orders) const
  {
    check_point(x);
    if (orders.size() != dim())
      throw ArgumentError("SplineField: derivative orders must have one entry per axis");
    for (int o : orders)
      if (o < 0 || o > max_derivative_order)
        throw ArgumentError("SplineField: derivative order per axis must be in [0, 3]");
    const auto w = axis_weights(x);
    return contract(w, orders);
  }

  Eigen::VectorXd value(const Eigen::Ref<const Eigen::VectorXd>& x) const
  {
    return derivative(x, std::vector<int>(dim(), 0));
  }

  /// Every partial derivative of total order <= max_order at x, indexed by
  /// `set` (which must be MultiIndexSet(dim(), max_order)).
  std::vector<Eigen::VectorXd> jet(const Eigen::Ref<const Eigen::VectorXd>& x, const MultiIndexSet& set) const
  {
    check_point(x);
    const auto w = axis_weights(x);
    std::vector<Eigen::VectorXd> out;
    out.reserve(set.size());
    for (std::size_t k = 0; k < set.size(); ++k)
      out.push_back(contract(w, set[k]));
    return out;
  }

private:
  void check_point(const Eigen::Ref<const Eigen::VectorXd>& x) const
  {
    if (static_cast<std::size_t>(x.size()) != dim())
      throw ArgumentError("SplineField: query point has the wrong dimension");
    if (!x.allFinite())
      throw ArgumentError("SplineField: query point must be finite");
  }

  std::vector<CubicAxisBasis::Weights> axis_weights(const Eigen::Ref<const Eigen::VectorXd>& x) const
  {
    std::vector<CubicAxisBasis::Weights> w;
    w.reserve(dim());
    for (std::size_t a = 0; a < dim(); ++a)
      w.push_back(bases_[a].weights(x[static_cast<Eigen::Index>(a)]));
    return w;
  }

  Eigen::VectorXd contract(const std::vector<CubicAxisBasis::Weights>& w, const std::vector<int>& orders) const
  {
    const std::size_t n = dim();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(coefficients_.cols());
    if (std::all_of(orders.begin(), orders.end(), [](int o) { return o == 0; }))
      out = offset_;
    std::vector<std::size_t> local(n, 0);
    std::vector<std::size_t> multi(n);
    while (true) {
      double weight = 1.0;
      for (std::size_t a = 0; a < n; ++a) {
        weight *= w[a].w[static_cast<std::size_t>(orders[a])][local[a]];
        multi[a] = w[a].first + local[a];
      }
      if (weight != 0.0)
        out += weight * coefficients_.row(static_cast<Eigen::Index>(grid_.ravel(multi))).transpose();
      std::size_t a = n;
      while (a-- > 0) {
        if (++local[a] < w[a].count)
          break;
        local[a] = 0;
      }
      if (a == static_cast<std::size_t>(-1))
        break;
    }
    return out;
  }

  TensorGrid grid_;
  std::vector<CubicAxisBasis> bases_;
  Eigen::VectorXd offset_;
  Eigen::MatrixXd coefficients_;
};

inline SplineField fit_spline(const TensorGrid& grid, const Eigen::MatrixXd& samples)
{
  return SplineField(grid, samples);
}

/// Overload for a grid given as points; the tensor structure is recovered
/// and verified.
inline SplineField fit_spline(const PointCloud& grid, const Eigen::MatrixXd& samples)
{
  return SplineField(TensorGrid::from_points(grid), samples);
}

} // namespace curvebench
