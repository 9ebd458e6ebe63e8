#pragma once

#include "curvebench/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace curvebench {

/// N points in R^d, one per row; the row index is the point's identity.
class PointCloud
{
public:
  PointCloud() = default;
  explicit PointCloud(Eigen::MatrixXd points) : points_(std::move(points))
  {
    if (points_.rows() < 1 || points_.cols() < 1)
      throw ArgumentError("PointCloud: need at least one point of positive dimension");
    if (!points_.allFinite())
      throw ArgumentError("PointCloud: all coordinates must be finite");
  }

  const Eigen::MatrixXd& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.cols()); }
  auto row(std::size_t k) const { return points_.row(static_cast<Eigen::Index>(k)); }

  friend bool operator==(const PointCloud& a, const PointCloud& b)
  {
    return a.points_.rows() == b.points_.rows() && a.points_.cols() == b.points_.cols() &&
           a.points_ == b.points_;
  }

private:
  Eigen::MatrixXd points_;
};

/// Full tensor grid with per-axis node positions. Point order is row-major:
/// the first axis varies slowest.
class TensorGrid
{
public:
  TensorGrid() = default;
  explicit TensorGrid(std::vector<std::vector<double>> axes) : axes_(std::move(axes))
  {
    if (axes_.empty())
      throw ArgumentError("TensorGrid: need at least one axis");
    size_ = 1;
    for (const auto& axis : axes_) {
      if (axis.size() < 2)
        throw ArgumentError("TensorGrid: every axis needs at least two nodes");
      for (std::size_t k = 1; k < axis.size(); ++k)
        if (!(axis[k] > axis[k - 1]))
          throw ArgumentError("TensorGrid: axis nodes must be strictly increasing");
      size_ *= axis.size();
    }
  }

  /// Uniform grid with `resolution` nodes per axis on [0, 1].
  static TensorGrid unit(std::size_t n, std::size_t resolution)
  {
    if (n < 1)
      throw ArgumentError("grid dimension must be at least 1");
    if (resolution < 4)
      throw ArgumentError("grid resolution must be at least 4 (cubic splines need 4 nodes per axis)");
    std::vector<double> axis(resolution);
    for (std::size_t i = 0; i < resolution; ++i)
      axis[i] = static_cast<double>(i) / static_cast<double>(resolution - 1);
    return TensorGrid(std::vector<std::vector<double>>(n, axis));
  }

  /// Recover the tensor structure of a row-major point list.
  static TensorGrid from_points(const PointCloud& cloud)
  {
    const std::size_t n = cloud.dim();
    std::vector<std::vector<double>> axes(n);
    for (std::size_t a = 0; a < n; ++a) {
      std::vector<double> values(cloud.size());
      for (std::size_t k = 0; k < cloud.size(); ++k)
        values[k] = cloud.points()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a));
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      axes[a] = std::move(values);
    }
    TensorGrid grid(std::move(axes));
    if (grid.size() != cloud.size())
      throw ArgumentError("point set is not a full tensor grid (" + std::to_string(cloud.size()) +
                          " rows, expected " + std::to_string(grid.size()) + ")");
    std::vector<std::size_t> multi(n);
    for (std::size_t k = 0; k < cloud.size(); ++k) {
      grid.unravel(k, multi);
      for (std::size_t a = 0; a < n; ++a)
        if (cloud.points()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) !=
            grid.axes_[a][multi[a]])
          throw ArgumentError("point set is not in row-major tensor-grid order (row " +
                              std::to_string(k) + ")");
    }
    return grid;
  }

  std::size_t dim() const noexcept { return axes_.size(); }
  std::size_t size() const noexcept { return size_; }
  const std::vector<double>& axis(std::size_t a) const noexcept { return axes_[a]; }
  std::size_t extent(std::size_t a) const noexcept { return axes_[a].size(); }

  void unravel(std::size_t index, std::vector<std::size_t>& multi) const
  {
    multi.resize(dim());
    for (std::size_t a = dim(); a-- > 0;) {
      multi[a] = index % axes_[a].size();
      index /= axes_[a].size();
    }
  }

  std::size_t ravel(const std::vector<std::size_t>& multi) const
  {
    std::size_t index = 0;
    for (std::size_t a = 0; a < dim(); ++a)
      index = index * axes_[a].size() + multi[a];
    return index;
  }

  Eigen::VectorXd point(std::size_t index) const
  {
    std::vector<std::size_t> multi;
    unravel(index, multi);
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim()));
    for (std::size_t a = 0; a < dim(); ++a)
      x[static_cast<Eigen::Index>(a)] = axes_[a][multi[a]];
    return x;
  }

  PointCloud to_points() const
  {
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(dim()));
    for (std::size_t k = 0; k < size_; ++k)
      pts.row(static_cast<Eigen::Index>(k)) = point(k).transpose();
    return PointCloud(std::move(pts));
  }

  /// True when every axis index lies in [trim, extent - 1 - trim].
  bool interior(std::size_t index, std::size_t trim) const
  {
    std::vector<std::size_t> multi;
    unravel(index, multi);
    for (std::size_t a = 0; a < dim(); ++a)
      if (multi[a] < trim || multi[a] + trim >= axes_[a].size())
        return false;
    return true;
  }

private:
  std::vector<std::vector<double>> axes_;
  std::size_t size_ = 0;
};

/// Equispaced grid on [0,1]^n, `resolution` nodes per axis, row-major order.
inline PointCloud make_grid(std::size_t n, std::size_t resolution)
{
  return TensorGrid::unit(n, resolution).to_points();
}

} // namespace curvebench
