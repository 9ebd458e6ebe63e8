#pragma once

// Exact k-nearest-neighbor queries on a kd-tree. Distances that agree to a
// relative 1e-9 count as ties and are broken by the lower row index, so
// results are stable under rigid motions of the data.

#include "curvebench/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

namespace curvebench {

inline constexpr double neighbor_tie_tolerance = 1e-9;

class KdTree
{
public:
  explicit KdTree(Eigen::MatrixXd points) : points_(std::move(points))
  {
    if (points_.rows() < 1)
      throw ArgumentError("KdTree: need at least one point");
    order_.resize(static_cast<std::size_t>(points_.rows()));
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * order_.size() / leaf_size + 2);
    build(0, order_.size());
  }

  std::size_t size() const noexcept { return order_.size(); }
  const Eigen::MatrixXd& points() const noexcept { return points_; }

  /// The k nearest rows to `query`, closest first; `exclude` removes one row
  /// (typically the query itself).
  std::vector<std::size_t> nearest(const Eigen::Ref<const Eigen::VectorXd>& query, std::size_t k,
                                   std::optional<std::size_t> exclude = std::nullopt) const
  {
    const std::size_t available = size() - (exclude && *exclude < size() ? 1 : 0);
    if (k < 1 || k > available)
      throw ArgumentError("KdTree: neighbor count " + std::to_string(k) + " out of range [1, " +
                          std::to_string(available) + "]");
    // Exact k-NN under the strict (distance, index) order.
    std::priority_queue<Candidate> heap;
    search_knn(0, query, k, exclude, heap);
    const double worst = heap.top().d2;

    // Re-rank every point within the tie tolerance of the k-th distance.
    std::vector<Candidate> pool;
    search_radius(0, query, worst * (1.0 + 4.0 * neighbor_tie_tolerance) + tiny, exclude, pool);
    std::sort(pool.begin(), pool.end());
    std::size_t start = 0;
    while (start < pool.size()) {
      std::size_t end = start + 1;
      const double limit = pool[start].d2 * (1.0 + 2.0 * neighbor_tie_tolerance) + tiny;
      while (end < pool.size() && pool[end].d2 <= limit)
        ++end;
      std::sort(pool.begin() + static_cast<std::ptrdiff_t>(start), pool.begin() + static_cast<std::ptrdiff_t>(end),
                [](const Candidate& a, const Candidate& b) { return a.index < b.index; });
      start = end;
    }
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
      out.push_back(pool[i].index);
    return out;
  }

  std::vector<std::size_t> nearest_to_row(std::size_t row, std::size_t k) const
  {
    return nearest(points_.row(static_cast<Eigen::Index>(row)).transpose(), k, row);
  }

private:
  static constexpr std::size_t leaf_size = 8;
  static constexpr double tiny = 1e-300;

  struct Candidate
  {
    double d2;
    std::size_t index;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
  };

  struct Node
  {
    std::size_t begin = 0;
    std::size_t end = 0;
    Eigen::Index axis = -1; // -1 marks a leaf
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  double distance2(const Eigen::Ref<const Eigen::VectorXd>& q, std::size_t row) const
  {
    return (points_.row(static_cast<Eigen::Index>(row)).transpose() - q).squaredNorm();
  }

  std::size_t build(std::size_t begin, std::size_t end)
  {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size)
      return id;

    Eigen::Index axis = 0;
    double spread = -1.0;
    for (Eigen::Index a = 0; a < points_.cols(); ++a) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t k = begin; k < end; ++k) {
        const double v = points_(static_cast<Eigen::Index>(order_[k]), a);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > spread) {
        spread = hi - lo;
        axis = a;
      }
    }
    if (spread <= 0.0)
      return id;

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                       const double va = points_(static_cast<Eigen::Index>(a), axis);
                       const double vb = points_(static_cast<Eigen::Index>(b), axis);
                       return va < vb || (va == vb && a < b);
                     });
    const double split = points_(static_cast<Eigen::Index>(order_[mid]), axis);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search_knn(std::size_t id, const Eigen::Ref<const Eigen::VectorXd>& q, std::size_t k,
                  const std::optional<std::size_t>& exclude, std::priority_queue<Candidate>& heap) const
  {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t row = order_[i];
        if (exclude && row == *exclude)
          continue;
        const Candidate c{distance2(q, row), row};
        if (heap.size() < k)
          heap.push(c);
        else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const std::size_t near = delta < 0.0 ? node.left : node.right;
    const std::size_t far = delta < 0.0 ? node.right : node.left;
    search_knn(near, q, k, exclude, heap);
    if (heap.size() < k || delta * delta <= heap.top().d2)
      search_knn(far, q, k, exclude, heap);
  }

  void search_radius(std::size_t id, const Eigen::Ref<const Eigen::VectorXd>& q, double r2,
                     const std::optional<std::size_t>& exclude, std::vector<Candidate>& out) const
  {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t row = order_[i];
        if (exclude && row == *exclude)
          continue;
        const double d2 = distance2(q, row);
        if (d2 <= r2)
          out.push_back({d2, row});
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    if (delta <= 0.0 || delta * delta <= r2)
      search_radius(node.left, q, r2, exclude, out);
    if (delta >= 0.0 || delta * delta <= r2)
      search_radius(node.right, q, r2, exclude, out);
  }

  Eigen::MatrixXd points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

} // namespace curvebench
