#pragma once

// Estimation of the pullback metric of f = Psi o Phi and its sectional
// curvature from samples of f on a tensor grid.
//
// Two routes are available:
//   function_spline  spline f itself and differentiate it three times;
//   metric_knn       fit the metric at every node from K neighbors by least
//                    squares, then spline the metric and differentiate twice.

#include "curvebench/errors.hpp"
#include "curvebench/geometry_core.hpp"
#include "curvebench/grid.hpp"
#include "curvebench/knn.hpp"
#include "curvebench/spline.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace curvebench {

enum class EstimationMethod { FunctionSpline, MetricKnn };

inline const char* to_string(EstimationMethod m)
{
  return m == EstimationMethod::FunctionSpline ? "function_spline" : "metric_knn";
}

inline const char* to_string(SectionalMode m)
{
  return m == SectionalMode::Standard ? "standard" : "paper_sqrt";
}

struct EstimationConfig
{
  EstimationMethod method = EstimationMethod::MetricKnn;
  std::size_t k_neighbors = 8;
  std::size_t trim = 2;
  SectionalMode mode = SectionalMode::Standard;
  bool rescale_output = true;
};

struct EstimationDiagnostics
{
  /// Nodes where the metric needed regularization or the curvature chain
  /// failed (those nodes contribute K = 0).
  std::vector<std::size_t> degenerate_nodes;
  std::size_t failed_nodes = 0;
  /// metric_knn only: nodes whose fitted metric had eigenvalues clamped
  /// (also listed as degenerate).
  std::size_t clamped_nodes = 0;
  /// metric_knn only: boundary layers left out of the metric spline.
  std::size_t excluded_layers = 0;
  std::vector<std::string> messages;
};

struct CurvatureEstimate
{
  SectionalCurvatureField field;
  MetricField metric;
  EstimationDiagnostics diagnostics;
  double output_scale = 1.0; ///< factor applied to f before estimation
};

/// Translate to the origin and divide by the largest axis extent, so the
/// points fit the unit box with their aspect ratio kept.
inline Eigen::MatrixXd rescale_to_unit_box(const Eigen::MatrixXd& points, double* scale_out = nullptr)
{
  const Eigen::RowVectorXd lo = points.colwise().minCoeff();
  const Eigen::RowVectorXd hi = points.colwise().maxCoeff();
  const double extent = (hi - lo).maxCoeff();
  const double scale = extent > 0.0 ? 1.0 / extent : 1.0;
  if (scale_out)
    *scale_out = scale;
  return (points.rowwise() - lo) * scale;
}

/// Symmetric A minimizing sum_ij (v_i^T A v_j - t_ij)^2 with v_i = x_i - x and
/// t_ij = (f(x_i) - f(x)) . (f(x_j) - f(x)), over all K^2 neighbor pairs.
inline Eigen::MatrixXd knn_metric_at(const Eigen::Ref<const Eigen::VectorXd>& x,
                                     const Eigen::Ref<const Eigen::MatrixXd>& neighbors,
                                     const Eigen::Ref<const Eigen::VectorXd>& image_x,
                                     const Eigen::Ref<const Eigen::MatrixXd>& image_neighbors,
                                     std::size_t node = 0)
{
  const auto n = x.size();
  const auto k = neighbors.rows();
  if (neighbors.cols() != n || image_neighbors.rows() != k || image_neighbors.cols() != image_x.size())
    throw ArgumentError("knn_metric_at: inconsistent neighbor array shapes");
  if (k <= n)
    throw ArgumentError("knn_metric_at: need more neighbors than dimensions (K = " + std::to_string(k) +
                        ", n = " + std::to_string(n) + ")");
  if (!x.allFinite() || !neighbors.allFinite() || !image_x.allFinite() || !image_neighbors.allFinite())
    throw ArgumentError("knn_metric_at: inputs must be finite");

  Eigen::MatrixXd v = neighbors.rowwise() - x.transpose();
  Eigen::MatrixXd w = image_neighbors.rowwise() - image_x.transpose();

  // Canonical neighbor order makes the result independent of input order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < n; ++c)
      if (v(a, c) != v(b, c))
        return v(a, c) < v(b, c);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      if (w(a, c) != w(b, c))
        return w(a, c) < w(b, c);
    return false;
  });
  {
    Eigen::MatrixXd vs(k, n), ws(k, w.cols());
    for (Eigen::Index r = 0; r < k; ++r) {
      vs.row(r) = v.row(order[static_cast<std::size_t>(r)]);
      ws.row(r) = w.row(order[static_cast<std::size_t>(r)]);
    }
    v.swap(vs);
    w.swap(ws);
  }

  const auto un = static_cast<std::size_t>(n);
  const auto p = static_cast<Eigen::Index>(upper_count(un));
  Eigen::MatrixXd design(k * k, p);
  Eigen::VectorXd target(k * k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index row = i * k + j;
      for (std::size_t a = 0; a < un; ++a)
        for (std::size_t b = a; b < un; ++b) {
          const auto ia = static_cast<Eigen::Index>(a);
          const auto ib = static_cast<Eigen::Index>(b);
          const double coeff = a == b ? v(i, ia) * v(j, ia) : v(i, ia) * v(j, ib) + v(i, ib) * v(j, ia);
          design(row, static_cast<Eigen::Index>(upper_index(un, a, b))) = coeff;
        }
      target[row] = w.row(i).dot(w.row(j));
    }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p)
    throw EstimationError("knn_metric_at: neighbors do not span the tangent space at node " +
                              std::to_string(node),
                          node);
  const Eigen::VectorXd a = qr.solve(target);
  Eigen::MatrixXd metric(n, n);
  for (std::size_t i = 0; i < un; ++i)
    for (std::size_t j = i; j < un; ++j) {
      const double value = a[static_cast<Eigen::Index>(upper_index(un, i, j))];
      metric(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
      metric(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
    }
  return metric;
}

namespace detail {

inline void record_degenerate(EstimationDiagnostics& diag, std::size_t node, const std::string& message)
{
  diag.degenerate_nodes.push_back(node);
  if (!message.empty()) {
    ++diag.failed_nodes;
    if (diag.messages.size() < 32)
      diag.messages.push_back(message);
  }
}

// Curvature at one node with failures mapped to diagnostics and K = 0.
inline std::vector<double> node_curvature(const MetricJet& jet, SectionalMode mode, std::size_t node,
                                          EstimationDiagnostics& diag, std::vector<double>& lambdas)
{
  try {
    const PointCurvature pc = curvature_from_jet(jet, mode, node);
    lambdas[node] = pc.regularization;
    if (pc.regularization > 0.0)
      record_degenerate(diag, node, {});
    return pc.sectional;
  } catch (const DegenerateMetricError& e) {
    record_degenerate(diag, node, e.what());
  } catch (const DegeneratePlaneError& e) {
    record_degenerate(diag, node, std::string("node ") + std::to_string(node) + ": " + e.what());
  }
  return std::vector<double>(pair_count(static_cast<std::size_t>(jet.g.rows())), 0.0);
}

inline void store(SectionalCurvatureField& field, std::size_t node, const std::vector<double>& k)
{
  for (std::size_t p = 0; p < k.size(); ++p)
    field.values(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(p)) = k[p];
}

} // namespace detail

/// Sectional curvature of a gridded metric field, with derivatives taken
/// from its tensor-product spline. The spline is fitted on the nodes left
/// after dropping `excluded_layers` boundary layers per side and evaluated
/// (extrapolated in the dropped layers) at every node of the field.
inline SectionalCurvatureField curvature_from_metric_field(MetricField& metric, SectionalMode mode,
                                                           EstimationDiagnostics& diag,
                                                           std::size_t excluded_layers = 0)
{
  const TensorGrid& grid = metric.grid;
  const std::size_t n = grid.dim();
  std::vector<std::vector<double>> axes(n);
  for (std::size_t a = 0; a < n; ++a) {
    const auto& axis = grid.axis(a);
    if (axis.size() < 2 * excluded_layers + 4)
      throw ArgumentError("curvature_from_metric_field: too many excluded layers for the grid");
    axes[a].assign(axis.begin() + static_cast<std::ptrdiff_t>(excluded_layers),
                   axis.end() - static_cast<std::ptrdiff_t>(excluded_layers));
  }
  const TensorGrid fit_grid(std::move(axes));
  Eigen::MatrixXd fit_values(static_cast<Eigen::Index>(fit_grid.size()), metric.values.cols());
  {
    std::vector<std::size_t> multi;
    for (std::size_t k = 0; k < fit_grid.size(); ++k) {
      fit_grid.unravel(k, multi);
      for (auto& m : multi)
        m += excluded_layers;
      fit_values.row(static_cast<Eigen::Index>(k)) = metric.values.row(static_cast<Eigen::Index>(grid.ravel(multi)));
    }
  }
  const SplineField spline(fit_grid, fit_values);
  const MultiIndexSet set(n, 2);

  SectionalCurvatureField field{grid, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()),
                                                            static_cast<Eigen::Index>(pair_count(n))),
                                mode};
  metric.regularization.assign(grid.size(), 0.0);
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const auto jet_values = spline.jet(grid.point(node), set);
    MetricJet jet{Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), Array3(n),
                  Array4(n)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const auto c = static_cast<Eigen::Index>(upper_index(n, i, j));
        jet.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = jet_values[0][c];
        for (std::size_t k = 0; k < n; ++k) {
          jet.dg(i, j, k) = jet_values[set.index_of_axes({k})][c];
          for (std::size_t l = 0; l < n; ++l)
            jet.d2g(i, j, k, l) = jet_values[set.index_of_axes({k, l})][c];
        }
      }
    detail::store(field, node, detail::node_curvature(jet, mode, node, diag, metric.regularization));
  }
  return field;
}

/// Route 1: spline f, build g = J^T J and its derivatives by the product rule
/// from spline derivatives of f up to order three.
inline CurvatureEstimate estimate_curvature_via_function(const TensorGrid& grid, const Eigen::MatrixXd& f_samples,
                                                         const EstimationConfig& config)
{
  if (config.method != EstimationMethod::FunctionSpline)
    throw ArgumentError("estimate_curvature_via_function: config.method must be function_spline");
  CurvatureEstimate out;
  const Eigen::MatrixXd f = config.rescale_output ? rescale_to_unit_box(f_samples, &out.output_scale) : f_samples;
  const SplineField spline(grid, f);

  const std::size_t n = grid.dim();
  const MultiIndexSet set(n, 3);
  out.field = {grid, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()),
                                           static_cast<Eigen::Index>(pair_count(n))),
               config.mode};
  out.metric.grid = grid;
  out.metric.values.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(upper_count(n)));
  out.metric.regularization.assign(grid.size(), 0.0);

  std::vector<Eigen::VectorXd> d1(n);
  std::vector<std::vector<Eigen::VectorXd>> d2(n, std::vector<Eigen::VectorXd>(n));
  std::vector<std::vector<std::vector<Eigen::VectorXd>>> d3(
      n, std::vector<std::vector<Eigen::VectorXd>>(n, std::vector<Eigen::VectorXd>(n)));

  for (std::size_t node = 0; node < grid.size(); ++node) {
    const auto jv = spline.jet(grid.point(node), set);
    for (std::size_t i = 0; i < n; ++i) {
      d1[i] = jv[set.index_of_axes({i})];
      for (std::size_t k = 0; k < n; ++k) {
        d2[k][i] = jv[set.index_of_axes({k, i})];
        for (std::size_t l = 0; l < n; ++l)
          d3[k][l][i] = jv[set.index_of_axes({k, l, i})];
      }
    }
    MetricJet jet{Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), Array3(n),
                  Array4(n)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        jet.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d1[i].dot(d1[j]);
        for (std::size_t k = 0; k < n; ++k) {
          jet.dg(i, j, k) = d2[k][i].dot(d1[j]) + d1[i].dot(d2[k][j]);
          for (std::size_t l = 0; l < n; ++l)
            jet.d2g(i, j, k, l) = d3[k][l][i].dot(d1[j]) + d2[k][i].dot(d2[l][j]) + d2[l][i].dot(d2[k][j]) +
                                  d1[i].dot(d3[k][l][j]);
        }
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        out.metric.values(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(upper_index(n, i, j))) =
            jet.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    detail::store(out.field, node,
                  detail::node_curvature(jet, config.mode, node, out.diagnostics, out.metric.regularization));
  }
  return out;
}

/// Route 2: least-squares metric from the K nearest grid nodes, eigenvalues
/// clamped to >= 1e-10, then spline the metric and differentiate twice.
inline CurvatureEstimate estimate_curvature_via_metric(const TensorGrid& grid, const Eigen::MatrixXd& f_samples,
                                                       const EstimationConfig& config)
{
  if (config.method != EstimationMethod::MetricKnn)
    throw ArgumentError("estimate_curvature_via_metric: config.method must be metric_knn");
  const std::size_t n = grid.dim();
  if (config.k_neighbors <= n)
    throw ArgumentError("estimate_curvature_via_metric: k_neighbors must exceed the source dimension");
  if (static_cast<std::size_t>(f_samples.rows()) != grid.size())
    throw ArgumentError("estimate_curvature_via_metric: sample rows do not match the grid");
  if (config.k_neighbors >= grid.size())
    throw ArgumentError("estimate_curvature_via_metric: k_neighbors must be below the number of grid nodes");

  CurvatureEstimate out;
  const Eigen::MatrixXd f = config.rescale_output ? rescale_to_unit_box(f_samples, &out.output_scale) : f_samples;
  const Eigen::MatrixXd x = grid.to_points().points();
  const KdTree tree(x);
  const auto kn = static_cast<Eigen::Index>(config.k_neighbors);

  out.metric.grid = grid;
  out.metric.values.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(upper_count(n)));
  Eigen::MatrixXd nb(kn, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd nb_image(kn, f.cols());
  // Depth (in layers from the nearest boundary) of the deepest node whose
  // neighbor stencil is one-sided.
  std::size_t unbalanced_depth = 0;
  bool any_unbalanced = false;
  std::vector<std::size_t> multi;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const auto ids = tree.nearest_to_row(node, config.k_neighbors);
    for (Eigen::Index r = 0; r < kn; ++r) {
      nb.row(r) = x.row(static_cast<Eigen::Index>(ids[static_cast<std::size_t>(r)]));
      nb_image.row(r) = f.row(static_cast<Eigen::Index>(ids[static_cast<std::size_t>(r)]));
    }
    {
      const Eigen::MatrixXd v = nb.rowwise() - x.row(static_cast<Eigen::Index>(node));
      const double reach = v.rowwise().norm().maxCoeff();
      if (v.colwise().sum().norm() > 1e-9 * reach) {
        grid.unravel(node, multi);
        std::size_t depth = std::numeric_limits<std::size_t>::max();
        for (std::size_t a = 0; a < n; ++a)
          depth = std::min({depth, multi[a], grid.axis(a).size() - 1 - multi[a]});
        unbalanced_depth = any_unbalanced ? std::max(unbalanced_depth, depth) : depth;
        any_unbalanced = true;
      }
    }
    Eigen::MatrixXd a;
    try {
      a = knn_metric_at(x.row(static_cast<Eigen::Index>(node)).transpose(), nb,
                        f.row(static_cast<Eigen::Index>(node)).transpose(), nb_image, node);
    } catch (const EstimationError& e) {
      detail::record_degenerate(out.diagnostics, node, e.what());
      a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    Eigen::VectorXd values = eig.eigenvalues();
    if (values.minCoeff() < min_metric_eigenvalue) {
      ++out.diagnostics.clamped_nodes;
      out.diagnostics.degenerate_nodes.push_back(node);
      values = values.cwiseMax(min_metric_eigenvalue);
      a = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        out.metric.values(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(upper_index(n, i, j))) =
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  // One-sided stencils bias the metric at first order; the spline's second
  // derivatives turn that into O(1/h) curvature errors a few nodes inward.
  // Such layers are left out of the metric spline as long as the scored
  // interior keeps at least one fitted node of margin.
  std::size_t excluded = any_unbalanced ? unbalanced_depth + 1 : 0;
  excluded = std::min(excluded, config.trim > 0 ? config.trim - 1 : std::size_t{0});
  for (std::size_t a = 0; a < n; ++a)
    while (excluded > 0 && grid.axis(a).size() < 2 * excluded + 4)
      --excluded;
  out.diagnostics.excluded_layers = excluded;
  out.field = curvature_from_metric_field(out.metric, config.mode, out.diagnostics, excluded);
  std::sort(out.diagnostics.degenerate_nodes.begin(), out.diagnostics.degenerate_nodes.end());
  out.diagnostics.degenerate_nodes.erase(
      std::unique(out.diagnostics.degenerate_nodes.begin(), out.diagnostics.degenerate_nodes.end()),
      out.diagnostics.degenerate_nodes.end());
  return out;
}

inline CurvatureEstimate estimate_curvature(const TensorGrid& grid, const Eigen::MatrixXd& f_samples,
                                            const EstimationConfig& config)
{
  return config.method == EstimationMethod::FunctionSpline
             ? estimate_curvature_via_function(grid, f_samples, config)
             : estimate_curvature_via_metric(grid, f_samples, config);
}

} // namespace curvebench
