#pragma once

// Built-in linear reducers and the neighborhood preservation ratio.

#include "curvebench/errors.hpp"
#include "curvebench/knn.hpp"

#include <Eigen/Core>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace curvebench {

struct EmbeddingResult
{
  Eigen::MatrixXd Y;
  std::string method;
  nlohmann::json hyperparameters = nlohmann::json::object();
  double wall_time = 0.0;
  /// Method-specific extras (stress history, captured subprocess output).
  nlohmann::json diagnostics = nlohmann::json::object();
};

namespace detail {

inline void check_projection_args(const Eigen::MatrixXd& x, std::size_t k, const char* who)
{
  if (x.rows() < 1 || x.cols() < 1)
    throw ArgumentError(std::string(who) + ": empty input");
  if (!x.allFinite())
    throw ArgumentError(std::string(who) + ": input must be finite");
  const auto limit = static_cast<std::size_t>(std::min(x.rows(), x.cols()));
  if (k < 1 || k > limit)
    throw ArgumentError(std::string(who) + ": k = " + std::to_string(k) + " outside [1, " +
                        std::to_string(limit) + "]");
}

// Flip each right singular vector so its largest-magnitude loading is positive
// (first index wins on ties), flipping the matching output column too.
inline void fix_signs(Eigen::MatrixXd& directions, Eigen::MatrixXd& y)
{
  for (Eigen::Index c = 0; c < directions.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < directions.rows(); ++r)
      if (std::abs(directions(r, c)) > std::abs(directions(best, c)))
        best = r;
    if (directions(best, c) < 0.0) {
      directions.col(c) = -directions.col(c);
      y.col(c) = -y.col(c);
    }
  }
}

inline Eigen::MatrixXd svd_scores(const Eigen::MatrixXd& x, std::size_t k)
{
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd v = svd.matrixV().leftCols(kk);
  // X V_k equals U_k S_k but keeps the map row-wise, so equal rows stay equal.
  Eigen::MatrixXd y = x * v;
  fix_signs(v, y);
  return y;
}

inline double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace detail

/// Coordinates of mean-centered X on its top-k principal directions.
inline EmbeddingResult pca_project(const Eigen::MatrixXd& x, std::size_t k)
{
  detail::check_projection_args(x, k, "pca_project");
  const auto start = std::chrono::steady_clock::now();
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  EmbeddingResult out;
  out.Y = detail::svd_scores(centered, k);
  out.method = "pca";
  out.hyperparameters["k"] = k;
  out.wall_time = detail::seconds_since(start);
  return out;
}

/// Y = U_k S_k from the rank-k SVD of X, without centering.
inline EmbeddingResult truncated_svd_project(const Eigen::MatrixXd& x, std::size_t k)
{
  detail::check_projection_args(x, k, "truncated_svd_project");
  const auto start = std::chrono::steady_clock::now();
  EmbeddingResult out;
  out.Y = detail::svd_scores(x, k);
  out.method = "tsvd";
  out.hyperparameters["k"] = k;
  out.wall_time = detail::seconds_since(start);
  return out;
}

inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x)
{
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = (x.row(i) - x.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

/// Raw stress sum_{i<j} (d_ij - |y_i - y_j|)^2.
inline double mds_stress(const Eigen::MatrixXd& target, const Eigen::MatrixXd& y)
{
  double s = 0.0;
  for (Eigen::Index j = 0; j < y.rows(); ++j)
    for (Eigen::Index i = j + 1; i < y.rows(); ++i) {
      const double r = target(i, j) - (y.row(i) - y.row(j)).norm();
      s += r * r;
    }
  return s;
}

struct MdsOptions
{
  std::size_t max_iter = 300;
  double tol = 1e-6;
};

/// Metric MDS by SMACOF (unit weights). Starts from classical MDS, which for
/// Euclidean input distances equals the top-k principal coordinates.
/// diagnostics: "stress_history" (normalized stress per iterate, starting
/// with the initialization), "iterations", "normalized_stress".
inline EmbeddingResult mds_project(const Eigen::MatrixXd& x, std::size_t k, const MdsOptions& options = {})
{
  if (x.rows() < 1 || x.cols() < 1)
    throw ArgumentError("mds_project: empty input");
  if (k < 1)
    throw ArgumentError("mds_project: k must be at least 1");
  if (options.max_iter < 1)
    throw ArgumentError("mds_project: max_iter must be at least 1");
  if (!(options.tol >= 0.0))
    throw ArgumentError("mds_project: tol must be non-negative");
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index n = x.rows();
  const auto kk = static_cast<Eigen::Index>(k);

  const Eigen::MatrixXd target = pairwise_distances(x);
  if (!target.allFinite())
    throw ArgumentError("mds_project: distances must be finite");
  const double total = 0.5 * target.squaredNorm();
  const double norm = total > 0.0 ? total : 1.0;

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, kk);
  {
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const auto usable = std::min<Eigen::Index>(kk, std::min(n, x.cols()));
    y.leftCols(usable) = detail::svd_scores(centered, static_cast<std::size_t>(usable));
  }

  // Points are kept as columns (k x n) so each one is contiguous. The lower
  // triangle of `dist` holds the current configuration's distances.
  Eigen::MatrixXd conf = y.transpose();
  Eigen::MatrixXd dist(n, n);
  auto refresh = [&](const Eigen::MatrixXd& c) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double* pj = c.col(j).data();
      const double* tj = target.col(j).data();
      double* dj = dist.col(j).data();
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double* pi = c.col(i).data();
        double sq = 0.0;
        for (Eigen::Index a = 0; a < kk; ++a)
          sq += (pi[a] - pj[a]) * (pi[a] - pj[a]);
        const double d = std::sqrt(sq);
        dj[i] = d;
        const double r = tj[i] - d;
        s += r * r;
      }
    }
    return s;
  };

  double stress = refresh(conf);
  std::vector<double> history{stress / norm};
  std::size_t iterations = 0;
  Eigen::MatrixXd next(kk, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  while (iterations < options.max_iter && stress > 0.0) {
    // Guttman transform: x_j <- (1/n) sum_i (d_ij / |x_i - x_j|) (x_j - x_i).
    next.setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double* pj = conf.col(j).data();
      const double* tj = target.col(j).data();
      const double* dj = dist.col(j).data();
      double* nj = next.col(j).data();
      for (Eigen::Index i = j + 1; i < n; ++i) {
        if (!(dj[i] > 0.0))
          continue;
        const double w = tj[i] / dj[i];
        const double* pi = conf.col(i).data();
        double* ni = next.col(i).data();
        for (Eigen::Index a = 0; a < kk; ++a) {
          const double step = w * (pj[a] - pi[a]);
          nj[a] += step;
          ni[a] -= step;
        }
      }
    }
    next *= inv_n;
    const double next_stress = refresh(next);
    ++iterations;
    if (next_stress > stress) // majorization guarantees this only up to rounding
      break;
    const double decrease = (stress - next_stress) / stress;
    conf.swap(next);
    stress = next_stress;
    history.push_back(stress / norm);
    if (decrease < options.tol)
      break;
  }
  y = conf.transpose();

  EmbeddingResult out;
  out.Y = std::move(y);
  out.method = "mds";
  out.hyperparameters = {{"k", k}, {"max_iter", options.max_iter}, {"tol", options.tol}};
  out.diagnostics = {{"stress_history", history}, {"iterations", iterations}, {"normalized_stress", stress / norm}};
  out.wall_time = detail::seconds_since(start);
  return out;
}

/// Neighborhood preservation ratio: mean fraction of each point's kn nearest
/// neighbors in X that stay among its kn nearest neighbors in Y.
inline double npr(const Eigen::MatrixXd& x_high, const Eigen::MatrixXd& y_low, std::size_t kn)
{
  if (x_high.rows() != y_low.rows())
    throw ArgumentError("npr: X has " + std::to_string(x_high.rows()) + " rows but Y has " +
                        std::to_string(y_low.rows()));
  const auto n = static_cast<std::size_t>(x_high.rows());
  if (kn < 1 || kn + 1 > n)
    throw ArgumentError("npr: kn = " + std::to_string(kn) + " outside [1, N-1]");
  if (!x_high.allFinite() || !y_low.allFinite())
    throw ArgumentError("npr: inputs must be finite");
  const KdTree high(x_high);
  const KdTree low(y_low);
  std::size_t total = 0;
  for (std::size_t p = 0; p < n; ++p) {
    auto a = high.nearest_to_row(p, kn);
    auto b = low.nearest_to_row(p, kn);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::size_t> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    total += common.size();
  }
  return static_cast<double>(total) / (static_cast<double>(kn) * static_cast<double>(n));
}

} // namespace curvebench
