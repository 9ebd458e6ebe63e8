// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include "curvebench/bench.hpp"
#include "curvebench/curve_kernel.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

using namespace curvebench;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

fs::path workspace()
{
  static const fs::path p = [] {
    const fs::path q = fs::temp_directory_path() / ("curvebench_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(q);
    fs::create_directories(q);
    return q;
  }();
  return p;
}

template <class F>
Eigen::MatrixXd sample_map(const TensorGrid& grid, std::size_t components, F&& f)
{
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(components));
  for (std::size_t k = 0; k < grid.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = f(grid.point(k)).transpose();
  return out;
}

double max_interior_error(const SectionalCurvatureField& field, std::size_t trim, double target)
{
  double worst = 0.0;
  for (std::size_t k = 0; k < field.grid.size(); ++k)
    if (field.grid.interior(k, trim))
      worst = std::max(worst, std::abs(field.values(static_cast<Eigen::Index>(k), 0) - target));
  return worst;
}

EstimationConfig config(EstimationMethod method, bool rescale)
{
  EstimationConfig c;
  c.method = method;
  c.rescale_output = rescale;
  return c;
}

Outcome curve_reconstruction()
{
  constexpr double h = default_quadrature_step;
  double radius_err = 0.0, speed_err = 0.0;
  for (double theta : {1.2, 1.8}) {
    const auto c = reconstruct_curve({CurvatureFamily::Circle, theta}, {0.0, 0.25, 0.5, 0.75, 1.0});
    const double r = 1.0 / (2.0 * std::numbers::pi * theta);
    const Eigen::Vector2d center(0.0, r);
    for (std::size_t k = 0; k < c.quadrature_size(); ++k)
      radius_err = std::max(radius_err, std::abs((c.quadrature_point(k) - center).norm() - r));
    for (const auto& p : c.points())
      radius_err = std::max(radius_err, std::abs((p - center).norm() - r));
    for (std::size_t k = 2; k + 2 < c.quadrature_size(); ++k) {
      const Eigen::Vector2d d = (-c.quadrature_point(k + 2) + 8.0 * c.quadrature_point(k + 1) -
                                 8.0 * c.quadrature_point(k - 1) + c.quadrature_point(k - 2)) /
                                (12.0 * h);
      speed_err = std::max(speed_err, std::abs(d.norm() - 1.0));
    }
  }
  return {radius_err < 1e-6 && speed_err < 10.0 * h * h,
          fmt("max radius error %.2e (< 1e-6), max |speed - 1| %.2e (< %.1e)", radius_err, speed_err, 10.0 * h * h)};
}

Outcome flat_space_zero()
{
  const TensorGrid grid = TensorGrid::unit(2, 32);
  MetricField metric{grid, Eigen::MatrixXd(static_cast<Eigen::Index>(grid.size()), 3), {}};
  for (Eigen::Index k = 0; k < metric.values.rows(); ++k)
    metric.values.row(k) << 1.0, 0.0, 1.0;
  EstimationDiagnostics diag;
  const double constant = curvature_from_metric_field(metric, SectionalMode::Standard, diag).values.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd f = grid.to_points().points();
  double worst = 0.0;
  for (auto method : {EstimationMethod::MetricKnn, EstimationMethod::FunctionSpline}) {
    const auto c = config(method, true);
    worst = std::max(worst, l2_curvature_score(estimate_curvature(grid, f, c).field, c.trim));
  }
  return {constant == 0.0 && worst < 1e-6,
          fmt("constant metric max |K| = %.1e (== 0), identity round trip max score %.2e (< 1e-6)", constant, worst)};
}

Outcome isometry_zero()
{
  const TensorGrid grid = TensorGrid::unit(2, 32);
  const double c = std::cos(0.7), s = std::sin(0.7);
  const Eigen::MatrixXd f = sample_map(grid, 2, [&](const Eigen::VectorXd& x) {
    return Eigen::Vector2d(c * x[0] - s * x[1] + 2.5, s * x[0] + c * x[1] - 4.0);
  });
  double worst = 0.0;
  for (auto method : {EstimationMethod::MetricKnn, EstimationMethod::FunctionSpline}) {
    const auto cfg = config(method, true);
    worst = std::max(worst, l2_curvature_score(estimate_curvature(grid, f, cfg).field, cfg.trim));
  }
  return {worst < 1e-6, fmt("max score over both estimators %.2e (< 1e-6)", worst)};
}

Outcome constant_curvature_oracles()
{
  auto axis = [](double start) {
    std::vector<double> a;
    for (int i = 0; i < 32; ++i)
      a.push_back(start + i / 31.0);
    return a;
  };
  auto field = [](const TensorGrid& grid, auto g22) {
    MetricField m{grid, Eigen::MatrixXd(static_cast<Eigen::Index>(grid.size()), 3), {}};
    for (std::size_t k = 0; k < grid.size(); ++k)
      m.values.row(static_cast<Eigen::Index>(k)) << 1.0, 0.0, g22(grid.point(k)[0]);
    return m;
  };
  const std::size_t trim = EstimationConfig{}.trim;
  EstimationDiagnostics diag;
  // The sphere chart is taken around the equator, away from the pole where sin x1 vanishes.
  auto sphere = field(TensorGrid({axis(std::numbers::pi / 2 - 0.5), axis(0.0)}),
                      [](double x) { return std::sin(x) * std::sin(x); });
  const double e_sphere = max_interior_error(curvature_from_metric_field(sphere, SectionalMode::Standard, diag), trim, 1.0);
  auto hyper = field(TensorGrid({axis(0.0), axis(0.0)}), [](double x) { return std::exp(2.0 * x); });
  const double e_hyper = max_interior_error(curvature_from_metric_field(hyper, SectionalMode::Standard, diag), trim, -1.0);
  return {e_sphere < 1e-3 && e_hyper < 1e-3,
          fmt("max interior error: sphere %.2e, hyperbolic %.2e (each < 1e-3)", e_sphere, e_hyper)};
}

Outcome knn_end_to_end()
{
  auto patch = [](const TensorGrid& grid, double r) {
    return sample_map(grid, 3, [r](const Eigen::VectorXd& x) {
      return Eigen::Vector3d(r * std::cos(x[0]) * std::cos(x[1]), r * std::sin(x[0]) * std::cos(x[1]),
                             r * std::sin(x[1]));
    });
  };
  const auto cfg = config(EstimationMethod::MetricKnn, false);
  bool pass = true;
  std::string detail;
  for (double r : {1.0, 2.0}) {
    const TensorGrid grid = TensorGrid::unit(2, 32);
    const double target = 1.0 / (r * r);
    const double rel = max_interior_error(estimate_curvature(grid, patch(grid, r), cfg).field, cfg.trim, target) / target;
    pass = pass && rel < 0.05;
    detail += fmt("r=%.0f rel error %.2e; ", r, rel);
  }
  double previous = INFINITY;
  for (std::size_t res : {16u, 32u, 64u}) {
    const TensorGrid grid = TensorGrid::unit(2, res);
    const double err = max_interior_error(estimate_curvature(grid, patch(grid, 1.0), cfg).field, cfg.trim, 1.0);
    pass = pass && err <= previous;
    previous = err;
    detail += fmt("res %.0f error %.2e; ", static_cast<double>(res), err);
  }
  return {pass, detail + "(< 5%, non-increasing)"};
}

Outcome linear_map_exactness()
{
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd m(7, 2), nb(8, 2);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = normal(rng);
    const Eigen::Vector2d x(normal(rng), normal(rng));
    for (Eigen::Index i = 0; i < 8; ++i)
      nb.row(i) = x.transpose() + 0.05 * Eigen::RowVector2d(normal(rng), normal(rng));
    const Eigen::MatrixXd a = knn_metric_at(x, nb, m * x, nb * m.transpose());
    worst = std::max(worst, (a - m.transpose() * m).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10, fmt("max |A - M^T M| over 100 trials %.2e (< 1e-10)", worst)};
}

int run_cli(const std::string& args)
{
  const std::string cmd = std::string(CURVEBENCH_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome suite_shape()
{
  const auto suite = enumerate_suite();
  bool shape = suite.size() == 60;
  for (const auto& d : suite)
    shape = shape && d.n == 2 && d.m == 7 && d.eta == 0.01 && d.grid_resolution == 32 &&
            (d.thetas[0] == 1.2 || d.thetas[0] == 1.8) && (d.thetas[1] == 1.2 || d.thetas[1] == 1.8);
  const fs::path a = workspace() / "gen_a", b = workspace() / "gen_b";
  const bool ran = run_cli("generate --seed 7 --out-dir '" + a.string() + "'") == 0 &&
                   run_cli("generate --seed 7 --out-dir '" + b.string() + "'") == 0;
  std::size_t files = 0, identical = 0;
  if (ran)
    for (const auto& entry : fs::directory_iterator(a)) {
      ++files;
      const fs::path other = b / entry.path().filename();
      identical += fs::exists(other) && read_text(entry.path()) == read_text(other);
    }
  return {shape && ran && files == 120 && identical == files,
          fmt("%.0f instances; %.0f of %.0f generated files byte-identical on regeneration", static_cast<double>(suite.size()),
              static_cast<double>(identical), static_cast<double>(files))};
}

Outcome ranking_property()
{
  SuiteOptions options;
  options.methods = {"pca", "tsvd", "mds"};
  options.repeats = 3;
  options.out_dir = workspace() / "suite";
  const auto summary = run_suite(options);
  bool pass = summary.failures == 0;
  std::string detail = fmt("%.0f failed runs; ", static_cast<double>(summary.failures));
  for (const auto& m : options.methods) {
    const double flat = summary.median_flat.count(m) ? summary.median_flat.at(m) : NAN;
    const double curved = summary.median_curved.count(m) ? summary.median_curved.at(m) : NAN;
    pass = pass && flat < curved;
    detail += m + fmt(" flat %.2e < curved %.2e; ", flat, curved);
  }
  return {pass, detail};
}

Outcome npr_baseline()
{
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(300, 7);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = normal(rng);
  RandomStream rs(5);
  const Eigen::MatrixXd q = sample_special_orthogonal(7, rs);
  const Eigen::MatrixXd similar = (2.5 * x * q.transpose()).rowwise() + Eigen::RowVectorXd::Constant(7, -1.25);
  const double identity = npr(x, x, 10), similarity = npr(x, similar, 10);

  Eigen::MatrixXd small(10, 3);
  for (Eigen::Index i = 0; i < small.size(); ++i)
    small.data()[i] = normal(rng);
  std::vector<Eigen::Index> perm(10);
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd y(10, 3);
    for (Eigen::Index i = 0; i < 10; ++i)
      y.row(i) = small.row(perm[static_cast<std::size_t>(i)]);
    total += npr(small, y, 3);
  }
  const double mean = total / trials;
  return {identity == 1.0 && similarity == 1.0 && std::abs(mean - 3.0 / 9.0) < 0.05,
          fmt("identity %.17g, similarity %.17g, permutation mean %.4f (1/3 +- 0.05)", identity, similarity, mean)};
}

Outcome protocol_robustness()
{
  SuiteOptions options;
  options.methods = {"pca", "external:sed '1s/x/y/g;$d' {input} | cut -d, -f1,2 > {output}",
                     "external:sleep 30 # {input} {output}", "external:exit 3 # {input} {output}"};
  options.repeats = 1;
  options.resolution = 12;
  options.filter = "sine1.2_circle1.8";
  options.timeout_seconds = 1.0;
  options.out_dir = workspace() / "protocol";
  const auto summary = run_suite(options);
  const auto rows = parse_summary_csv(read_text(options.out_dir / "summary.csv"));
  const bool pass = rows.size() == 4 && rows[0].status == "ok" && std::isfinite(rows[0].score) &&
                    rows[1].status == "protocol_error:row_count_mismatch" && rows[2].status == "protocol_error:timeout" &&
                    rows[3].status == "protocol_error:nonzero_exit" && summary.failures == 3 &&
                    summary_csv(rows) == read_text(options.out_dir / "summary.csv");
  std::string detail;
  for (const auto& r : rows)
    detail += r.method.substr(0, 8) + "=" + r.status + "; ";
  return {pass, detail};
}

} // namespace

int main()
{
  struct Criterion
  {
    const char* name;
    double limit_seconds;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"1 curve reconstruction", 1.0, curve_reconstruction},
      {"2 flat-space zero", 5.0, flat_space_zero},
      {"3 isometry zero", 5.0, isometry_zero},
      {"4 constant-curvature oracles", 5.0, constant_curvature_oracles},
      {"5 end-to-end KNN estimator", 30.0, knn_end_to_end},
      {"6 linear-map exactness", 0.0, linear_map_exactness},
      {"7 suite shape", 0.0, suite_shape},
      {"8 ranking property", 600.0, ranking_property},
      {"9 NPR baseline", 0.0, npr_baseline},
      {"10 protocol robustness", 0.0, protocol_robustness},
  };
  ::unsetenv(seed_environment_variable);
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0.0 && seconds >= c.limit_seconds) {
      o.pass = false;
      o.detail += fmt(" runtime over the %.0f s limit", c.limit_seconds);
    }
    failed += !o.pass;
    std::printf("%s criterion %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  fs::remove_all(workspace());
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
