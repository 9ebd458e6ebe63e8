// curvebench: generate instances, reduce, score, run suites, tune, plot.

#include "curvebench/bench.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

using namespace curvebench;
namespace fs = std::filesystem;

namespace {

struct EstimatorFlags
{
  std::string method = "metric_knn";
  std::size_t k_neighbors = 8;
  std::size_t trim = 2;
  std::string mode = "standard";
  std::string rescale = "on";
  std::size_t kn = 10;

  void add_to(CLI::App& app, const std::string& method_flag)
  {
    app.add_option(method_flag, method, "Curvature estimator")
        ->check(CLI::IsMember({"metric_knn", "function_spline"}))
        ->capture_default_str();
    app.add_option("--k-neighbors", k_neighbors, "Neighbors per node for metric_knn")->capture_default_str();
    app.add_option("--trim", trim, "Boundary layers excluded from the score")->capture_default_str();
    app.add_option("--mode", mode, "Sectional curvature denominator")
        ->check(CLI::IsMember({"standard", "paper-sqrt"}))
        ->capture_default_str();
    app.add_option("--rescale", rescale, "Rescale the embedding into the unit box before scoring")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    app.add_option("--kn", kn, "Neighborhood size for NPR")->capture_default_str();
  }

  ScoringOptions options() const
  {
    ScoringOptions s;
    s.estimator.method = method == "function_spline" ? EstimationMethod::FunctionSpline : EstimationMethod::MetricKnn;
    s.estimator.k_neighbors = k_neighbors;
    s.estimator.trim = trim;
    s.estimator.mode = mode == "paper-sqrt" ? SectionalMode::PaperSqrt : SectionalMode::Standard;
    s.estimator.rescale_output = rescale == "on";
    s.kn = kn;
    return s;
  }
};

std::vector<std::string> split_list(const std::string& text)
{
  std::vector<std::string> out;
  std::string cell;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(cell);
  return out;
}

json read_json_file(const fs::path& path)
{
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ArgumentError("JSON file '" + path.string() + "': " + e.what());
  }
}

json parse_json_text(const std::string& text, const char* what)
{
  if (text.empty())
    return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string(what) + ": " + e.what());
  }
}

// Hyperparameters and spaces may be given inline or as @file.
json json_argument(const std::string& text, const char* what)
{
  if (!text.empty() && text[0] == '@')
    return read_json_file(text.substr(1));
  return parse_json_text(text, what);
}

Eigen::MatrixXd instance_points(const InstanceDescriptor& d, bool identity_rotation = false)
{
  MakegenOptions options;
  options.identity_rotation = identity_rotation;
  return evaluate_immersion(makegen(d, options), make_grid(d.n, d.grid_resolution)).points();
}

void write_instance(const InstanceDescriptor& d, const fs::path& dir, bool identity_rotation)
{
  write_text(dir / (d.instance_id + ".json"), to_json(d).dump(2) + "\n");
  write_csv(dir / (d.instance_id + ".csv"), instance_points(d, identity_rotation), 'x');
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Curvature-based benchmark for dimensionality reduction"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  // generate
  auto* gen = app.add_subcommand("generate", "Write instance JSON and dataset CSV files");
  std::string gen_instance, gen_families, gen_thetas;
  std::size_t gen_m = 7, gen_resolution = 32;
  double gen_eta = 0.01, theta_easy = 1.2, theta_hard = 1.8;
  bool identity_rotation = false;
  fs::path gen_out = "instances";
  gen->add_option("--instance", gen_instance, "Instance JSON to regenerate");
  gen->add_option("--families", gen_families, "Comma-separated families (single instance)");
  gen->add_option("--thetas", gen_thetas, "Comma-separated thetas (single instance)");
  gen->add_option("--m", gen_m, "Ambient dimension")->capture_default_str();
  gen->add_option("--eta", gen_eta, "Translation standard deviation")->capture_default_str();
  gen->add_option("--resolution", gen_resolution, "Grid nodes per axis")->capture_default_str();
  gen->add_option("--theta-easy", theta_easy, "Suite easy theta")->capture_default_str();
  gen->add_option("--theta-hard", theta_hard, "Suite hard theta")->capture_default_str();
  gen->add_option("--seed", seed, "Master seed (suite) or instance seed");
  gen->add_flag("--identity-rotation", identity_rotation, "Test hook: skip the random rotation");
  gen->add_option("--out-dir", gen_out, "Output directory")->capture_default_str();

  // reduce
  auto* red = app.add_subcommand("reduce", "Reduce a dataset CSV to k dimensions");
  fs::path red_input, red_output;
  std::string red_method = "pca", red_hyper;
  std::size_t red_k = 2;
  double timeout = 600.0;
  red->add_option("--input", red_input, "Dataset CSV (x1..xm)")->required();
  red->add_option("--output", red_output, "Embedding CSV (y1..yk)")->required();
  red->add_option("--method", red_method, "pca | tsvd | mds | external:<command>")->capture_default_str();
  red->add_option("--k", red_k, "Target dimension")->capture_default_str();
  red->add_option("--seed", seed, "Seed passed to the reducer");
  red->add_option("--hyper", red_hyper, "Hyperparameters as JSON or @file");
  red->add_option("--timeout", timeout, "External reducer timeout in seconds")->capture_default_str();

  // score
  auto* sco = app.add_subcommand("score", "Score an embedding of an instance");
  fs::path sco_instance, sco_embedding, sco_dataset, sco_output;
  EstimatorFlags sco_est;
  sco->add_option("--instance", sco_instance, "Instance JSON")->required();
  sco->add_option("--embedding", sco_embedding, "Embedding CSV in grid row order")->required();
  sco->add_option("--dataset", sco_dataset, "Dataset CSV (default: regenerate from the instance)");
  sco->add_option("--output", sco_output, "Report JSON path (default: stdout)");
  sco_est.add_to(*sco, "--method");

  // suite
  auto* sui = app.add_subcommand("suite", "Run the full benchmark suite");
  SuiteOptions suite;
  std::vector<std::string> suite_methods;
  std::string suite_space, suite_objective = "curvature";
  EstimatorFlags sui_est;
  sui->add_option("--seed", seed, "Master seed");
  sui->add_option("--method", suite_methods, "Reducers (repeatable or comma-separated; default pca,tsvd,mds)");
  sui->add_option("--repeats", suite.repeats, "Runs per (instance, method)")->capture_default_str();
  sui->add_option("--resolution", suite.resolution, "Grid nodes per axis")->capture_default_str();
  sui->add_option("--theta-easy", suite.theta_easy, "Easy theta")->capture_default_str();
  sui->add_option("--theta-hard", suite.theta_hard, "Hard theta")->capture_default_str();
  sui->add_option("--eta", suite.eta, "Translation standard deviation")->capture_default_str();
  sui->add_option("--jobs", suite.jobs, "Worker threads")->capture_default_str();
  sui->add_option("--timeout", suite.timeout_seconds, "External reducer timeout in seconds")->capture_default_str();
  sui->add_option("--space", suite_space, "Hyperparameter space JSON or @file (enables tuning)");
  sui->add_option("--budget", suite.budget, "Tuning budget per run (0: no tuning)")->capture_default_str();
  sui->add_option("--objective", suite_objective, "Tuning objective")
      ->check(CLI::IsMember({"curvature", "npr"}))
      ->capture_default_str();
  sui->add_option("--filter", suite.filter, "Only instances whose id contains this text");
  sui->add_option("--out-dir", suite.out_dir, "Output directory")->capture_default_str();
  sui_est.add_to(*sui, "--estimator");

  // tune
  auto* tun = app.add_subcommand("tune", "Random-search hyperparameters for one instance");
  fs::path tun_instance, tun_output;
  std::string tun_method = "mds", tun_space = "{}", tun_objective = "curvature";
  std::size_t tun_budget = 10, tun_k = 2;
  EstimatorFlags tun_est;
  tun->add_option("--instance", tun_instance, "Instance JSON")->required();
  tun->add_option("--method", tun_method, "Reducer to tune")->capture_default_str();
  tun->add_option("--space", tun_space, "Hyperparameter space JSON or @file")->capture_default_str();
  tun->add_option("--budget", tun_budget, "Configurations to try")->capture_default_str();
  tun->add_option("--objective", tun_objective, "curvature | npr")
      ->check(CLI::IsMember({"curvature", "npr"}))
      ->capture_default_str();
  tun->add_option("--k", tun_k, "Target dimension")->capture_default_str();
  tun->add_option("--seed", seed, "Search seed");
  tun->add_option("--timeout", timeout, "External reducer timeout in seconds")->capture_default_str();
  tun->add_option("--output", tun_output, "Result JSON path (default: stdout)");
  tun_est.add_to(*tun, "--estimator");

  // plot
  auto* plo = app.add_subcommand("plot", "SVG scatter of an embedding or box plot of a summary");
  fs::path plo_input, plo_output;
  std::string plo_kind = "auto", plo_title;
  plo->add_option("--input", plo_input, "Embedding CSV or summary CSV")->required();
  plo->add_option("--output", plo_output, "SVG path")->required();
  plo->add_option("--kind", plo_kind, "auto | scatter | box")
      ->check(CLI::IsMember({"auto", "scatter", "box"}))
      ->capture_default_str();
  plo->add_option("--title", plo_title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      seed = master_seed(seed);
      if (!gen_instance.empty()) {
        const auto d = read_descriptor(gen_instance);
        write_instance(d, gen_out, identity_rotation);
        std::printf("%s\n", d.instance_id.c_str());
      } else if (!gen_families.empty() || !gen_thetas.empty()) {
        std::vector<CurvatureFamily> families;
        for (const auto& f : split_list(gen_families))
          families.push_back(parse_family(f));
        std::vector<double> thetas;
        for (const auto& t : split_list(gen_thetas)) {
          try {
            thetas.push_back(std::stod(t));
          } catch (const std::exception&) {
            throw ArgumentError("--thetas: '" + t + "' is not a number");
          }
        }
        const auto d = make_descriptor(families, thetas, gen_m, gen_eta, seed, gen_resolution);
        write_instance(d, gen_out, identity_rotation);
        std::printf("%s\n", d.instance_id.c_str());
      } else {
        const auto all = enumerate_suite(theta_easy, theta_hard, gen_eta, seed, gen_resolution);
        for (const auto& d : all)
          write_instance(d, gen_out, identity_rotation);
        std::printf("wrote %zu instances to %s\n", all.size(), gen_out.string().c_str());
      }
    } else if (red->parsed()) {
      seed = master_seed(seed);
      const Eigen::MatrixXd x = read_csv(red_input, 'x');
      ReduceOptions options;
      options.k = red_k;
      options.seed = seed;
      options.hyperparameters = json_argument(red_hyper, "--hyper");
      options.timeout_seconds = timeout;
      options.workdir = fs::path(red_output.string() + ".work");
      const auto result = run_reducer(parse_method(red_method), x, options);
      write_csv(red_output, result.Y, 'y');
      const json sidecar = {{"method", result.method},
                            {"hyperparameters", result.hyperparameters},
                            {"seed", seed},
                            {"k", red_k},
                            {"input", red_input.string()},
                            {"wall_time", result.wall_time},
                            {"diagnostics", result.diagnostics}};
      write_text(red_output.string() + ".json", sidecar.dump(2) + "\n");
      if (parse_method(red_method).kind != MethodSpec::Kind::External)
        fs::remove_all(options.workdir);
    } else if (sco->parsed()) {
      const auto d = read_descriptor(sco_instance);
      const Eigen::MatrixXd x = sco_dataset.empty() ? instance_points(d) : read_csv(sco_dataset, 'x');
      const Eigen::MatrixXd y = read_csv(sco_embedding, 'y');
      ScoreReport report = score_embedding(d, x, y, sco_est.options());
      const fs::path sidecar = sco_embedding.string() + ".json";
      if (fs::exists(sidecar)) {
        const json meta = read_json_file(sidecar);
        report.method = meta.value("method", std::string{});
        report.hyperparameters = meta.value("hyperparameters", json::object());
        report.reduce_seconds = meta.value("wall_time", 0.0);
        report.run_seed = meta.value("seed", std::uint64_t{0});
      }
      const std::string text = to_json(report).dump(2) + "\n";
      if (sco_output.empty())
        std::cout << text;
      else
        write_text(sco_output, text);
    } else if (sui->parsed()) {
      suite.seed = master_seed(seed);
      if (!suite_methods.empty()) {
        suite.methods.clear();
        for (const auto& m : suite_methods)
          for (const auto& part : m.rfind("external:", 0) == 0 ? std::vector<std::string>{m} : split_list(m))
            suite.methods.push_back(part);
      }
      suite.space = json_argument(suite_space, "--space");
      suite.objective = parse_objective(suite_objective);
      suite.scoring = sui_est.options();
      const auto summary = run_suite(suite);
      std::printf("%-12s %8s %12s %12s %12s\n", "method", "runs", "median", "flat_med", "curved_med");
      for (const auto& [m, q] : summary.per_method) {
        auto get = [&](const std::map<std::string, double>& v) {
          return v.count(m) ? v.at(m) : std::numeric_limits<double>::quiet_NaN();
        };
        std::printf("%-12s %8zu %12.4g %12.4g %12.4g\n", m.c_str(), q.count, q.median, get(summary.median_flat),
                    get(summary.median_curved));
      }
      std::printf("%zu runs, %zu failed; summary in %s\n", summary.rows.size(), summary.failures,
                  (suite.out_dir / "summary.csv").string().c_str());
    } else if (tun->parsed()) {
      seed = master_seed(seed);
      const auto d = read_descriptor(tun_instance);
      const Eigen::MatrixXd x = instance_points(d);
      ReduceOptions base;
      base.k = tun_k;
      base.seed = seed;
      base.timeout_seconds = timeout;
      base.workdir = fs::temp_directory_path() / ("curvebench_tune_" + std::to_string(::getpid()));
      const auto objective = parse_objective(tun_objective);
      const auto result = tune(parse_method(tun_method), json_argument(tun_space, "--space"), tun_budget, objective,
                               d, x, tun_est.options(), base, seed);
      fs::remove_all(base.workdir);
      json out = to_json(result, objective);
      out["method"] = tun_method;
      out["seed"] = seed;
      out["budget"] = tun_budget;
      const std::string text = out.dump(2) + "\n";
      if (tun_output.empty())
        std::cout << text;
      else
        write_text(tun_output, text);
    } else if (plo->parsed()) {
      const std::string text = read_text(plo_input);
      const bool is_summary = text.rfind("instance_id,", 0) == 0;
      std::string kind = plo_kind == "auto" ? (is_summary ? "box" : "scatter") : plo_kind;
      const std::string svg =
          kind == "box" ? box_svg(parse_summary_csv(text), plo_title) : scatter_svg(parse_csv(text), plo_title);
      write_text(plo_output, svg);
    }
  } catch (const ProtocolError& e) {
    std::cerr << "curvebench: protocol error (" << to_string(e.kind()) << "): " << e.what() << "\n"
              << e.diagnostics() << "\n";
    return 3;
  } catch (const ScoringError& e) {
    std::cerr << "curvebench: scoring error: " << e.what() << "\n";
    return 4;
  } catch (const TuningError& e) {
    std::cerr << "curvebench: tuning error: " << e.what() << "\n";
    return 5;
  } catch (const ArgumentError& e) {
    std::cerr << "curvebench: argument error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "curvebench: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
