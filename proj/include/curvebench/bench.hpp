#pragma once

// Benchmark orchestration: scoring embeddings, running suites, random-search
// tuning and SVG plots.

#include "curvebench/dr_baselines.hpp"
#include "curvebench/errors.hpp"
#include "curvebench/external_reducer.hpp"
#include "curvebench/field_estimation.hpp"
#include "curvebench/io.hpp"
#include "curvebench/manifold_gen.hpp"
#include "curvebench/random.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace curvebench {

using nlohmann::json;

/// Hyperparameter search found no configuration that ran.
class TuningError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* seed_environment_variable = "CURVEBENCH_SEED";

/// Master seed: `CURVEBENCH_SEED` when set, otherwise `fallback`.
inline std::uint64_t master_seed(std::uint64_t fallback)
{
  const char* env = std::getenv(seed_environment_variable);
  if (!env || !*env)
    return fallback;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || env[0] == '-')
    throw ArgumentError(std::string(seed_environment_variable) + " must be an unsigned 64-bit integer, got '" + env +
                        "'");
  return v;
}

// ---------------------------------------------------------------------------
// Reducers

/// A reducer named on the command line: pca, tsvd, mds or external:<command>.
struct MethodSpec
{
  enum class Kind { Pca, Tsvd, Mds, External };
  Kind kind = Kind::Pca;
  std::string command; ///< External only.

  std::string label() const
  {
    switch (kind) {
    case Kind::Pca: return "pca";
    case Kind::Tsvd: return "tsvd";
    case Kind::Mds: return "mds";
    case Kind::External: return "external:" + command;
    }
    return "unknown";
  }
};

inline MethodSpec parse_method(const std::string& text)
{
  if (text == "pca")
    return {MethodSpec::Kind::Pca, {}};
  if (text == "tsvd")
    return {MethodSpec::Kind::Tsvd, {}};
  if (text == "mds")
    return {MethodSpec::Kind::Mds, {}};
  const std::string prefix = "external:";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size())
    return {MethodSpec::Kind::External, text.substr(prefix.size())};
  throw ArgumentError("unknown method '" + text + "'; valid methods are pca, tsvd, mds, external:<command>");
}

struct ReduceOptions
{
  std::size_t k = 2;
  std::uint64_t seed = 0;
  json hyperparameters = json::object();
  double timeout_seconds = 600.0;
  std::filesystem::path workdir = "curvebench_work";
};

/// Numeric hyperparameter with a default; rejects wrong types by name.
inline double hyper_number(const json& h, const char* key, double fallback)
{
  if (!h.contains(key))
    return fallback;
  if (!h.at(key).is_number())
    throw ArgumentError(std::string("hyperparameter '") + key + "' must be a number");
  return h.at(key).get<double>();
}

inline EmbeddingResult run_reducer(const MethodSpec& spec, const Eigen::MatrixXd& x, const ReduceOptions& options)
{
  const json& h = options.hyperparameters;
  auto reject_unknown = [&](std::initializer_list<const char*> known) {
    for (auto it = h.begin(); it != h.end(); ++it)
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }))
        throw ArgumentError("method " + spec.label() + " has no hyperparameter '" + it.key() + "'");
  };
  switch (spec.kind) {
  case MethodSpec::Kind::Pca:
    reject_unknown({});
    return pca_project(x, options.k);
  case MethodSpec::Kind::Tsvd:
    reject_unknown({});
    return truncated_svd_project(x, options.k);
  case MethodSpec::Kind::Mds: {
    reject_unknown({"max_iter", "tol"});
    MdsOptions mds;
    const double iters = hyper_number(h, "max_iter", static_cast<double>(mds.max_iter));
    if (!(iters >= 1.0))
      throw ArgumentError("hyperparameter 'max_iter' must be at least 1");
    mds.max_iter = static_cast<std::size_t>(std::llround(iters));
    mds.tol = hyper_number(h, "tol", mds.tol);
    return mds_project(x, options.k, mds);
  }
  case MethodSpec::Kind::External: {
    ExternalReducerOptions ext;
    ext.timeout_seconds = options.timeout_seconds;
    ext.seed = options.seed;
    ext.hyperparameters = h;
    auto out = run_external_reducer(spec.command, x, options.k, options.workdir, ext);
    out.method = spec.label();
    return out;
  }
  }
  throw ArgumentError("unknown method kind");
}

// ---------------------------------------------------------------------------
// Scoring

struct ScoringOptions
{
  EstimationConfig estimator;
  std::size_t kn = 10;
  /// Refuse to score when more than this fraction of nodes is degenerate.
  double max_degenerate_fraction = 0.5;
};

struct ScoreReport
{
  std::string instance_id;
  std::string method;
  json hyperparameters = json::object();
  EstimationConfig estimator;
  double curvature_score = 0.0;     ///< with estimator.rescale_output applied
  double curvature_score_raw = 0.0; ///< on the embedding as given
  double output_scale = 1.0;
  double npr = 0.0;
  std::size_t kn = 10;
  std::size_t degenerate_nodes = 0;
  std::size_t excluded_layers = 0;
  std::vector<std::string> diagnostics;
  double reduce_seconds = 0.0;
  double score_seconds = 0.0;
  std::uint64_t instance_seed = 0;
  std::uint64_t run_seed = 0;
  std::size_t repeat = 0;
  std::string status = "ok";
  std::string error;
};

inline json to_json(const EstimationConfig& c)
{
  return {{"method", to_string(c.method)},
          {"k_neighbors", c.k_neighbors},
          {"trim", c.trim},
          {"mode", to_string(c.mode)},
          {"rescale_output", c.rescale_output}};
}

inline json to_json(const ScoreReport& r)
{
  return {{"instance_id", r.instance_id},
          {"method", r.method},
          {"hyperparameters", r.hyperparameters},
          {"estimator", to_json(r.estimator)},
          {"curvature_score", r.curvature_score},
          {"curvature_score_raw", r.curvature_score_raw},
          {"output_scale", r.output_scale},
          {"npr", r.npr},
          {"kn", r.kn},
          {"degenerate_nodes", r.degenerate_nodes},
          {"excluded_layers", r.excluded_layers},
          {"diagnostics", r.diagnostics},
          {"wall_time", {{"reduce", r.reduce_seconds}, {"score", r.score_seconds}}},
          {"seeds", {{"instance", r.instance_seed}, {"run", r.run_seed}}},
          {"repeat", r.repeat},
          {"status", r.status},
          {"error", r.error}};
}

/// Score an embedding of the instance's grid. `x_high` are the generated
/// points (for NPR); `y` the embedding with rows in grid order.
inline ScoreReport score_embedding(const InstanceDescriptor& descriptor, const Eigen::MatrixXd& x_high,
                                   const Eigen::MatrixXd& y, const ScoringOptions& options)
{
  const auto start = std::chrono::steady_clock::now();
  const TensorGrid grid = TensorGrid::unit(descriptor.n, descriptor.grid_resolution);
  if (static_cast<std::size_t>(y.rows()) != grid.size())
    throw ArgumentError("embedding has " + std::to_string(y.rows()) + " rows but the instance grid has " +
                        std::to_string(grid.size()));
  if (x_high.rows() != y.rows())
    throw ArgumentError("dataset and embedding row counts differ");

  ScoreReport report;
  report.instance_id = descriptor.instance_id;
  report.instance_seed = descriptor.seed;
  report.estimator = options.estimator;
  report.kn = options.kn;

  auto run = [&](bool rescale) {
    EstimationConfig c = options.estimator;
    c.rescale_output = rescale;
    auto est = estimate_curvature(grid, y, c);
    const double fraction =
        static_cast<double>(est.diagnostics.degenerate_nodes.size()) / static_cast<double>(grid.size());
    if (fraction > options.max_degenerate_fraction) {
      std::ostringstream msg;
      msg << est.diagnostics.degenerate_nodes.size() << " of " << grid.size()
          << " nodes have a degenerate metric; the embedding is too collapsed to score";
      throw ScoringError(msg.str());
    }
    return est;
  };

  const auto raw = run(false);
  report.curvature_score_raw = l2_curvature_score(raw.field, options.estimator.trim);
  if (options.estimator.rescale_output) {
    const auto scaled = run(true);
    report.curvature_score = l2_curvature_score(scaled.field, options.estimator.trim);
    report.output_scale = scaled.output_scale;
  } else {
    report.curvature_score = report.curvature_score_raw;
  }
  report.degenerate_nodes = raw.diagnostics.degenerate_nodes.size();
  report.excluded_layers = raw.diagnostics.excluded_layers;
  report.diagnostics = raw.diagnostics.messages;
  report.npr = npr(x_high, y, options.kn);
  report.score_seconds = detail::seconds_since(start);
  return report;
}

// ---------------------------------------------------------------------------
// Tuning

/// One searchable hyperparameter: a range (optionally log-scaled or integer)
/// or a finite set of values.
struct HyperDimension
{
  std::string name;
  std::optional<std::pair<double, double>> range;
  bool log_scale = false;
  bool integer = false;
  std::vector<json> values;
};

/// Space JSON: {"name": {"range": [lo, hi], "log": bool, "integer": bool}
/// or {"values": [...]}, ...}.
inline std::vector<HyperDimension> parse_space(const json& space)
{
  if (!space.is_object())
    throw ArgumentError("hyperparameter space must be a JSON object");
  std::vector<HyperDimension> dims;
  for (auto it = space.begin(); it != space.end(); ++it) {
    const json& spec = it.value();
    HyperDimension d;
    d.name = it.key();
    auto fail = [&](const std::string& why) { throw ArgumentError("hyperparameter '" + d.name + "': " + why); };
    if (!spec.is_object())
      fail("expected an object with 'range' or 'values'");
    if (spec.contains("range") == spec.contains("values"))
      fail("give exactly one of 'range' or 'values'");
    if (spec.contains("values")) {
      if (!spec["values"].is_array() || spec["values"].empty())
        fail("'values' must be a non-empty array");
      d.values.assign(spec["values"].begin(), spec["values"].end());
    } else {
      const json& r = spec["range"];
      if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
        fail("'range' must be [lo, hi]");
      const double lo = r[0].get<double>(), hi = r[1].get<double>();
      if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
        fail("'range' needs finite lo <= hi");
      d.log_scale = spec.value("log", false);
      d.integer = spec.value("integer", false);
      if (d.log_scale && !(lo > 0.0))
        fail("log ranges need lo > 0");
      d.range = std::make_pair(lo, hi);
    }
    dims.push_back(std::move(d));
  }
  return dims;
}

inline json sample_configuration(const std::vector<HyperDimension>& dims, RandomStream& rng)
{
  json config = json::object();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& d : dims) {
    if (!d.values.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, d.values.size() - 1);
      config[d.name] = d.values[pick(rng)];
      continue;
    }
    const auto [lo, hi] = *d.range;
    const double u = unit(rng);
    double v = d.log_scale ? std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo))) : lo + u * (hi - lo);
    if (d.integer) {
      v = std::clamp(std::round(v), std::ceil(lo), std::floor(hi));
      config[d.name] = static_cast<long long>(v);
    } else {
      config[d.name] = v;
    }
  }
  return config;
}

enum class Objective { Curvature, Npr };

inline Objective parse_objective(const std::string& text)
{
  if (text == "curvature")
    return Objective::Curvature;
  if (text == "npr")
    return Objective::Npr;
  throw ArgumentError("unknown objective '" + text + "'; valid objectives are curvature, npr");
}

struct TuneTrial
{
  json hyperparameters;
  double objective = std::numeric_limits<double>::infinity(); ///< minimized
  std::string error;
};

struct TuneResult
{
  json best = json::object();
  double best_objective = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  std::vector<TuneTrial> trials;
};

inline json to_json(const TuneResult& r, Objective objective)
{
  json trials = json::array();
  for (const auto& t : r.trials)
    trials.push_back({{"hyperparameters", t.hyperparameters},
                      {"objective", std::isfinite(t.objective) ? json(t.objective) : json(nullptr)},
                      {"error", t.error}});
  return {{"objective", objective == Objective::Curvature ? "curvature" : "npr"},
          {"best", r.best},
          {"best_objective", r.best_objective},
          {"best_index", r.best_index},
          {"search", "uniform random"},
          {"trials", trials}};
}

/// Uniform random search. The objective is minimized: the curvature score, or
/// 1 - NPR. Failed runs count as +inf; ties go to the earliest draw.
inline TuneResult tune(const MethodSpec& method, const json& space, std::size_t budget, Objective objective,
                       const InstanceDescriptor& descriptor, const Eigen::MatrixXd& x_high,
                       const ScoringOptions& scoring, const ReduceOptions& base, std::uint64_t seed)
{
  if (budget < 1)
    throw ArgumentError("tuning budget must be at least 1");
  const auto dims = parse_space(space);
  RandomStream rng(seed);
  TuneResult result;
  for (std::size_t t = 0; t < budget; ++t) {
    TuneTrial trial;
    trial.hyperparameters = sample_configuration(dims, rng);
    try {
      ReduceOptions options = base;
      options.hyperparameters = trial.hyperparameters;
      options.workdir = base.workdir / ("trial" + std::to_string(t));
      const auto emb = run_reducer(method, x_high, options);
      const auto report = score_embedding(descriptor, x_high, emb.Y, scoring);
      trial.objective = objective == Objective::Curvature ? report.curvature_score : 1.0 - report.npr;
      if (!std::isfinite(trial.objective))
        trial.objective = std::numeric_limits<double>::infinity();
    } catch (const std::exception& e) {
      trial.error = e.what();
    }
    if (trial.objective < result.best_objective) {
      result.best_objective = trial.objective;
      result.best = trial.hyperparameters;
      result.best_index = t;
    }
    result.trials.push_back(std::move(trial));
  }
  if (!std::isfinite(result.best_objective))
    throw TuningError("every one of the " + std::to_string(budget) + " tuning runs failed; first error: " +
                      result.trials.front().error);
  return result;
}

// ---------------------------------------------------------------------------
// Suite

struct SuiteOptions
{
  std::uint64_t seed = 0;
  double theta_easy = 1.2;
  double theta_hard = 1.8;
  double eta = 0.01;
  std::size_t resolution = 32;
  std::size_t repeats = 3;
  std::vector<std::string> methods{"pca", "tsvd", "mds"};
  ScoringOptions scoring;
  std::size_t k = 2;
  std::size_t jobs = 1;
  double timeout_seconds = 600.0;
  /// Optional per-run tuning (applied to every method with a non-empty space).
  json space = json::object();
  std::size_t budget = 0;
  Objective objective = Objective::Curvature;
  std::filesystem::path out_dir = "curvebench_suite";
  /// Keep only instances whose id contains this substring (empty: all).
  std::string filter;
};

struct QuantileSummary
{
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Linear-interpolation quantiles (type 7); empty input gives count 0.
inline QuantileSummary summarize(std::vector<double> v)
{
  QuantileSummary s;
  s.count = v.size();
  if (v.empty())
    return s;
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.min = v.front();
  s.q1 = q(0.25);
  s.median = q(0.5);
  s.q3 = q(0.75);
  s.max = v.back();
  return s;
}

inline json to_json(const QuantileSummary& s)
{
  if (s.count == 0)
    return {{"count", 0}};
  return {{"count", s.count}, {"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}};
}

/// One row of the summary CSV.
struct SuiteRow
{
  std::string instance_id;
  std::string family_pair;
  bool has_flat_axis = false;
  std::string method;
  std::size_t repeat = 0;
  double score = 0.0;
  double score_raw = 0.0;
  double npr = 0.0;
  std::string status;
};

struct SuiteSummary
{
  std::vector<SuiteRow> rows;
  std::map<std::string, QuantileSummary> per_method;
  std::map<std::string, std::map<std::string, double>> median_per_pair; ///< method -> pair -> median
  std::map<std::string, double> median_flat;   ///< instances with at least one flat axis
  std::map<std::string, double> median_curved; ///< instances with no flat axis
  std::size_t failures = 0;
  json manifest;
};

inline std::string csv_field(const std::string& s)
{
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s)
    out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string summary_csv(const std::vector<SuiteRow>& rows)
{
  std::string out = "instance_id,method,repeat,score,score_raw,npr,status\n";
  for (const auto& r : rows) {
    const bool ok = r.status == "ok";
    out += csv_field(r.instance_id) + ',' + csv_field(r.method) + ',' + std::to_string(r.repeat) + ',' +
           (ok ? format_exact(r.score) : "") + ',' + (ok ? format_exact(r.score_raw) : "") + ',' +
           (ok ? format_exact(r.npr) : "") + ',' + csv_field(r.status) + '\n';
  }
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else {
      cells.back() += c;
    }
  }
  return cells;
}

/// Parse a summary CSV back into rows (family fields are not recovered).
inline std::vector<SuiteRow> parse_summary_csv(const std::string& text)
{
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "instance_id,method,repeat,score,score_raw,npr,status")
    throw ArgumentError("not a suite summary CSV (unexpected header)");
  std::vector<SuiteRow> rows;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7)
      throw ArgumentError("summary CSV row " + std::to_string(rows.size() + 1) + " has " +
                          std::to_string(cells.size()) + " fields, expected 7");
    SuiteRow r;
    r.instance_id = cells[0];
    r.method = cells[1];
    r.repeat = static_cast<std::size_t>(std::stoull(cells[2]));
    r.status = cells[6];
    if (r.status == "ok") {
      r.score = std::stod(cells[3]);
      r.score_raw = std::stod(cells[4]);
      r.npr = std::stod(cells[5]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Aggregate rows; recomputable from the rows alone.
inline SuiteSummary aggregate(std::vector<SuiteRow> rows)
{
  SuiteSummary s;
  std::map<std::string, std::vector<double>> by_method;
  std::map<std::string, std::map<std::string, std::vector<double>>> by_pair;
  std::map<std::string, std::vector<double>> flat, curved;
  for (const auto& r : rows) {
    by_method[r.method];
    if (r.status != "ok") {
      ++s.failures;
      continue;
    }
    by_method[r.method].push_back(r.score);
    by_pair[r.method][r.family_pair].push_back(r.score);
    (r.has_flat_axis ? flat : curved)[r.method].push_back(r.score);
  }
  for (auto& [m, v] : by_method)
    s.per_method[m] = summarize(v);
  for (auto& [m, pairs] : by_pair)
    for (auto& [p, v] : pairs)
      s.median_per_pair[m][p] = summarize(v).median;
  for (auto& [m, v] : flat)
    s.median_flat[m] = summarize(v).median;
  for (auto& [m, v] : curved)
    s.median_curved[m] = summarize(v).median;
  s.rows = std::move(rows);
  return s;
}

inline json to_json(const SuiteSummary& s)
{
  json per_method = json::object();
  for (const auto& [m, q] : s.per_method)
    per_method[m] = to_json(q);
  json ranking = json::object();
  for (const auto& [m, q] : s.per_method) {
    json entry = json::object();
    if (s.median_flat.count(m))
      entry["flat_median"] = s.median_flat.at(m);
    if (s.median_curved.count(m))
      entry["curved_median"] = s.median_curved.at(m);
    ranking[m] = entry;
  }
  return {{"per_method", per_method},
          {"median_per_family_pair", s.median_per_pair},
          {"flat_vs_curved", ranking},
          {"runs", s.rows.size()},
          {"failures", s.failures},
          {"manifest", s.manifest}};
}

inline std::string family_pair_label(const InstanceDescriptor& d)
{
  std::string out;
  for (std::size_t i = 0; i < d.families.size(); ++i)
    out += (i ? "-" : "") + std::string(to_string(d.families[i]));
  return out;
}

/// Descriptor used by repeat r: repeat 0 is the instance itself, later
/// repeats resample makegen under a derived seed.
inline InstanceDescriptor repeat_descriptor(const InstanceDescriptor& d, std::size_t repeat)
{
  InstanceDescriptor out = d;
  if (repeat > 0)
    out.seed = derive_seed(d.seed, "repeat/" + std::to_string(repeat));
  return out;
}

inline std::string run_name(const std::string& instance_id, std::size_t method_index, std::size_t repeat)
{
  return instance_id + "__m" + std::to_string(method_index) + "__r" + std::to_string(repeat);
}

/// Generate, (tune,) reduce and score every (instance, method, repeat).
/// Writes runs/<name>.json per run, summary.csv and summary.json.
inline SuiteSummary run_suite(const SuiteOptions& options)
{
  namespace fs = std::filesystem;
  if (options.methods.empty())
    throw ArgumentError("suite needs at least one method");
  if (options.repeats < 1)
    throw ArgumentError("suite repeats must be at least 1");
  std::vector<MethodSpec> methods;
  for (const auto& m : options.methods)
    methods.push_back(parse_method(m));
  if (options.budget > 0)
    parse_space(options.space);

  std::vector<InstanceDescriptor> instances;
  for (auto& d : enumerate_suite(options.theta_easy, options.theta_hard, options.eta, options.seed,
                                 options.resolution))
    if (options.filter.empty() || d.instance_id.find(options.filter) != std::string::npos)
      instances.push_back(std::move(d));
  if (instances.empty())
    throw ArgumentError("suite filter '" + options.filter + "' matches no instance");

  struct Job
  {
    std::size_t instance, method, repeat;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (std::size_t m = 0; m < methods.size(); ++m)
      for (std::size_t r = 0; r < options.repeats; ++r)
        jobs.push_back({i, m, r});

  fs::create_directories(options.out_dir / "runs");
  std::vector<SuiteRow> rows(jobs.size());
  std::mutex collector;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job job = jobs[j];
      const InstanceDescriptor d = repeat_descriptor(instances[job.instance], job.repeat);
      const MethodSpec& method = methods[job.method];
      const std::string name = run_name(d.instance_id, job.method, job.repeat);
      ScoreReport report;
      report.instance_id = d.instance_id;
      report.method = method.label();
      report.repeat = job.repeat;
      report.instance_seed = d.seed;
      report.run_seed = derive_seed(options.seed, name);
      report.estimator = options.scoring.estimator;
      report.kn = options.scoring.kn;
      try {
        const ImmersionMap map = makegen(d);
        const Eigen::MatrixXd x = evaluate_immersion(map, make_grid(d.n, d.grid_resolution)).points();
        ReduceOptions reduce;
        reduce.k = options.k;
        reduce.seed = report.run_seed;
        reduce.timeout_seconds = options.timeout_seconds;
        reduce.workdir = options.out_dir / "work" / name;
        if (options.budget > 0 && !options.space.empty()) {
          const auto tuned = tune(method, options.space, options.budget, options.objective, d, x, options.scoring,
                                  reduce, derive_seed(report.run_seed, "tune"));
          reduce.hyperparameters = tuned.best;
        }
        const auto emb = run_reducer(method, x, reduce);
        const ScoreReport scored = score_embedding(d, x, emb.Y, options.scoring);
        report.curvature_score = scored.curvature_score;
        report.curvature_score_raw = scored.curvature_score_raw;
        report.output_scale = scored.output_scale;
        report.npr = scored.npr;
        report.degenerate_nodes = scored.degenerate_nodes;
        report.excluded_layers = scored.excluded_layers;
        report.diagnostics = scored.diagnostics;
        report.score_seconds = scored.score_seconds;
        report.hyperparameters = emb.hyperparameters;
        report.reduce_seconds = emb.wall_time;
      } catch (const ProtocolError& e) {
        report.status = std::string("protocol_error:") + to_string(e.kind());
        report.error = std::string(e.what()) + "\n" + e.diagnostics();
      } catch (const ScoringError& e) {
        report.status = "scoring_error";
        report.error = e.what();
      } catch (const std::exception& e) {
        report.status = "error";
        report.error = e.what();
      }

      SuiteRow row;
      row.instance_id = d.instance_id;
      row.family_pair = family_pair_label(d);
      row.has_flat_axis = std::find(d.families.begin(), d.families.end(), CurvatureFamily::Flat) != d.families.end();
      row.method = report.method;
      row.repeat = job.repeat;
      row.score = report.curvature_score;
      row.score_raw = report.curvature_score_raw;
      row.npr = report.npr;
      row.status = report.status;
      const std::string text = to_json(report).dump(2) + "\n";
      std::lock_guard<std::mutex> lock(collector);
      rows[j] = std::move(row);
      write_text(options.out_dir / "runs" / (name + ".json"), text);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.jobs, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w)
    pool.emplace_back(work);
  work();
  for (auto& t : pool)
    t.join();

  SuiteSummary summary = aggregate(rows);
  std::vector<std::string> method_labels;
  for (const auto& m : methods)
    method_labels.push_back(m.label());
  summary.manifest = {{"seed", options.seed},
                      {"theta_easy", options.theta_easy},
                      {"theta_hard", options.theta_hard},
                      {"eta", options.eta},
                      {"resolution", options.resolution},
                      {"repeats", options.repeats},
                      {"methods", method_labels},
                      {"k", options.k},
                      {"kn", options.scoring.kn},
                      {"estimator", to_json(options.scoring.estimator)},
                      {"budget", options.budget},
                      {"space", options.space},
                      {"instances", instances.size()},
                      {"filter", options.filter}};
  write_text(options.out_dir / "summary.csv", summary_csv(summary.rows));
  write_text(options.out_dir / "summary.json", to_json(summary).dump(2) + "\n");
  if (summary.failures == summary.rows.size())
    throw std::runtime_error("every suite run failed; see " + (options.out_dir / "runs").string());
  return summary;
}

// ---------------------------------------------------------------------------
// Plots

namespace detail {

inline std::string svg_number(double v)
{
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", v);
  return buffer;
}

inline std::string xml_escape(const std::string& s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '&': out += "&amp;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

inline std::string hsl_color(double hue, double lightness)
{
  char buffer[48];
  std::snprintf(buffer, sizeof buffer, "hsl(%.1f,70%%,%.1f%%)", hue, lightness);
  return buffer;
}

} // namespace detail

/// Scatter of a 2-D embedding. Points are colored by grid row (hue) and
/// column (lightness) when the row count is a perfect square.
inline std::string scatter_svg(const Eigen::MatrixXd& y, const std::string& title = {})
{
  if (y.cols() != 2)
    throw ArgumentError("scatter plots need a 2-D embedding, got " + std::to_string(y.cols()) +
                        " columns; reduce to k = 2 or inspect the data with 'curvebench score' first");
  if (y.rows() < 1 || !y.allFinite())
    throw ArgumentError("scatter plot needs finite points");
  const double size = 480.0, margin = 30.0;
  const Eigen::RowVector2d lo = y.colwise().minCoeff();
  const Eigen::RowVector2d hi = y.colwise().maxCoeff();
  const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-300});
  const auto n = static_cast<std::size_t>(y.rows());
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  const bool square = side * side == n;

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_number(size + 2 * margin) +
                    "\" height=\"" + detail::svg_number(size + 2 * margin) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    out += "<text x=\"" + detail::svg_number(margin) + "\" y=\"20\" font-size=\"14\">" + detail::xml_escape(title) + "</text>\n";
  for (std::size_t k = 0; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const double px = margin + (y(r, 0) - lo[0]) / span * size;
    const double py = margin + size - (y(r, 1) - lo[1]) / span * size;
    const double row = square ? static_cast<double>(k / side) / std::max<double>(1.0, static_cast<double>(side - 1)) : 0.0;
    const double col = square ? static_cast<double>(k % side) / std::max<double>(1.0, static_cast<double>(side - 1))
                              : static_cast<double>(k) / std::max<double>(1.0, static_cast<double>(n - 1));
    out += "<circle cx=\"" + detail::svg_number(px) + "\" cy=\"" + detail::svg_number(py) + "\" r=\"2\" fill=\"" +
           detail::hsl_color(270.0 * row, 30.0 + 40.0 * col) + "\"/>\n";
  }
  return out + "</svg>\n";
}

/// Box glyph per method of the log10 scores in a summary (failed runs skipped).
inline std::string box_svg(const std::vector<SuiteRow>& rows, const std::string& title = {})
{
  std::map<std::string, std::vector<double>> by_method;
  for (const auto& r : rows)
    if (r.status == "ok")
      by_method[r.method].push_back(std::log10(std::max(r.score, 1e-300)));
  if (by_method.empty())
    throw ArgumentError("summary has no successful runs to plot");
  std::map<std::string, QuantileSummary> stats;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto& [m, v] : by_method) {
    stats[m] = summarize(v);
    lo = std::min(lo, stats[m].min);
    hi = std::max(hi, stats[m].max);
  }
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = 120.0 * static_cast<double>(stats.size()) + 80.0, height = 400.0, top = 40.0, bottom = 60.0;
  auto ypos = [&](double v) { return top + (hi - v) / (hi - lo) * (height - top - bottom); };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_number(width) +
                    "\" height=\"" + detail::svg_number(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"10\" y=\"20\" font-size=\"14\">" + detail::xml_escape(title.empty() ? std::string("log10 curvature score") : title) +
         "</text>\n";
  out += "<text x=\"10\" y=\"" + detail::svg_number(ypos(hi) + 4) + "\" font-size=\"10\">" +
         detail::svg_number(hi) + "</text>\n";
  out += "<text x=\"10\" y=\"" + detail::svg_number(ypos(lo) + 4) + "\" font-size=\"10\">" +
         detail::svg_number(lo) + "</text>\n";
  double x = 80.0;
  for (const auto& [m, s] : stats) {
    const double cx = x + 40.0;
    out += "<g class=\"box\">\n";
    out += "<line x1=\"" + detail::svg_number(cx) + "\" x2=\"" + detail::svg_number(cx) + "\" y1=\"" +
           detail::svg_number(ypos(s.max)) + "\" y2=\"" + detail::svg_number(ypos(s.min)) + "\" stroke=\"black\"/>\n";
    out += "<rect x=\"" + detail::svg_number(x + 15) + "\" y=\"" + detail::svg_number(ypos(s.q3)) +
           "\" width=\"50\" height=\"" + detail::svg_number(std::max(ypos(s.q1) - ypos(s.q3), 0.5)) +
           "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + detail::svg_number(x + 15) + "\" x2=\"" + detail::svg_number(x + 65) + "\" y1=\"" +
           detail::svg_number(ypos(s.median)) + "\" y2=\"" + detail::svg_number(ypos(s.median)) +
           "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::svg_number(x) + "\" y=\"" + detail::svg_number(height - bottom + 20) +
           "\" font-size=\"11\">" + detail::xml_escape(m.size() > 18 ? m.substr(0, 18) : m) + "</text>\n";
    out += "</g>\n";
    x += 120.0;
  }
  return out + "</svg>\n";
}

} // namespace curvebench
