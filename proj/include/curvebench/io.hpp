#pragma once

// CSV point files and JSON instance descriptors.

#include "curvebench/errors.hpp"
#include "curvebench/grid.hpp"
#include "curvebench/manifold_gen.hpp"

#include <nlohmann/json.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace curvebench {

using json = nlohmann::json;

/// "%.17g": round-trips every double.
inline std::string format_exact(double value)
{
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

inline std::string csv_header(char prefix, std::size_t d)
{
  std::string header;
  for (std::size_t j = 0; j < d; ++j) {
    if (j)
      header += ',';
    header += prefix;
    header += std::to_string(j + 1);
  }
  return header;
}

inline std::string to_csv(const Eigen::MatrixXd& points, char prefix)
{
  std::string out = csv_header(prefix, static_cast<std::size_t>(points.cols()));
  out += '\n';
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (j)
        out += ',';
      out += format_exact(points(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file)
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  file << text;
  if (!file)
    throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path)
{
  std::ifstream file(path, std::ios::binary);
  if (!file)
    throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

inline void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& points, char prefix)
{
  write_text(path, to_csv(points, prefix));
}

/// Parse a point CSV whose header is `<prefix>1,...,<prefix>d`. A zero
/// prefix accepts any single-letter prefix.
inline Eigen::MatrixXd parse_csv(const std::string& text, char prefix = 0)
{
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ArgumentError("CSV: missing header");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();

  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      names.push_back(cell);
  }
  if (names.empty())
    throw ArgumentError("CSV: empty header");
  const char p = prefix ? prefix : (names[0].empty() ? 'x' : names[0][0]);
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] != std::string(1, p) + std::to_string(j + 1))
      throw ArgumentError("CSV: header column " + std::to_string(j + 1) + " is '" + names[j] +
                          "', expected '" + std::string(1, p) + std::to_string(j + 1) + "'");

  const std::size_t d = names.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
        throw ArgumentError("CSV: row " + std::to_string(rows + 1) + " column " +
                            std::to_string(cols + 1) + ": not a finite number: '" + cell + "'");
      values.push_back(v);
      ++cols;
    }
    if (cols != d)
      throw ArgumentError("CSV: row " + std::to_string(rows + 1) + " has " + std::to_string(cols) +
                          " columns, expected " + std::to_string(d));
    ++rows;
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * d + j];
  return out;
}

inline Eigen::MatrixXd read_csv(const std::filesystem::path& path, char prefix = 0)
{
  return parse_csv(read_text(path), prefix);
}

inline json to_json(const InstanceDescriptor& d)
{
  json families = json::array();
  for (auto f : d.families)
    families.push_back(std::string(to_string(f)));
  return json{{"n", d.n},
              {"m", d.m},
              {"families", families},
              {"thetas", d.thetas},
              {"eta", d.eta},
              {"seed", d.seed},
              {"grid_resolution", d.grid_resolution},
              {"instance_id", d.instance_id}};
}

/// Parse and validate; errors name the offending field.
inline InstanceDescriptor descriptor_from_json(const json& j)
{
  auto field = [&](const char* key) -> const json& {
    if (!j.is_object() || !j.contains(key))
      throw ArgumentError(std::string("instance field '") + key + "' is missing");
    return j.at(key);
  };
  InstanceDescriptor d;
  try {
    d.n = field("n").get<std::size_t>();
    d.m = field("m").get<std::size_t>();
    for (const auto& f : field("families"))
      d.families.push_back(parse_family(f.get<std::string>()));
    d.thetas = field("thetas").get<std::vector<double>>();
    d.eta = field("eta").get<double>();
    d.seed = field("seed").get<std::uint64_t>();
    d.grid_resolution = field("grid_resolution").get<std::size_t>();
    d.instance_id = field("instance_id").get<std::string>();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("instance JSON: ") + e.what());
  }
  d.validate();
  return d;
}

inline InstanceDescriptor read_descriptor(const std::filesystem::path& path)
{
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ArgumentError("instance JSON '" + path.string() + "': " + e.what());
  }
  return descriptor_from_json(j);
}

} // namespace curvebench
