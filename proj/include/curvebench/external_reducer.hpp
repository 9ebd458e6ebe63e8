#pragma once

// Run a third-party reducer as a subprocess over CSV files (POSIX only).
//
// The command template is expanded with {input}, {output}, {k}, {seed} and
// one {name} per hyperparameter, then run through /bin/sh in the working
// directory. stdout and stderr are captured to files there.

#include "curvebench/dr_baselines.hpp"
#include "curvebench/errors.hpp"
#include "curvebench/io.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace curvebench {

struct ExternalReducerOptions
{
  double timeout_seconds = 600.0;
  std::uint64_t seed = 0;
  nlohmann::json hyperparameters = nlohmann::json::object();
  /// Diagnostics keep at most this many bytes of each captured stream.
  std::size_t capture_limit = 16384;
};

namespace detail {

inline std::string hyper_text(const nlohmann::json& v)
{
  if (v.is_string())
    return v.get<std::string>();
  if (v.is_number_float())
    return format_exact(v.get<double>());
  return v.dump();
}

inline void replace_all(std::string& text, const std::string& key, const std::string& value)
{
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
}

inline std::string shell_quote(const std::string& s)
{
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

inline std::string read_capped(const std::filesystem::path& path, std::size_t limit)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return {};
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() > limit)
    data = data.substr(0, limit) + "\n[truncated]";
  return data;
}

} // namespace detail

/// Expand placeholders. Paths are shell-quoted; unknown placeholders are
/// left as they are.
inline std::string expand_command(std::string command, const std::filesystem::path& input,
                                  const std::filesystem::path& output, std::size_t k, std::uint64_t seed,
                                  const nlohmann::json& hyperparameters)
{
  if (command.find("{input}") == std::string::npos || command.find("{output}") == std::string::npos)
    throw ArgumentError("external reducer command must contain {input} and {output}");
  detail::replace_all(command, "{input}", detail::shell_quote(input.string()));
  detail::replace_all(command, "{output}", detail::shell_quote(output.string()));
  detail::replace_all(command, "{k}", std::to_string(k));
  detail::replace_all(command, "{seed}", std::to_string(seed));
  for (auto it = hyperparameters.begin(); it != hyperparameters.end(); ++it)
    detail::replace_all(command, "{" + it.key() + "}", detail::hyper_text(it.value()));
  return command;
}

inline EmbeddingResult run_external_reducer(const std::string& command, const Eigen::MatrixXd& x, std::size_t k,
                                            const std::filesystem::path& workdir,
                                            const ExternalReducerOptions& options = {})
{
  namespace fs = std::filesystem;
  if (k < 1)
    throw ArgumentError("run_external_reducer: k must be at least 1");
  if (!(options.timeout_seconds > 0.0))
    throw ArgumentError("run_external_reducer: timeout must be positive");
  fs::create_directories(workdir);
  const fs::path input = fs::absolute(workdir / "input.csv");
  const fs::path output = fs::absolute(workdir / "output.csv");
  const fs::path out_log = workdir / "stdout.txt";
  const fs::path err_log = workdir / "stderr.txt";
  fs::remove(output);
  write_csv(input, x, 'x');
  const std::string expanded = expand_command(command, input, output, k, options.seed, options.hyperparameters);

  auto diagnostics = [&] {
    return "command: " + expanded + "\n--- stdout ---\n" + detail::read_capped(out_log, options.capture_limit) +
           "\n--- stderr ---\n" + detail::read_capped(err_log, options.capture_limit);
  };

  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0)
    throw ProtocolError(ProtocolError::Kind::LaunchFailure,
                        std::string("external reducer: fork failed: ") + std::strerror(errno), expanded);
  if (pid == 0) {
    ::setpgid(0, 0);
    const int out_fd = ::open(out_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int err_fd = ::open(err_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int in_fd = ::open("/dev/null", O_RDONLY);
    if (out_fd < 0 || err_fd < 0 || in_fd < 0 || ::chdir(workdir.c_str()) != 0)
      ::_exit(127);
    ::dup2(in_fd, 0);
    ::dup2(out_fd, 1);
    ::dup2(err_fd, 2);
    ::execl("/bin/sh", "sh", "-c", expanded.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);

  int status = 0;
  bool timed_out = false;
  for (auto pause = std::chrono::milliseconds(1);;) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid)
      break;
    if (r < 0 && errno != EINTR)
      throw ProtocolError(ProtocolError::Kind::LaunchFailure, "external reducer: waitpid failed", diagnostics());
    if (detail::seconds_since(start) > options.timeout_seconds) {
      timed_out = true;
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      break;
    }
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::milliseconds(50));
  }
  // Reap anything the command left behind in its process group.
  ::kill(-pid, SIGKILL);
  const double elapsed = detail::seconds_since(start);

  if (timed_out) {
    std::ostringstream msg;
    msg << "external reducer timed out after " << options.timeout_seconds << " s";
    throw ProtocolError(ProtocolError::Kind::Timeout, msg.str(), diagnostics());
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const std::string how = WIFEXITED(status) ? "exit code " + std::to_string(WEXITSTATUS(status))
                                              : "signal " + std::to_string(WTERMSIG(status));
    throw ProtocolError(ProtocolError::Kind::NonzeroExit, "external reducer failed with " + how, diagnostics());
  }

  Eigen::MatrixXd y;
  try {
    if (!fs::exists(output))
      throw ArgumentError("output file " + output.string() + " was not written");
    y = read_csv(output, 'y');
  } catch (const std::exception& e) {
    throw ProtocolError(ProtocolError::Kind::MalformedOutput,
                        std::string("external reducer output is malformed: ") + e.what(), diagnostics());
  }
  if (y.rows() != x.rows())
    throw ProtocolError(ProtocolError::Kind::RowCountMismatch,
                        "external reducer returned " + std::to_string(y.rows()) + " rows, expected " +
                            std::to_string(x.rows()),
                        diagnostics());
  if (static_cast<std::size_t>(y.cols()) != k)
    throw ProtocolError(ProtocolError::Kind::MalformedOutput,
                        "external reducer returned " + std::to_string(y.cols()) + " columns, expected " +
                            std::to_string(k),
                        diagnostics());

  EmbeddingResult out;
  out.Y = std::move(y);
  out.method = "external";
  out.hyperparameters = options.hyperparameters;
  out.hyperparameters["k"] = k;
  out.hyperparameters["seed"] = options.seed;
  out.hyperparameters["command"] = command;
  out.wall_time = elapsed;
  out.diagnostics = {{"stdout", detail::read_capped(out_log, options.capture_limit)},
                     {"stderr", detail::read_capped(err_log, options.capture_limit)}};
  return out;
}

} // namespace curvebench
