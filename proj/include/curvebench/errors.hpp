#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace curvebench {

/// Input outside the domain of a closed-form function or a curve.
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Malformed or out-of-range argument.
class ArgumentError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Metric is singular at a grid node even after regularization.
class DegenerateMetricError : public std::runtime_error
{
public:
  DegenerateMetricError(const std::string& what, std::size_t node)
    : std::runtime_error(what), node_(node)
  {}

  std::size_t node() const noexcept { return node_; }

private:
  std::size_t node_;
};

/// Coordinate plane {e_i, e_j} has a non-positive area element.
class DegeneratePlaneError : public std::runtime_error
{
public:
  DegeneratePlaneError(const std::string& what, std::size_t i, std::size_t j)
    : std::runtime_error(what), i_(i), j_(j)
  {}

  std::size_t first_axis() const noexcept { return i_; }
  std::size_t second_axis() const noexcept { return j_; }

private:
  std::size_t i_;
  std::size_t j_;
};

/// Local least-squares metric fit failed (rank-deficient neighbor design).
class EstimationError : public std::runtime_error
{
public:
  EstimationError(const std::string& what, std::size_t node)
    : std::runtime_error(what), node_(node)
  {}

  std::size_t node() const noexcept { return node_; }

private:
  std::size_t node_;
};

/// Failures of the external reducer subprocess protocol.
class ProtocolError : public std::runtime_error
{
public:
  enum class Kind { NonzeroExit, Timeout, MalformedOutput, RowCountMismatch, LaunchFailure };

  ProtocolError(Kind kind, const std::string& what, std::string diagnostics = {})
    : std::runtime_error(what), kind_(kind), diagnostics_(std::move(diagnostics))
  {}

  Kind kind() const noexcept { return kind_; }
  const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
  Kind kind_;
  std::string diagnostics_;
};

inline const char* to_string(ProtocolError::Kind kind)
{
  switch (kind) {
  case ProtocolError::Kind::NonzeroExit: return "nonzero_exit";
  case ProtocolError::Kind::Timeout: return "timeout";
  case ProtocolError::Kind::MalformedOutput: return "malformed_output";
  case ProtocolError::Kind::RowCountMismatch: return "row_count_mismatch";
  case ProtocolError::Kind::LaunchFailure: return "launch_failure";
  }
  return "unknown";
}

/// Scoring refused: too many degenerate nodes to assess the embedding.
class ScoringError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace curvebench
