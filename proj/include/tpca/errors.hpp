#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpca {

/// Structurally valid input that is degenerate for the operation
/// (e.g. a zero vector where a direction is required).
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A power-style update produced a (near-)zero vector and cannot be normalized.
class DegenerateStepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Line search made no progress for too many consecutive iterations.
/// Carries the best point found so callers can keep partial results.
class StalledError : public std::runtime_error {
 public:
  StalledError(const std::string& what, std::vector<double> best_point, double best_value,
               int stage = -1)
      : std::runtime_error(what),
        best_point(std::move(best_point)),
        best_value(best_value),
        stage(stage) {}

  std::vector<double> best_point;
  double best_value;
  int stage;  // continuation stage index when raised inside a schedule, else -1
};

/// Refused because the request exceeds a configured memory/size budget.
class ResourceGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tpca
