#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stablesim {

// Bad parameters or malformed inputs.
struct validation_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical integration could not certify the requested accuracy.
struct quadrature_error : std::runtime_error {
  double residual;
  quadrature_error(const std::string& msg, double res)
      : std::runtime_error(msg), residual(res) {}
};

// A run would exceed the configured draw budget; thrown before any work.
struct budget_error : std::runtime_error {
  std::uint64_t estimated_draws;
  std::uint64_t budget_draws;
  budget_error(const std::string& msg, std::uint64_t est, std::uint64_t budget)
      : std::runtime_error(msg), estimated_draws(est), budget_draws(budget) {}
};

// A discretized law lost all of its genuinely positive mass to rounding.
struct degeneracy_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An orbit needs more consecutive levels than the tower provides.
struct coverage_error : std::runtime_error {
  double uncovered_measure;
  coverage_error(const std::string& msg, double uncovered)
      : std::runtime_error(msg), uncovered_measure(uncovered) {}
};

// An estimator grid point fell where the estimator is unusable.
struct grid_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stablesim
