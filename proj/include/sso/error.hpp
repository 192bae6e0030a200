#pragma once

#include <stdexcept>
#include <string>

namespace sso {

// Precondition violations on public entry points.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Eigenproblem on an empty node set; lambda is +inf by convention.
class EmptyDomainError : public std::runtime_error {
 public:
  EmptyDomainError() : std::runtime_error("empty domain") {}
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

// One of the two phases vanished (Rayleigh quotient +inf).
class DegeneratePhaseError : public std::runtime_error {
 public:
  DegeneratePhaseError() : std::runtime_error("degenerate phase") {}
};

class PhaseCollapseError : public std::runtime_error {
 public:
  explicit PhaseCollapseError(const std::string& detail)
      : std::runtime_error("phase collapse: " + detail +
                           " (try a smaller step_size or a smaller lambda)") {}
};

}  // namespace sso
