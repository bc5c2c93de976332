#pragma once
// Shared error model and small utilities.

#include <stdexcept>
#include <string>
#include <vector>

namespace amod {

// Exit codes used by the CLI (and by tests that exercise error paths).
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,  // bad scenario / arguments / model inputs
  kExitInfeasible = 3,  // LP has no feasible point
  kExitRuntime = 4,     // numerical failure or internal error
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg, int exit_code = kExitRuntime)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

// Invalid input: malformed scenario, inconsistent dimensions, bad parameters.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg, kExitValidation) {}
};

// The routing/rebalancing LP admits no feasible flow.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& msg, std::vector<std::string> binding_rows = {})
      : Error(msg, kExitInfeasible), binding_rows_(std::move(binding_rows)) {}
  const std::vector<std::string>& binding_rows() const { return binding_rows_; }

 private:
  std::vector<std::string> binding_rows_;
};

// Numerical breakdown: singular system, residual above tolerance, overflow.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg, kExitRuntime) {}
};

}  // namespace amod
