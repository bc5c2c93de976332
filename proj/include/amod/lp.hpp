#pragma once
// Minimal dense linear-programming layer: problem container, a two-phase
// primal simplex (Dantzig pricing with a Bland anti-cycling fallback and an
// Eigen-based final refactorization for accurate primal/dual values), and a
// fixed-column MPS exporter.
//
// Form: minimize c.x subject to rows a_i.x {<=,=,>=} b_i and x >= 0.

#include <string>
#include <vector>

#include "amod/common.hpp"

namespace amod {

enum class RowSense { LessEqual, Equal, GreaterEqual };

struct LpRow {
  std::vector<std::pair<int, double>> coeffs;  // (variable, coefficient)
  RowSense sense = RowSense::Equal;
  double rhs = 0.0;
  std::string name;
};

struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<std::string> var_names;  // optional; generated when empty
  std::vector<LpRow> rows;

  int add_var(const std::string& name, double cost) {
    var_names.push_back(name);
    objective.push_back(cost);
    return num_vars++;
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Optimal;
  double objective = 0.0;
  std::vector<double> x;              // primal values
  std::vector<double> duals;          // per row; EQ free, LE <= 0, GE >= 0
  std::vector<double> reduced_costs;  // c - A^T y, >= 0 at optimum
  int iterations = 0;
  std::vector<std::string> infeasible_rows;  // rows kept unsatisfied by phase 1
};

struct SimplexOptions {
  int max_iterations = 500000;
  double pivot_tol = 1e-9;
  double feas_tol = 1e-7;
};

// Throws NumericError on iteration-limit/numerical breakdown; Infeasible and
// Unbounded come back as statuses.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

// Fixed-column MPS rendering (generated 8-character names; a comment block
// maps them back to the original row/variable names).
std::string lp_to_mps(const LinearProgram& lp, const std::string& model_name);

}  // namespace amod
