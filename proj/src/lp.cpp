#include "amod/lp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

namespace amod {

namespace {

struct Tableau {
  // rows x cols body, rhs column kept separately; last logical row is the
  // objective row of the current phase.
  int m = 0, n = 0;
  std::vector<double> a;  // (m+1) x n
  std::vector<double> b;  // m entries + objective value at index m
  std::vector<int> basis;
  std::vector<int> row_origin;  // tableau row -> original row index

  double& at(int r, int c) { return a[static_cast<size_t>(r) * n + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * n + c]; }

  void pivot(int pr, int pc) {
    double piv = at(pr, pc);
    double inv = 1.0 / piv;
    for (int c = 0; c < n; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;  // keep the unit column exact
    b[pr] *= inv;
    for (int r = 0; r <= m; ++r) {
      if (r == pr) continue;
      double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c < n; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
      b[r] -= f * b[pr];
    }
    basis[pr] = pc;
  }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opt) {
  int n0 = lp.num_vars;
  int m0 = static_cast<int>(lp.rows.size());
  if (static_cast<int>(lp.objective.size()) != n0) throw ValidationError("lp objective length mismatch");
  for (const auto& row : lp.rows)
    for (auto [j, v] : row.coeffs)
      if (j < 0 || j >= n0 || !std::isfinite(v)) throw ValidationError("lp row references an invalid variable");

  // Row equilibration: divide each row by its largest |coefficient|.
  std::vector<double> row_scale(m0, 1.0);
  std::vector<int> sense_sign(m0, 1);  // -1 when the row was negated to get b >= 0
  for (int i = 0; i < m0; ++i) {
    double mx = 0.0;
    for (auto [j, v] : lp.rows[i].coeffs) mx = std::max(mx, std::abs(v));
    row_scale[i] = mx > 0 ? mx : 1.0;
  }

  // Column layout: structural | slack/surplus | artificial.
  int n_slack = 0;
  for (const auto& row : lp.rows)
    if (row.sense != RowSense::Equal) ++n_slack;
  std::vector<int> slack_col(m0, -1);
  int nt = n0 + n_slack;  // artificials appended after we know who needs one

  Tableau t;
  t.m = m0;
  std::vector<std::vector<double>> dense(m0, std::vector<double>(nt, 0.0));
  std::vector<double> rhs(m0, 0.0);
  {
    int sc = n0;
    for (int i = 0; i < m0; ++i) {
      const auto& row = lp.rows[i];
      double s = 1.0 / row_scale[i];
      double bi = row.rhs * s;
      double sign = 1.0;
      RowSense sense = row.sense;
      if (bi < 0) {  // flip the row so rhs >= 0
        sign = -1.0;
        bi = -bi;
        sense_sign[i] = -1;
        if (sense == RowSense::LessEqual)
          sense = RowSense::GreaterEqual;
        else if (sense == RowSense::GreaterEqual)
          sense = RowSense::LessEqual;
      }
      for (auto [j, v] : row.coeffs) dense[i][j] += sign * v * s;
      if (row.sense != RowSense::Equal) {
        // effective sense after any sign flip decides the slack direction
        slack_col[i] = sc;
        dense[i][sc] = sense == RowSense::LessEqual ? 1.0 : -1.0;
        ++sc;
      }
      rhs[i] = bi;
    }
  }

  // Artificial variables for rows lacking a ready unit column.
  std::vector<int> art_col(m0, -1);
  int n_art = 0;
  for (int i = 0; i < m0; ++i) {
    bool has_unit = slack_col[i] >= 0 && dense[i][slack_col[i]] > 0;
    if (!has_unit) ++n_art;
  }
  int total = nt + n_art;
  t.n = total;
  t.a.assign(static_cast<size_t>(m0 + 1) * total, 0.0);
  t.b.assign(m0 + 1, 0.0);
  t.basis.assign(m0, -1);
  t.row_origin.resize(m0);
  {
    int ac = nt;
    for (int i = 0; i < m0; ++i) {
      t.row_origin[i] = i;
      for (int j = 0; j < nt; ++j) t.at(i, j) = dense[i][j];
      t.b[i] = rhs[i];
      if (slack_col[i] >= 0 && dense[i][slack_col[i]] > 0) {
        t.basis[i] = slack_col[i];
      } else {
        art_col[i] = ac;
        t.at(i, ac) = 1.0;
        t.basis[i] = ac;
        ++ac;
      }
    }
  }
  dense.clear();
  dense.shrink_to_fit();

  LpSolution out;
  auto is_artificial = [&](int c) { return c >= nt; };

  // Phase objective rows: phase 1 minimizes the artificial sum.
  auto load_objective = [&](bool phase1) {
    for (int c = 0; c < total; ++c) t.at(t.m, c) = 0.0;
    t.b[t.m] = 0.0;
    if (phase1) {
      // reduced costs of minimize sum(artificials): subtract artificial rows
      for (int i = 0; i < t.m; ++i)
        if (is_artificial(t.basis[i])) {
          for (int c = 0; c < total; ++c) t.at(t.m, c) -= t.at(i, c);
          t.b[t.m] -= t.b[i];
        }
      for (int c = nt; c < total; ++c) t.at(t.m, c) += 1.0;
    } else {
      for (int j = 0; j < n0; ++j) t.at(t.m, j) = lp.objective[j];
      for (int i = 0; i < t.m; ++i) {
        int bc = t.basis[i];
        double cb = bc < n0 ? lp.objective[bc] : 0.0;
        if (cb == 0.0) continue;
        for (int c = 0; c < total; ++c) t.at(t.m, c) -= cb * t.at(i, c);
        t.b[t.m] -= cb * t.b[i];
      }
      for (int i = 0; i < t.m; ++i) t.at(t.m, t.basis[i]) = 0.0;
    }
  };

  int iterations = 0;
  auto run_phase = [&](bool phase1) -> LpStatus {
    load_objective(phase1);
    int stall = 0;
    double last_obj = t.b[t.m];
    while (true) {
      if (++iterations > opt.max_iterations)
        throw NumericError("simplex iteration limit reached (" + std::to_string(iterations) + ")");
      bool bland = stall > 200;
      int enter = -1;
      double best = -opt.pivot_tol;
      for (int c = 0; c < total; ++c) {
        if (!phase1 && is_artificial(c)) continue;  // artificials stay out in phase 2
        double rc = t.at(t.m, c);
        if (rc < best) {
          if (bland) {
            enter = c;
            break;
          }
          best = rc;
          enter = c;
        }
      }
      if (enter < 0) return LpStatus::Optimal;  // current phase optimal
      // Ratio test; rows holding a zero-valued artificial leave first so
      // phase 2 never drags an artificial negative.
      int leave = -1;
      double best_ratio = 0.0;
      for (int r = 0; r < t.m; ++r) {
        double a = t.at(r, enter);
        if (!phase1 && is_artificial(t.basis[r]) && std::abs(a) > opt.pivot_tol && t.b[r] <= opt.feas_tol) {
          leave = r;
          break;
        }
        if (a <= opt.pivot_tol) continue;
        double ratio = t.b[r] / a;
        if (leave < 0 || ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && t.basis[r] < t.basis[leave]))
        {
          leave = r;
          best_ratio = ratio;
        }
      }
      if (leave < 0) return LpStatus::Unbounded;
      t.pivot(leave, enter);
      // b[m] stores the negated objective, so minimization progress shows up
      // as an increase here.
      double obj = t.b[t.m];
      if (obj > last_obj + 1e-12 * (1.0 + std::abs(last_obj))) {
        stall = 0;
        last_obj = obj;
      } else {
        ++stall;
      }
    }
  };

  // ---- Phase 1.
  LpStatus st = run_phase(true);
  (void)st;  // phase-1 objective is bounded below by 0, cannot be unbounded
  double infeas = -t.b[t.m];
  if (infeas > opt.feas_tol) {
    out.status = LpStatus::Infeasible;
    for (int r = 0; r < t.m; ++r)
      if (is_artificial(t.basis[r]) && t.b[r] > opt.feas_tol)
        out.infeasible_rows.push_back(lp.rows[t.row_origin[r]].name.empty()
                                          ? "row " + std::to_string(t.row_origin[r])
                                          : lp.rows[t.row_origin[r]].name);
    return out;
  }
  // Expel zero-valued artificials; rows that cannot pivot are redundant and
  // are dropped from the tableau.
  for (int r = 0; r < t.m;) {
    if (!is_artificial(t.basis[r])) {
      ++r;
      continue;
    }
    int pc = -1;
    for (int c = 0; c < nt; ++c)
      if (std::abs(t.at(r, c)) > 1e-7) {
        pc = c;
        break;
      }
    if (pc >= 0) {
      t.pivot(r, pc);
      ++r;
    } else {
      // redundant row: swap with the last constraint row and shrink
      int lastr = t.m - 1;
      if (r != lastr) {
        for (int c = 0; c < total; ++c) std::swap(t.at(r, c), t.at(lastr, c));
        std::swap(t.b[r], t.b[lastr]);
        std::swap(t.basis[r], t.basis[lastr]);
        std::swap(t.row_origin[r], t.row_origin[lastr]);
      }
      // move the objective row up
      for (int c = 0; c < total; ++c) t.at(lastr, c) = t.at(t.m, c);
      t.b[lastr] = t.b[t.m];
      --t.m;
    }
  }

  // ---- Phase 2.
  st = run_phase(false);
  if (st == LpStatus::Unbounded) {
    out.status = LpStatus::Unbounded;
    return out;
  }

  // ---- Clean-up: refactorize the final basis on the original (scaled) rows
  // for accurate primal values and duals, independent of tableau drift.
  int mk = t.m;
  Eigen::MatrixXd basis_mat = Eigen::MatrixXd::Zero(mk, mk);
  Eigen::VectorXd bk(mk), cb(mk);
  auto scaled_entry = [&](int orig_row, int col) -> double {
    const auto& row = lp.rows[orig_row];
    double s = static_cast<double>(sense_sign[orig_row]) / row_scale[orig_row];
    if (col < n0) {
      double v = 0.0;
      for (auto [j, coeff] : row.coeffs)
        if (j == col) v += coeff;
      return v * s;
    }
    if (col == slack_col[orig_row]) return (row.sense == RowSense::LessEqual ? 1.0 : -1.0) * sense_sign[orig_row];
    if (col == art_col[orig_row]) return 1.0;
    return 0.0;
  };
  for (int r = 0; r < mk; ++r) {
    int orig = t.row_origin[r];
    bk[r] = lp.rows[orig].rhs * sense_sign[orig] / row_scale[orig];
    for (int c = 0; c < mk; ++c) basis_mat(r, c) = scaled_entry(orig, t.basis[c]);
    cb[r] = t.basis[r] < n0 ? lp.objective[t.basis[r]] : 0.0;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_mat);
  Eigen::VectorXd xb = lu.solve(bk);
  xb += lu.solve(bk - basis_mat * xb);  // one refinement pass
  Eigen::VectorXd y = lu.transpose().solve(cb);

  out.x.assign(n0, 0.0);
  for (int r = 0; r < mk; ++r)
    if (t.basis[r] < n0) out.x[t.basis[r]] = xb[r];
  out.duals.assign(m0, 0.0);
  for (int r = 0; r < mk; ++r) {
    int orig = t.row_origin[r];
    out.duals[orig] = y[r] * sense_sign[orig] / row_scale[orig];
  }
  out.reduced_costs.assign(n0, 0.0);
  for (int j = 0; j < n0; ++j) out.reduced_costs[j] = lp.objective[j];
  for (int i = 0; i < m0; ++i) {
    double yi = out.duals[i];
    if (yi == 0.0) continue;
    for (auto [j, v] : lp.rows[i].coeffs) out.reduced_costs[j] -= yi * v;
  }
  double obj = 0.0;
  for (int j = 0; j < n0; ++j) obj += lp.objective[j] * out.x[j];
  out.objective = obj;
  out.iterations = iterations;
  out.status = LpStatus::Optimal;
  return out;
}

std::string lp_to_mps(const LinearProgram& lp, const std::string& model_name) {
  std::string s;
  char buf[160];
  auto row_name = [](int i) {
    char b[16];
    std::snprintf(b, sizeof b, "R%07d", i + 1);
    return std::string(b);
  };
  auto col_name = [](int j) {
    char b[16];
    std::snprintf(b, sizeof b, "X%07d", j + 1);
    return std::string(b);
  };
  s += "* Generated model: " + model_name + "\n";
  for (size_t i = 0; i < lp.rows.size(); ++i)
    if (!lp.rows[i].name.empty()) s += "* " + row_name(static_cast<int>(i)) + " = " + lp.rows[i].name + "\n";
  for (size_t j = 0; j < lp.var_names.size(); ++j)
    if (!lp.var_names[j].empty()) s += "* " + col_name(static_cast<int>(j)) + " = " + lp.var_names[j] + "\n";
  std::snprintf(buf, sizeof buf, "NAME          %s\n", model_name.substr(0, 8).c_str());
  s += buf;
  s += "ROWS\n N  COST\n";
  for (size_t i = 0; i < lp.rows.size(); ++i) {
    char sense = lp.rows[i].sense == RowSense::LessEqual ? 'L' : lp.rows[i].sense == RowSense::Equal ? 'E' : 'G';
    std::snprintf(buf, sizeof buf, " %c  %s\n", sense, row_name(static_cast<int>(i)).c_str());
    s += buf;
  }
  s += "COLUMNS\n";
  // column-major entries: objective first, then every row coefficient
  std::vector<std::vector<std::pair<int, double>>> by_col(lp.num_vars);
  for (size_t i = 0; i < lp.rows.size(); ++i)
    for (auto [j, v] : lp.rows[i].coeffs)
      if (v != 0.0) by_col[j].emplace_back(static_cast<int>(i), v);
  for (int j = 0; j < lp.num_vars; ++j) {
    if (lp.objective[j] != 0.0) {
      std::snprintf(buf, sizeof buf, "    %-8s  %-8s  %-12.6g\n", col_name(j).c_str(), "COST", lp.objective[j]);
      s += buf;
    }
    for (auto [i, v] : by_col[j]) {
      std::snprintf(buf, sizeof buf, "    %-8s  %-8s  %-12.6g\n", col_name(j).c_str(), row_name(i).c_str(), v);
      s += buf;
    }
  }
  s += "RHS\n";
  for (size_t i = 0; i < lp.rows.size(); ++i) {
    if (lp.rows[i].rhs == 0.0) continue;
    std::snprintf(buf, sizeof buf, "    %-8s  %-8s  %-12.6g\n", "RHS", row_name(static_cast<int>(i)).c_str(),
                  lp.rows[i].rhs);
    s += buf;
  }
  s += "BOUNDS\nENDATA\n";
  return s;
}

}  // namespace amod
