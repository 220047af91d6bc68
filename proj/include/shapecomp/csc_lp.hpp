#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "shapecomp/composer.hpp"
#include "shapecomp/error.hpp"
#include "shapecomp/lp.hpp"

namespace shapecomp {

namespace detail {
inline std::vector<std::string> numbered(char prefix, int n) {
  std::vector<std::string> out(n);
  for (int i = 0; i < n; ++i) out[i] = prefix + std::to_string(i + 1);
  return out;
}
inline void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }
}  // namespace detail

/// Variables (z, z', z''), rows [-I A -A] <= b and 1^T z' + 1^T z'' <= tau.
/// The LP optimum plus sum(b) is the CSC objective; alpha = z' - z''.
inline StandardLP build_primal(const ProblemData& pd) {
  const int N = pd.n_cells(), n = pd.n_shapes();
  const double tau = pd.tau();
  StandardLP lp;
  SparseBuilder sb(N + 2 * n);
  for (int i = 0; i < N; ++i) {
    sb.add(i, -1.0);
    auto cols = pd.A.row_cols(i);
    auto vals = pd.A.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      sb.add(N + cols[k], vals[k]);
      sb.add(N + n + cols[k], -vals[k]);
    }
    sb.end_row();
  }
  for (int j = 0; j < 2 * n; ++j) sb.add(N + j, 1.0);
  sb.end_row();
  lp.A_ub = std::move(sb).finish();
  lp.b_ub = pd.b;
  lp.b_ub.push_back(tau);
  lp.c_obj.assign(N + 2 * n, 0.0);
  std::fill(lp.c_obj.begin(), lp.c_obj.begin() + N, 1.0);
  lp.nonneg.assign(N + 2 * n, true);
  lp.var_names = detail::numbered('z', N);
  detail::append(lp.var_names, detail::numbered('p', n));
  detail::append(lp.var_names, detail::numbered('m', n));
  lp.row_names = detail::numbered('r', N);
  lp.row_names.push_back("tau");
  return lp;
}

/// Same variables without the budget row; objective 1^T z + lambda 1^T (z' + z'').
inline StandardLP build_primal_regularized(const ProblemData& pd) {
  const int N = pd.n_cells(), n = pd.n_shapes();
  const double lambda = pd.lambda();
  StandardLP lp;
  SparseBuilder sb(N + 2 * n);
  for (int i = 0; i < N; ++i) {
    sb.add(i, -1.0);
    auto cols = pd.A.row_cols(i);
    auto vals = pd.A.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      sb.add(N + cols[k], vals[k]);
      sb.add(N + n + cols[k], -vals[k]);
    }
    sb.end_row();
  }
  lp.A_ub = std::move(sb).finish();
  lp.b_ub = pd.b;
  lp.c_obj.assign(N + 2 * n, lambda);
  std::fill(lp.c_obj.begin(), lp.c_obj.begin() + N, 1.0);
  lp.nonneg.assign(N + 2 * n, true);
  lp.var_names = detail::numbered('z', N);
  detail::append(lp.var_names, detail::numbered('p', n));
  detail::append(lp.var_names, detail::numbered('m', n));
  lp.row_names = detail::numbered('r', N);
  return lp;
}

/// Variables (y, t): minimize b^T y + tau t  s.t.  0 <= y <= 1, |A^T y| <= t.
/// Its optimum is the negated optimum of build_primal.
inline StandardLP build_dual(const ProblemData& pd) {
  const int N = pd.n_cells(), n = pd.n_shapes();
  const double tau = pd.tau();
  const SparseMatrix At = pd.A.transpose();
  StandardLP lp;
  SparseBuilder sb(N + 1);
  for (int sign : {1, -1})
    for (int j = 0; j < n; ++j) {
      for (auto k = At.row_ptr[j]; k < At.row_ptr[j + 1]; ++k) sb.add(At.col[k], sign * At.val[k]);
      sb.add(N, -1.0);
      sb.end_row();
    }
  lp.A_ub = std::move(sb).finish();
  lp.b_ub.assign(2 * n, 0.0);
  lp.c_obj = pd.b;
  lp.c_obj.push_back(tau);
  lp.nonneg.assign(N + 1, true);
  lp.upper.assign(N + 1, 1.0);
  lp.upper[N] = std::numeric_limits<double>::infinity();
  lp.var_names = detail::numbered('y', N);
  lp.var_names.push_back("t");
  lp.row_names = detail::numbered('u', n);
  detail::append(lp.row_names, detail::numbered('l', n));
  return lp;
}

/// Rows with a_i = 0 contribute the constant max(0, b_i) and are dropped.
/// Rows that are positive multiples of one another (same cover pattern and
/// sign of delta) merge exactly, since max(c a^T x, c b) = c max(a^T x, b).
struct CompactedProblem {
  ProblemData pd;
  std::vector<std::vector<int>> groups;  // original rows behind each row of pd
  double dropped_constant = 0.0;
};

inline CompactedProblem compact_rows(const ProblemData& pd) {
  CompactedProblem out;
  std::map<std::vector<double>, int> slot;  // (cols, vals / v0, b / v0, sign v0) -> merged row
  std::vector<std::vector<int>> cols_of;
  std::vector<std::vector<double>> vals_of;
  for (int i = 0; i < pd.n_cells(); ++i) {
    auto vals = pd.A.row_vals(i);
    auto cols = pd.A.row_cols(i);
    const bool zero = std::all_of(vals.begin(), vals.end(), [](double v) { return v == 0.0; });
    if (zero) {
      out.dropped_constant += std::max(0.0, pd.b[i]);
      continue;
    }
    const double v0 = vals[0];
    std::vector<double> key;
    key.reserve(2 * cols.size() + 2);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      key.push_back(cols[k]);
      key.push_back(vals[k] / v0);
    }
    key.push_back(pd.b[i] / v0);
    key.push_back(v0 > 0 ? 1.0 : -1.0);
    auto [it, fresh] = slot.try_emplace(std::move(key), static_cast<int>(out.groups.size()));
    if (fresh) {
      out.groups.push_back({i});
      cols_of.emplace_back(cols.begin(), cols.end());
      vals_of.emplace_back(vals.begin(), vals.end());
      out.pd.b.push_back(pd.b[i]);
    } else {
      const int r = it->second;
      out.groups[r].push_back(i);
      for (std::size_t k = 0; k < vals.size(); ++k) vals_of[r][k] += vals[k];
      out.pd.b[r] += pd.b[i];
    }
  }
  SparseBuilder sb(pd.n_shapes());
  for (std::size_t r = 0; r < out.groups.size(); ++r) {
    for (std::size_t k = 0; k < cols_of[r].size(); ++k) sb.add(cols_of[r][k], vals_of[r][k]);
    sb.end_row();
  }
  out.pd.A = std::move(sb).finish();
  out.pd.budget = pd.budget;
  out.pd.cell_volume = pd.cell_volume;
  return out;
}

enum class LpMethod { primal, dual };

struct CscLpOptions {
  LpMethod method = LpMethod::primal;
  SimplexOptions simplex;
  bool working_set = true;      // column generation over shapes, certified by pricing
  int working_set_min = 64;     // below this many shapes solve the full LP directly
  int working_set_batch = 32;   // shapes added per pricing round
};

struct CscLpResult {
  AlphaVector alpha;
  double gtilde = 0.0;     // sum_i max(a_i^T alpha, b_i)
  double objective = 0.0;  // gtilde, plus lambda ||alpha||_1 in the regularized form
  LpStatus status = LpStatus::numerical_failure;
  LpMethod method_used = LpMethod::primal;
  bool dual_fallback = false;
  long iterations = 0;
  int rounds = 1;          // restricted solves
  int active_shapes = 0;   // shapes in the final restricted problem
};

namespace detail {

inline double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

/// Dual weights of a solved restricted problem: omega per compacted row
/// (in [0, 1], the weight on the a_i^T alpha piece) and the budget multiplier.
struct RowWeights {
  std::vector<double> omega;
  double t = 0.0;
};

inline CscLpResult solve_primal_compacted(const CompactedProblem& cp, const SimplexOptions& opt,
                                          RowWeights* rw = nullptr) {
  const ProblemData& pd = cp.pd;
  const int N = pd.n_cells(), n = pd.n_shapes();
  const StandardLP lp = pd.budget.is_tau() ? build_primal(pd) : build_primal_regularized(pd);
  const LpSolution sol = solve(lp, opt);
  CscLpResult r;
  r.status = sol.status;
  r.iterations = sol.iterations;
  r.method_used = LpMethod::primal;
  r.alpha.alpha.assign(n, 0.0);
  if (sol.status != LpStatus::optimal) return r;
  for (int j = 0; j < n; ++j) r.alpha.alpha[j] = sol.x[N + j] - sol.x[N + n + j];
  if (rw) {
    rw->omega.resize(N);
    for (int i = 0; i < N; ++i) rw->omega[i] = std::clamp(-sol.duals[i], 0.0, 1.0);
    rw->t = pd.budget.is_tau() ? std::max(0.0, -sol.duals[N]) : pd.lambda();
  }
  return r;
}

/// Complementary slackness: rows with 0 < y_i < 1 are tight with z_i = 0,
/// active columns have |(A^T y)_j| = t, and the budget binds when t > 0.
inline double alpha_l1(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline bool recover_from_dual(const ProblemData& pd, const std::vector<double>& y, double t, double dual_opt,
                              std::vector<double>& alpha) {
  const int N = pd.n_cells(), n = pd.n_shapes();
  std::vector<double> aty(n, 0.0);
  for (int i = 0; i < N; ++i) {
    if (y[i] == 0.0) continue;
    auto cols = pd.A.row_cols(i);
    auto vals = pd.A.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) aty[cols[k]] += vals[k] * y[i];
  }
  double scale = t;
  for (double v : aty) scale = std::max(scale, std::abs(v));
  const double tol = 1e-7 * std::max(1.0, scale);
  std::vector<int> J;
  std::vector<double> sign;
  for (int j = 0; j < n; ++j)
    if (t > tol && std::abs(std::abs(aty[j]) - t) <= tol) {
      J.push_back(j);
      sign.push_back(aty[j] > 0 ? -1.0 : 1.0);
    }
  alpha.assign(n, 0.0);
  auto matches_dual = [&] {
    const double g = objective_value(pd, alpha) - sum_of(pd.b);
    return std::abs(g + dual_opt) <= 1e-7 * (1.0 + std::abs(dual_opt));
  };
  if (J.empty()) return matches_dual();

  std::vector<int> tight;
  for (int i = 0; i < N; ++i)
    if (y[i] > 1e-9 && y[i] < 1.0 - 1e-9) tight.push_back(i);
  const int m = static_cast<int>(tight.size()) + 1;
  const int k = static_cast<int>(J.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, k);
  Eigen::VectorXd rhs(m);
  for (int r = 0; r < static_cast<int>(tight.size()); ++r) {
    for (int c = 0; c < k; ++c) M(r, c) = pd.A.at(tight[r], J[c]);
    rhs(r) = pd.b[tight[r]];
  }
  for (int c = 0; c < k; ++c) M(m - 1, c) = sign[c];
  rhs(m - 1) = pd.tau();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) return false;
  const Eigen::VectorXd a = qr.solve(rhs);
  if ((M * a - rhs).norm() > 1e-7 * (1.0 + rhs.norm())) return false;
  for (int c = 0; c < k; ++c) {
    if (a(c) * sign[c] < -1e-9) return false;
    alpha[J[c]] = a(c);
  }
  return matches_dual();
}

/// Alpha from the multipliers of the dual-LP rows (A^T y)_j <= t and
/// -(A^T y)_j <= t; accepted only if it reproduces the dual optimum.
inline bool alpha_from_multipliers(const ProblemData& pd, const LpSolution& sol, std::vector<double>& alpha) {
  const int n = pd.n_shapes();
  alpha.assign(n, 0.0);
  for (int j = 0; j < n; ++j) alpha[j] = sol.duals[j] - sol.duals[n + j];
  const double g = objective_value(pd, alpha) - sum_of(pd.b);
  return alpha_l1(alpha) <= pd.tau() * (1.0 + 1e-9) + 1e-9 &&
         std::abs(g + sol.objective) <= 1e-7 * (1.0 + std::abs(sol.objective));
}

inline CscLpResult solve_dual_compacted(const CompactedProblem& cp, const SimplexOptions& opt,
                                        RowWeights* rw = nullptr) {
  const ProblemData& pd = cp.pd;
  const int N = pd.n_cells(), n = pd.n_shapes();
  const LpSolution sol = solve(build_dual(pd), opt);
  CscLpResult r;
  r.iterations = sol.iterations;
  r.method_used = LpMethod::dual;
  r.alpha.alpha.assign(n, 0.0);
  r.status = sol.status;
  if (sol.status != LpStatus::optimal) return r;
  std::vector<double> y(sol.x.begin(), sol.x.begin() + N);
  std::vector<double> alpha;
  if (recover_from_dual(pd, y, sol.x[N], sol.objective, alpha) || alpha_from_multipliers(pd, sol, alpha)) {
    r.alpha.alpha = std::move(alpha);
    if (rw) {
      rw->omega = y;
      rw->t = sol.x[N];
    }
    return r;
  }
  CscLpResult fb = solve_primal_compacted(cp, opt, rw);
  fb.iterations += r.iterations;
  fb.dual_fallback = true;
  return fb;
}

inline CscLpResult solve_compacted(const CompactedProblem& cp, const CscLpOptions& opt, RowWeights* rw) {
  if (opt.method == LpMethod::dual && cp.pd.budget.is_tau()) return solve_dual_compacted(cp, opt.simplex, rw);
  return solve_primal_compacted(cp, opt.simplex, rw);
}

/// Columns `keep` of pd, in that order.
inline ProblemData restrict_shapes(const ProblemData& pd, const std::vector<int>& keep) {
  std::vector<int> slot(pd.n_shapes(), -1);
  for (std::size_t k = 0; k < keep.size(); ++k) slot[keep[k]] = static_cast<int>(k);
  ProblemData out;
  SparseBuilder sb(static_cast<int>(keep.size()));
  for (int i = 0; i < pd.n_cells(); ++i) {
    auto cols = pd.A.row_cols(i);
    auto vals = pd.A.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (slot[cols[k]] >= 0) sb.add(slot[cols[k]], vals[k]);
    sb.end_row();
  }
  out.A = std::move(sb).finish();
  out.b = pd.b;
  out.budget = pd.budget;
  out.cell_volume = pd.cell_volume;
  return out;
}

/// Per-shape pricing sums s_j = sum_i omega_i a_ij.
inline std::vector<double> price_shapes(const ProblemData& pd, const std::vector<double>& omega) {
  std::vector<double> s(pd.n_shapes(), 0.0);
  for (int i = 0; i < pd.n_cells(); ++i) {
    if (omega[i] == 0.0) continue;
    auto cols = pd.A.row_cols(i);
    auto vals = pd.A.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) s[cols[k]] += omega[i] * vals[k];
  }
  return s;
}

/// One restricted solve in the requested orientation. The row weights are
/// the y of the dual LP, or the negated row duals of the primal LP.
inline CscLpResult solve_restricted(const ProblemData& sub, const CscLpOptions& opt, const LpBasis* warm,
                                    LpBasis& basis_out, RowWeights& rw) {
  const int N = sub.n_cells(), n = sub.n_shapes();
  CscLpResult r;
  r.alpha.alpha.assign(n, 0.0);
  if (opt.method == LpMethod::dual && sub.budget.is_tau()) {
    r.method_used = LpMethod::dual;
    const LpSolution sol = solve(build_dual(sub), opt.simplex, warm);
    r.iterations = sol.iterations;
    r.status = sol.status;
    if (sol.status != LpStatus::optimal) return r;
    basis_out = sol.basis;
    std::vector<double> y(sol.x.begin(), sol.x.begin() + N);
    std::vector<double> alpha;
    if (recover_from_dual(sub, y, sol.x[N], sol.objective, alpha) || alpha_from_multipliers(sub, sol, alpha)) {
      r.alpha.alpha = std::move(alpha);
      rw.omega = std::move(y);
      rw.t = sol.x[N];
      return r;
    }
    CscLpOptions po = opt;
    po.method = LpMethod::primal;
    LpBasis unused;
    CscLpResult fb = solve_restricted(sub, po, nullptr, unused, rw);
    fb.iterations += r.iterations;
    fb.dual_fallback = true;
    return fb;
  }
  r.method_used = LpMethod::primal;
  const StandardLP lp = sub.budget.is_tau() ? build_primal(sub) : build_primal_regularized(sub);
  const LpSolution sol = solve(lp, opt.simplex, warm);
  r.iterations = sol.iterations;
  r.status = sol.status;
  if (sol.status != LpStatus::optimal) return r;
  basis_out = sol.basis;
  for (int j = 0; j < n; ++j) r.alpha.alpha[j] = sol.x[N + j] - sol.x[N + n + j];
  rw.omega.resize(N);
  for (int i = 0; i < N; ++i) rw.omega[i] = std::clamp(-sol.duals[i], 0.0, 1.0);
  rw.t = sub.budget.is_tau() ? std::max(0.0, -sol.duals[N]) : sub.lambda();
  return r;
}

/// Carries a basis over to the restricted LP with more shapes appended:
/// new dual-LP rows get basic slacks, new primal columns sit at zero.
inline LpBasis extend_basis(const LpBasis& old, bool dual_form, bool has_tau_row, int N, int k_old, int k_new) {
  LpBasis out;
  auto& s = out.status;
  const auto& o = old.status;
  if (dual_form) {
    // variables y (N), t; rows u (k), l (k)
    s.assign(o.begin(), o.begin() + N + 1);
    s.resize(N + 1 + 2 * k_new, 0);
    for (int k = 0; k < k_old; ++k) {
      s[N + 1 + k] = o[N + 1 + k];
      s[N + 1 + k_new + k] = o[N + 1 + k_old + k];
    }
    return out;
  }
  // variables z (N), p (k), m (k); rows r (N) [, tau]
  const int rows = N + (has_tau_row ? 1 : 0);
  s.assign(N + 2 * k_new + rows, 1);
  for (int i = 0; i < N; ++i) s[i] = o[i];
  for (int k = 0; k < k_old; ++k) {
    s[N + k] = o[N + k];
    s[N + k_new + k] = o[N + k_old + k];
  }
  for (int i = 0; i < rows; ++i) s[N + 2 * k_new + i] = o[N + 2 * k_old + i];
  return out;
}

/// Column generation: solve on a working set of shapes, extend the row
/// weights to every cell (rows with a_i = 0 take omega = 1 iff b_i < 0) and
/// add shapes with |s_j| > t. When no shape prices out, (omega, t) is a
/// feasible dual with the restricted objective, so the solution is optimal.
/// Each round warm-starts from the previous basis.
inline CscLpResult solve_working_set(const ProblemData& pd, const CscLpOptions& opt) {
  const int n = pd.n_shapes(), N = pd.n_cells();
  const bool dual_form = opt.method == LpMethod::dual && pd.budget.is_tau();
  std::vector<double> omega(N);
  for (int i = 0; i < N; ++i) omega[i] = pd.b[i] < 0.0 ? 1.0 : 0.0;
  std::vector<char> in(n, 0);
  std::vector<int> active;
  auto add_most_violated = [&](const std::vector<double>& s, double t, int count) {
    std::vector<int> cand;
    double smax = 0.0;
    for (double v : s) smax = std::max(smax, std::abs(v));
    const double tol = 1e-7 * (1.0 + std::max(t, smax));
    for (int j = 0; j < n; ++j)
      if (!in[j] && std::abs(s[j]) - t > tol) cand.push_back(j);
    const std::size_t take = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(count));
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end(), [&](int a, int b) {
      return std::abs(s[a]) != std::abs(s[b]) ? std::abs(s[a]) > std::abs(s[b]) : a < b;
    });
    for (std::size_t k = 0; k < take; ++k) {
      in[cand[k]] = 1;
      active.push_back(cand[k]);
    }
    return take;
  };
  // Seed with the shapes of steepest descent at alpha = 0.
  add_most_violated(price_shapes(pd, omega), pd.budget.is_tau() ? 0.0 : pd.lambda(), opt.working_set_batch);

  CscLpResult total;
  total.rounds = 0;
  total.status = LpStatus::optimal;
  total.alpha.alpha.assign(n, 0.0);
  LpBasis basis;
  int k_prev = 0;
  while (!active.empty()) {
    const ProblemData sub = restrict_shapes(pd, active);
    const int k = static_cast<int>(active.size());
    LpBasis warm;
    const bool use_warm = total.rounds > 0 && !total.dual_fallback;
    if (use_warm) warm = extend_basis(basis, dual_form, pd.budget.is_tau(), N, k_prev, k);
    RowWeights rw;
    LpBasis next;
    CscLpResult r = solve_restricted(sub, opt, use_warm ? &warm : nullptr, next, rw);
    ++total.rounds;
    total.iterations += r.iterations;
    total.dual_fallback = total.dual_fallback || r.dual_fallback;
    total.method_used = r.method_used;
    total.status = r.status;
    if (r.status != LpStatus::optimal) return total;
    basis = std::move(next);
    k_prev = k;
    for (int i = 0; i < N; ++i) omega[i] = rw.omega[i];
    if (add_most_violated(price_shapes(pd, omega), rw.t, opt.working_set_batch) == 0) {
      for (int q = 0; q < k; ++q) total.alpha.alpha[active[q]] = r.alpha.alpha[q];
      break;
    }
  }
  total.active_shapes = static_cast<int>(active.size());
  return total;
}

}  // namespace detail

/// Solves CSC through its LP reformulation after merging redundant rows;
/// large dictionaries go through the certified working-set loop.
inline CscLpResult solve_csc_lp(const ProblemData& pd, const CscLpOptions& opt = {}) {
  if (!(pd.budget.value >= 0.0)) throw error(error_kind::invalid_argument, "tau/lambda must be nonnegative");
  CscLpResult r;
  if (opt.working_set && pd.n_shapes() > opt.working_set_min) {
    r = detail::solve_working_set(pd, opt);
  } else {
    r = detail::solve_compacted(compact_rows(pd), opt, nullptr);
    r.active_shapes = pd.n_shapes();
  }
  r.gtilde = objective_value(pd, r.alpha.alpha);
  r.objective = r.gtilde + (pd.budget.is_tau() ? 0.0 : pd.lambda() * r.alpha.l1());
  return r;
}

}  // namespace shapecomp
