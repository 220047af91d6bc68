#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "shapecomp/error.hpp"
#include "shapecomp/sparse.hpp"

namespace shapecomp {

enum class RowKind { le, eq };

/// minimize c^T x + offset  s.t.  A x (<= | =) b,  x_j >= 0 where nonneg[j],
/// free otherwise, x_j <= upper[j] when upper is given.
struct StandardLP {
  std::vector<double> c_obj;
  SparseMatrix A_ub;
  std::vector<double> b_ub;
  std::vector<RowKind> row_kind;  // empty means every row is <=
  std::vector<bool> nonneg;
  std::vector<double> upper;      // empty means no upper bounds
  std::vector<std::string> var_names;
  std::vector<std::string> row_names;
  double objective_offset = 0.0;

  int n_vars() const { return A_ub.cols; }
  int n_rows() const { return A_ub.rows; }
  RowKind kind(int i) const { return row_kind.empty() ? RowKind::le : row_kind[i]; }
  double upper_bound(int j) const { return upper.empty() ? std::numeric_limits<double>::infinity() : upper[j]; }

  void validate() const {
    if (static_cast<int>(c_obj.size()) != A_ub.cols || static_cast<int>(nonneg.size()) != A_ub.cols)
      throw error(error_kind::dimension_mismatch, "LP column data inconsistent");
    if (static_cast<int>(b_ub.size()) != A_ub.rows)
      throw error(error_kind::dimension_mismatch, "LP row data inconsistent");
    if (!row_kind.empty() && static_cast<int>(row_kind.size()) != A_ub.rows)
      throw error(error_kind::dimension_mismatch, "row kind length inconsistent");
    if (!upper.empty() && static_cast<int>(upper.size()) != A_ub.cols)
      throw error(error_kind::dimension_mismatch, "upper bound length inconsistent");
    for (int j = 0; j < static_cast<int>(upper.size()); ++j)
      if (std::isnan(upper[j]) || (nonneg[j] && upper[j] < 0.0))
        throw error(error_kind::invalid_argument, "upper bound below lower bound");
    for (double v : c_obj)
      if (!std::isfinite(v)) throw error(error_kind::invalid_argument, "non-finite objective coefficient");
    for (double v : b_ub)
      if (!std::isfinite(v)) throw error(error_kind::invalid_argument, "non-finite right-hand side");
    for (double v : A_ub.val)
      if (!std::isfinite(v)) throw error(error_kind::invalid_argument, "non-finite matrix entry");
  }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration-limit";
    case LpStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

/// Simplex basis over variables then row slacks: 0 basic, 1 at lower bound,
/// 2 at upper bound, 3 free at zero. Used to warm-start a related LP.
struct LpBasis {
  std::vector<signed char> status;
};

struct LpSolution {
  std::vector<double> x;
  double objective = 0.0;
  LpStatus status = LpStatus::numerical_failure;
  std::vector<double> duals;  // one per row; y <= 0 on binding <= rows of a minimization
  long iterations = 0;
  bool warm_started = false;
  LpBasis basis;
};

struct SimplexOptions {
  double pivot_tol = 1e-9;
  double feas_tol = 1e-8;
  double opt_tol = 1e-9;
  int refactor_every = 64;
  int bland_after = 64;   // consecutive degenerate pivots before Bland's rule
  long max_iters = 0;     // 0: automatic
  bool perturb = true;    // solve with a randomly relaxed b, then repair
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Basis factorization: singleton columns are solved by substitution; the
/// remaining kernel block is a dense LU. Pivots append product-form etas.
class BasisFactor {
 public:
  struct Column {
    std::vector<int> rows;
    std::vector<double> vals;
  };

  /// Returns false when the kernel is numerically singular; `dependent`
  /// then lists basis positions to swap out and `free_rows` matching rows.
  bool factor(int m, const std::vector<Column>& cols, std::vector<int>& dependent, std::vector<int>& free_rows) {
    m_ = m;
    etas_.clear();
    single_row_.assign(m, -1);
    single_val_.assign(m, 0.0);
    kernel_pos_.clear();
    kernel_rows_.clear();
    row_kernel_.assign(m, -1);
    std::vector<char> row_taken(m, 0);
    for (int p = 0; p < m; ++p) {
      const auto& c = cols[p];
      if (c.rows.size() == 1 && !row_taken[c.rows[0]]) {
        row_taken[c.rows[0]] = 1;
        single_row_[p] = c.rows[0];
        single_val_[p] = c.vals[0];
      } else {
        kernel_pos_.push_back(p);
      }
    }
    for (int r = 0; r < m; ++r)
      if (!row_taken[r]) {
        row_kernel_[r] = static_cast<int>(kernel_rows_.size());
        kernel_rows_.push_back(r);
      }
    const int k = static_cast<int>(kernel_pos_.size());
    kernel_cols_.clear();
    kernel_cols_.reserve(k);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(k, k);
    for (int t = 0; t < k; ++t) {
      const auto& c = cols[kernel_pos_[t]];
      kernel_cols_.push_back(c);
      for (std::size_t e = 0; e < c.rows.size(); ++e) {
        const int rk = row_kernel_[c.rows[e]];
        if (rk >= 0) C(rk, t) = c.vals[e];
      }
    }
    dependent.clear();
    free_rows.clear();
    if (k == 0) return true;
    lu_.compute(C);
    const auto& U = lu_.matrixLU();
    double dmax = 0.0, dmin = kInf;
    for (int i = 0; i < k; ++i) {
      dmax = std::max(dmax, std::abs(U(i, i)));
      dmin = std::min(dmin, std::abs(U(i, i)));
    }
    if (std::isfinite(dmin) && dmin > 1e-11 * std::max(1.0, dmax)) return true;

    Eigen::FullPivLU<Eigen::MatrixXd> full(C);
    full.setThreshold(1e-10);
    const int rank = static_cast<int>(full.rank());
    const auto& Q = full.permutationQ().indices();
    const auto& P = full.permutationP().indices();
    for (int t = rank; t < k; ++t) dependent.push_back(kernel_pos_[Q(t)]);
    for (int i = 0; i < k; ++i)
      if (P(i) >= rank) free_rows.push_back(kernel_rows_[i]);
    return false;
  }

  void ftran(std::vector<double>& r) const {
    std::vector<double> x(m_, 0.0);
    const int k = static_cast<int>(kernel_pos_.size());
    if (k > 0) {
      Eigen::VectorXd rk(k);
      for (int t = 0; t < k; ++t) rk(t) = r[kernel_rows_[t]];
      const Eigen::VectorXd xk = lu_.solve(rk);
      for (int t = 0; t < k; ++t) {
        x[kernel_pos_[t]] = xk(t);
        const auto& c = kernel_cols_[t];
        for (std::size_t e = 0; e < c.rows.size(); ++e)
          if (row_kernel_[c.rows[e]] < 0) r[c.rows[e]] -= c.vals[e] * xk(t);
      }
    }
    for (int p = 0; p < m_; ++p)
      if (single_row_[p] >= 0) x[p] = r[single_row_[p]] / single_val_[p];
    for (const auto& eta : etas_) {
      const double xr = x[eta.pos] / eta.w[eta.pos];
      if (xr != 0.0)
        for (int i = 0; i < m_; ++i)
          if (i != eta.pos) x[i] -= eta.w[i] * xr;
      x[eta.pos] = xr;
    }
    r.swap(x);
  }

  /// In: costs by basis position. Out: duals by row.
  void btran(std::vector<double>& c) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = c[it->pos];
      for (int i = 0; i < m_; ++i)
        if (i != it->pos) s -= it->w[i] * c[i];
      c[it->pos] = s / it->w[it->pos];
    }
    std::vector<double> y(m_, 0.0);
    for (int p = 0; p < m_; ++p)
      if (single_row_[p] >= 0) y[single_row_[p]] = c[p] / single_val_[p];
    const int k = static_cast<int>(kernel_pos_.size());
    if (k > 0) {
      Eigen::VectorXd rhs(k);
      for (int t = 0; t < k; ++t) {
        double s = c[kernel_pos_[t]];
        const auto& col = kernel_cols_[t];
        for (std::size_t e = 0; e < col.rows.size(); ++e)
          if (row_kernel_[col.rows[e]] < 0) s -= col.vals[e] * y[col.rows[e]];
        rhs(t) = s;
      }
      const Eigen::VectorXd yk = lu_.transpose().solve(rhs);
      for (int t = 0; t < k; ++t) y[kernel_rows_[t]] = yk(t);
    }
    c.swap(y);
  }

  void push_eta(int pos, std::vector<double> w) { etas_.push_back({pos, std::move(w)}); }
  std::size_t eta_count() const { return etas_.size(); }

 private:
  struct Eta {
    int pos;
    std::vector<double> w;
  };
  int m_ = 0;
  std::vector<int> single_row_;
  std::vector<double> single_val_;
  std::vector<int> kernel_pos_, kernel_rows_, row_kernel_;
  std::vector<Column> kernel_cols_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  std::vector<Eta> etas_;
};

/// Bounded-variable primal revised simplex, two phases with artificials.
class RevisedSimplex {
 public:
  RevisedSimplex(const StandardLP& lp, const SimplexOptions& opt) : lp_(lp), opt_(opt) {
    m_ = lp.n_rows();
    n_ = lp.n_vars();
    const SparseMatrix At = lp.A_ub.transpose();
    cols_.resize(n_ + m_);
    for (int j = 0; j < n_; ++j) {
      for (auto k = At.row_ptr[j]; k < At.row_ptr[j + 1]; ++k) {
        cols_[j].rows.push_back(At.col[k]);
        cols_[j].vals.push_back(At.val[k]);
      }
    }
    lb_.assign(n_ + m_, 0.0);
    ub_.assign(n_ + m_, kInf);
    cost_.assign(n_ + m_, 0.0);
    for (int j = 0; j < n_; ++j) {
      cost_[j] = lp.c_obj[j];
      if (!lp.nonneg[j]) lb_[j] = -kInf;
      ub_[j] = lp.upper_bound(j);
    }
    for (int i = 0; i < m_; ++i) {
      cols_[n_ + i].rows = {i};
      cols_[n_ + i].vals = {1.0};
      if (lp.kind(i) == RowKind::eq) ub_[n_ + i] = 0.0;
    }
    max_iters_ = opt.max_iters > 0 ? opt.max_iters : std::max<long>(20000, 50L * (m_ + n_));
  }

  LpSolution run(const LpBasis* warm = nullptr) {
    LpSolution sol;
    const std::vector<double> lb0 = lb_, ub0 = ub_;
    LpStatus st = LpStatus::numerical_failure;
    if (warm && load_basis(*warm)) {
      st = finish(solve_from_loaded());
      sol.warm_started = st == LpStatus::optimal;
    }
    if (!sol.warm_started) {
      lb_ = lb0;
      ub_ = ub0;
      st = finish(solve_cold());
    }
    sol.status = st;
    sol.iterations = iters_;
    sol.x.assign(x_.begin(), x_.begin() + n_);
    double obj = lp_.objective_offset;
    for (int j = 0; j < n_; ++j) obj += cost_[j] * sol.x[j];
    sol.objective = obj;
    std::vector<double> cb(m_);
    for (int p = 0; p < m_; ++p) cb[p] = cost_[basis_[p]];
    factor_.btran(cb);
    sol.duals = std::move(cb);
    sol.basis.status.assign(state_.begin(), state_.begin() + n_ + m_);
    return sol;
  }

 private:
  LpStatus solve_cold() {
    rhs_ = lp_.b_ub;
    perturbed_ = false;
    if (opt_.perturb) {
      // Relaxing b by small random amounts makes basic solutions
      // nondegenerate and avoids long stalls on degenerate vertices.
      std::mt19937_64 rng(0x5eedULL);
      std::uniform_real_distribution<double> u(1.0, 2.0);
      for (int i = 0; i < m_; ++i) {
        const double d = kPerturb * (1.0 + std::abs(rhs_[i])) * u(rng);
        rhs_[i] += lp_.kind(i) == RowKind::eq && (rng() & 1) ? -d : d;
      }
      perturbed_ = true;
    }
    initial_basis();
    LpStatus st = LpStatus::optimal;
    if (n_art_ > 0) {
      std::vector<double> phase1(cost_.size(), 0.0);
      for (int a = 0; a < n_art_; ++a) phase1[n_ + m_ + a] = 1.0;
      st = iterate(phase1);
      if (st == LpStatus::optimal) {
        double infeas = 0.0;
        for (int a = 0; a < n_art_; ++a) infeas += std::abs(x_[n_ + m_ + a]);
        double scale = 1.0;
        for (double v : lp_.b_ub) scale = std::max(scale, std::abs(v));
        if (infeas > opt_.feas_tol * scale) st = LpStatus::infeasible;
      } else if (st == LpStatus::unbounded) {
        st = LpStatus::numerical_failure;  // phase 1 is bounded below by 0
      }
      for (int a = 0; a < n_art_; ++a) ub_[n_ + m_ + a] = base_ub_[n_ + m_ + a] = 0.0;
    }
    if (st == LpStatus::optimal) st = iterate(cost_);
    return st;
  }

  /// Back to the true b and bounds: the basis stays (nearly) dual feasible,
  /// so the dual simplex repairs the small primal infeasibilities.
  LpStatus finish(LpStatus st) {
    for (int round = 0; round < 4 && st == LpStatus::optimal && (perturbed_ || shifted()); ++round) {
      rhs_ = lp_.b_ub;
      perturbed_ = false;
      lb_ = base_lb_;
      ub_ = base_ub_;
      for (std::size_t j = 0; j < lb_.size(); ++j) {
        if (state_[j] == kAtLower) x_[j] = lb_[j];
        else if (state_[j] == kAtUpper) x_[j] = ub_[j];
      }
      allow_shift_ = false;
      refactor();
      st = dual_cleanup(cost_);
      allow_shift_ = true;
      if (st == LpStatus::optimal) st = iterate(cost_);
    }
    return st;
  }

  bool load_basis(const LpBasis& warm) {
    const int total = n_ + m_;
    if (static_cast<int>(warm.status.size()) != total) return false;
    if (std::count(warm.status.begin(), warm.status.end(), kBasic) != m_) return false;
    rhs_ = lp_.b_ub;
    perturbed_ = false;
    n_art_ = 0;
    x_.assign(total, 0.0);
    state_.assign(total, kAtLower);
    basis_.clear();
    for (int j = 0; j < total; ++j) {
      const signed char st = warm.status[j];
      if (st == kBasic) {
        state_[j] = kBasic;
        basis_.push_back(j);
      } else if (st == kAtLower && std::isfinite(lb_[j])) {
        x_[j] = lb_[j];
      } else if (st == kAtUpper && std::isfinite(ub_[j])) {
        state_[j] = kAtUpper;
        x_[j] = ub_[j];
      } else {
        set_nonbasic_default(j);
      }
    }
    base_lb_ = lb_;
    base_ub_ = ub_;
    allow_shift_ = false;
    refactor();
    allow_shift_ = true;
    return true;
  }

  /// Continues from a loaded basis: primal simplex if it is primal feasible,
  /// dual simplex first if it is dual feasible, otherwise gives up.
  LpStatus solve_from_loaded() {
    if (primal_feasible()) return iterate(cost_);
    if (!dual_feasible(cost_)) return LpStatus::numerical_failure;
    const LpStatus st = dual_cleanup(cost_);
    return st == LpStatus::optimal ? iterate(cost_) : st;
  }

  bool primal_feasible() const {
    for (int p = 0; p < m_; ++p) {
      const int v = basis_[p];
      if (x_[v] < lb_[v] - opt_.feas_tol * (1.0 + std::abs(lb_[v])) ||
          x_[v] > ub_[v] + opt_.feas_tol * (1.0 + std::abs(ub_[v])))
        return false;
    }
    return true;
  }

  bool dual_feasible(const std::vector<double>& cost) const {
    std::vector<double> y(m_);
    for (int p = 0; p < m_; ++p) y[p] = cost[basis_[p]];
    factor_.btran(y);
    for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
      const char st = state_[j];
      if (st == kBasic || lb_[j] == ub_[j]) continue;
      double d = cost[j];
      for (std::size_t e = 0; e < cols_[j].rows.size(); ++e) d -= y[cols_[j].rows[e]] * cols_[j].vals[e];
      const double tol = 1e-7 * (1.0 + std::abs(cost[j]));
      if ((st == kAtLower || st == kFreeZero) && d < -tol) return false;
      if ((st == kAtUpper || st == kFreeZero) && d > tol) return false;
    }
    return true;
  }

  enum : char { kBasic = 0, kAtLower = 1, kAtUpper = 2, kFreeZero = 3 };

  void set_nonbasic_default(int j) {
    if (std::isfinite(lb_[j])) {
      state_[j] = kAtLower;
      x_[j] = lb_[j];
    } else if (std::isfinite(ub_[j])) {
      state_[j] = kAtUpper;
      x_[j] = ub_[j];
    } else {
      state_[j] = kFreeZero;
      x_[j] = 0.0;
    }
  }

  void initial_basis() {
    const int total = n_ + m_;
    x_.assign(total, 0.0);
    state_.assign(total, kAtLower);
    for (int j = 0; j < n_; ++j) set_nonbasic_default(j);
    std::vector<double> act(m_, 0.0);
    for (int j = 0; j < n_; ++j)
      if (x_[j] != 0.0)
        for (std::size_t e = 0; e < cols_[j].rows.size(); ++e) act[cols_[j].rows[e]] += cols_[j].vals[e] * x_[j];

    basis_.assign(m_, -1);
    std::vector<double> resid(m_);  // value the row's slack would need
    for (int i = 0; i < m_; ++i) resid[i] = rhs_[i] - act[i];

    // Crash: cover infeasible rows with structural singleton columns.
    std::vector<int> singleton_for_row(m_, -1);
    for (int j = 0; j < n_; ++j)
      if (cols_[j].rows.size() == 1 && std::isfinite(lb_[j]) && singleton_for_row[cols_[j].rows[0]] < 0)
        singleton_for_row[cols_[j].rows[0]] = j;
    std::vector<int> needs_art;
    for (int i = 0; i < m_; ++i) {
      const int s = n_ + i;
      const bool ok = resid[i] >= lb_[s] - opt_.feas_tol && resid[i] <= ub_[s] + opt_.feas_tol;
      if (ok) {
        basis_[i] = s;
        state_[s] = kBasic;
        x_[s] = resid[i];
        continue;
      }
      const double target = resid[i] < lb_[s] ? lb_[s] : ub_[s];
      const int j = singleton_for_row[i];
      if (j >= 0) {
        const double a = cols_[j].vals[0];
        const double step = (resid[i] - target) / a;  // a * step moves row activity
        const double xj = x_[j] + step;
        if (xj >= lb_[j] - opt_.feas_tol && xj <= ub_[j] + opt_.feas_tol) {
          basis_[i] = j;
          state_[j] = kBasic;
          x_[j] = xj;
          state_[s] = (target == lb_[s]) ? kAtLower : kAtUpper;
          x_[s] = target;
          continue;
        }
      }
      needs_art.push_back(i);
      state_[s] = (target == lb_[s]) ? kAtLower : kAtUpper;
      x_[s] = target;
    }
    n_art_ = static_cast<int>(needs_art.size());
    for (int i : needs_art) {
      const int s = n_ + i;
      const double r = resid[i] - x_[s];
      const double sign = r >= 0 ? 1.0 : -1.0;
      BasisFactor::Column c;
      c.rows = {i};
      c.vals = {sign};
      cols_.push_back(c);
      lb_.push_back(0.0);
      ub_.push_back(kInf);
      cost_.push_back(0.0);
      const int a = static_cast<int>(cols_.size()) - 1;
      x_.push_back(std::abs(r));
      state_.push_back(kBasic);
      basis_[i] = a;
    }
    base_lb_ = lb_;
    base_ub_ = ub_;
    refactor();
  }

  bool shifted() const { return lb_ != base_lb_ || ub_ != base_ub_; }

  void refactor() {
    std::vector<int> dependent, free_rows;
    for (int attempt = 0; attempt < 4; ++attempt) {
      std::vector<BasisFactor::Column> bc(m_);
      for (int p = 0; p < m_; ++p) bc[p] = cols_[basis_[p]];
      if (factor_.factor(m_, bc, dependent, free_rows)) break;
      // Swap dependent columns for slacks of the uncovered rows.
      std::vector<int> pos_of_var(cols_.size(), -1);
      for (int p = 0; p < m_; ++p) pos_of_var[basis_[p]] = p;
      for (std::size_t t = 0; t < dependent.size() && t < free_rows.size(); ++t) {
        const int p = dependent[t];
        const int s = n_ + free_rows[t];
        if (state_[s] == kBasic) continue;
        set_nonbasic_default(basis_[p]);
        basis_[p] = s;
        state_[s] = kBasic;
      }
      ++repairs_;
    }
    recompute_basic_values();
    if (!allow_shift_) return;
    // Basic values outside their bounds (drift, or a repaired basis) get
    // their bound shifted; shifts are undone before returning.
    for (int p = 0; p < m_; ++p) {
      const int v = basis_[p];
      if (x_[v] < lb_[v] - opt_.feas_tol) lb_[v] = x_[v];
      else if (x_[v] > ub_[v] + opt_.feas_tol) ub_[v] = x_[v];
    }
  }

  void recompute_basic_values() {
    std::vector<double> r(rhs_);
    for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
      if (state_[j] == kBasic || x_[j] == 0.0) continue;
      for (std::size_t e = 0; e < cols_[j].rows.size(); ++e) r[cols_[j].rows[e]] -= cols_[j].vals[e] * x_[j];
    }
    factor_.ftran(r);
    for (int p = 0; p < m_; ++p) x_[basis_[p]] = r[p];
  }

  /// Bounded dual simplex from a dual feasible basis until x_B is within bounds.
  LpStatus dual_cleanup(const std::vector<double>& cost) {
    const int total = static_cast<int>(cols_.size());
    while (true) {
      if (iters_ >= max_iters_) return LpStatus::iteration_limit;
      int leave = -1;
      double worst = 0.0, target = 0.0;
      for (int p = 0; p < m_; ++p) {
        const int v = basis_[p];
        const double tol = opt_.feas_tol * (1.0 + std::max(std::abs(lb_[v]) < kInf ? std::abs(lb_[v]) : 0.0,
                                                           std::abs(ub_[v]) < kInf ? std::abs(ub_[v]) : 0.0));
        const double below = lb_[v] - x_[v], above = x_[v] - ub_[v];
        if (below > tol && below > worst) {
          worst = below;
          leave = p;
          target = lb_[v];
        } else if (above > tol && above > worst) {
          worst = above;
          leave = p;
          target = ub_[v];
        }
      }
      if (leave < 0) return LpStatus::optimal;

      std::vector<double> rho(m_, 0.0);
      rho[leave] = 1.0;
      factor_.btran(rho);
      std::vector<double> y(m_);
      for (int p = 0; p < m_; ++p) y[p] = cost[basis_[p]];
      factor_.btran(y);
      const bool raise = x_[basis_[leave]] < target;

      // Bound-flipping ratio test: walk the breakpoints |d_j| / |alpha_j| in
      // order, flipping boxed columns while the leaving row stays infeasible.
      struct DualCand {
        int j;
        double alpha, ratio;
      };
      std::vector<DualCand> cand;
      for (int j = 0; j < total; ++j) {
        const char st = state_[j];
        if (st == kBasic || lb_[j] == ub_[j]) continue;
        double alpha = 0.0, d = cost[j];
        for (std::size_t e = 0; e < cols_[j].rows.size(); ++e) {
          alpha += rho[cols_[j].rows[e]] * cols_[j].vals[e];
          d -= y[cols_[j].rows[e]] * cols_[j].vals[e];
        }
        if (std::abs(alpha) <= opt_.pivot_tol) continue;
        // Entering in direction dir changes x_leave by -dir * alpha.
        const bool up_ok = (st == kAtLower || st == kFreeZero) && ((raise && alpha < 0) || (!raise && alpha > 0));
        const bool dn_ok = (st == kAtUpper || st == kFreeZero) && ((raise && alpha > 0) || (!raise && alpha < 0));
        if (!up_ok && !dn_ok) continue;
        const double ad = st == kFreeZero ? std::abs(d) : (st == kAtLower ? std::max(d, 0.0) : std::max(-d, 0.0));
        cand.push_back({j, alpha, ad / std::abs(alpha)});
      }
      if (cand.empty()) return LpStatus::infeasible;
      std::sort(cand.begin(), cand.end(), [](const DualCand& a, const DualCand& b) {
        return a.ratio != b.ratio ? a.ratio < b.ratio : std::abs(a.alpha) > std::abs(b.alpha);
      });
      double slope = worst;
      std::vector<int> flips;
      int enter = -1;
      for (const DualCand& c : cand) {
        const double range = ub_[c.j] - lb_[c.j];
        if (state_[c.j] != kFreeZero && std::isfinite(range) && slope - std::abs(c.alpha) * range > 0.0) {
          slope -= std::abs(c.alpha) * range;
          flips.push_back(c.j);
          continue;
        }
        enter = c.j;
        break;
      }
      if (!flips.empty()) {
        std::vector<double> shift(m_, 0.0);
        for (int j : flips) {
          const double dx = state_[j] == kAtLower ? ub_[j] - lb_[j] : lb_[j] - ub_[j];
          for (std::size_t e = 0; e < cols_[j].rows.size(); ++e) shift[cols_[j].rows[e]] += cols_[j].vals[e] * dx;
          x_[j] += dx;
          state_[j] = state_[j] == kAtLower ? kAtUpper : kAtLower;
        }
        factor_.ftran(shift);
        for (int p = 0; p < m_; ++p) x_[basis_[p]] -= shift[p];
      }
      if (enter < 0) {
        ++iters_;
        continue;  // the flips alone repaired (or overshot) this row
      }

      std::vector<double> w(m_, 0.0);
      for (std::size_t e = 0; e < cols_[enter].rows.size(); ++e) w[cols_[enter].rows[e]] = cols_[enter].vals[e];
      factor_.ftran(w);
      if (std::abs(w[leave]) <= opt_.pivot_tol) {
        if (factor_.eta_count() == 0) return LpStatus::numerical_failure;
        refactor();
        continue;
      }
      const int out = basis_[leave];
      const double step = (x_[out] - target) / w[leave];  // signed move of x_enter
      for (int p = 0; p < m_; ++p) x_[basis_[p]] -= step * w[p];
      x_[enter] += step;
      ++iters_;
      x_[out] = target;
      state_[out] = target == lb_[out] ? kAtLower : kAtUpper;
      basis_[leave] = enter;
      state_[enter] = kBasic;
      factor_.push_eta(leave, std::move(w));
      if (static_cast<int>(factor_.eta_count()) >= opt_.refactor_every) refactor();
    }
  }

  LpStatus iterate(const std::vector<double>& cost) {
    const int total = static_cast<int>(cols_.size());
    int degenerate_run = 0;
    // Reduced costs only change with the basis, so bound flips reuse them.
    std::vector<double> dj(total, 0.0);
    bool dj_valid = false;
    // Verdicts reached on an updated factor are confirmed on a fresh one.
    auto fresh = [&] {
      dj_valid = false;
      if (factor_.eta_count() == 0) return true;
      refactor();
      return false;
    };
    while (true) {
      if (iters_ >= max_iters_) return LpStatus::iteration_limit;
      if (!dj_valid) {
        std::vector<double> y(m_);
        for (int p = 0; p < m_; ++p) y[p] = cost[basis_[p]];
        factor_.btran(y);
        for (int j = 0; j < total; ++j) {
          if (state_[j] == kBasic) continue;
          double d = cost[j];
          for (std::size_t e = 0; e < cols_[j].rows.size(); ++e) d -= y[cols_[j].rows[e]] * cols_[j].vals[e];
          dj[j] = d;
        }
        dj_valid = true;
      }

      const bool bland = degenerate_run >= opt_.bland_after;
      int enter = -1;
      double best = 0.0, enter_dir = 0.0;
      for (int j = 0; j < total; ++j) {
        const char st = state_[j];
        if (st == kBasic || lb_[j] == ub_[j]) continue;
        const double d = dj[j];
        double dir = 0.0;
        if ((st == kAtLower || st == kFreeZero) && d < -opt_.opt_tol) dir = 1.0;
        else if ((st == kAtUpper || st == kFreeZero) && d > opt_.opt_tol) dir = -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          enter = j;
          enter_dir = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          enter_dir = dir;
        }
      }
      if (enter < 0) {
        if (fresh()) return LpStatus::optimal;
        continue;
      }

      std::vector<double> w(m_, 0.0);
      for (std::size_t e = 0; e < cols_[enter].rows.size(); ++e) w[cols_[enter].rows[e]] = cols_[enter].vals[e];
      factor_.ftran(w);

      // Harris two-pass ratio test. Basic x_B moves by -t * dir * w.
      const double range = ub_[enter] - lb_[enter];
      double t_max = range;
      for (int p = 0; p < m_; ++p) {
        const double a = enter_dir * w[p];
        const int v = basis_[p];
        if (a > opt_.pivot_tol && std::isfinite(lb_[v]))
          t_max = std::min(t_max, (x_[v] - lb_[v] + opt_.feas_tol) / a);
        else if (a < -opt_.pivot_tol && std::isfinite(ub_[v]))
          t_max = std::min(t_max, (ub_[v] - x_[v] + opt_.feas_tol) / -a);
      }
      if (!std::isfinite(t_max)) {
        if (fresh()) return LpStatus::unbounded;
        continue;
      }

      int leave = -1;
      double t = 0.0, best_piv = 0.0;
      if (range <= t_max) {
        t = range;  // bound flip
      } else {
        struct Cand {
          int p;
          double ratio, piv;
        };
        std::vector<Cand> cands;
        double max_piv = 0.0;
        for (int p = 0; p < m_; ++p) {
          const double a = enter_dir * w[p];
          const int v = basis_[p];
          double ratio;
          if (a > opt_.pivot_tol && std::isfinite(lb_[v])) ratio = (x_[v] - lb_[v]) / a;
          else if (a < -opt_.pivot_tol && std::isfinite(ub_[v])) ratio = (ub_[v] - x_[v]) / -a;
          else continue;
          if (ratio > t_max) continue;
          cands.push_back({p, ratio, std::abs(a)});
          max_piv = std::max(max_piv, std::abs(a));
        }
        double best_ratio = kInf;
        for (const Cand& c : cands) {
          if (bland) {
            // Smallest ratio, then smallest variable index, among stable pivots.
            if (c.piv < 0.1 * max_piv) continue;
            if (c.ratio < best_ratio - 1e-12 || (c.ratio <= best_ratio + 1e-12 && basis_[c.p] < basis_[leave])) {
              best_ratio = std::min(c.ratio, best_ratio);
              leave = c.p;
            }
          } else if (c.piv > best_piv) {
            best_piv = c.piv;
            leave = c.p;
            best_ratio = c.ratio;
          }
        }
        if (leave < 0) {
          if (fresh()) return LpStatus::numerical_failure;
          continue;
        }
        t = std::max(0.0, best_ratio);
      }

      ++iters_;
      degenerate_run = (t <= 1e-12) ? degenerate_run + 1 : 0;

      if (t != 0.0) {
        for (int p = 0; p < m_; ++p) x_[basis_[p]] -= t * enter_dir * w[p];
        x_[enter] += t * enter_dir;
      }
      if (leave < 0) {
        state_[enter] = enter_dir > 0 ? kAtUpper : kAtLower;
        x_[enter] = enter_dir > 0 ? ub_[enter] : lb_[enter];
        continue;
      }
      const int out = basis_[leave];
      const double a = enter_dir * w[leave];
      if (a > 0) {
        state_[out] = kAtLower;
        x_[out] = lb_[out];
      } else {
        state_[out] = kAtUpper;
        x_[out] = ub_[out];
      }
      basis_[leave] = enter;
      state_[enter] = kBasic;
      dj_valid = false;
      factor_.push_eta(leave, std::move(w));
      if (static_cast<int>(factor_.eta_count()) >= opt_.refactor_every) refactor();
    }
  }

  const StandardLP& lp_;
  SimplexOptions opt_;
  int m_ = 0, n_ = 0, n_art_ = 0;
  std::vector<BasisFactor::Column> cols_;
  std::vector<double> lb_, ub_, cost_, x_;
  std::vector<char> state_;
  std::vector<int> basis_;
  BasisFactor factor_;
  long iters_ = 0, max_iters_ = 0;
  int repairs_ = 0;
  static constexpr double kPerturb = 1e-6;
  bool perturbed_ = false, allow_shift_ = true;
  std::vector<double> rhs_, base_lb_, base_ub_;
};

}  // namespace detail

inline LpSolution solve(const StandardLP& lp, const SimplexOptions& opt = {}, const LpBasis* warm = nullptr) {
  lp.validate();
  if (lp.n_rows() == 0) {
    LpSolution sol;
    sol.x.assign(lp.n_vars(), 0.0);
    sol.objective = lp.objective_offset;
    sol.status = LpStatus::optimal;
    for (int j = 0; j < lp.n_vars(); ++j) {
      if (lp.c_obj[j] < 0 || (!lp.nonneg[j] && lp.c_obj[j] != 0)) {
        sol.status = LpStatus::unbounded;
        break;
      }
    }
    return sol;
  }
  // Power-of-two row then column equilibration; exact to undo.
  auto pow2 = [](double m) { return m > 0.0 ? std::exp2(-std::round(std::log2(m))) : 1.0; };
  const int m = lp.n_rows(), n = lp.n_vars();
  std::vector<double> rs(m, 1.0), cs(n, 1.0), cmax(n, 0.0);
  for (int i = 0; i < m; ++i) {
    double mx = 0.0;
    for (double v : lp.A_ub.row_vals(i)) mx = std::max(mx, std::abs(v));
    rs[i] = pow2(mx);
  }
  for (int i = 0; i < m; ++i) {
    auto cols = lp.A_ub.row_cols(i);
    auto vals = lp.A_ub.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) cmax[cols[k]] = std::max(cmax[cols[k]], std::abs(vals[k] * rs[i]));
  }
  for (int j = 0; j < n; ++j) cs[j] = pow2(cmax[j]);
  StandardLP sc = lp;
  for (int i = 0; i < m; ++i) {
    for (auto k = sc.A_ub.row_ptr[i]; k < sc.A_ub.row_ptr[i + 1]; ++k) sc.A_ub.val[k] *= rs[i] * cs[sc.A_ub.col[k]];
    sc.b_ub[i] *= rs[i];
  }
  for (int j = 0; j < n; ++j) {
    sc.c_obj[j] *= cs[j];
    if (!sc.upper.empty()) sc.upper[j] /= cs[j];
  }
  detail::RevisedSimplex simplex(sc, opt);
  LpSolution sol = simplex.run(warm);
  for (int j = 0; j < n; ++j) sol.x[j] *= cs[j];
  for (int i = 0; i < m && i < static_cast<int>(sol.duals.size()); ++i) sol.duals[i] *= rs[i];
  return sol;
}

/// Largest violation of A x <= b (or = b) and of the sign constraints.
inline double primal_residual(const StandardLP& lp, const std::vector<double>& x) {
  double worst = 0.0;
  for (int i = 0; i < lp.n_rows(); ++i) {
    const double r = lp.A_ub.row_dot(i, x) - lp.b_ub[i];
    worst = std::max(worst, lp.kind(i) == RowKind::eq ? std::abs(r) : std::max(0.0, r));
  }
  for (int j = 0; j < lp.n_vars(); ++j) {
    if (lp.nonneg[j]) worst = std::max(worst, -x[j]);
    worst = std::max(worst, x[j] - lp.upper_bound(j));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// MPS (fixed format). Names are written in their 8-character fields; numbers
// use the shortest round-trip representation, which fills the 12-character
// field when it fits and overruns it otherwise. The reader tokenizes on
// whitespace, so both layouts parse.

namespace detail {
inline std::string mps_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

inline std::string mps_line(const std::string& f1, const std::string& f2, const std::string& f3,
                            const std::string& f4, const std::string& f5 = {}, const std::string& f6 = {}) {
  // Columns: 2-3, 5-12, 15-22, 25-36, 40-47, 50-61.
  std::string line = " " + pad(f1, 2) + " " + pad(f2, 8) + "  " + pad(f3, 8) + "  ";
  line += f4.size() < 12 ? std::string(12 - f4.size(), ' ') + f4 : f4;
  if (!f5.empty()) {
    line += "   " + pad(f5, 8) + "  ";
    line += f6.size() < 12 ? std::string(12 - f6.size(), ' ') + f6 : f6;
  }
  while (!line.empty() && line.back() == ' ') line.pop_back();
  return line;
}

inline std::vector<std::string> default_names(const std::vector<std::string>& given, int n, char prefix) {
  if (static_cast<int>(given.size()) == n) return given;
  std::vector<std::string> out(n);
  for (int i = 0; i < n; ++i) out[i] = prefix + std::to_string(i + 1);
  return out;
}
}  // namespace detail

inline void write_mps(std::ostream& os, const StandardLP& lp, const std::string& name = "CSC") {
  lp.validate();
  const auto vars = detail::default_names(lp.var_names, lp.n_vars(), 'x');
  const auto rows = detail::default_names(lp.row_names, lp.n_rows(), 'r');
  for (const auto& s : vars)
    if (s.empty() || s.size() > 8 || s.find(' ') != std::string::npos)
      throw error(error_kind::invalid_argument, "MPS names must be 1-8 characters without spaces: " + s);
  for (const auto& s : rows)
    if (s.empty() || s.size() > 8 || s.find(' ') != std::string::npos)
      throw error(error_kind::invalid_argument, "MPS names must be 1-8 characters without spaces: " + s);

  os << "NAME          " << name << "\n";
  os << "ROWS\n";
  os << " N  COST\n";
  for (int i = 0; i < lp.n_rows(); ++i) os << " " << (lp.kind(i) == RowKind::eq ? "E" : "L") << "  " << rows[i] << "\n";
  os << "COLUMNS\n";
  const SparseMatrix At = lp.A_ub.transpose();
  for (int j = 0; j < lp.n_vars(); ++j) {
    if (lp.c_obj[j] != 0.0) os << detail::mps_line("", vars[j], "COST", detail::mps_number(lp.c_obj[j])) << "\n";
    for (auto k = At.row_ptr[j]; k < At.row_ptr[j + 1]; ++k)
      os << detail::mps_line("", vars[j], rows[At.col[k]], detail::mps_number(At.val[k])) << "\n";
    if (lp.c_obj[j] == 0.0 && At.row_ptr[j] == At.row_ptr[j + 1])
      os << detail::mps_line("", vars[j], "COST", "0") << "\n";
  }
  os << "RHS\n";
  if (lp.objective_offset != 0.0)
    os << detail::mps_line("", "RHS", "COST", detail::mps_number(-lp.objective_offset)) << "\n";
  for (int i = 0; i < lp.n_rows(); ++i)
    if (lp.b_ub[i] != 0.0) os << detail::mps_line("", "RHS", rows[i], detail::mps_number(lp.b_ub[i])) << "\n";
  os << "BOUNDS\n";
  for (int j = 0; j < lp.n_vars(); ++j) {
    os << detail::mps_line(lp.nonneg[j] ? "LO" : "FR", "BND", vars[j], lp.nonneg[j] ? "0" : "") << "\n";
    if (std::isfinite(lp.upper_bound(j)))
      os << detail::mps_line("UP", "BND", vars[j], detail::mps_number(lp.upper_bound(j))) << "\n";
  }
  os << "ENDATA\n";
}

inline void export_mps(const StandardLP& lp, const std::string& path, const std::string& name = "CSC") {
  std::ofstream f(path);
  if (!f) throw error(error_kind::io, "cannot open " + path + " for writing");
  write_mps(f, lp, name);
  if (!f) throw error(error_kind::io, "write failed for " + path);
}

/// Reads the subset of MPS produced by write_mps (N/L/E/G rows, LO/UP/FR/MI/PL bounds).
inline StandardLP read_mps(std::istream& is) {
  enum class Sec { none, rows, columns, rhs, bounds } sec = Sec::none;
  constexpr double kInfBound = std::numeric_limits<double>::infinity();
  std::string obj_row;
  std::vector<std::string> row_names;
  std::vector<RowKind> kinds;
  std::vector<double> row_sign;
  std::unordered_map<std::string, int> row_id, var_id;
  std::vector<std::string> var_names;
  std::vector<std::vector<std::pair<int, double>>> col_entries;
  std::vector<double> cost, rhs;
  std::vector<bool> nonneg;
  std::vector<double> upper;
  double offset = 0.0;

  auto parse_num = [](const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw error(error_kind::parse, "bad MPS number: " + s);
    return v;
  };
  auto var = [&](const std::string& name) {
    auto [it, ins] = var_id.try_emplace(name, static_cast<int>(var_names.size()));
    if (ins) {
      var_names.push_back(name);
      col_entries.emplace_back();
      cost.push_back(0.0);
      nonneg.push_back(true);
      upper.push_back(kInfBound);
    }
    return it->second;
  };

  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '*') continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (line[0] != ' ') {
      if (tok[0] == "ROWS") sec = Sec::rows;
      else if (tok[0] == "COLUMNS") sec = Sec::columns;
      else if (tok[0] == "RHS") sec = Sec::rhs;
      else if (tok[0] == "BOUNDS") sec = Sec::bounds;
      else if (tok[0] == "ENDATA") break;
      else if (tok[0] == "NAME") sec = Sec::none;
      else throw error(error_kind::parse, "unknown MPS section: " + tok[0]);
      continue;
    }
    switch (sec) {
      case Sec::rows: {
        if (tok.size() != 2) throw error(error_kind::parse, "bad ROWS line");
        if (tok[0] == "N") {
          if (obj_row.empty()) obj_row = tok[1];
          continue;
        }
        row_id[tok[1]] = static_cast<int>(row_names.size());
        row_names.push_back(tok[1]);
        kinds.push_back(tok[0] == "E" ? RowKind::eq : RowKind::le);
        row_sign.push_back(tok[0] == "G" ? -1.0 : 1.0);
        if (tok[0] != "E" && tok[0] != "L" && tok[0] != "G") throw error(error_kind::parse, "bad row type " + tok[0]);
        rhs.push_back(0.0);
        break;
      }
      case Sec::columns: {
        if (tok.size() != 3 && tok.size() != 5) throw error(error_kind::parse, "bad COLUMNS line");
        const int j = var(tok[0]);
        for (std::size_t f = 1; f + 1 < tok.size(); f += 2) {
          const double v = parse_num(tok[f + 1]);
          if (tok[f] == obj_row) cost[j] += v;
          else {
            auto it = row_id.find(tok[f]);
            if (it == row_id.end()) throw error(error_kind::parse, "unknown row " + tok[f]);
            col_entries[j].emplace_back(it->second, row_sign[it->second] * v);
          }
        }
        break;
      }
      case Sec::rhs: {
        if (tok.size() != 3 && tok.size() != 5) throw error(error_kind::parse, "bad RHS line");
        for (std::size_t f = 1; f + 1 < tok.size(); f += 2) {
          const double v = parse_num(tok[f + 1]);
          if (tok[f] == obj_row) offset = -v;
          else {
            auto it = row_id.find(tok[f]);
            if (it == row_id.end()) throw error(error_kind::parse, "unknown row " + tok[f]);
            rhs[it->second] = row_sign[it->second] * v;
          }
        }
        break;
      }
      case Sec::bounds: {
        if (tok.size() < 3) throw error(error_kind::parse, "bad BOUNDS line");
        const int j = var(tok[2]);
        if (tok[0] == "FR" || tok[0] == "MI") nonneg[j] = false;
        else if (tok[0] == "LO") {
          if (tok.size() != 4 || parse_num(tok[3]) != 0.0) throw error(error_kind::parse, "only zero lower bounds supported");
          nonneg[j] = true;
        } else if (tok[0] == "UP") {
          if (tok.size() != 4) throw error(error_kind::parse, "bad UP bound");
          upper[j] = parse_num(tok[3]);
        } else if (tok[0] != "PL") throw error(error_kind::parse, "unsupported bound type " + tok[0]);
        break;
      }
      case Sec::none: throw error(error_kind::parse, "data outside a section");
    }
  }
  StandardLP lp;
  const int n = static_cast<int>(var_names.size());
  const int m = static_cast<int>(row_names.size());
  std::vector<std::vector<std::pair<int, double>>> rows(m);
  for (int j = 0; j < n; ++j)
    for (auto [i, v] : col_entries[j]) rows[i].emplace_back(j, v);
  SparseBuilder sb(n);
  for (int i = 0; i < m; ++i) {
    for (auto [j, v] : rows[i]) sb.add(j, v);
    sb.end_row();
  }
  lp.A_ub = std::move(sb).finish();
  lp.A_ub.cols = n;
  lp.b_ub = rhs;
  lp.row_kind = kinds;
  lp.c_obj = cost;
  lp.nonneg = nonneg;
  if (std::any_of(upper.begin(), upper.end(), [](double u) { return std::isfinite(u); })) lp.upper = upper;
  lp.var_names = var_names;
  lp.row_names = row_names;
  lp.objective_offset = offset;
  return lp;
}

}  // namespace shapecomp
