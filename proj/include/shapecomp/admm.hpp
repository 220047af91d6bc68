#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "shapecomp/composer.hpp"
#include "shapecomp/error.hpp"
#include "shapecomp/parallel.hpp"

namespace shapecomp {

/// argmin_x max(a^T x, b) + ||x - rho||^2 / (2 xi).
inline std::vector<double> prox_max_affine(std::span<const double> a, double b, double xi, std::span<const double> rho) {
  if (a.size() != rho.size()) throw error(error_kind::dimension_mismatch, "prox: a and rho differ in length");
  if (!(xi > 0.0)) throw error(error_kind::invalid_argument, "prox: xi must be positive");
  std::vector<double> out(rho.begin(), rho.end());
  double aa = 0.0, ar = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    aa += a[k] * a[k];
    ar += a[k] * rho[k];
  }
  if (aa == 0.0 || ar < b) return out;
  const double theta = ar > b + xi * aa ? xi : (ar - b) / aa;
  for (std::size_t k = 0; k < a.size(); ++k) out[k] -= theta * a[k];
  return out;
}

/// Euclidean projection onto {x : ||x||_1 <= tau}.
inline std::vector<double> project_l1_ball(std::span<const double> v, double tau) {
  if (!(tau >= 0.0)) throw error(error_kind::invalid_argument, "tau must be nonnegative");
  std::vector<double> out(v.begin(), v.end());
  double l1 = 0.0;
  for (double x : v) l1 += std::abs(x);
  if (l1 <= tau) return out;
  if (tau == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  std::vector<double> u(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) u[k] = std::abs(v[k]);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - tau) / static_cast<double>(k + 1);
    if (t < u[k]) theta = t;
    else break;
  }
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double m = std::max(std::abs(v[k]) - theta, 0.0);
    out[k] = v[k] < 0 ? -m : m;
  }
  return out;
}

inline std::vector<double> soft_threshold(std::span<const double> v, double kappa) {
  if (!(kappa >= 0.0)) throw error(error_kind::invalid_argument, "kappa must be nonnegative");
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double m = std::max(std::abs(v[k]) - kappa, 0.0);
    out[k] = v[k] < 0 ? -m : m;
  }
  return out;
}

struct AdmmOptions {
  double xi = 1.0;
  long max_iters = 5000;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  bool record_trace = true;
};

struct AdmmTraceRow {
  long iter = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double objective = 0.0;
};

struct AdmmResult {
  AlphaVector alpha;
  double gtilde = 0.0;
  double objective = 0.0;
  bool converged = false;
  long iterations = 0;
  std::vector<AdmmTraceRow> trace;
};

namespace detail {
constexpr std::size_t kAdmmChunk = 2048;
}

/// Consensus ADMM over the rows g_i = max(a_i^T alpha, b_i) with zero start.
/// Each prox moves along a_i only, so alpha_i = v_i - theta_i a_i and
/// omega_i = d - theta_i a_i with d = rho^{k-1} - rho^k; the state is one
/// scalar per row and rho^{k+1} = P(rho^k - (1/N) A^T theta^{k+1}).
/// Rows with a_i = 0 have identity prox and are left out of N.
inline AdmmResult solve_admm(const ProblemData& pd, const AdmmOptions& opt = {}) {
  if (!(opt.xi > 0.0)) throw error(error_kind::invalid_argument, "xi must be positive");
  if (!(pd.budget.value >= 0.0)) throw error(error_kind::invalid_argument, "tau/lambda must be nonnegative");
  const int ns = pd.n_shapes();
  std::vector<int> rows;
  std::vector<double> norm2;
  for (int i = 0; i < pd.n_cells(); ++i) {
    double s = 0.0;
    for (double v : pd.A.row_vals(i)) s += v * v;
    if (s > 0.0) {
      rows.push_back(i);
      norm2.push_back(s);
    }
  }
  const std::size_t N = rows.size();
  const double xi = opt.xi;
  const bool constrained = pd.budget.is_tau();

  AdmmResult res;
  std::vector<double> rho(ns, 0.0), d(ns, 0.0), theta(N, 0.0);
  auto evaluate = [&](const std::vector<double>& x) {
    double g = objective_value(pd, x);
    if (!constrained) {
      double l1 = 0.0;
      for (double v : x) l1 += std::abs(v);
      g += pd.lambda() * l1;
    }
    return g;
  };

  if (N == 0) {
    res.alpha.alpha = rho;
    res.converged = true;
    res.gtilde = objective_value(pd, rho);
    res.objective = evaluate(rho);
    return res;
  }

  const double invN = 1.0 / static_cast<double>(N);
  const double scale = std::sqrt(static_cast<double>(ns));
  const std::size_t n_chunks = chunk_count(N, detail::kAdmmChunk);
  std::vector<std::vector<double>> partial(n_chunks, std::vector<double>(ns));
  std::vector<double> shift_old(ns, 0.0);  // (1/N) A^T theta^k

  for (long k = 0; k < opt.max_iters; ++k) {
    // Local prox step per row, then the chunked sum of theta_i a_i.
    for_each_chunk(N, detail::kAdmmChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
      auto& acc = partial[c];
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t r = b; r < e; ++r) {
        const int i = rows[r];
        auto cols = pd.A.row_cols(i);
        auto vals = pd.A.row_vals(i);
        double av = 0.0;
        for (std::size_t t = 0; t < cols.size(); ++t) av += vals[t] * (rho[cols[t]] - d[cols[t]]);
        av += theta[r] * norm2[r];
        double th;
        if (av < pd.b[i]) th = 0.0;
        else if (av > pd.b[i] + xi * norm2[r]) th = xi;
        else th = (av - pd.b[i]) / norm2[r];
        theta[r] = th;
        if (th != 0.0)
          for (std::size_t t = 0; t < cols.size(); ++t) acc[cols[t]] += th * vals[t];
      }
    });
    std::vector<double> shift(ns, 0.0);
    {
      std::vector<std::vector<double>> level = partial;
      while (level.size() > 1) {
        std::vector<std::vector<double>> next((level.size() + 1) / 2);
        for (std::size_t p = 0; p < next.size(); ++p) {
          next[p] = std::move(level[2 * p]);
          if (2 * p + 1 < level.size())
            for (int j = 0; j < ns; ++j) next[p][j] += level[2 * p + 1][j];
        }
        level.swap(next);
      }
      for (int j = 0; j < ns; ++j) shift[j] = level[0][j] * invN;
    }

    // alpha-bar^{k+1} = rho^k - d^k + shift_old - shift; the consensus step sees rho^k - shift.
    std::vector<double> abar(ns), target(ns);
    for (int j = 0; j < ns; ++j) {
      abar[j] = rho[j] - d[j] + shift_old[j] - shift[j];
      target[j] = rho[j] - shift[j];
    }
    std::vector<double> next =
        constrained ? project_l1_ball(target, pd.tau()) : soft_threshold(target, xi * pd.lambda() * invN);

    double pr = 0.0, dr = 0.0;
    for (int j = 0; j < ns; ++j) {
      pr += (abar[j] - next[j]) * (abar[j] - next[j]);
      d[j] = rho[j] - next[j];
      dr += d[j] * d[j];
    }
    pr = std::sqrt(pr);
    dr = std::sqrt(dr);
    rho.swap(next);
    shift_old.swap(shift);
    res.iterations = k + 1;
    if (opt.record_trace) res.trace.push_back({k + 1, pr, dr, evaluate(rho)});
    if (pr <= opt.tol_primal * scale && dr <= opt.tol_dual * scale) {
      res.converged = true;
      break;
    }
  }
  res.alpha.alpha = rho;
  res.gtilde = objective_value(pd, rho);
  res.objective = evaluate(rho);
  return res;
}

inline void write_trace_csv(std::ostream& os, const std::vector<AdmmTraceRow>& trace) {
  os << "iter,primal_res,dual_res,objective\n";
  os.precision(17);
  for (const auto& t : trace) os << t.iter << ',' << t.primal_res << ',' << t.dual_res << ',' << t.objective << '\n';
}

}  // namespace shapecomp
