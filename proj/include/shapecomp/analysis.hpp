#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "shapecomp/composer.hpp"
#include "shapecomp/dsd.hpp"
#include "shapecomp/error.hpp"
#include "shapecomp/lp.hpp"

namespace shapecomp {

constexpr double kBetaTol = 1e-6;

/// Shapes of a composition in the order used by all composition-local
/// vectors: I+ ascending, then I- ascending.
inline std::vector<int> composition_shapes(const Composition& comp) {
  std::vector<int> s = comp.i_plus;
  s.insert(s.end(), comp.i_minus.begin(), comp.i_minus.end());
  return s;
}

inline ShapeletDecomposition decompose_composition(const Dictionary& dict, const Composition& comp,
                                                   const DeltaField* delta = nullptr) {
  comp.validate(dict.size());
  std::vector<ShapeMask> shapes;
  for (int j : composition_shapes(comp)) shapes.push_back(dict.shapes[j]);
  return decompose(shapes, delta);
}

/// Removing any element must change the realized region.
inline bool is_non_redundant(const Dictionary& dict, const Composition& comp) {
  const std::size_t full = realize(comp, dict).size();
  for (std::size_t k = 0; k < comp.cardinality(); ++k) {
    Composition c = comp;
    if (k < comp.i_plus.size()) c.i_plus.erase(c.i_plus.begin() + k);
    else c.i_minus.erase(c.i_minus.begin() + (k - comp.i_plus.size()));
    if (realize(c, dict).size() == full) return false;
  }
  return true;
}

struct LinkageResult {
  std::vector<int> shapes;       // dictionary index of each alpha_r entry
  std::vector<double> alpha_r;   // 1 on I+, LP values on I-
  std::vector<double> beta_r;    // per shapelet of the composition DSD
  std::vector<int> gamma0, gamma1;
  bool basic = false;
  std::size_t n_plus = 0, n_minus = 0;

  /// alpha_r scattered into a dictionary-length vector.
  std::vector<double> full_alpha(std::size_t n_shapes) const {
    std::vector<double> a(n_shapes, 0.0);
    for (std::size_t k = 0; k < shapes.size(); ++k) a[shapes[k]] = alpha_r[k];
    return a;
  }
};

/// alpha_{I+} = 1; alpha_{I-} maximizes sum(alpha_{I-}) subject to
/// L_alpha <= 0 on every composition shapelet outside the region.
inline LinkageResult linkage(const Dictionary& dict, const Composition& comp, bool require_basic = true) {
  comp.validate(dict.size());
  if (comp.i_plus.empty()) throw error(error_kind::invalid_argument, "linkage needs a nonempty I+");
  if (!is_non_redundant(dict, comp)) throw error(error_kind::redundant_composition, "composition is redundant");
  const ShapeletDecomposition dR = decompose_composition(dict, comp);
  const std::size_t np = comp.i_plus.size(), nm = comp.i_minus.size();

  LinkageResult res;
  res.shapes = composition_shapes(comp);
  res.n_plus = np;
  res.n_minus = nm;
  res.alpha_r.assign(np + nm, 1.0);

  if (nm > 0) {
    StandardLP lp;
    SparseBuilder sb(static_cast<int>(nm));
    for (std::size_t l = 0; l < dR.size(); ++l) {
      double plus = 0.0;
      bool any_minus = false;
      for (int c : dR.bearing[l]) {
        if (static_cast<std::size_t>(c) < np) plus += 1.0;
        else any_minus = true;
      }
      if (plus > 0.0 && !any_minus) continue;  // inside the region
      for (int c : dR.bearing[l])
        if (static_cast<std::size_t>(c) >= np) sb.add(c - static_cast<int>(np), 1.0);
      sb.end_row();
      lp.b_ub.push_back(-plus);
    }
    lp.A_ub = std::move(sb).finish();
    lp.c_obj.assign(nm, -1.0);
    lp.nonneg.assign(nm, false);
    const LpSolution sol = solve(lp);
    if (sol.status != LpStatus::optimal)
      throw error(error_kind::linkage_not_unique, std::string("linkage LP ended with status ") + to_string(sol.status));
    for (std::size_t k = 0; k < nm; ++k) {
      double v = sol.x[k];
      if (std::abs(v - std::round(v)) < 1e-9) v = std::round(v);
      res.alpha_r[np + k] = v;
    }
  }

  res.beta_r = beta_of(dR, res.alpha_r);
  for (std::size_t l = 0; l < dR.size(); ++l) {
    if (std::abs(res.beta_r[l]) <= kBetaTol) res.gamma0.push_back(static_cast<int>(l));
    else if (std::abs(res.beta_r[l] - 1.0) <= kBetaTol) res.gamma1.push_back(static_cast<int>(l));
  }
  res.basic = res.gamma1.size() == np && res.gamma0.size() == nm;
  if (require_basic && !res.basic)
    throw error(error_kind::linkage_not_unique, "composition is not basic: " + std::to_string(res.gamma1.size()) +
                                                    " unit and " + std::to_string(res.gamma0.size()) +
                                                    " null shapelets");
  return res;
}

namespace detail {
/// Rows Gamma0 then Gamma1 of the composition bearing matrix.
inline Eigen::MatrixXd bearing_block(const LinkageResult& lr, const ShapeletDecomposition& dR) {
  const int n = static_cast<int>(lr.shapes.size());
  std::vector<int> rows = lr.gamma0;
  rows.insert(rows.end(), lr.gamma1.begin(), lr.gamma1.end());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c : dR.bearing[rows[r]]) M(static_cast<int>(r), c) = 1.0;
  return M;
}

inline Eigen::VectorXd solve_transposed(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs) {
  if (M.rows() != M.cols()) throw error(error_kind::singular_system, "bearing block is not square");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M.transpose());
  if (!lu.isInvertible()) throw error(error_kind::singular_system, "bearing block is singular");
  return lu.solve(rhs);
}
}  // namespace detail

/// Solves (B^R_{Gamma0 u Gamma1,:})^T w = c, c = +1 on I+, -1 on I-; w is
/// ordered Gamma0 then Gamma1.
inline std::vector<double> bearing_constants(const LinkageResult& lr, const ShapeletDecomposition& dR) {
  if (!lr.basic) throw error(error_kind::linkage_not_unique, "bearing constants need a basic composition");
  const Eigen::MatrixXd M = detail::bearing_block(lr, dR);
  Eigen::VectorXd c(static_cast<int>(lr.shapes.size()));
  for (std::size_t k = 0; k < lr.shapes.size(); ++k) c(k) = k < lr.n_plus ? 1.0 : -1.0;
  const Eigen::VectorXd w = detail::solve_transposed(M, c);
  const double tol = 1e-9;
  const double hi = 1.0 + static_cast<double>(lr.n_minus);
  for (std::size_t r = 0; r < lr.gamma0.size(); ++r)
    if (w(r) < -1.0 - tol || w(r) >= -tol)
      throw error(error_kind::bounds_violated, "bearing constant on a null shapelet outside [-1, 0)");
  for (std::size_t r = 0; r < lr.gamma1.size(); ++r) {
    const double v = w(lr.gamma0.size() + r);
    if (v < 1.0 - tol || v > hi + tol)
      throw error(error_kind::bounds_violated, "bearing constant on a unit shapelet outside [1, 1 + n-]");
  }
  std::vector<double> out(w.data(), w.data() + w.size());
  for (double& v : out)
    if (std::abs(v - std::round(v)) < 1e-12) v = std::round(v);
  return out;
}

/// Cells of the full-dictionary decomposition grouped by the composition
/// shapelet that contains them (J_l), for l in Gamma0 then Gamma1.
inline std::vector<std::vector<int>> cells_of_shapelets(const LinkageResult& lr, const ShapeletDecomposition& dR,
                                                        const ShapeletDecomposition& cells) {
  std::vector<int> pos(dR.size(), -1);
  for (std::size_t r = 0; r < lr.gamma0.size(); ++r) pos[lr.gamma0[r]] = static_cast<int>(r);
  for (std::size_t r = 0; r < lr.gamma1.size(); ++r) pos[lr.gamma1[r]] = static_cast<int>(lr.gamma0.size() + r);
  std::vector<std::vector<int>> J(lr.gamma0.size() + lr.gamma1.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const int l = dR.shapelet_of_cell[cells.shapelets[i].front()];
    if (l >= 0 && pos[l] >= 0) J[pos[l]].push_back(static_cast<int>(i));
  }
  return J;
}

/// gamma_{l,j}: fraction of the cells of composition shapelet l lying in shape j.
inline double overlap_fraction(const std::vector<int>& Jl, const ShapeletDecomposition& cells, int j) {
  if (Jl.empty()) return 0.0;
  std::size_t in = 0;
  for (int i : Jl) in += cells.bit(i, j) ? 1 : 0;
  return static_cast<double>(in) / static_cast<double>(Jl.size());
}

/// Coh(S_j, R) for every exterior shape j (NaN for members of the composition).
inline std::vector<double> coherence(const Dictionary& dict, const Composition& comp, const std::vector<double>& w,
                                     const ShapeletDecomposition& cells) {
  const LinkageResult lr = linkage(dict, comp);
  const ShapeletDecomposition dR = decompose_composition(dict, comp);
  if (w.size() != lr.gamma0.size() + lr.gamma1.size())
    throw error(error_kind::dimension_mismatch, "bearing constant length mismatch");
  const auto J = cells_of_shapelets(lr, dR, cells);
  std::vector<double> coh(dict.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<char> member(dict.size(), 0);
  for (int j : lr.shapes) member[j] = 1;
  for (std::size_t j = 0; j < dict.size(); ++j) {
    if (member[j]) continue;
    double s = 0.0;
    for (std::size_t l = 0; l < J.size(); ++l) s += overlap_fraction(J[l], cells, static_cast<int>(j)) * w[l];
    coh[j] = std::abs(s);
  }
  return coh;
}

/// e_j = sum of p over shapelets of shape j with beta > 1 minus sum of q
/// over shapelets of shape j with beta < 0.
inline std::vector<double> loc_violation_vector(const ShapeletDecomposition& cells, const std::vector<double>& beta) {
  if (!cells.has_masses()) throw error(error_kind::invalid_argument, "decomposition has no p/q masses");
  std::vector<double> e(cells.n_shapes, 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double v = 0.0;
    if (beta[i] > 1.0 + kBetaTol) v = cells.p[i];
    else if (beta[i] < -kBetaTol) v = -cells.q[i];
    if (v != 0.0)
      for (int j : cells.bearing[i]) e[j] += v;
  }
  return e;
}

struct LocViolation {
  std::vector<double> e;                // per dictionary shape
  std::vector<double> eps_lv;           // per composition shapelet, Gamma0 then Gamma1
  std::vector<int> cell_index;          // cells in J_l, l in Gamma0 u Gamma1
  std::vector<int> cell_shapelet;       // position of l (Gamma0 then Gamma1) for each such cell
  std::vector<double> eps_i;            // per entry of cell_index
  std::vector<double> delta_j;          // per dictionary shape, NaN for members
  std::vector<int> T;                   // cells covered only by exterior shapes
};

inline LocViolation loc_violation(const Dictionary& dict, const Composition& comp, const ShapeletDecomposition& cells,
                                  const LinkageResult& lr, const std::vector<double>& w) {
  if (!lr.basic) throw error(error_kind::linkage_not_unique, "LOC violation needs a basic composition");
  const ShapeletDecomposition dR = decompose_composition(dict, comp);
  LocViolation out;
  const std::vector<double> alpha = lr.full_alpha(dict.size());
  out.e = loc_violation_vector(cells, beta_of(cells, alpha));

  const int n = static_cast<int>(lr.shapes.size());
  Eigen::VectorXd eR(n);
  for (int k = 0; k < n; ++k) eR(k) = out.e[lr.shapes[k]];
  const Eigen::VectorXd lv = detail::solve_transposed(detail::bearing_block(lr, dR), eR);
  out.eps_lv.assign(lv.data(), lv.data() + lv.size());

  const auto J = cells_of_shapelets(lr, dR, cells);
  const std::size_t n0 = lr.gamma0.size();
  for (std::size_t l = 0; l < J.size(); ++l) {
    const double sz = static_cast<double>(J[l].size());
    for (int i : J[l]) {
      out.cell_index.push_back(i);
      out.cell_shapelet.push_back(static_cast<int>(l));
      out.eps_i.push_back(l < n0 ? (out.eps_lv[l] - cells.q[i] * sz) / std::abs(w[l])
                                 : 0.0 - (out.eps_lv[l] + cells.p[i] * sz) / std::abs(w[l]));
    }
  }

  std::vector<char> member(dict.size(), 0);
  for (int j : lr.shapes) member[j] = 1;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const bool touches_r = std::any_of(cells.bearing[i].begin(), cells.bearing[i].end(), [&](int j) { return member[j] != 0; });
    if (!touches_r) out.T.push_back(static_cast<int>(i));
  }
  out.delta_j.assign(dict.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < dict.size(); ++j) {
    if (member[j]) continue;
    double s = -out.e[j];
    for (std::size_t l = 0; l < J.size(); ++l) s += overlap_fraction(J[l], cells, static_cast<int>(j)) * out.eps_lv[l];
    double t = 0.0;
    for (int i : out.T)
      if (cells.bit(i, static_cast<int>(j))) t += std::max(0.0, cells.q[i] - cells.p[i]);
    out.delta_j[j] = std::abs(s) + t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unique optimality certificate.

enum class CertificateStatus { feasible, indeterminate, infeasible };

inline const char* to_string(CertificateStatus s) {
  switch (s) {
    case CertificateStatus::feasible: return "feasible";
    case CertificateStatus::indeterminate: return "indeterminate";
    case CertificateStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

struct Certificate {
  bool feasible = false;
  CertificateStatus status = CertificateStatus::infeasible;
  std::vector<double> eta;   // Gamma0 then Gamma1
  double eta_c = 0.0;
  double margin = 0.0;
  std::vector<int> gamma0, gamma1, gamma0_minus, gamma1_plus;
  std::vector<double> e, l, u, c;
  std::vector<double> beta;
  bool rank_ok = false;
};

/// Searches eta, eta_c with B_{Gamma0 u Gamma1,:}^T eta = eta_c c + e,
/// l < eta < u, |c_j| < 1 off the support, by maximizing the smallest slack.
inline Certificate check_unique_optimality(const ShapeletDecomposition& cells, const std::vector<double>& alpha_star,
                                           double tau, double margin_tol = 1e-9) {
  if (!cells.has_masses()) throw error(error_kind::invalid_argument, "decomposition has no p/q masses");
  if (alpha_star.size() != cells.n_shapes) throw error(error_kind::dimension_mismatch, "alpha length != n_s");
  double l1 = 0.0;
  for (double a : alpha_star) l1 += std::abs(a);
  if (std::abs(l1 - tau) > 1e-6 * std::max(1.0, tau))
    throw error(error_kind::hypothesis_violated, "||alpha*||_1 differs from tau");

  Certificate cert;
  cert.beta = beta_of(cells, alpha_star);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double b = cert.beta[i];
    const int ii = static_cast<int>(i);
    if (std::abs(b) <= kBetaTol) cert.gamma0.push_back(ii);
    else if (std::abs(b - 1.0) <= kBetaTol) cert.gamma1.push_back(ii);
    else if (b < 0.0) cert.gamma0_minus.push_back(ii);
    else if (b > 1.0) cert.gamma1_plus.push_back(ii);
    else throw error(error_kind::hypothesis_violated, "beta has an entry inside (0, 1)");
  }
  cert.e = loc_violation_vector(cells, cert.beta);
  std::vector<int> rows = cert.gamma0;
  rows.insert(rows.end(), cert.gamma1.begin(), cert.gamma1.end());
  const std::size_t m = rows.size();
  for (std::size_t r = 0; r < m; ++r) {
    const int i = rows[r];
    const bool zero = r < cert.gamma0.size();
    cert.l.push_back(zero ? cells.q[i] - cells.p[i] : 0.0 - cells.p[i]);
    cert.u.push_back(zero ? cells.q[i] : cells.q[i] - cells.p[i]);
  }

  const double stol = 1e-6 * std::max(1.0, std::abs(tau));
  std::vector<int> support;
  for (std::size_t j = 0; j < cells.n_shapes; ++j)
    if (std::abs(alpha_star[j]) > stol) support.push_back(static_cast<int>(j));
  if (support.empty()) cert.rank_ok = true;
  else {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<int>(m), static_cast<int>(support.size()));
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t k = 0; k < support.size(); ++k) S(r, k) = cells.bit(rows[r], support[k]) ? 1.0 : 0.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    cert.rank_ok = m >= support.size() && static_cast<std::size_t>(lu.rank()) == support.size();
  }

  // Variables: eta (m), eta_c, t. Minimize -t.
  const int ne = static_cast<int>(m), vc = ne, vt = ne + 1;
  StandardLP lp;
  SparseBuilder sb(ne + 2);
  std::vector<RowKind> kinds;
  for (int r = 0; r < ne; ++r) {
    sb.add(r, -1.0);
    sb.add(vt, 1.0);
    sb.end_row();
    lp.b_ub.push_back(-cert.l[r]);
    kinds.push_back(RowKind::le);
    sb.add(r, 1.0);
    sb.add(vt, 1.0);
    sb.end_row();
    lp.b_ub.push_back(cert.u[r]);
    kinds.push_back(RowKind::le);
  }
  sb.add(vc, -1.0);
  sb.add(vt, 1.0);
  sb.end_row();
  lp.b_ub.push_back(0.0);
  kinds.push_back(RowKind::le);
  std::vector<char> in_support(cells.n_shapes, 0);
  for (int j : support) in_support[j] = 1;
  for (std::size_t j = 0; j < cells.n_shapes; ++j) {
    auto add_bt = [&](double sign) {
      for (int r = 0; r < ne; ++r)
        if (cells.bit(rows[r], static_cast<int>(j))) sb.add(r, sign);
    };
    if (in_support[j]) {
      add_bt(1.0);
      sb.add(vc, alpha_star[j] > 0 ? -1.0 : 1.0);
      sb.end_row();
      lp.b_ub.push_back(cert.e[j]);
      kinds.push_back(RowKind::eq);
    } else {
      add_bt(1.0);
      sb.add(vc, -1.0);
      sb.add(vt, 1.0);
      sb.end_row();
      lp.b_ub.push_back(cert.e[j]);
      kinds.push_back(RowKind::le);
      add_bt(-1.0);
      sb.add(vc, -1.0);
      sb.add(vt, 1.0);
      sb.end_row();
      lp.b_ub.push_back(-cert.e[j]);
      kinds.push_back(RowKind::le);
    }
  }
  lp.A_ub = std::move(sb).finish();
  lp.row_kind = std::move(kinds);
  lp.c_obj.assign(ne + 2, 0.0);
  lp.c_obj[vt] = -1.0;
  lp.nonneg.assign(ne + 2, false);
  lp.upper.assign(ne + 2, std::numeric_limits<double>::infinity());
  lp.upper[vt] = 1.0;
  const LpSolution sol = solve(lp);
  if (sol.status != LpStatus::optimal) {
    cert.status = CertificateStatus::infeasible;
    return cert;
  }
  cert.eta.assign(sol.x.begin(), sol.x.begin() + ne);
  cert.eta_c = sol.x[vc];
  cert.margin = sol.x[vt];
  cert.c.assign(cells.n_shapes, 0.0);
  if (cert.eta_c > 0.0) {
    for (std::size_t j = 0; j < cells.n_shapes; ++j) {
      double s = -cert.e[j];
      for (int r = 0; r < ne; ++r)
        if (cells.bit(rows[r], static_cast<int>(j))) s += cert.eta[r];
      cert.c[j] = s / cert.eta_c;
    }
  }
  if (cert.margin > margin_tol) cert.status = cert.rank_ok ? CertificateStatus::feasible : CertificateStatus::infeasible;
  else if (cert.margin >= -margin_tol) cert.status = CertificateStatus::indeterminate;
  else cert.status = CertificateStatus::infeasible;
  cert.feasible = cert.status == CertificateStatus::feasible;
  return cert;
}

// ---------------------------------------------------------------------------
// Recovery conditions for a target composition.

struct RecoveryReport {
  LinkageResult linkage;
  std::vector<double> w;
  LocViolation loc;
  std::vector<double> coh;            // per dictionary shape, NaN for members
  double eta_c = 0.0;
  std::vector<double> cell_margin;    // mass minus |w_l|/|J_l| (eta_c - eps_i), per loc.cell_index
  std::vector<double> coh_margin;     // 1 - delta_j / eta_c - Coh_j, NaN for members
  bool eta_c_valid = false;           // eta_c > max(0, eps_i)
  bool cell_conditions = false;
  bool coherence_conditions = false;
  bool conditions_met = false;
};

inline RecoveryReport check_recovery(const Dictionary& dict, const DeltaField& delta, const Composition& comp,
                                     double eta_c) {
  RecoveryReport rep;
  rep.linkage = linkage(dict, comp);
  const ShapeletDecomposition dR = decompose_composition(dict, comp);
  const ShapeletDecomposition cells = decompose(dict.shapes, &delta);
  rep.w = bearing_constants(rep.linkage, dR);
  rep.loc = loc_violation(dict, comp, cells, rep.linkage, rep.w);
  rep.coh = coherence(dict, comp, rep.w, cells);
  rep.eta_c = eta_c;

  const auto J = cells_of_shapelets(rep.linkage, dR, cells);
  const std::size_t n0 = rep.linkage.gamma0.size();
  rep.eta_c_valid = eta_c > 0.0;
  rep.cell_conditions = true;
  for (std::size_t k = 0; k < rep.loc.cell_index.size(); ++k) {
    const int i = rep.loc.cell_index[k];
    const int l = rep.loc.cell_shapelet[k];
    if (!(eta_c > rep.loc.eps_i[k])) rep.eta_c_valid = false;
    const double mass = static_cast<std::size_t>(l) < n0 ? cells.p[i] : cells.q[i];
    const double need = std::abs(rep.w[l]) / static_cast<double>(J[l].size()) * (eta_c - rep.loc.eps_i[k]);
    rep.cell_margin.push_back(mass - need);
    if (!(mass > need)) rep.cell_conditions = false;
  }
  rep.coherence_conditions = true;
  rep.coh_margin.assign(dict.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < dict.size(); ++j) {
    if (std::isnan(rep.coh[j])) continue;
    rep.coh_margin[j] = 1.0 - rep.loc.delta_j[j] / eta_c - rep.coh[j];
    if (!(rep.coh_margin[j] > 0.0)) rep.coherence_conditions = false;
  }
  rep.conditions_met = rep.eta_c_valid && rep.cell_conditions && rep.coherence_conditions;
  return rep;
}

/// Bounds on eta_c implied by the recovery conditions: the cell conditions
/// alone give (cell_lo, hi); the coherence conditions raise the lower bound
/// to lo, and a coherence of 1 or more blocks every eta_c.
struct EtaCInterval {
  double cell_lo = 0.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool coherence_blocked = false;

  bool nonempty() const { return !coherence_blocked && hi - lo > 1e-9 * std::max(1.0, lo); }
  double pick(double a, double b) const { return std::isfinite(b) ? 0.5 * (a + b) : a + 1.0; }
};

inline EtaCInterval eta_c_interval(const Dictionary& dict, const DeltaField& delta, const Composition& comp) {
  const LinkageResult lr = linkage(dict, comp);
  const ShapeletDecomposition dR = decompose_composition(dict, comp);
  const ShapeletDecomposition cells = decompose(dict.shapes, &delta);
  const std::vector<double> w = bearing_constants(lr, dR);
  const LocViolation loc = loc_violation(dict, comp, cells, lr, w);
  const std::vector<double> coh = coherence(dict, comp, w, cells);
  const auto J = cells_of_shapelets(lr, dR, cells);
  EtaCInterval iv;
  for (std::size_t k = 0; k < loc.cell_index.size(); ++k) {
    const int i = loc.cell_index[k];
    const int l = loc.cell_shapelet[k];
    const double mass = static_cast<std::size_t>(l) < lr.gamma0.size() ? cells.p[i] : cells.q[i];
    iv.cell_lo = std::max(iv.cell_lo, loc.eps_i[k]);
    iv.hi = std::min(iv.hi, loc.eps_i[k] + mass * static_cast<double>(J[l].size()) / std::abs(w[l]));
  }
  iv.lo = iv.cell_lo;
  for (std::size_t j = 0; j < dict.size(); ++j) {
    if (std::isnan(coh[j])) continue;
    if (coh[j] >= 1.0) iv.coherence_blocked = true;
    else iv.lo = std::max(iv.lo, loc.delta_j[j] / (1.0 - coh[j]));
  }
  return iv;
}

/// Midpoint of the feasible eta_c interval (lower bound + 1 when unbounded
/// above); none when the interval is empty or too thin to evaluate reliably.
inline std::optional<double> choose_eta_c(const Dictionary& dict, const DeltaField& delta, const Composition& comp) {
  const EtaCInterval iv = eta_c_interval(dict, delta, comp);
  if (!iv.nonempty()) return std::nullopt;
  return iv.pick(iv.lo, iv.hi);
}

// ---------------------------------------------------------------------------
// Approximation diagnostics.

struct EpsilonDiagnostics {
  double eps_1plus = 0.0;
  double eps_0minus = 0.0;
  double g = 0.0;          // G(alpha)
  double e_region = 0.0;   // E(R(alpha)) with R(alpha) = {L_alpha >= 1}
  double residual = 0.0;   // G - E - eps_1plus - eps_0minus
  bool beta_outside_01 = true;
  double total() const { return eps_1plus + eps_0minus; }
};

inline EpsilonDiagnostics epsilon_diagnostics(const Dictionary& dict, const DeltaField& delta,
                                              std::span<const double> alpha) {
  require_same_grid(dict.grid, delta.grid, "epsilon_diagnostics");
  const std::vector<double> L = level_function(dict, alpha);
  const double vol = dict.grid.cell_volume();
  EpsilonDiagnostics d;
  for (std::size_t k = 0; k < L.size(); ++k) {
    const double D = delta.delta[k], l = L[k];
    const double dp = std::max(D, 0.0), dm = std::min(D, 0.0);
    d.g += (dp * std::max(l, 0.0) + dm * std::min(l, 1.0)) * vol;
    if (l > 1.0) d.eps_1plus += dp * (l - 1.0) * vol;
    if (l < 0.0) d.eps_0minus += (-dm) * (-l) * vol;
    if (l >= 1.0 - kBetaTol) d.e_region += D * vol;
    if (l > kBetaTol && l < 1.0 - kBetaTol) d.beta_outside_01 = false;
  }
  d.residual = d.g - d.e_region - d.eps_1plus - d.eps_0minus;
  return d;
}

// ---------------------------------------------------------------------------
// key: value reports.

namespace detail {
template <class T>
void write_list(std::ostream& os, const char* key, const std::vector<T>& v) {
  os << key << ":";
  for (const auto& x : v) os << ' ' << x;
  os << '\n';
}
}  // namespace detail

inline void write_certificate(std::ostream& os, const Certificate& c) {
  os.precision(17);
  os << "status: " << to_string(c.status) << '\n';
  os << "feasible: " << (c.feasible ? "true" : "false") << '\n';
  os << "rank_ok: " << (c.rank_ok ? "true" : "false") << '\n';
  os << "eta_c: " << c.eta_c << '\n';
  os << "margin: " << c.margin << '\n';
  detail::write_list(os, "gamma0", c.gamma0);
  detail::write_list(os, "gamma1", c.gamma1);
  detail::write_list(os, "gamma0_minus", c.gamma0_minus);
  detail::write_list(os, "gamma1_plus", c.gamma1_plus);
  detail::write_list(os, "eta", c.eta);
  detail::write_list(os, "l", c.l);
  detail::write_list(os, "u", c.u);
  detail::write_list(os, "e", c.e);
  detail::write_list(os, "c", c.c);
}

inline void write_recovery(std::ostream& os, const RecoveryReport& r) {
  os.precision(17);
  os << "conditions_met: " << (r.conditions_met ? "true" : "false") << '\n';
  os << "eta_c: " << r.eta_c << '\n';
  os << "eta_c_valid: " << (r.eta_c_valid ? "true" : "false") << '\n';
  os << "cell_conditions: " << (r.cell_conditions ? "true" : "false") << '\n';
  os << "coherence_conditions: " << (r.coherence_conditions ? "true" : "false") << '\n';
  detail::write_list(os, "alpha_r", r.linkage.alpha_r);
  detail::write_list(os, "w", r.w);
  detail::write_list(os, "eps_lv", r.loc.eps_lv);
  detail::write_list(os, "eps_i", r.loc.eps_i);
  detail::write_list(os, "cell_margin", r.cell_margin);
  for (std::size_t j = 0; j < r.coh.size(); ++j)
    if (!std::isnan(r.coh[j]))
      os << "shape " << j << ": coh=" << r.coh[j] << " delta=" << r.loc.delta_j[j] << " margin=" << r.coh_margin[j]
         << '\n';
}

}  // namespace shapecomp
