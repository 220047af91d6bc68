#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "shapecomp/dictionary.hpp"
#include "shapecomp/error.hpp"
#include "shapecomp/grid.hpp"
#include "shapecomp/imaging.hpp"
#include "shapecomp/parallel.hpp"
#include "shapecomp/sparse.hpp"

namespace shapecomp {

/// Constrained form (||alpha||_1 <= tau) or regularized form (+ lambda ||alpha||_1).
struct Budget {
  enum class Kind { tau, lambda };
  Kind kind = Kind::tau;
  double value = 0.0;

  static Budget tau(double t) { return {Kind::tau, t}; }
  static Budget lambda(double l) { return {Kind::lambda, l}; }
  bool is_tau() const { return kind == Kind::tau; }
};

/// Discretized CSC data: A (N x n_s) with A[i, j] = delta_i * chi_j(x_i) * vol,
/// b_i = min(delta_i, 0) * vol. Row index equals cell index.
struct ProblemData {
  SparseMatrix A;
  std::vector<double> b;
  Budget budget;
  double cell_volume = 1.0;

  int n_cells() const { return A.rows; }
  int n_shapes() const { return A.cols; }
  double tau() const {
    if (!budget.is_tau()) throw error(error_kind::invalid_argument, "problem is in regularized form");
    return budget.value;
  }
  double lambda() const {
    if (budget.is_tau()) throw error(error_kind::invalid_argument, "problem is in constrained form");
    return budget.value;
  }
};

inline ProblemData assemble(const DeltaField& delta, const Dictionary& dict, Budget budget) {
  require_same_grid(delta.grid, dict.grid, "assemble");
  if (!(budget.value >= 0.0)) throw error(error_kind::invalid_argument, "tau/lambda must be nonnegative");
  const int n = static_cast<int>(delta.size());
  const int ns = static_cast<int>(dict.size());
  const double vol = delta.grid.cell_volume();

  // Column lists -> CSR by counting.
  std::vector<std::int64_t> count(static_cast<std::size_t>(n) + 1, 0);
  for (int j = 0; j < ns; ++j)
    for (auto k : dict.shapes[j].cells())
      if (delta.delta[k] != 0.0) ++count[k + 1];
  for (int i = 0; i < n; ++i) count[i + 1] += count[i];

  ProblemData pd;
  pd.A = SparseMatrix(n, ns);
  pd.A.row_ptr = count;
  pd.A.col.resize(static_cast<std::size_t>(count.back()));
  pd.A.val.resize(static_cast<std::size_t>(count.back()));
  std::vector<std::int64_t> pos(count.begin(), count.end() - 1);
  for (int j = 0; j < ns; ++j)  // j ascending keeps columns sorted per row
    for (auto k : dict.shapes[j].cells()) {
      const double d = delta.delta[k];
      if (d == 0.0) continue;
      const auto p = pos[k]++;
      pd.A.col[p] = j;
      pd.A.val[p] = d * vol;
    }
  pd.b.resize(n);
  for (int i = 0; i < n; ++i) pd.b[i] = std::min(delta.delta[i], 0.0) * vol;
  pd.budget = budget;
  pd.cell_volume = vol;
  return pd;
}

/// Coefficient vector with support extraction at tol = 1e-6 * max(1, ||alpha||_inf).
struct AlphaVector {
  std::vector<double> alpha;

  double support_tol() const {
    double inf = 0.0;
    for (double a : alpha) inf = std::max(inf, std::abs(a));
    return 1e-6 * std::max(1.0, inf);
  }
  std::vector<int> i_plus() const {
    std::vector<int> s;
    const double tol = support_tol();
    for (int j = 0; j < static_cast<int>(alpha.size()); ++j)
      if (alpha[j] > tol) s.push_back(j);
    return s;
  }
  std::vector<int> i_minus() const {
    std::vector<int> s;
    const double tol = support_tol();
    for (int j = 0; j < static_cast<int>(alpha.size()); ++j)
      if (alpha[j] < -tol) s.push_back(j);
    return s;
  }
  double l1() const {
    double s = 0.0;
    for (double a : alpha) s += std::abs(a);
    return s;
  }
};

/// Union of shapes in i_plus minus union of shapes in i_minus (0-based indices).
struct Composition {
  std::vector<int> i_plus;
  std::vector<int> i_minus;

  Composition() = default;
  Composition(std::vector<int> plus, std::vector<int> minus) : i_plus(std::move(plus)), i_minus(std::move(minus)) {
    std::sort(i_plus.begin(), i_plus.end());
    std::sort(i_minus.begin(), i_minus.end());
  }

  std::size_t cardinality() const { return i_plus.size() + i_minus.size(); }
  bool empty() const { return i_plus.empty() && i_minus.empty(); }

  static Composition from_alpha(const AlphaVector& a) { return {a.i_plus(), a.i_minus()}; }

  void validate(std::size_t n_shapes) const {
    for (int j : i_plus)
      if (j < 0 || static_cast<std::size_t>(j) >= n_shapes)
        throw error(error_kind::invalid_argument, "composition index out of range");
    for (int j : i_minus) {
      if (j < 0 || static_cast<std::size_t>(j) >= n_shapes)
        throw error(error_kind::invalid_argument, "composition index out of range");
      if (std::binary_search(i_plus.begin(), i_plus.end(), j))
        throw error(error_kind::invalid_argument, "composition index sets overlap");
    }
  }

  friend bool operator==(const Composition& a, const Composition& b) {
    return a.i_plus == b.i_plus && a.i_minus == b.i_minus;
  }
};

struct ObjectiveValue {
  double value = 0.0;
  std::vector<std::uint8_t> linear_active;  // 1 where a_i^T alpha > b_i
};

/// G~(alpha) = sum_i max(a_i^T alpha, b_i), with a fixed-order reduction.
inline ObjectiveValue objective(const ProblemData& pd, std::span<const double> alpha) {
  if (static_cast<int>(alpha.size()) != pd.n_shapes())
    throw error(error_kind::dimension_mismatch, "alpha length != n_s");
  ObjectiveValue out;
  out.linear_active.assign(pd.n_cells(), 0);
  out.value = ordered_sum(static_cast<std::size_t>(pd.n_cells()), [&](std::size_t i) {
    const double lin = pd.A.row_dot(static_cast<int>(i), alpha);
    if (lin > pd.b[i]) {
      out.linear_active[i] = 1;
      return lin;
    }
    return pd.b[i];
  });
  return out;
}

inline double objective_value(const ProblemData& pd, std::span<const double> alpha) {
  return objective(pd, alpha).value;
}

/// Realized region as a (possibly empty) mask.
inline ShapeMask realize(const Composition& comp, const Dictionary& dict) {
  comp.validate(dict.size());
  std::vector<std::uint8_t> in(static_cast<std::size_t>(dict.grid.size()), 0);
  for (int j : comp.i_plus)
    for (auto k : dict.shapes[j].cells()) in[k] = 1;
  for (int j : comp.i_minus)
    for (auto k : dict.shapes[j].cells()) in[k] = 0;
  std::vector<cell_index> cells;
  for (std::size_t k = 0; k < in.size(); ++k)
    if (in[k]) cells.push_back(static_cast<cell_index>(k));
  return ShapeMask(dict.grid, std::move(cells), /*allow_empty=*/true);
}

/// Sum of delta * vol over sorted cells. All energy evaluations route through
/// here so equal regions give bit-identical energies.
inline double region_energy(std::span<const cell_index> sorted_cells, const DeltaField& delta) {
  const double vol = delta.grid.cell_volume();
  double s = 0.0;
  for (auto k : sorted_cells) s += delta.delta[k] * vol;
  return s;
}

inline double energy(const Composition& comp, const Dictionary& dict, const DeltaField& delta) {
  require_same_grid(dict.grid, delta.grid, "energy");
  const auto region = realize(comp, dict);
  return region_energy(region.cells(), delta);
}

struct BruteForceResult {
  Composition composition;
  double energy = 0.0;
  std::uint64_t evaluated = 0;
};

inline double signed_subset_count(std::size_t n, int s) {
  double total = 0.0, binom = 1.0;
  for (int k = 0; k <= s && static_cast<std::size_t>(k) <= n; ++k) {
    total += binom * std::ldexp(1.0, k);
    binom = binom * static_cast<double>(n - k) / static_cast<double>(k + 1);
  }
  return total;
}

/// Exhaustive minimizer of E over signed subsets with |I+| + |I-| <= s.
/// Ties go to the smaller cardinality, then the lexicographically smaller
/// sorted (index, sign) sequence with '+' before '-'.
inline BruteForceResult brute_force_min(const Dictionary& dict, const DeltaField& delta, int s,
                                        double max_candidates = 1e7) {
  require_same_grid(dict.grid, delta.grid, "brute_force_min");
  if (s < 0) throw error(error_kind::invalid_argument, "cardinality bound must be >= 0");
  const std::size_t ns = dict.size();
  if (signed_subset_count(ns, s) > max_candidates)
    throw error(error_kind::search_too_large, "exhaustive search exceeds candidate budget");

  using Key = std::vector<std::pair<int, int>>;  // (index, 0 for '+', 1 for '-')
  BruteForceResult best;
  best.energy = 0.0;
  Key best_key;
  std::vector<std::uint32_t> stamp(static_cast<std::size_t>(dict.grid.size()), 0);
  std::vector<std::uint8_t> minus_mark(static_cast<std::size_t>(dict.grid.size()), 0);
  std::uint32_t epoch = 0;
  std::vector<cell_index> cells;

  std::vector<int> idx;
  auto visit = [&](const std::vector<int>& combo) {
    const int k = static_cast<int>(combo.size());
    for (std::uint32_t m = 0; m < (1u << k); ++m) {
      ++epoch;
      cells.clear();
      for (int t = 0; t < k; ++t)
        if (!((m >> (k - 1 - t)) & 1u))
          for (auto c : dict.shapes[combo[t]].cells())
            if (stamp[c] != epoch) {
              stamp[c] = epoch;
              cells.push_back(c);
            }
      for (int t = 0; t < k; ++t)
        if ((m >> (k - 1 - t)) & 1u)
          for (auto c : dict.shapes[combo[t]].cells()) minus_mark[c] = 1;
      std::sort(cells.begin(), cells.end());
      std::vector<cell_index> region;
      region.reserve(cells.size());
      for (auto c : cells)
        if (!minus_mark[c]) region.push_back(c);
      for (int t = 0; t < k; ++t)
        if ((m >> (k - 1 - t)) & 1u)
          for (auto c : dict.shapes[combo[t]].cells()) minus_mark[c] = 0;
      const double e = region_energy(region, delta);
      ++best.evaluated;
      Key key;
      for (int t = 0; t < k; ++t) key.emplace_back(combo[t], static_cast<int>((m >> (k - 1 - t)) & 1u));
      const bool better = e < best.energy ||
                          (e == best.energy && (key.size() < best_key.size() ||
                                                (key.size() == best_key.size() && key < best_key)));
      if (best.evaluated == 1 || better) {
        best.energy = e;
        best_key = key;
      }
    }
  };

  for (int k = 0; k <= s && static_cast<std::size_t>(k) <= ns; ++k) {
    idx.resize(k);
    for (int t = 0; t < k; ++t) idx[t] = t;
    while (true) {
      visit(idx);
      int t = k - 1;
      while (t >= 0 && idx[t] == static_cast<int>(ns) - k + t) --t;
      if (t < 0) break;
      ++idx[t];
      for (int u = t + 1; u < k; ++u) idx[u] = idx[u - 1] + 1;
    }
  }
  std::vector<int> plus, minus;
  for (const auto& [j, sg] : best_key) (sg ? minus : plus).push_back(j);
  best.composition = Composition(plus, minus);
  return best;
}

/// Value of L_alpha on every cell: sum_j alpha_j chi_j(x).
inline std::vector<double> level_function(const Dictionary& dict, std::span<const double> alpha) {
  if (alpha.size() != dict.size()) throw error(error_kind::dimension_mismatch, "alpha length != n_s");
  std::vector<double> L(static_cast<std::size_t>(dict.grid.size()), 0.0);
  for (std::size_t j = 0; j < dict.size(); ++j)
    if (alpha[j] != 0.0)
      for (auto k : dict.shapes[j].cells()) L[k] += alpha[j];
  return L;
}

}  // namespace shapecomp
