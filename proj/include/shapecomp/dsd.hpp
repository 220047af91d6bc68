#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "shapecomp/error.hpp"
#include "shapecomp/grid.hpp"
#include "shapecomp/imaging.hpp"

namespace shapecomp {

/// Disjoint shape decomposition of n shapes: cells grouped by their
/// membership signature. Shapelets are ordered by their smallest cell.
struct ShapeletDecomposition {
  Grid grid;
  std::size_t n_shapes = 0;
  std::vector<std::vector<cell_index>> shapelets;   // sorted cells per shapelet
  std::vector<std::vector<int>> bearing;            // sorted shape indices with B[i, j] = 1
  std::vector<int> shapelet_of_cell;                // -1 outside every shape
  std::vector<double> p, q;                         // empty when no delta was given
  double uncovered_constant = 0.0;                  // sum over uncovered cells of max(0, b_i)

  std::size_t size() const { return shapelets.size(); }
  bool has_masses() const { return !p.empty(); }

  bool bit(std::size_t i, int j) const {
    return std::binary_search(bearing[i].begin(), bearing[i].end(), j);
  }

  std::vector<std::vector<std::uint8_t>> dense_bearing() const {
    std::vector<std::vector<std::uint8_t>> B(size(), std::vector<std::uint8_t>(n_shapes, 0));
    for (std::size_t i = 0; i < size(); ++i)
      for (int j : bearing[i]) B[i][j] = 1;
    return B;
  }

  /// I_j: shapelets contained in shape j.
  std::vector<std::vector<int>> shapelets_of_shape() const {
    std::vector<std::vector<int>> out(n_shapes);
    for (std::size_t i = 0; i < size(); ++i)
      for (int j : bearing[i]) out[j].push_back(static_cast<int>(i));
    return out;
  }
};

namespace detail {
struct SignatureHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (auto w : v) {
      h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 0xff51afd7ed558ccdULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 33));
  }
};
}  // namespace detail

inline ShapeletDecomposition decompose(std::span<const ShapeMask> shapes, const DeltaField* delta = nullptr) {
  if (shapes.empty()) throw error(error_kind::invalid_argument, "decompose needs at least one shape");
  const Grid& g = shapes.front().grid();
  for (const auto& s : shapes) require_same_grid(g, s.grid(), "decompose");
  if (delta) require_same_grid(g, delta->grid, "decompose");

  const std::size_t n = shapes.size();
  const std::size_t words = (n + 63) / 64;
  const std::size_t cells = static_cast<std::size_t>(g.size());

  // Only covered cells carry a signature.
  std::vector<int> slot(cells, -1);
  std::vector<cell_index> covered;
  for (const auto& s : shapes)
    for (auto k : s.cells())
      if (slot[k] < 0) {
        slot[k] = 0;
        covered.push_back(k);
      }
  std::sort(covered.begin(), covered.end());
  for (std::size_t t = 0; t < covered.size(); ++t) slot[covered[t]] = static_cast<int>(t);
  std::vector<std::uint64_t> sig(covered.size() * words, 0);
  for (std::size_t j = 0; j < n; ++j)
    for (auto k : shapes[j].cells()) sig[slot[k] * words + j / 64] |= (1ULL << (j % 64));

  ShapeletDecomposition d;
  d.grid = g;
  d.n_shapes = n;
  d.shapelet_of_cell.assign(cells, -1);
  std::unordered_map<std::vector<std::uint64_t>, int, detail::SignatureHash> group;
  group.reserve(covered.size());
  for (std::size_t t = 0; t < covered.size(); ++t) {
    std::vector<std::uint64_t> key(sig.begin() + t * words, sig.begin() + (t + 1) * words);
    auto [it, inserted] = group.try_emplace(std::move(key), static_cast<int>(d.shapelets.size()));
    if (inserted) {
      d.shapelets.emplace_back();
      std::vector<int> row;
      for (std::size_t j = 0; j < n; ++j)
        if (sig[t * words + j / 64] & (1ULL << (j % 64))) row.push_back(static_cast<int>(j));
      d.bearing.push_back(std::move(row));
    }
    d.shapelets[it->second].push_back(covered[t]);
    d.shapelet_of_cell[covered[t]] = it->second;
  }

  if (delta) {
    const double vol = g.cell_volume();
    d.p.assign(d.size(), 0.0);
    d.q.assign(d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i)
      for (auto k : d.shapelets[i]) {
        const double v = delta->delta[k];
        if (v > 0) d.p[i] += v * vol;
        if (v < 0) d.q[i] += -v * vol;
      }
    // An uncovered cell has L = 0, so its term is max(0, b_i) with b_i <= 0.
    for (std::size_t k = 0; k < cells; ++k)
      if (d.shapelet_of_cell[k] < 0) d.uncovered_constant += std::max(0.0, std::min(delta->delta[k], 0.0) * vol);
  }
  return d;
}

/// beta = B alpha.
inline std::vector<double> beta_of(const ShapeletDecomposition& d, std::span<const double> alpha) {
  if (alpha.size() != d.n_shapes) throw error(error_kind::dimension_mismatch, "alpha length != decomposed shape count");
  std::vector<double> beta(d.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double s = 0.0;
    for (int j : d.bearing[i]) s += alpha[j];
    beta[i] = s;
  }
  return beta;
}

/// Separable objective over shapelets:
/// sum_i p_i max(beta_i, 0) - q_i min(beta_i, 1), plus the uncovered-cell constant.
inline double beta_objective(const ShapeletDecomposition& d, std::span<const double> beta) {
  if (!d.has_masses()) throw error(error_kind::invalid_argument, "decomposition has no p/q masses");
  if (beta.size() != d.size()) throw error(error_kind::dimension_mismatch, "beta length != shapelet count");
  double s = d.uncovered_constant;
  for (std::size_t i = 0; i < d.size(); ++i) s += d.p[i] * std::max(beta[i], 0.0) - d.q[i] * std::min(beta[i], 1.0);
  return s;
}

inline void write_report(std::ostream& os, const ShapeletDecomposition& d) {
  os << "shapes: " << d.n_shapes << "\n";
  os << "shapelets: " << d.size() << "\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << "shapelet " << i << " cells=" << d.shapelets[i].size() << " row=";
    for (std::size_t j = 0; j < d.n_shapes; ++j) os << (d.bit(i, static_cast<int>(j)) ? '1' : '0');
    if (d.has_masses()) os << " p=" << std::setprecision(17) << d.p[i] << " q=" << d.q[i];
    os << "\n";
  }
}

}  // namespace shapecomp
