#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "shapecomp/error.hpp"

namespace shapecomp {

using cell_index = std::int32_t;

/// Regular 2D or 3D cell grid, row-major (axis 0 varies slowest).
/// Cell k along an axis has its center at (k + 0.5) * spacing.
class Grid {
 public:
  Grid() = default;

  Grid(std::span<const int> dims, std::span<const double> spacing) {
    if (dims.size() < 2 || dims.size() > 3)
      throw error(error_kind::dimension_mismatch, "grid must have 2 or 3 axes");
    if (spacing.size() != dims.size())
      throw error(error_kind::dimension_mismatch, "spacing/dims length differ");
    rank_ = static_cast<int>(dims.size());
    for (int a = 0; a < rank_; ++a) {
      if (dims[a] <= 0) throw error(error_kind::invalid_argument, "grid dims must be positive");
      if (!(spacing[a] > 0.0)) throw error(error_kind::invalid_argument, "grid spacing must be positive");
      dims_[a] = dims[a];
      spacing_[a] = spacing[a];
    }
  }

  static Grid make_2d(int rows, int cols, double dy = 1.0, double dx = 1.0) {
    const std::array<int, 2> d{rows, cols};
    const std::array<double, 2> s{dy, dx};
    return Grid(d, s);
  }

  static Grid make_3d(int nz, int ny, int nx, double dz = 1.0, double dy = 1.0, double dx = 1.0) {
    const std::array<int, 3> d{nz, ny, nx};
    const std::array<double, 3> s{dz, dy, dx};
    return Grid(d, s);
  }

  int rank() const noexcept { return rank_; }
  int dim(int axis) const noexcept { return dims_[axis]; }
  double spacing(int axis) const noexcept { return spacing_[axis]; }
  std::span<const int> dims() const noexcept { return {dims_.data(), static_cast<std::size_t>(rank_)}; }
  std::span<const double> spacings() const noexcept {
    return {spacing_.data(), static_cast<std::size_t>(rank_)};
  }

  std::int64_t size() const noexcept {
    std::int64_t n = 1;
    for (int a = 0; a < rank_; ++a) n *= dims_[a];
    return n;
  }

  double cell_volume() const noexcept {
    double v = 1.0;
    for (int a = 0; a < rank_; ++a) v *= spacing_[a];
    return v;
  }

  cell_index index(std::span<const int> coord) const {
    if (static_cast<int>(coord.size()) != rank_)
      throw error(error_kind::dimension_mismatch, "coordinate rank differs from grid rank");
    std::int64_t k = 0;
    for (int a = 0; a < rank_; ++a) {
      if (coord[a] < 0 || coord[a] >= dims_[a])
        throw error(error_kind::invalid_argument, "coordinate outside grid");
      k = k * dims_[a] + coord[a];
    }
    return static_cast<cell_index>(k);
  }

  std::array<int, 3> coord(cell_index k) const {
    std::array<int, 3> c{0, 0, 0};
    std::int64_t r = k;
    for (int a = rank_ - 1; a >= 0; --a) {
      c[a] = static_cast<int>(r % dims_[a]);
      r /= dims_[a];
    }
    return c;
  }

  std::array<double, 3> center(cell_index k) const {
    const auto c = coord(k);
    std::array<double, 3> p{0.0, 0.0, 0.0};
    for (int a = 0; a < rank_; ++a) p[a] = (c[a] + 0.5) * spacing_[a];
    return p;
  }

  std::array<double, 3> extent() const noexcept {
    std::array<double, 3> e{0.0, 0.0, 0.0};
    for (int a = 0; a < rank_; ++a) e[a] = dims_[a] * spacing_[a];
    return e;
  }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    if (a.rank_ != b.rank_) return false;
    for (int i = 0; i < a.rank_; ++i)
      if (a.dims_[i] != b.dims_[i] || a.spacing_[i] != b.spacing_[i]) return false;
    return true;
  }

  std::string describe() const {
    std::string s;
    for (int a = 0; a < rank_; ++a) s += (a ? "x" : "") + std::to_string(dims_[a]);
    return s;
  }

 private:
  int rank_ = 2;
  std::array<int, 3> dims_{1, 1, 1};
  std::array<double, 3> spacing_{1.0, 1.0, 1.0};
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (!(a == b)) throw error(error_kind::grid_mismatch, std::string(where) + ": grids differ");
}

/// A set of grid cells, stored as strictly increasing cell indices.
class ShapeMask {
 public:
  ShapeMask() = default;

  /// Canonicalizes (sort + dedup) and validates. Empty input is an error
  /// unless `allow_empty` is set (used for realized compositions).
  ShapeMask(const Grid& grid, std::vector<cell_index> cells, bool allow_empty = false)
      : grid_(grid), cells_(std::move(cells)) {
    std::sort(cells_.begin(), cells_.end());
    cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
    if (cells_.empty() && !allow_empty) throw error(error_kind::empty_mask, "shape mask has no cells");
    if (!cells_.empty() && (cells_.front() < 0 || cells_.back() >= grid_.size()))
      throw error(error_kind::invalid_argument, "cell index outside grid");
  }

  const Grid& grid() const noexcept { return grid_; }
  std::span<const cell_index> cells() const& noexcept { return cells_; }
  std::span<const cell_index> cells() const&& = delete;  // would dangle
  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }
  double volume() const noexcept { return static_cast<double>(cells_.size()) * grid_.cell_volume(); }

  bool contains(cell_index k) const { return std::binary_search(cells_.begin(), cells_.end(), k); }

  std::vector<std::uint8_t> to_bitmap() const {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(grid_.size()), 0);
    for (auto k : cells_) bits[k] = 1;
    return bits;
  }

  friend bool operator==(const ShapeMask& a, const ShapeMask& b) {
    return a.grid_ == b.grid_ && a.cells_ == b.cells_;
  }

 private:
  Grid grid_;
  std::vector<cell_index> cells_;
};

/// Cells whose centers satisfy the rotated ellipsoid inequality <= 1.
/// `angle` rotates within the plane of axes 0 and 1 (about axis 2 in 3D).
inline ShapeMask rasterize_ellipsoid(const Grid& grid, std::span<const double> center,
                                     std::span<const double> semi_axes, double angle = 0.0) {
  const int r = grid.rank();
  if (static_cast<int>(center.size()) != r || static_cast<int>(semi_axes.size()) != r)
    throw error(error_kind::dimension_mismatch, "center/semi_axes rank differs from grid rank");
  const auto ext = grid.extent();
  for (int a = 0; a < r; ++a) {
    if (!(semi_axes[a] > 0.0)) throw error(error_kind::invalid_argument, "semi axes must be positive");
    if (center[a] < 0.0 || center[a] > ext[a])
      throw error(error_kind::invalid_argument, "ellipsoid center outside domain");
  }
  double cs = std::cos(angle), sn = std::sin(angle);
  if (std::abs(cs) < 1e-15) cs = 0.0;
  if (std::abs(sn) < 1e-15) sn = 0.0;

  const double reach = *std::max_element(semi_axes.begin(), semi_axes.end());
  std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < r; ++a) {
    const double h = grid.spacing(a);
    lo[a] = std::max(0, static_cast<int>(std::floor((center[a] - reach) / h - 0.5)));
    hi[a] = std::min(grid.dim(a) - 1, static_cast<int>(std::ceil((center[a] + reach) / h - 0.5)));
  }

  std::vector<cell_index> cells;
  auto test = [&](const std::array<int, 3>& c) {
    std::array<double, 3> d{0.0, 0.0, 0.0};
    for (int a = 0; a < r; ++a) d[a] = (c[a] + 0.5) * grid.spacing(a) - center[a];
    const double u0 = cs * d[0] + sn * d[1];
    const double u1 = -sn * d[0] + cs * d[1];
    double s = (u0 / semi_axes[0]) * (u0 / semi_axes[0]) + (u1 / semi_axes[1]) * (u1 / semi_axes[1]);
    if (r == 3) s += (d[2] / semi_axes[2]) * (d[2] / semi_axes[2]);
    return s <= 1.0;
  };
  std::array<int, 3> c{0, 0, 0};
  if (r == 2) {
    for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0])
      for (c[1] = lo[1]; c[1] <= hi[1]; ++c[1])
        if (test(c)) cells.push_back(static_cast<cell_index>(c[0] * grid.dim(1) + c[1]));
  } else {
    for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0])
      for (c[1] = lo[1]; c[1] <= hi[1]; ++c[1])
        for (c[2] = lo[2]; c[2] <= hi[2]; ++c[2])
          if (test(c))
            cells.push_back(
                static_cast<cell_index>((static_cast<std::int64_t>(c[0]) * grid.dim(1) + c[1]) * grid.dim(2) + c[2]));
  }
  if (cells.empty()) throw error(error_kind::empty_mask, "no cell center inside ellipsoid");
  return ShapeMask(grid, std::move(cells));
}

/// Row-major binary image.
struct Bitmap {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bits;

  Bitmap() = default;
  Bitmap(int r, int c) : rows(r), cols(c), bits(static_cast<std::size_t>(r) * c, 0) {}

  std::uint8_t at(int r, int c) const { return bits[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t& at(int r, int c) { return bits[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
};

/// Places `bitmap` with its top-left corner at `offset` (row, col); parts
/// falling outside the grid are clipped.
inline ShapeMask mask_from_bitmap(const Grid& grid, const Bitmap& bitmap, std::array<int, 2> offset) {
  if (grid.rank() != 2) throw error(error_kind::dimension_mismatch, "bitmap placement needs a 2D grid");
  std::vector<cell_index> cells;
  for (int r = 0; r < bitmap.rows; ++r) {
    const int gr = r + offset[0];
    if (gr < 0 || gr >= grid.dim(0)) continue;
    for (int c = 0; c < bitmap.cols; ++c) {
      const int gc = c + offset[1];
      if (gc < 0 || gc >= grid.dim(1) || !bitmap.at(r, c)) continue;
      cells.push_back(static_cast<cell_index>(gr * grid.dim(1) + gc));
    }
  }
  if (cells.empty()) throw error(error_kind::empty_mask, "bitmap fully clipped");
  return ShapeMask(grid, std::move(cells));
}

}  // namespace shapecomp
