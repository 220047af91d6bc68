#pragma once

#include <array>
#include <string>
#include <vector>

#include "shapecomp/dictionary.hpp"
#include "shapecomp/error.hpp"
#include "shapecomp/grid.hpp"
#include "shapecomp/imaging.hpp"

namespace shapecomp {

namespace detail {
// 5x7 capitals, one string of 7 rows per letter.
inline const std::array<std::array<const char*, 7>, 26>& font5x7() {
  static const std::array<std::array<const char*, 7>, 26> f = {{
      {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},  // A
      {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."},  // B
      {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."},  // C
      {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."},  // D
      {"#####", "#....", "#....", "####.", "#....", "#....", "#####"},  // E
      {"#####", "#....", "#....", "####.", "#....", "#....", "#...."},  // F
      {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"},  // G
      {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},  // H
      {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."},  // I
      {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."},  // J
      {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"},  // K
      {"#....", "#....", "#....", "#....", "#....", "#....", "#####"},  // L
      {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"},  // M
      {"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"},  // N
      {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},  // O
      {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."},  // P
      {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"},  // Q
      {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"},  // R
      {".####", "#....", "#....", ".###.", "....#", "....#", "####."},  // S
      {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."},  // T
      {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},  // U
      {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."},  // V
      {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."},  // W
      {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"},  // X
      {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."},  // Y
      {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"},  // Z
  }};
  return f;
}
}  // namespace detail

/// Built-in A-Z glyphs, each 5x7 pixel scaled by an integer factor.
inline std::vector<Glyph> builtin_glyphs(int scale = 3) {
  if (scale < 1) throw error(error_kind::invalid_argument, "glyph scale must be positive");
  std::vector<Glyph> out;
  const auto& f = detail::font5x7();
  for (int l = 0; l < 26; ++l) {
    Glyph g;
    g.label = static_cast<char>('A' + l);
    g.bitmap.rows = 7 * scale;
    g.bitmap.cols = 5 * scale;
    g.bitmap.bits.assign(static_cast<std::size_t>(g.bitmap.rows) * g.bitmap.cols, 0);
    for (int r = 0; r < g.bitmap.rows; ++r)
      for (int c = 0; c < g.bitmap.cols; ++c)
        g.bitmap.bits[static_cast<std::size_t>(r) * g.bitmap.cols + c] = f[l][r / scale][c / scale] == '#' ? 1 : 0;
    out.push_back(std::move(g));
  }
  return out;
}

inline const Glyph& find_glyph(const std::vector<Glyph>& glyphs, char label) {
  for (const auto& g : glyphs)
    if (g.label == label) return g;
  throw error(error_kind::invalid_argument, std::string("no glyph for '") + label + "'");
}

struct RenderedText {
  Image image;
  std::vector<std::array<int, 2>> anchors;  // per letter: bitmap center (row, col)
};

/// Dark-background image (0) with the word painted at intensity 1, letters
/// left to right starting at (top, left) separated by `gap` pixels.
inline RenderedText render_word(const std::vector<Glyph>& glyphs, const std::string& word, int rows, int cols, int top,
                                int left, int gap) {
  const Grid g = Grid::make_2d(rows, cols);
  RenderedText out{Image(g, 1), {}};
  int x = left;
  for (char ch : word) {
    const Bitmap& bm = find_glyph(glyphs, ch).bitmap;
    if (top < 0 || x < 0 || top + bm.rows > rows || x + bm.cols > cols)
      throw error(error_kind::invalid_argument, "word does not fit in the image");
    for (int r = 0; r < bm.rows; ++r)
      for (int c = 0; c < bm.cols; ++c)
        if (bm.at(r, c)) out.image.values[static_cast<std::size_t>(top + r) * cols + x + c] = 1.0;
    out.anchors.push_back({top + bm.rows / 2, x + bm.cols / 2});
    x += bm.cols + gap;
  }
  return out;
}

/// Binary image (1 inside) of the union of disks given as (row, col, radius)
/// in physical coordinates of a unit-spacing grid.
inline Image disk_scene(int rows, int cols, const std::vector<std::array<double, 3>>& disks) {
  const Grid g = Grid::make_2d(rows, cols);
  Image img(g, 1);
  for (const auto& d : disks) {
    const double c[2] = {d[0], d[1]};
    const double ax[2] = {d[2], d[2]};
    const ShapeMask m = rasterize_ellipsoid(g, c, ax, 0.0);
    for (auto k : m.cells()) img.values[k] = 1.0;
  }
  return img;
}

/// Disks of each radius centered on a lattice x lattice grid of points.
inline Dictionary disk_dictionary(const Grid& grid, const std::vector<double>& radii, int lattice) {
  std::vector<ShapeFamily> fams;
  for (double r : radii) {
    EllipsoidTemplate t;
    t.semi_axes = std::vector<double>(grid.rank(), r);
    fams.push_back({"disk", t, std::vector<int>(grid.rank(), lattice)});
  }
  return build_grid_dictionary(grid, fams).dictionary;
}

}  // namespace shapecomp
