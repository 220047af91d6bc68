#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "shapecomp/error.hpp"
#include "shapecomp/grid.hpp"
#include "shapecomp/imaging.hpp"
#include "shapecomp/parallel.hpp"

namespace shapecomp {

/// Origin of one dictionary element: a family tag plus its pose
/// (lattice center for parametric shapes; row, col, angle for glyphs).
struct ShapeMeta {
  std::string family;
  std::vector<double> pose;
};

/// Ordered shape collection; position j is the canonical column index used
/// by every downstream matrix.
struct Dictionary {
  Grid grid;
  std::vector<ShapeMask> shapes;
  std::vector<ShapeMeta> meta;

  Dictionary() = default;
  explicit Dictionary(const Grid& g) : grid(g) {}

  std::size_t size() const { return shapes.size(); }

  void add(ShapeMask mask, ShapeMeta m) {
    require_same_grid(grid, mask.grid(), "Dictionary::add");
    if (mask.empty()) throw error(error_kind::empty_mask, "dictionary elements must be nonempty");
    shapes.push_back(std::move(mask));
    meta.push_back(std::move(m));
  }
};

struct EllipsoidTemplate {
  std::vector<double> semi_axes;
  double angle = 0.0;
};

struct BitmapTemplate {
  Bitmap bitmap;
};

/// One family: a template placed at every point of a regular lattice that
/// spans the domain (points at (k + 0.5) * extent / count per axis).
struct ShapeFamily {
  std::string tag;
  std::variant<EllipsoidTemplate, BitmapTemplate> shape;
  std::vector<int> lattice;
};

struct GridDictionaryResult {
  Dictionary dictionary;
  std::size_t attempted = 0;
  std::size_t dropped = 0;
};

inline GridDictionaryResult build_grid_dictionary(const Grid& grid, const std::vector<ShapeFamily>& families) {
  GridDictionaryResult out{Dictionary(grid), 0, 0};
  const int r = grid.rank();
  const auto ext = grid.extent();
  for (const auto& fam : families) {
    if (static_cast<int>(fam.lattice.size()) != r)
      throw error(error_kind::dimension_mismatch, "lattice rank differs from grid rank");
    std::size_t points = 1;
    for (int n : fam.lattice) {
      if (n < 1) throw error(error_kind::invalid_argument, "lattice needs at least one point per axis");
      points *= static_cast<std::size_t>(n);
    }
    for (std::size_t p = 0; p < points; ++p) {
      std::vector<double> center(r);
      std::size_t rem = p;
      for (int a = r - 1; a >= 0; --a) {
        const int k = static_cast<int>(rem % fam.lattice[a]);
        rem /= fam.lattice[a];
        center[a] = (k + 0.5) * ext[a] / fam.lattice[a];
      }
      ++out.attempted;
      try {
        if (const auto* e = std::get_if<EllipsoidTemplate>(&fam.shape)) {
          auto mask = rasterize_ellipsoid(grid, center, e->semi_axes, e->angle);
          out.dictionary.add(std::move(mask), ShapeMeta{fam.tag, center});
        } else {
          const auto& bm = std::get<BitmapTemplate>(fam.shape).bitmap;
          const int row0 = static_cast<int>(std::floor(center[0] / grid.spacing(0))) - bm.rows / 2;
          const int col0 = static_cast<int>(std::floor(center[1] / grid.spacing(1))) - bm.cols / 2;
          auto mask = mask_from_bitmap(grid, bm, {row0, col0});
          out.dictionary.add(std::move(mask), ShapeMeta{fam.tag, center});
        }
      } catch (const error& e) {
        if (e.kind() != error_kind::empty_mask) throw;
        ++out.dropped;
      }
    }
  }
  if (out.dictionary.size() == 0) throw error(error_kind::empty_dictionary, "no shape survived placement");
  return out;
}

/// Relative cell offsets of a template with respect to its anchor cell.
struct Stencil {
  int rank = 2;
  std::vector<std::array<int, 3>> offsets;
};

/// Anchor = per-axis floor of the bounding-box midpoint of the mask.
inline Stencil stencil_of(const ShapeMask& mask) {
  const Grid& g = mask.grid();
  std::array<int, 3> lo{1 << 30, 1 << 30, 1 << 30}, hi{-1, -1, -1};
  for (auto k : mask.cells()) {
    const auto c = g.coord(k);
    for (int a = 0; a < g.rank(); ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  std::array<int, 3> anchor{0, 0, 0};
  for (int a = 0; a < g.rank(); ++a) anchor[a] = (lo[a] + hi[a]) / 2;
  Stencil s{g.rank(), {}};
  for (auto k : mask.cells()) {
    const auto c = g.coord(k);
    std::array<int, 3> d{0, 0, 0};
    for (int a = 0; a < g.rank(); ++a) d[a] = c[a] - anchor[a];
    s.offsets.push_back(d);
  }
  return s;
}

/// Anchor = (rows / 2, cols / 2) of the bitmap.
inline Stencil stencil_of(const Bitmap& bm) {
  Stencil s{2, {}};
  for (int r = 0; r < bm.rows; ++r)
    for (int c = 0; c < bm.cols; ++c)
      if (bm.at(r, c)) s.offsets.push_back({r - bm.rows / 2, c - bm.cols / 2, 0});
  return s;
}

/// Cross-correlation of -delta with the stencil: out[c] = sum of -delta over
/// the stencil anchored at c (cells outside the grid contribute zero). This
/// is -E(S) for the translate of S anchored at c, up to the cell volume.
inline std::vector<double> correlation_field(const DeltaField& delta, const Stencil& st) {
  const Grid& g = delta.grid;
  if (st.rank != g.rank()) throw error(error_kind::dimension_mismatch, "stencil rank differs from grid rank");
  const std::size_t n = delta.size();
  std::vector<double> out(n, 0.0);
  for_each_chunk(n, 1024, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const auto c = g.coord(static_cast<cell_index>(k));
      double s = 0.0;
      for (const auto& d : st.offsets) {
        std::int64_t idx = 0;
        bool inside = true;
        for (int a = 0; a < g.rank(); ++a) {
          const int p = c[a] + d[a];
          if (p < 0 || p >= g.dim(a)) {
            inside = false;
            break;
          }
          idx = idx * g.dim(a) + p;
        }
        if (inside) s -= delta.delta[static_cast<std::size_t>(idx)];
      }
      out[k] = s;
    }
  });
  return out;
}

inline std::vector<double> correlation_field(const DeltaField& delta, const ShapeMask& tmpl) {
  require_same_grid(delta.grid, tmpl.grid(), "correlation_field");
  return correlation_field(delta, stencil_of(tmpl));
}

/// Min-max normalization followed by r(z) = 0.5 + atan((z - 0.5) / eps_r) / pi.
inline std::vector<double> smooth_round(const std::vector<double>& field, double eps_r) {
  if (!(eps_r > 0.0)) throw error(error_kind::invalid_argument, "eps_r must be positive");
  if (field.empty()) throw error(error_kind::constant_field, "empty field");
  const auto [mn, mx] = std::minmax_element(field.begin(), field.end());
  const double lo = *mn, range = *mx - *mn;
  if (!(range > 0.0)) throw error(error_kind::constant_field, "smooth_round of a constant field");
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double z = (field[i] - lo) / range;
    out[i] = 0.5 + std::atan((z - 0.5) / eps_r) / std::numbers::pi;
  }
  return out;
}

/// Categorical placement density over grid cells.
struct PlacementPdf {
  Grid grid;
  std::vector<double> weights;
};

/// weights proportional to (field - min + offset), offset = 1e-6 * range,
/// so every cell keeps a strictly positive probability.
inline PlacementPdf make_placement_pdf(const Grid& grid, const std::vector<double>& field) {
  if (field.size() != static_cast<std::size_t>(grid.size()))
    throw error(error_kind::dimension_mismatch, "field length != cell count");
  const auto [mn, mx] = std::minmax_element(field.begin(), field.end());
  const double range = *mx - *mn;
  const double offset = range > 0.0 ? 1e-6 * range : 1.0;
  std::vector<double> w(field.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = field[i] - *mn + offset;
    total += w[i];
  }
  for (auto& x : w) x /= total;
  return PlacementPdf{grid, std::move(w)};
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// I.i.d. draws by inverse CDF; identical seeds give identical sequences.
inline std::vector<cell_index> sample_centroids(const PlacementPdf& pdf, int count, std::uint64_t seed) {
  if (count < 1) throw error(error_kind::invalid_argument, "sample count must be >= 1");
  std::vector<double> cdf(pdf.weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    if (pdf.weights[i] < 0.0) throw error(error_kind::invalid_argument, "negative pdf weight");
    acc += pdf.weights[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw error(error_kind::invalid_argument, "pdf has no mass");
  std::mt19937_64 rng(seed);
  std::vector<cell_index> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    const double u = unit_draw(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t k = it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
    while (pdf.weights[k] == 0.0 && k + 1 < cdf.size()) ++k;
    out.push_back(static_cast<cell_index>(k));
  }
  return out;
}

/// Population excess kurtosis m4 / m2^2 - 3.
inline double excess_kurtosis(const std::vector<double>& field) {
  if (field.empty()) throw error(error_kind::degenerate_input, "empty field");
  const double n = static_cast<double>(field.size());
  double mean = 0.0;
  for (double x : field) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : field) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw error(error_kind::degenerate_input, "kurtosis of a zero-variance field");
  return m4 / (m2 * m2) - 3.0;
}

/// Nearest-neighbour rotation of a binary bitmap about its center. The
/// output is sized to the rotated bounding box.
inline Bitmap rotate_bitmap(const Bitmap& src, double degrees) {
  if (degrees == 0.0) return src;
  const double th = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double cy = (src.rows - 1) / 2.0, cx = (src.cols - 1) / 2.0;
  const double h = std::abs(src.rows * cs) + std::abs(src.cols * sn);
  const double w = std::abs(src.rows * sn) + std::abs(src.cols * cs);
  const int rows = static_cast<int>(std::ceil(h - 1e-9)), cols = static_cast<int>(std::ceil(w - 1e-9));
  Bitmap out(rows, cols);
  const double oy = (rows - 1) / 2.0, ox = (cols - 1) / 2.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double y = r - oy, x = c - ox;
      const double sy = cs * y - sn * x + cy;
      const double sx = sn * y + cs * x + cx;
      const int iy = static_cast<int>(std::lround(sy)), ix = static_cast<int>(std::lround(sx));
      if (iy >= 0 && iy < src.rows && ix >= 0 && ix < src.cols) out.at(r, c) = src.at(iy, ix);
    }
  return out;
}

struct Glyph {
  char label = '?';
  Bitmap bitmap;
};

struct GlyphDictionaryOptions {
  int samples = 50;                        // centroids per (glyph, rotation)
  int boosted_count = 10;                  // glyphs with the most peaked correlation get 2x samples
  double eps_r = 0.01;                     // "small": sharpens the pdf onto correlation peaks
  std::vector<double> angles{-15.0, 0.0, 15.0};
  std::map<char, int> samples_override;    // per-label sample count (dictionary refinement)
  std::uint64_t seed = 1;
};

struct GlyphDictionaryReport {
  std::vector<double> kurtosis;            // per glyph, 0-degree correlation field
  std::vector<int> samples_used;           // per glyph, applied to every rotation
};

/// Correlation-sampled glyph dictionary: for every glyph and rotation,
/// correlation_field -> smooth_round -> pdf -> sample_centroids, and place
/// the rotated glyph at each distinct sampled cell. Meta pose is
/// (anchor row, anchor col, angle in degrees); family is "glyph:<label>".
inline Dictionary build_glyph_dictionary(const DeltaField& delta, const std::vector<Glyph>& glyphs,
                                         const GlyphDictionaryOptions& opt,
                                         GlyphDictionaryReport* report = nullptr) {
  const Grid& g = delta.grid;
  if (g.rank() != 2) throw error(error_kind::dimension_mismatch, "glyph dictionaries need a 2D grid");
  if (glyphs.empty()) throw error(error_kind::empty_dictionary, "no glyphs supplied");

  std::vector<double> kurt(glyphs.size());
  for (std::size_t gi = 0; gi < glyphs.size(); ++gi) {
    const auto field = correlation_field(delta, stencil_of(glyphs[gi].bitmap));
    try {
      kurt[gi] = excess_kurtosis(field);
    } catch (const error&) {
      kurt[gi] = 0.0;
    }
  }
  std::vector<std::size_t> order(glyphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return kurt[a] > kurt[b]; });
  std::vector<int> samples(glyphs.size(), opt.samples);
  for (int k = 0; k < opt.boosted_count && k < static_cast<int>(order.size()); ++k) samples[order[k]] = 2 * opt.samples;
  for (std::size_t gi = 0; gi < glyphs.size(); ++gi) {
    auto it = opt.samples_override.find(glyphs[gi].label);
    if (it != opt.samples_override.end()) samples[gi] = it->second;
  }

  Dictionary dict(g);
  std::uint64_t stream = 0;
  for (std::size_t gi = 0; gi < glyphs.size(); ++gi) {
    for (double ang : opt.angles) {
      ++stream;
      if (samples[gi] <= 0) continue;
      const Bitmap bm = rotate_bitmap(glyphs[gi].bitmap, ang);
      const Stencil st = stencil_of(bm);
      const auto field = correlation_field(delta, st);
      std::vector<double> rounded;
      try {
        rounded = smooth_round(field, opt.eps_r);
      } catch (const error&) {
        rounded.assign(field.size(), 0.5);
      }
      const auto pdf = make_placement_pdf(g, rounded);
      auto centers = sample_centroids(pdf, samples[gi], opt.seed * 1000003ULL + stream);
      std::sort(centers.begin(), centers.end());
      centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
      for (auto k : centers) {
        const auto c = g.coord(k);
        try {
          auto mask = mask_from_bitmap(g, bm, {c[0] - bm.rows / 2, c[1] - bm.cols / 2});
          dict.add(std::move(mask), ShapeMeta{std::string("glyph:") + glyphs[gi].label,
                                              {static_cast<double>(c[0]), static_cast<double>(c[1]), ang}});
        } catch (const error& e) {
          if (e.kind() != error_kind::empty_mask) throw;
        }
      }
    }
  }
  if (report) {
    report->kurtosis = kurt;
    report->samples_used = samples;
  }
  if (dict.size() == 0) throw error(error_kind::empty_dictionary, "glyph dictionary is empty");
  return dict;
}

/// Label of a glyph dictionary element ('?' for other families).
inline char glyph_label(const ShapeMeta& m) {
  const std::string prefix = "glyph:";
  if (m.family.size() == prefix.size() + 1 && m.family.compare(0, prefix.size(), prefix) == 0)
    return m.family.back();
  return '?';
}

/// Labels of glyph elements with alpha above `threshold`, left to right by
/// anchor column.
inline std::string read_glyph_word(const Dictionary& dict, std::span<const double> alpha, double threshold = 0.5) {
  if (alpha.size() != dict.size()) throw error(error_kind::dimension_mismatch, "alpha length != n_s");
  std::vector<std::pair<double, char>> hits;
  for (std::size_t j = 0; j < dict.size(); ++j) {
    const char l = glyph_label(dict.meta[j]);
    if (alpha[j] > threshold && l != '?') hits.emplace_back(dict.meta[j].pose[1], l);
  }
  std::sort(hits.begin(), hits.end());
  std::string word;
  for (const auto& h : hits) word += h.second;
  return word;
}

}  // namespace shapecomp
