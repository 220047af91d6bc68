#pragma once

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "shapecomp/analysis.hpp"
#include "shapecomp/composer.hpp"
#include "shapecomp/dictionary.hpp"
#include "shapecomp/error.hpp"
#include "shapecomp/grid.hpp"
#include "shapecomp/imaging.hpp"

namespace shapecomp {

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw error(error_kind::io, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw error(error_kind::io, "cannot open " + path + " for writing");
  return f;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Netpbm header tokens, skipping '#' comments.
class PnmCursor {
 public:
  explicit PnmCursor(const std::string& s) : s_(s) {}
  std::string token() {
    while (pos_ < s_.size()) {
      if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
    const std::size_t b = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (b == pos_) throw error(error_kind::parse, "truncated image header");
    return s_.substr(b, pos_ - b);
  }
  long number() {
    const std::string t = token();
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (*end != '\0' || v < 0) throw error(error_kind::parse, "bad number in image: " + t);
    return v;
  }
  std::size_t pos() const { return pos_; }
  void skip_one() { ++pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// PGM (P2/P5) or PPM (P3/P6), maxval up to 65535, values scaled to [0, 1].
inline Image read_pnm(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::PnmCursor cur(data);
  const std::string magic = cur.token();
  int channels;
  bool binary;
  if (magic == "P2") channels = 1, binary = false;
  else if (magic == "P5") channels = 1, binary = true;
  else if (magic == "P3") channels = 3, binary = false;
  else if (magic == "P6") channels = 3, binary = true;
  else throw error(error_kind::parse, "unsupported image type " + magic + " in " + path);
  const long cols = cur.number(), rows = cur.number(), maxval = cur.number();
  if (cols <= 0 || rows <= 0) throw error(error_kind::parse, "empty image " + path);
  if (maxval <= 0 || maxval > 65535) throw error(error_kind::parse, "maxval out of range in " + path);
  const std::size_t n = static_cast<std::size_t>(rows) * cols * channels;
  std::vector<double> v(n);
  if (binary) {
    cur.skip_one();
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    if (data.size() < cur.pos() + n * bytes) throw error(error_kind::parse, "truncated image data in " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + cur.pos());
    for (std::size_t k = 0; k < n; ++k) {
      const unsigned s = bytes == 1 ? p[k] : (static_cast<unsigned>(p[2 * k]) << 8) | p[2 * k + 1];
      v[k] = static_cast<double>(std::min<long>(s, maxval)) / static_cast<double>(maxval);
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) v[k] = static_cast<double>(std::min(cur.number(), maxval)) / static_cast<double>(maxval);
  }
  return Image(Grid::make_2d(static_cast<int>(rows), static_cast<int>(cols)), channels, std::move(v));
}

/// Writes values in [0, 1] as binary PGM (one channel) or PPM (three channels), maxval 255.
inline void write_pnm(const std::string& path, const Image& img) {
  if (img.grid.rank() != 2) throw error(error_kind::dimension_mismatch, "images are 2D");
  if (img.channels != 1 && img.channels != 3) throw error(error_kind::invalid_argument, "PNM needs 1 or 3 channels");
  auto f = detail::open_out(path, true);
  f << (img.channels == 1 ? "P5" : "P6") << '\n' << img.grid.dim(1) << ' ' << img.grid.dim(0) << "\n255\n";
  std::string bytes(img.values.size(), '\0');
  for (std::size_t k = 0; k < img.values.size(); ++k)
    bytes[k] = static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(img.values[k], 0.0, 1.0) * 255.0)));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw error(error_kind::io, "write failed for " + path);
}

inline void write_mask_pgm(const std::string& path, const Grid& grid, const std::vector<std::uint8_t>& on) {
  Image img(grid, 1);
  for (std::size_t k = 0; k < on.size(); ++k) img.values[k] = on[k] ? 1.0 : 0.0;
  write_pnm(path, img);
}

/// Grayscale copy of the image with the boundary of `on` painted red.
inline Image overlay_boundary(const Image& img, const std::vector<std::uint8_t>& on) {
  if (img.grid.rank() != 2) throw error(error_kind::dimension_mismatch, "overlay needs a 2D image");
  const int R = img.grid.dim(0), C = img.grid.dim(1);
  Image out(img.grid, 3);
  for (std::size_t k = 0; k < img.cells(); ++k) {
    double g = 0.0;
    for (int c = 0; c < img.channels; ++c) g += img.at(k, c);
    g /= img.channels;
    for (int c = 0; c < 3; ++c) out.at(k, c) = g;
  }
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * C + c;
      if (!on[k]) continue;
      const bool edge = r == 0 || c == 0 || r == R - 1 || c == C - 1 || !on[k - C] || !on[k + C] || !on[k - 1] || !on[k + 1];
      if (edge) {
        out.at(k, 0) = 1.0;
        out.at(k, 1) = 0.0;
        out.at(k, 2) = 0.0;
      }
    }
  return out;
}

/// Raw little-endian float32 volume after a one-line header "D0 D1 D2 S0 S1 S2"
/// (axis 0 slowest).
inline Image read_raw_volume(const std::string& path) {
  const std::string data = detail::read_file(path);
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw error(error_kind::parse, "missing volume header in " + path);
  std::istringstream hs(data.substr(0, nl));
  int d[3];
  double s[3];
  if (!(hs >> d[0] >> d[1] >> d[2] >> s[0] >> s[1] >> s[2])) throw error(error_kind::parse, "bad volume header in " + path);
  const Grid g = Grid::make_3d(d[0], d[1], d[2], s[0], s[1], s[2]);
  const std::size_t n = static_cast<std::size_t>(g.size());
  if (data.size() - nl - 1 != n * 4) throw error(error_kind::parse, "volume payload size mismatch in " + path);
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint32_t u;
    std::memcpy(&u, data.data() + nl + 1 + 4 * k, 4);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    float f;
    std::memcpy(&f, &u, 4);
    v[k] = f;
  }
  return Image(g, 1, std::move(v));
}

inline void write_raw_volume(const std::string& path, const Image& img) {
  if (img.grid.rank() != 3 || img.channels != 1) throw error(error_kind::invalid_argument, "raw volumes are 3D, one channel");
  auto f = detail::open_out(path, true);
  f << img.grid.dim(0) << ' ' << img.grid.dim(1) << ' ' << img.grid.dim(2) << ' ' << detail::fmt(img.grid.spacing(0))
    << ' ' << detail::fmt(img.grid.spacing(1)) << ' ' << detail::fmt(img.grid.spacing(2)) << '\n';
  for (double x : img.values) {
    const float fl = static_cast<float>(x);
    std::uint32_t u;
    std::memcpy(&u, &fl, 4);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    f.write(reinterpret_cast<const char*>(&u), 4);
  }
  if (!f) throw error(error_kind::io, "write failed for " + path);
}

/// Dispatch on extension: .raw volumes, anything else Netpbm.
inline Image read_image(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".raw") return read_raw_volume(path);
  return read_pnm(path);
}

/// Glyph bitmaps from <dir>/<letter>.pgm for every capital letter present;
/// pixels >= 0.5 are ink (bright glyphs on a dark ground, like render_word).
inline std::vector<Glyph> load_glyph_dir(const std::string& dir) {
  std::vector<Glyph> out;
  for (char l = 'A'; l <= 'Z'; ++l) {
    const std::string path = dir + "/" + l + ".pgm";
    if (!std::ifstream(path)) continue;
    const Image img = read_pnm(path);
    Glyph g;
    g.label = l;
    g.bitmap = Bitmap(img.grid.dim(0), img.grid.dim(1));
    for (std::size_t k = 0; k < img.cells(); ++k) {
      double v = 0.0;
      for (int c = 0; c < img.channels; ++c) v += img.at(k, c);
      g.bitmap.bits[k] = v / img.channels >= 0.5 ? 1 : 0;
    }
    if (g.bitmap.count() == 0) throw error(error_kind::parse, path + " has no ink");
    out.push_back(std::move(g));
  }
  if (out.empty()) throw error(error_kind::io, "no glyph files (A.pgm ... Z.pgm) in " + dir);
  return out;
}

// ---------------------------------------------------------------------------
// Text formats.

namespace detail {
inline void write_grid(std::ostream& os, const Grid& g) {
  os << g.rank();
  for (int d : g.dims()) os << ' ' << d;
  for (double s : g.spacings()) os << ' ' << fmt(s);
}

inline Grid read_grid(std::istream& is) {
  int rank = 0;
  if (!(is >> rank) || (rank != 2 && rank != 3)) throw error(error_kind::parse, "bad grid rank");
  std::vector<int> dims(rank);
  std::vector<double> sp(rank);
  for (auto& d : dims)
    if (!(is >> d)) throw error(error_kind::parse, "bad grid dims");
  for (auto& s : sp)
    if (!(is >> s)) throw error(error_kind::parse, "bad grid spacing");
  return Grid(dims, sp);
}
}  // namespace detail

/// DELTA1 rank dims... spacings... then one value per cell.
inline void write_delta(const std::string& path, const DeltaField& d) {
  auto f = detail::open_out(path);
  f << "DELTA1 ";
  detail::write_grid(f, d.grid);
  f << '\n';
  for (double v : d.delta) f << detail::fmt(v) << '\n';
  if (!f) throw error(error_kind::io, "write failed for " + path);
}

inline DeltaField read_delta(const std::string& path) {
  std::istringstream is(detail::read_file(path));
  std::string tag;
  if (!(is >> tag) || tag != "DELTA1") throw error(error_kind::parse, path + " is not a DELTA1 file");
  const Grid g = detail::read_grid(is);
  std::vector<double> v(static_cast<std::size_t>(g.size()));
  for (auto& x : v)
    if (!(is >> x)) throw error(error_kind::parse, "too few delta values in " + path);
  std::string extra;
  if (is >> extra) throw error(error_kind::parse, "trailing data in " + path);
  return DeltaField(g, std::move(v));
}

/// DICT1 n_s rank dims... spacings..., then per shape:
/// family n_pose pose... n_runs (start length)...
inline void write_dictionary(std::ostream& os, const Dictionary& dict) {
  os << "DICT1 " << dict.size() << ' ';
  detail::write_grid(os, dict.grid);
  os << '\n';
  for (std::size_t j = 0; j < dict.size(); ++j) {
    const auto& m = dict.meta[j];
    if (m.family.empty() || std::any_of(m.family.begin(), m.family.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }))
      throw error(error_kind::invalid_argument, "family tags must be nonempty without whitespace");
    os << m.family << ' ' << m.pose.size();
    for (double p : m.pose) os << ' ' << detail::fmt(p);
    std::vector<std::pair<cell_index, cell_index>> runs;
    for (auto k : dict.shapes[j].cells()) {
      if (!runs.empty() && runs.back().first + runs.back().second == k) ++runs.back().second;
      else runs.emplace_back(k, 1);
    }
    os << ' ' << runs.size();
    for (auto [s, l] : runs) os << ' ' << s << ' ' << l;
    os << '\n';
  }
}

inline Dictionary read_dictionary(std::istream& is) {
  std::string tag;
  std::size_t ns = 0;
  if (!(is >> tag) || tag != "DICT1" || !(is >> ns)) throw error(error_kind::parse, "not a DICT1 dictionary");
  Dictionary dict(detail::read_grid(is));
  const cell_index total = static_cast<cell_index>(dict.grid.size());
  for (std::size_t j = 0; j < ns; ++j) {
    ShapeMeta m;
    std::size_t np = 0, nr = 0;
    if (!(is >> m.family >> np)) throw error(error_kind::parse, "truncated dictionary entry");
    m.pose.resize(np);
    for (auto& p : m.pose)
      if (!(is >> p)) throw error(error_kind::parse, "truncated pose");
    if (!(is >> nr)) throw error(error_kind::parse, "truncated run count");
    std::vector<cell_index> cells;
    for (std::size_t r = 0; r < nr; ++r) {
      long long s = 0, l = 0;
      if (!(is >> s >> l) || s < 0 || l <= 0 || s + l > total) throw error(error_kind::parse, "bad run in dictionary");
      for (long long k = s; k < s + l; ++k) cells.push_back(static_cast<cell_index>(k));
    }
    dict.add(ShapeMask(dict.grid, std::move(cells)), std::move(m));
  }
  std::string extra;
  if (is >> extra) throw error(error_kind::parse, "trailing data after dictionary");
  return dict;
}

inline void save_dictionary(const std::string& path, const Dictionary& dict) {
  auto f = detail::open_out(path);
  write_dictionary(f, dict);
  if (!f) throw error(error_kind::io, "write failed for " + path);
}

inline Dictionary load_dictionary(const std::string& path) {
  std::istringstream is(detail::read_file(path));
  return read_dictionary(is);
}

inline void write_alpha_csv(std::ostream& os, std::span<const double> alpha) {
  os << "index,value\n";
  for (std::size_t j = 0; j < alpha.size(); ++j) os << j << ',' << detail::fmt(alpha[j]) << '\n';
}

inline void save_alpha_csv(const std::string& path, std::span<const double> alpha) {
  auto f = detail::open_out(path);
  write_alpha_csv(f, alpha);
  if (!f) throw error(error_kind::io, "write failed for " + path);
}

inline std::vector<double> load_alpha_csv(const std::string& path) {
  std::istringstream is(detail::read_file(path));
  std::string line;
  std::vector<std::pair<long, double>> rows;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && line == "index,value") {
      first = false;
      continue;
    }
    first = false;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw error(error_kind::parse, "bad alpha row: " + line);
    char* end = nullptr;
    const long idx = std::strtol(line.c_str(), &end, 10);
    if (end != line.c_str() + comma || idx < 0) throw error(error_kind::parse, "bad alpha index: " + line);
    const std::string vs = line.substr(comma + 1);
    const double v = std::strtod(vs.c_str(), &end);
    if (*end != '\0') throw error(error_kind::parse, "bad alpha value: " + line);
    rows.emplace_back(idx, v);
  }
  std::vector<double> alpha(rows.size(), 0.0);
  std::vector<char> seen(rows.size(), 0);
  for (auto [i, v] : rows) {
    if (static_cast<std::size_t>(i) >= rows.size() || seen[i]) throw error(error_kind::parse, "alpha indices must be 0..n-1 once each");
    seen[i] = 1;
    alpha[i] = v;
  }
  return alpha;
}

/// Two lines: comma-separated I+ then comma-separated I- (either may be empty).
inline void save_composition(const std::string& path, const Composition& c) {
  auto f = detail::open_out(path);
  auto line = [&](const std::vector<int>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) f << (k ? "," : "") << v[k];
    f << '\n';
  };
  line(c.i_plus);
  line(c.i_minus);
  if (!f) throw error(error_kind::io, "write failed for " + path);
}

inline std::vector<int> parse_index_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }), tok.end());
    if (tok.empty()) continue;
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (*end != '\0' || v < 0) throw error(error_kind::parse, "bad index: " + tok);
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline Composition load_composition(const std::string& path) {
  std::istringstream is(detail::read_file(path));
  std::string a, b;
  std::getline(is, a);
  std::getline(is, b);
  return Composition(parse_index_list(a), parse_index_list(b));
}

// ---------------------------------------------------------------------------
// JSON reports.

namespace detail {
inline nlohmann::json finite_or_null(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
  return a;
}
}  // namespace detail

inline nlohmann::json to_json(const Certificate& c) {
  return {{"status", to_string(c.status)},
          {"feasible", c.feasible},
          {"rank_ok", c.rank_ok},
          {"eta_c", c.eta_c},
          {"margin", c.margin},
          {"gamma0", c.gamma0},
          {"gamma1", c.gamma1},
          {"gamma0_minus", c.gamma0_minus},
          {"gamma1_plus", c.gamma1_plus},
          {"eta", c.eta},
          {"l", c.l},
          {"u", c.u},
          {"e", c.e},
          {"c", c.c}};
}

inline nlohmann::json to_json(const RecoveryReport& r) {
  return {{"conditions_met", r.conditions_met},
          {"eta_c", r.eta_c},
          {"eta_c_valid", r.eta_c_valid},
          {"cell_conditions", r.cell_conditions},
          {"coherence_conditions", r.coherence_conditions},
          {"alpha_r", r.linkage.alpha_r},
          {"shapes", r.linkage.shapes},
          {"w", r.w},
          {"e", r.loc.e},
          {"eps_lv", r.loc.eps_lv},
          {"eps_i", r.loc.eps_i},
          {"cell_margin", r.cell_margin},
          {"coherence", detail::finite_or_null(r.coh)},
          {"delta_j", detail::finite_or_null(r.loc.delta_j)},
          {"coherence_margin", detail::finite_or_null(r.coh_margin)}};
}

inline void save_json(const std::string& path, const nlohmann::json& j) {
  auto f = detail::open_out(path);
  f << j.dump(2) << '\n';
  if (!f) throw error(error_kind::io, "write failed for " + path);
}

}  // namespace shapecomp
