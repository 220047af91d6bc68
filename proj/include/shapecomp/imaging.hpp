#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "shapecomp/error.hpp"
#include "shapecomp/grid.hpp"
#include "shapecomp/parallel.hpp"

namespace shapecomp {

/// Multi-channel image on a grid; values are stored cell-major
/// (values[cell * channels + channel]).
struct Image {
  Grid grid;
  int channels = 1;
  std::vector<double> values;

  Image() = default;
  Image(const Grid& g, int ch) : grid(g), channels(ch), values(static_cast<std::size_t>(g.size()) * ch, 0.0) {
    if (ch <= 0) throw error(error_kind::invalid_argument, "channel count must be positive");
  }
  Image(const Grid& g, int ch, std::vector<double> v) : grid(g), channels(ch), values(std::move(v)) {
    if (ch <= 0) throw error(error_kind::invalid_argument, "channel count must be positive");
    if (values.size() != static_cast<std::size_t>(g.size()) * ch)
      throw error(error_kind::dimension_mismatch, "value array length != cells * channels");
    for (double x : values)
      if (!std::isfinite(x)) throw error(error_kind::invalid_argument, "non-finite pixel value");
  }

  std::size_t cells() const { return static_cast<std::size_t>(grid.size()); }
  double at(std::size_t cell, int ch) const { return values[cell * channels + ch]; }
  double& at(std::size_t cell, int ch) { return values[cell * channels + ch]; }
};

/// Per-cell inhomogeneity Pi_in - Pi_ex. Negative values favour the object.
struct DeltaField {
  Grid grid;
  std::vector<double> delta;

  DeltaField() = default;
  DeltaField(const Grid& g, std::vector<double> d) : grid(g), delta(std::move(d)) {
    if (delta.size() != static_cast<std::size_t>(g.size()))
      throw error(error_kind::dimension_mismatch, "delta length != cell count");
    for (double x : delta)
      if (!std::isfinite(x)) throw error(error_kind::invalid_argument, "non-finite delta value");
  }
  std::size_t size() const { return delta.size(); }
};

struct Centroids {
  std::vector<double> u_in;
  std::vector<double> u_out;
};

/// Two-cluster Lloyd iteration. Initial centroids are the full pixel vectors
/// of the cells holding the minimum and maximum value of the channel with the
/// widest range. The smaller cluster is reported as the object (`u_in`);
/// `foreground_is_smaller = false` flips that convention.
/// `seed` is accepted for interface stability; the initialization itself is
/// deterministic.
inline Centroids kmeans2(const Image& image, int max_iters = 100, std::uint64_t seed = 0,
                         bool foreground_is_smaller = true) {
  (void)seed;
  const std::size_t n = image.cells();
  const int ch = image.channels;

  double best_range = -1.0;
  std::size_t lo_cell = 0, hi_cell = 0;
  for (int c = 0; c < ch; ++c) {
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (image.at(i, c) < image.at(lo, c)) lo = i;
      if (image.at(i, c) > image.at(hi, c)) hi = i;
    }
    const double range = image.at(hi, c) - image.at(lo, c);
    if (range > best_range) {
      best_range = range;
      lo_cell = lo;
      hi_cell = hi;
    }
  }
  if (!(best_range > 0.0)) throw error(error_kind::degenerate_input, "k-means on a constant image");

  std::vector<double> cen[2] = {std::vector<double>(ch), std::vector<double>(ch)};
  for (int c = 0; c < ch; ++c) {
    cen[0][c] = image.at(lo_cell, c);
    cen[1][c] = image.at(hi_cell, c);
  }

  std::vector<std::uint8_t> label(n, 0);
  std::size_t count[2] = {0, 0};
  for (int it = 0; it < std::max(1, max_iters); ++it) {
    bool changed = false;
    count[0] = count[1] = 0;
    std::vector<double> sum[2] = {std::vector<double>(ch, 0.0), std::vector<double>(ch, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
      double d0 = 0.0, d1 = 0.0;
      for (int c = 0; c < ch; ++c) {
        const double v = image.at(i, c);
        d0 += (v - cen[0][c]) * (v - cen[0][c]);
        d1 += (v - cen[1][c]) * (v - cen[1][c]);
      }
      const std::uint8_t l = d1 < d0 ? 1 : 0;
      if (it == 0 || l != label[i]) changed = true;
      label[i] = l;
      ++count[l];
      for (int c = 0; c < ch; ++c) sum[l][c] += image.at(i, c);
    }
    for (int k = 0; k < 2; ++k)
      if (count[k] > 0)
        for (int c = 0; c < ch; ++c) cen[k][c] = sum[k][c] / static_cast<double>(count[k]);
    if (!changed) break;
  }

  // Ties in cluster size go to the cluster seeded at the high end.
  int fg = count[1] <= count[0] ? 1 : 0;
  if (!foreground_is_smaller) fg = 1 - fg;
  return Centroids{cen[fg], cen[1 - fg]};
}

/// Chan-Vese inhomogeneity summed over channels:
/// delta = sum_c (u - u_in)^2 - (u - u_out)^2.
inline DeltaField chan_vese_delta(const Image& image, const std::vector<double>& u_in,
                                  const std::vector<double>& u_out) {
  if (static_cast<int>(u_in.size()) != image.channels || static_cast<int>(u_out.size()) != image.channels)
    throw error(error_kind::dimension_mismatch, "centroid length differs from channel count");
  const std::size_t n = image.cells();
  std::vector<double> d(n, 0.0);
  for_each_chunk(n, 8192, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double s = 0.0;
      for (int c = 0; c < image.channels; ++c) {
        const double v = image.at(i, c);
        s += (v - u_in[c]) * (v - u_in[c]) - (v - u_out[c]) * (v - u_out[c]);
      }
      d[i] = s;
    }
  });
  return DeltaField(image.grid, std::move(d));
}

/// Additive white Gaussian noise at the requested SNR (dB), per channel.
/// snr_db = +inf returns the input unchanged. Values are not clipped.
inline Image add_gaussian_noise(const Image& image, double snr_db, std::uint64_t seed) {
  Image out = image;
  if (std::isinf(snr_db) && snr_db > 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = image.cells();
  for (int c = 0; c < image.channels; ++c) {
    double power = 0.0;
    for (std::size_t i = 0; i < n; ++i) power += image.at(i, c) * image.at(i, c);
    power /= static_cast<double>(n);
    const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    for (std::size_t i = 0; i < n; ++i) out.at(i, c) += sigma * normal(rng);
  }
  return out;
}

/// Convenience: k-means centroids followed by the Chan-Vese field.
inline DeltaField delta_from_image(const Image& image, int max_iters = 100, bool foreground_is_smaller = true) {
  const auto cen = kmeans2(image, max_iters, 0, foreground_is_smaller);
  return chan_vese_delta(image, cen.u_in, cen.u_out);
}

}  // namespace shapecomp
