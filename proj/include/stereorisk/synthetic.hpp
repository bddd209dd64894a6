#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "stereorisk/costvol.hpp"
#include "stereorisk/errors.hpp"
#include "stereorisk/image.hpp"

namespace stereorisk {

struct StereoPair {
  GrayImage left;
  GrayImage right;
  DisparityMap ground_truth;
};

namespace detail {

// Horizontal + vertical box blur, radius 2, run twice: cheap band limiting
// so the pattern stays matchable after downsampling.
inline void box_blur(std::vector<double>& px, int w, int h) {
  constexpr int rad = 2;
  std::vector<double> tmp(px.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double sum = 0.0;
        for (int dc = -rad; dc <= rad; ++dc) {
          sum += px[static_cast<std::size_t>(r) * w +
                    std::clamp(c + dc, 0, w - 1)];
        }
        tmp[static_cast<std::size_t>(r) * w + c] = sum / (2 * rad + 1);
      }
    }
    for (int c = 0; c < w; ++c) {
      for (int r = 0; r < h; ++r) {
        double sum = 0.0;
        for (int dr = -rad; dr <= rad; ++dr) {
          sum += tmp[static_cast<std::size_t>(std::clamp(r + dr, 0, h - 1)) * w + c];
        }
        px[static_cast<std::size_t>(r) * w + c] = sum / (2 * rad + 1);
      }
    }
  }
}

}  // namespace detail

/// Seeded synthetic stereo pair: a band-limited noise pattern translated
/// horizontally by a constant integer disparity. Ground truth is the shift;
/// pixels whose match falls outside the right frame (c < shift) are marked
/// invalid. Deterministic for a given seed.
inline StereoPair synthetic_pair(int width, int height, int shift,
                                 std::uint64_t seed) {
  if (width <= 0 || height <= 0) {
    throw InputError("synthetic_pair: dimensions must be positive");
  }
  if (shift < 0 || shift >= width) {
    throw InputError("synthetic_pair: shift must be in [0, width)");
  }
  const int pat_w = width + shift;
  std::vector<double> pattern(static_cast<std::size_t>(pat_w) * height);
  std::mt19937_64 rng(seed);
  for (double& v : pattern) {
    v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }
  detail::box_blur(pattern, pat_w, height);
  const auto [lo_it, hi_it] = std::minmax_element(pattern.begin(), pattern.end());
  const double lo = *lo_it, span = std::max(*hi_it - lo, 1e-12);
  for (double& v : pattern) {
    v = 0.05 + 0.9 * (v - lo) / span;
  }

  StereoPair pair{GrayImage(width, height), GrayImage(width, height),
                  DisparityMap(width, height)};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      pair.left.at(r, c) = pattern[static_cast<std::size_t>(r) * pat_w + c];
      pair.right.at(r, c) =
          pattern[static_cast<std::size_t>(r) * pat_w + c + shift];
      const std::size_t i = pair.ground_truth.index(r, c);
      pair.ground_truth.values[i] = static_cast<double>(shift);
      pair.ground_truth.valid[i] = c >= shift ? 1 : 0;
    }
  }
  return pair;
}

}  // namespace stereorisk
