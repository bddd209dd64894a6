#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "stereorisk/errors.hpp"

namespace stereorisk {

// Grayscale image, row-major intensities in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h),
        pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w <= 0 || h <= 0) {
      throw InputError("image dimensions must be positive");
    }
  }

  double at(int r, int c) const {
    return pixels[static_cast<std::size_t>(r) * width + c];
  }
  double& at(int r, int c) {
    return pixels[static_cast<std::size_t>(r) * width + c];
  }
  // Clamped access for window operations at the borders.
  double at_clamped(int r, int c) const {
    r = std::clamp(r, 0, height - 1);
    c = std::clamp(c, 0, width - 1);
    return at(r, c);
  }
};

// 2x box-filter downsampling; odd trailing rows/columns average over the
// in-bounds samples only.
inline GrayImage box_downsample2(const GrayImage& img) {
  const int w = (img.width + 1) / 2;
  const int h = (img.height + 1) / 2;
  GrayImage out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double sum = 0.0;
      int count = 0;
      for (int dr = 0; dr < 2; ++dr) {
        for (int dc = 0; dc < 2; ++dc) {
          const int rr = 2 * r + dr;
          const int cc = 2 * c + dc;
          if (rr < img.height && cc < img.width) {
            sum += img.at(rr, cc);
            ++count;
          }
        }
      }
      out.at(r, c) = sum / count;
    }
  }
  return out;
}

}  // namespace stereorisk
