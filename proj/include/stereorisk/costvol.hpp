#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "stereorisk/distribution.hpp"
#include "stereorisk/errors.hpp"
#include "stereorisk/image.hpp"
#include "stereorisk/parallel.hpp"
#include "stereorisk/risk.hpp"

namespace stereorisk {

// Continuous disparity map with a per-pixel validity mask.
struct DisparityMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  DisparityMap() = default;
  DisparityMap(int w, int h)
      : width(w), height(h),
        values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0),
        valid(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 1) {
    if (w <= 0 || h <= 0) {
      throw InputError("disparity map dimensions must be positive");
    }
  }

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * width + c;
  }
  double at(int r, int c) const { return values[index(r, c)]; }
  bool valid_at(int r, int c) const { return valid[index(r, c)] != 0; }
};

// Per-pixel census descriptors: one bit per window neighbor, set when the
// neighbor is darker than the center. Border neighbors use clamped
// coordinates. A 7x7 window fills 48 of the 64 descriptor bits.
struct CensusGrid {
  int width = 0;
  int height = 0;
  int window = 0;
  std::vector<std::uint64_t> code;

  std::uint64_t at(int r, int c) const {
    return code[static_cast<std::size_t>(r) * width + c];
  }
};

inline CensusGrid census_transform(const GrayImage& img, int window) {
  if (window < 3 || window % 2 == 0) {
    throw InputError("census window must be odd and at least 3");
  }
  if (window > 7) {
    throw InputError("census window above 7 overflows the 64-bit descriptor");
  }
  if (window > img.width || window > img.height) {
    throw InputError("census window larger than image");
  }
  CensusGrid grid;
  grid.width = img.width;
  grid.height = img.height;
  grid.window = window;
  grid.code.resize(static_cast<std::size_t>(img.width) * img.height);
  const int rad = window / 2;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double center = img.at(r, c);
      std::uint64_t bits = 0;
      for (int dr = -rad; dr <= rad; ++dr) {
        for (int dc = -rad; dc <= rad; ++dc) {
          if (dr == 0 && dc == 0) continue;
          bits <<= 1;
          if (img.at_clamped(r + dr, c + dc) < center) bits |= 1;
        }
      }
      grid.code[static_cast<std::size_t>(r) * img.width + c] = bits;
    }
  }
  return grid;
}

// Hamming-cost ceiling, also the sentinel for hypotheses whose match falls
// outside the right image.
inline float census_sentinel(int window) {
  return static_cast<float>(window * window - 1);
}

/// Per-pixel Hamming distance between the left descriptor at (r, c) and the
/// right descriptor at (r, c - d); out-of-frame columns get the sentinel.
inline std::vector<float> matching_cost(const CensusGrid& left,
                                        const CensusGrid& right, int d) {
  if (d < 0) {
    throw InputError("matching_cost: disparity must be nonnegative");
  }
  if (left.width != right.width || left.height != right.height) {
    throw InputError("matching_cost: descriptor grids differ in size");
  }
  const float sentinel = census_sentinel(left.window);
  std::vector<float> cost(static_cast<std::size_t>(left.width) * left.height);
  for (int r = 0; r < left.height; ++r) {
    for (int c = 0; c < left.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * left.width + c;
      cost[i] = c - d >= 0
                    ? static_cast<float>(std::popcount(left.at(r, c) ^
                                                       right.at(r, c - d)))
                    : sentinel;
    }
  }
  return cost;
}

// Matching cost at a real-valued disparity: linear interpolation between the
// two neighboring integer-disparity Hamming costs.
inline float census_cost_at(const CensusGrid& left, const CensusGrid& right,
                            int r, int c, double d) {
  const float sentinel = census_sentinel(left.window);
  if (d < 0.0 || static_cast<double>(c) - d < 0.0) return sentinel;
  const int d0 = static_cast<int>(d);
  const double t = d - d0;
  const auto integer_cost = [&](int k) {
    if (c - k < 0) return sentinel;
    return static_cast<float>(std::popcount(left.at(r, c) ^ right.at(r, c - k)));
  };
  const float c0 = integer_cost(d0);
  if (t == 0.0) return c0;
  return static_cast<float>((1.0 - t) * c0 + t * integer_cost(d0 + 1));
}

/// Coarse-stage hypotheses: `count` uniformly spaced disparities covering
/// [0, max_disp), i.e. k * max_disp / count. With max_disp == count the
/// spacing is exactly one pixel.
inline std::vector<double> sample_coarse(double max_disp, int count = 192) {
  if (!std::isfinite(max_disp) || max_disp < 1.0) {
    throw InputError("sample_coarse: max_disp must be at least 1");
  }
  if (count < 1) {
    throw InputError("sample_coarse: count must be positive");
  }
  std::vector<double> hyps(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    hyps[static_cast<std::size_t>(k)] = k * max_disp / count;
  }
  return hyps;
}

/// Refined-stage hypotheses: per pixel, `count` uniformly spaced values
/// spanning [min, max] of the coarse disparity over the centered
/// window x window neighborhood (clamped at borders). A degenerate span is
/// widened to one pixel on each side, clamped at zero, so the pmf keeps
/// `count` distinct hypotheses. Returns a flattened W*H*count array.
inline std::vector<double> sample_refined(const DisparityMap& coarse,
                                          int window = 12, int count = 16) {
  if (coarse.width <= 0 || coarse.height <= 0 ||
      coarse.values.size() != coarse.valid.size() ||
      coarse.values.size() !=
          static_cast<std::size_t>(coarse.width) * coarse.height) {
    throw InputError("sample_refined: malformed coarse map");
  }
  if (window < 1 || count < 2) {
    throw InputError("sample_refined: window and count too small");
  }
  double global_max = 1.0;
  for (std::size_t i = 0; i < coarse.values.size(); ++i) {
    if (coarse.valid[i]) global_max = std::max(global_max, coarse.values[i]);
  }
  // Even window: offsets [-w/2, w/2 - 1] around the pixel.
  const int off_lo = -(window / 2);
  const int off_hi = (window - 1) / 2;
  std::vector<double> hyps(static_cast<std::size_t>(coarse.width) *
                           coarse.height * count);
  for (int r = 0; r < coarse.height; ++r) {
    for (int c = 0; c < coarse.width; ++c) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (int dr = off_lo; dr <= off_hi; ++dr) {
        for (int dc = off_lo; dc <= off_hi; ++dc) {
          const int rr = std::clamp(r + dr, 0, coarse.height - 1);
          const int cc = std::clamp(c + dc, 0, coarse.width - 1);
          if (!coarse.valid_at(rr, cc)) continue;
          const double v = coarse.at(rr, cc);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      if (!(lo <= hi)) {  // no valid neighbor: fall back to the full range
        lo = 0.0;
        hi = global_max;
      } else if (lo == hi) {
        const double v = lo;
        lo = std::max(0.0, v - 1.0);
        hi = v + 1.0;
      }
      double* out = hyps.data() +
                    (static_cast<std::size_t>(r) * coarse.width + c) * count;
      const double span = hi - lo;
      for (int k = 0; k < count; ++k) {
        out[k] = lo + span * k / (count - 1);
      }
    }
  }
  return hyps;
}

// Matching costs over disparity hypotheses; hypotheses are either one list
// shared by every pixel (coarse stage) or per-pixel lists of a common
// length (refined stage).
struct CostVolume {
  int width = 0;
  int height = 0;
  int hyp_count = 0;
  bool shared = true;
  std::vector<double> hypotheses;  // hyp_count or W*H*hyp_count values
  std::vector<float> costs;        // W*H*hyp_count
  float sentinel = 0.0f;

  std::span<const double> hyps_at(int r, int c) const {
    if (shared) return {hypotheses.data(), static_cast<std::size_t>(hyp_count)};
    return {hypotheses.data() +
                (static_cast<std::size_t>(r) * width + c) * hyp_count,
            static_cast<std::size_t>(hyp_count)};
  }
  std::span<const float> costs_at(int r, int c) const {
    return {costs.data() + (static_cast<std::size_t>(r) * width + c) * hyp_count,
            static_cast<std::size_t>(hyp_count)};
  }

  void check() const {
    if (width <= 0 || height <= 0 || hyp_count <= 0) {
      throw InputError("cost volume: dimensions must be positive");
    }
    const std::size_t pixels =
        static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (costs.size() != pixels * hyp_count) {
      throw InputError("cost volume: cost count mismatch");
    }
    if (hypotheses.size() !=
        (shared ? static_cast<std::size_t>(hyp_count) : pixels * hyp_count)) {
      throw InputError("cost volume: hypothesis count mismatch");
    }
  }
};

inline CostVolume build_cost_volume(const GrayImage& left,
                                    const GrayImage& right,
                                    std::vector<double> shared_hyps,
                                    int census_window, int threads = 1) {
  if (left.width != right.width || left.height != right.height) {
    throw InputError("cost volume: image sizes differ");
  }
  if (!std::is_sorted(shared_hyps.begin(), shared_hyps.end()) ||
      std::adjacent_find(shared_hyps.begin(), shared_hyps.end()) !=
          shared_hyps.end()) {
    throw InputError("cost volume: hypotheses must be strictly increasing");
  }
  const CensusGrid lg = census_transform(left, census_window);
  const CensusGrid rg = census_transform(right, census_window);
  CostVolume vol;
  vol.width = left.width;
  vol.height = left.height;
  vol.hyp_count = static_cast<int>(shared_hyps.size());
  vol.shared = true;
  vol.hypotheses = std::move(shared_hyps);
  vol.sentinel = census_sentinel(census_window);
  vol.costs.resize(static_cast<std::size_t>(vol.width) * vol.height *
                   vol.hyp_count);
  parallel_rows(vol.height, resolve_threads(threads), [&](int r0, int r1) {
    for (int r = r0; r < r1; ++r) {
      for (int c = 0; c < vol.width; ++c) {
        float* out = vol.costs.data() +
                     (static_cast<std::size_t>(r) * vol.width + c) * vol.hyp_count;
        for (int k = 0; k < vol.hyp_count; ++k) {
          out[k] = census_cost_at(lg, rg, r, c, vol.hypotheses[k]);
        }
      }
    }
  });
  vol.check();
  return vol;
}

namespace detail {

// In-place 2D mean filter over one W x H plane.
inline void box_filter_plane(std::vector<float>& plane, int width, int height,
                             int radius) {
  std::vector<float> out(plane.size());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const int r0 = std::max(0, r - radius), r1 = std::min(height - 1, r + radius);
      const int c0 = std::max(0, c - radius), c1 = std::min(width - 1, c + radius);
      double sum = 0.0;
      for (int rr = r0; rr <= r1; ++rr) {
        for (int cc = c0; cc <= c1; ++cc) {
          sum += plane[static_cast<std::size_t>(rr) * width + cc];
        }
      }
      out[static_cast<std::size_t>(r) * width + c] =
          static_cast<float>(sum / ((r1 - r0 + 1) * (c1 - c0 + 1)));
    }
  }
  plane = std::move(out);
}

}  // namespace detail

/// Cost volume over per-pixel hypothesis lists. With `box_filter` set, the
/// integer-disparity cost planes are mean-filtered (5x5) before the
/// fractional interpolation, the per-pixel analogue of box_filter_volume.
inline CostVolume build_cost_volume_per_pixel(const GrayImage& left,
                                              const GrayImage& right,
                                              std::vector<double> hyps_flat,
                                              int hyp_count, int census_window,
                                              int threads = 1,
                                              bool box_filter = false) {
  if (left.width != right.width || left.height != right.height) {
    throw InputError("cost volume: image sizes differ");
  }
  const CensusGrid lg = census_transform(left, census_window);
  const CensusGrid rg = census_transform(right, census_window);
  CostVolume vol;
  vol.width = left.width;
  vol.height = left.height;
  vol.hyp_count = hyp_count;
  vol.shared = false;
  vol.hypotheses = std::move(hyps_flat);
  vol.sentinel = census_sentinel(census_window);
  vol.costs.resize(static_cast<std::size_t>(vol.width) * vol.height * hyp_count);
  vol.check();
  const int n_threads = resolve_threads(threads);

  if (!box_filter) {
    parallel_rows(vol.height, n_threads, [&](int r0, int r1) {
      for (int r = r0; r < r1; ++r) {
        for (int c = 0; c < vol.width; ++c) {
          const std::size_t base =
              (static_cast<std::size_t>(r) * vol.width + c) * hyp_count;
          for (int k = 0; k < hyp_count; ++k) {
            vol.costs[base + k] =
                census_cost_at(lg, rg, r, c, vol.hypotheses[base + k]);
          }
        }
      }
    });
    return vol;
  }

  double max_hyp = 0.0;
  for (double h : vol.hypotheses) max_hyp = std::max(max_hyp, h);
  const int slice_count =
      std::min(static_cast<int>(std::ceil(max_hyp)) + 2, vol.width + 1);
  std::vector<std::vector<float>> slices(static_cast<std::size_t>(slice_count));
  parallel_rows(slice_count, n_threads, [&](int k0, int k1) {
    for (int k = k0; k < k1; ++k) {
      slices[static_cast<std::size_t>(k)] = matching_cost(lg, rg, k);
      detail::box_filter_plane(slices[static_cast<std::size_t>(k)], vol.width,
                               vol.height, 2);
    }
  });
  parallel_rows(vol.height, n_threads, [&](int r0, int r1) {
    for (int r = r0; r < r1; ++r) {
      for (int c = 0; c < vol.width; ++c) {
        const std::size_t base =
            (static_cast<std::size_t>(r) * vol.width + c) * hyp_count;
        const auto slice_cost = [&](int q) {
          if (q >= slice_count || c - q < 0) return vol.sentinel;
          return slices[static_cast<std::size_t>(q)]
                       [static_cast<std::size_t>(r) * vol.width + c];
        };
        for (int k = 0; k < hyp_count; ++k) {
          const double d = vol.hypotheses[base + k];
          if (d < 0.0 || static_cast<double>(c) - d < 0.0) {
            vol.costs[base + k] = vol.sentinel;
            continue;
          }
          const int d0 = static_cast<int>(d);
          const double t = d - d0;
          const float c0 = slice_cost(d0);
          vol.costs[base + k] =
              t == 0.0 ? c0
                       : static_cast<float>((1.0 - t) * c0 +
                                            t * slice_cost(d0 + 1));
        }
      }
    }
  });
  return vol;
}

// 5x5 mean filter over each hypothesis slice, a flat stand-in for learned
// cost aggregation. Shared-hypothesis volumes only.
inline void box_filter_volume(CostVolume& vol, int radius = 2) {
  vol.check();
  if (!vol.shared) {
    throw InputError("box filter requires shared hypotheses");
  }
  std::vector<float> filtered(vol.costs.size());
  for (int r = 0; r < vol.height; ++r) {
    for (int c = 0; c < vol.width; ++c) {
      const int r0 = std::max(0, r - radius), r1 = std::min(vol.height - 1, r + radius);
      const int c0 = std::max(0, c - radius), c1 = std::min(vol.width - 1, c + radius);
      float* out = filtered.data() +
                   (static_cast<std::size_t>(r) * vol.width + c) * vol.hyp_count;
      for (int k = 0; k < vol.hyp_count; ++k) {
        double sum = 0.0;
        for (int rr = r0; rr <= r1; ++rr) {
          for (int cc = c0; cc <= c1; ++cc) {
            sum += vol.costs[(static_cast<std::size_t>(rr) * vol.width + cc) *
                                 vol.hyp_count +
                             k];
          }
        }
        out[k] = static_cast<float>(sum / ((r1 - r0 + 1) * (c1 - c0 + 1)));
      }
    }
  }
  vol.costs = std::move(filtered);
}

/// Softmax conversion of matching costs to a categorical distribution:
/// p_i proportional to exp(-cost_i / temperature), minimum cost subtracted
/// first, so the result is invariant to constant cost offsets.
inline DisparityPmf costs_to_pmf(std::span<const double> hyps,
                                 std::span<const float> costs,
                                 double temperature) {
  if (!std::isfinite(temperature) || temperature <= 0.0) {
    throw InputError("costs_to_pmf: temperature must be positive");
  }
  if (hyps.empty() || hyps.size() != costs.size()) {
    throw InputError("costs_to_pmf: need matching non-empty lists");
  }
  float min_cost = costs[0];
  for (float c : costs) {
    if (!std::isfinite(c)) {
      throw InputError("costs_to_pmf: non-finite cost");
    }
    min_cost = std::min(min_cost, c);
  }
  std::vector<double> w(costs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    w[i] = std::exp(-static_cast<double>(costs[i] - min_cost) / temperature);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return DisparityPmf(std::vector<double>(hyps.begin(), hyps.end()),
                      std::move(w));
}

enum class Predictor { Expectation, L1Risk, L2Risk, Huber };

struct PredictStats {
  long long pixels = 0;
  long long iter_sum = 0;
  int iter_max = 0;
};

/// Per-pixel disparity prediction: converts each pixel's costs to a pmf and
/// applies the selected risk minimizer. Expectation and L2Risk are the same
/// estimator (the weighted mean); both names are accepted. Pixels whose
/// best cost equals the out-of-frame sentinel, or whose solve fails, are
/// marked invalid instead of aborting the map.
inline DisparityMap predict_map(const CostVolume& vol, const RiskConfig& cfg,
                                Predictor predictor, double temperature,
                                int threads = 1, PredictStats* stats = nullptr,
                                std::vector<int>* iters_out = nullptr) {
  vol.check();
  validate(cfg);
  DisparityMap map(vol.width, vol.height);
  if (iters_out) {
    iters_out->assign(map.values.size(), 0);
  }
  const int n_threads = resolve_threads(threads);
  std::vector<PredictStats> partial(static_cast<std::size_t>(vol.height));
  parallel_rows(vol.height, n_threads, [&](int r0, int r1) {
    for (int r = r0; r < r1; ++r) {
      PredictStats& row_stats = partial[static_cast<std::size_t>(r)];
      for (int c = 0; c < vol.width; ++c) {
        const std::size_t idx = map.index(r, c);
        const auto costs = vol.costs_at(r, c);
        const float best = *std::min_element(costs.begin(), costs.end());
        if (best >= vol.sentinel) {
          map.values[idx] = 0.0;
          map.valid[idx] = 0;
          continue;
        }
        try {
          const DisparityPmf pmf = costs_to_pmf(vol.hyps_at(r, c), costs,
                                                temperature);
          double y = 0.0;
          int iters = 0;
          switch (predictor) {
            case Predictor::Expectation:
            case Predictor::L2Risk:
              y = solve_l2(pmf);
              break;
            case Predictor::L1Risk: {
              RiskConfig c1 = cfg;
              c1.norm = ErrorNorm::L1;
              const SolveResult res = solve_l1(pmf, c1);
              y = res.y_star;
              iters = res.iterations;
              break;
            }
            case Predictor::Huber: {
              RiskConfig ch = cfg;
              ch.norm = ErrorNorm::Huber;
              const SolveResult res = solve_generic(pmf, ch);
              y = res.y_star;
              iters = res.iterations;
              break;
            }
          }
          map.values[idx] = y;
          map.valid[idx] = 1;
          row_stats.pixels += 1;
          row_stats.iter_sum += iters;
          row_stats.iter_max = std::max(row_stats.iter_max, iters);
          if (iters_out) (*iters_out)[idx] = iters;
        } catch (const InputError&) {
          map.values[idx] = 0.0;
          map.valid[idx] = 0;
        }
      }
    }
  });
  if (stats) {
    PredictStats total;
    for (const PredictStats& row : partial) {
      total.pixels += row.pixels;
      total.iter_sum += row.iter_sum;
      total.iter_max = std::max(total.iter_max, row.iter_max);
    }
    *stats = total;
  }
  return map;
}

}  // namespace stereorisk
