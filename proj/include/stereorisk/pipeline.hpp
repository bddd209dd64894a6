#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "stereorisk/costvol.hpp"
#include "stereorisk/errors.hpp"
#include "stereorisk/image.hpp"
#include "stereorisk/risk.hpp"

namespace stereorisk {

struct MatchOptions {
  double max_disp = 192.0;  // full-resolution disparity range
  Predictor predictor = Predictor::L1Risk;
  RiskConfig risk{};
  double temperature = 2.0;  // softmax temperature in Hamming-bit units
  int census_window = 7;
  int coarse_count = 192;
  int refined_count = 16;
  int refined_window = 12;
  bool cascade = true;
  bool box_filter = true;  // census costs need aggregation to be reliable
  int threads = 1;
};

struct StageReport {
  std::string name;
  int width = 0;
  int height = 0;
  int hyp_count = 0;
  double volume_ms = 0.0;
  double solve_ms = 0.0;
  PredictStats stats;
};

struct MatchResult {
  DisparityMap disparity;
  std::vector<StageReport> stages;
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

// Nearest-neighbor upsample to the target size; disparities scale with the
// horizontal resolution, hence the value factor.
inline DisparityMap upsample_nearest(const DisparityMap& src, int out_w,
                                     int out_h, double value_scale) {
  DisparityMap out(out_w, out_h);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const int sr = std::min(r / 2, src.height - 1);
      const int sc = std::min(c / 2, src.width - 1);
      const std::size_t i = out.index(r, c);
      out.values[i] = src.at(sr, sc) * value_scale;
      out.valid[i] = src.valid_at(sr, sc) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace detail

/// Classical two-stage matcher. The coarse stage samples `coarse_count`
/// uniform hypotheses over the full range at 1/4 resolution; the refined
/// stage samples `refined_count` hypotheses per pixel inside the local
/// min/max of the upsampled coarse map at 1/2 resolution, then the result
/// is upsampled to full resolution. With cascade off, a single stage runs
/// at full resolution.
inline MatchResult match_stereo(const GrayImage& left, const GrayImage& right,
                                const MatchOptions& opt) {
  if (left.width != right.width || left.height != right.height) {
    throw InputError("match: left/right dimensions differ");
  }
  if (opt.max_disp < 1.0) {
    throw InputError("match: max_disp must be at least 1");
  }
  validate(opt.risk);
  MatchResult result;

  const auto run_stage = [&](const char* name, const GrayImage& l,
                             const GrayImage& r, CostVolume&& vol) {
    StageReport report;
    report.name = name;
    report.width = l.width;
    report.height = l.height;
    report.hyp_count = vol.hyp_count;
    const auto t0 = std::chrono::steady_clock::now();
    DisparityMap map = predict_map(vol, opt.risk, opt.predictor,
                                   opt.temperature, opt.threads, &report.stats);
    report.solve_ms = detail::ms_since(t0);
    result.stages.push_back(std::move(report));
    return map;
  };

  if (!opt.cascade) {
    const auto t0 = std::chrono::steady_clock::now();
    CostVolume vol = build_cost_volume(left, right,
                                       sample_coarse(opt.max_disp, opt.coarse_count),
                                       opt.census_window, opt.threads);
    if (opt.box_filter) box_filter_volume(vol);
    const double vol_ms = detail::ms_since(t0);
    result.disparity = run_stage("full", left, right, std::move(vol));
    result.stages.back().volume_ms = vol_ms;
    return result;
  }

  // Coarse stage at 1/4 resolution.
  const GrayImage left_half = box_downsample2(left);
  const GrayImage right_half = box_downsample2(right);
  const GrayImage left_quarter = box_downsample2(left_half);
  const GrayImage right_quarter = box_downsample2(right_half);
  const double quarter_range = std::max(opt.max_disp / 4.0, 1.0);

  auto t0 = std::chrono::steady_clock::now();
  CostVolume coarse_vol =
      build_cost_volume(left_quarter, right_quarter,
                        sample_coarse(quarter_range, opt.coarse_count),
                        opt.census_window, opt.threads);
  if (opt.box_filter) box_filter_volume(coarse_vol);
  double vol_ms = detail::ms_since(t0);
  const DisparityMap coarse =
      run_stage("coarse", left_quarter, right_quarter, std::move(coarse_vol));
  result.stages.back().volume_ms = vol_ms;

  // Refined stage at 1/2 resolution; coarse disparities double with the
  // width when upsampled.
  const DisparityMap coarse_at_half = detail::upsample_nearest(
      coarse, left_half.width, left_half.height, 2.0);
  t0 = std::chrono::steady_clock::now();
  std::vector<double> refined_hyps = sample_refined(
      coarse_at_half, opt.refined_window, opt.refined_count);
  CostVolume refined_vol = build_cost_volume_per_pixel(
      left_half, right_half, std::move(refined_hyps), opt.refined_count,
      opt.census_window, opt.threads, opt.box_filter);
  vol_ms = detail::ms_since(t0);
  const DisparityMap refined =
      run_stage("refined", left_half, right_half, std::move(refined_vol));
  result.stages.back().volume_ms = vol_ms;

  result.disparity =
      detail::upsample_nearest(refined, left.width, left.height, 2.0);
  return result;
}

}  // namespace stereorisk
