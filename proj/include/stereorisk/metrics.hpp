#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "stereorisk/costvol.hpp"
#include "stereorisk/errors.hpp"

namespace stereorisk {

// Evaluation region flags. Every non-occluded pixel is also evaluated.
struct EvalMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> evaluate;
  std::vector<std::uint8_t> non_occluded;

  EvalMask() = default;
  EvalMask(int w, int h, std::vector<std::uint8_t> eval,
           std::vector<std::uint8_t> noc)
      : width(w), height(h), evaluate(std::move(eval)),
        non_occluded(std::move(noc)) {
    const std::size_t pixels =
        static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (w <= 0 || h <= 0 || evaluate.size() != pixels ||
        non_occluded.size() != pixels) {
      throw InputError("eval mask: malformed dimensions");
    }
    for (std::size_t i = 0; i < pixels; ++i) {
      non_occluded[i] = non_occluded[i] && evaluate[i];
    }
  }

  static EvalMask full(int w, int h) {
    const std::size_t pixels =
        static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    return EvalMask(w, h, std::vector<std::uint8_t>(pixels, 1),
                    std::vector<std::uint8_t>(pixels, 1));
  }

  // Mask whose evaluated region is the non-occluded subset.
  EvalMask noc_submask() const {
    return EvalMask(width, height, non_occluded, non_occluded);
  }
};

namespace detail {

inline void check_metric_inputs(const DisparityMap& pred,
                                const DisparityMap& gt, const EvalMask& mask) {
  if (pred.width != gt.width || pred.height != gt.height ||
      pred.width != mask.width || pred.height != mask.height) {
    throw InputError("metrics: dimension mismatch");
  }
}

}  // namespace detail

/// End-point error: mean |pred - gt| over evaluated pixels. Pixels with an
/// invalid prediction are excluded from the mean (rate metrics count them
/// as outliers instead).
inline double epe(const DisparityMap& pred, const DisparityMap& gt,
                  const EvalMask& mask) {
  detail::check_metric_inputs(pred, gt, mask);
  double sum = 0.0;
  long long n = 0;
  for (std::size_t i = 0; i < mask.evaluate.size(); ++i) {
    if (!mask.evaluate[i] || !gt.valid[i]) continue;
    if (!pred.valid[i]) continue;
    sum += std::abs(pred.values[i] - gt.values[i]);
    ++n;
  }
  if (n == 0) {
    throw InputError("epe: no evaluated pixels");
  }
  return sum / static_cast<double>(n);
}

/// Percentage of evaluated pixels with |pred - gt| strictly above k.
/// Invalid predictions inside the region count as outliers.
inline double outlier_rate(const DisparityMap& pred, const DisparityMap& gt,
                           const EvalMask& mask, double k) {
  detail::check_metric_inputs(pred, gt, mask);
  if (!std::isfinite(k) || k <= 0.0) {
    throw InputError("outlier_rate: threshold must be positive");
  }
  long long n = 0, bad = 0;
  for (std::size_t i = 0; i < mask.evaluate.size(); ++i) {
    if (!mask.evaluate[i] || !gt.valid[i]) continue;
    ++n;
    if (!pred.valid[i] || std::abs(pred.values[i] - gt.values[i]) > k) ++bad;
  }
  if (n == 0) {
    throw InputError("outlier_rate: no evaluated pixels");
  }
  return 100.0 * static_cast<double>(bad) / static_cast<double>(n);
}

/// D1 outlier percentage under the KITTI rule: a pixel is an outlier when
/// the error exceeds 3 px AND 5% of the ground-truth disparity. Requires
/// positive ground truth over the evaluated region.
inline double d1_rate(const DisparityMap& pred, const DisparityMap& gt,
                      const EvalMask& mask) {
  detail::check_metric_inputs(pred, gt, mask);
  long long n = 0, bad = 0;
  for (std::size_t i = 0; i < mask.evaluate.size(); ++i) {
    if (!mask.evaluate[i] || !gt.valid[i]) continue;
    if (!(gt.values[i] > 0.0)) {
      throw InputError("d1_rate: ground truth must be positive where evaluated");
    }
    ++n;
    if (!pred.valid[i]) {
      ++bad;
      continue;
    }
    const double err = std::abs(pred.values[i] - gt.values[i]);
    if (err > 3.0 && err > 0.05 * gt.values[i]) ++bad;
  }
  if (n == 0) {
    throw InputError("d1_rate: no evaluated pixels");
  }
  return 100.0 * static_cast<double>(bad) / static_cast<double>(n);
}

struct RegionStats {
  long long n_eval = 0;
  long long n_invalid_pred = 0;
  double epe = 0.0;
  double gt05 = 0.0;
  double gt1 = 0.0;
  double gt2 = 0.0;
  double gt3 = 0.0;
  std::optional<double> d1;  // absent when no positive ground truth
};

struct EvalReport {
  RegionStats all;
  std::optional<RegionStats> noc;
};

namespace detail {

inline RegionStats region_stats(const DisparityMap& pred,
                                const DisparityMap& gt, const EvalMask& mask) {
  RegionStats st;
  bool d1_ok = true;
  for (std::size_t i = 0; i < mask.evaluate.size(); ++i) {
    if (!mask.evaluate[i] || !gt.valid[i]) continue;
    ++st.n_eval;
    if (!pred.valid[i]) ++st.n_invalid_pred;
    if (!(gt.values[i] > 0.0)) d1_ok = false;
  }
  if (st.n_eval == 0) {
    throw InputError("metrics: no evaluated pixels");
  }
  st.epe = epe(pred, gt, mask);
  st.gt05 = outlier_rate(pred, gt, mask, 0.5);
  st.gt1 = outlier_rate(pred, gt, mask, 1.0);
  st.gt2 = outlier_rate(pred, gt, mask, 2.0);
  st.gt3 = outlier_rate(pred, gt, mask, 3.0);
  if (d1_ok) {
    st.d1 = d1_rate(pred, gt, mask);
  }
  return st;
}

}  // namespace detail

inline EvalReport evaluate_disparity(const DisparityMap& pred,
                                     const DisparityMap& gt,
                                     const EvalMask& mask,
                                     bool has_noc = false) {
  detail::check_metric_inputs(pred, gt, mask);
  EvalReport report;
  report.all = detail::region_stats(pred, gt, mask);
  if (has_noc) {
    report.noc = detail::region_stats(pred, gt, mask.noc_submask());
  }
  return report;
}

// Flat JSON with stable key names for scripting and golden files.
inline nlohmann::ordered_json report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["epe"] = report.all.epe;
  if (report.noc) j["epe_noc"] = report.noc->epe;
  const auto put = [&](const char* key, double all_v,
                       std::optional<double> noc_v) {
    j[std::string(key) + "_all"] = all_v;
    if (noc_v) j[std::string(key) + "_noc"] = *noc_v;
  };
  put("gt0.5", report.all.gt05,
      report.noc ? std::optional<double>(report.noc->gt05) : std::nullopt);
  put("gt1", report.all.gt1,
      report.noc ? std::optional<double>(report.noc->gt1) : std::nullopt);
  put("gt2", report.all.gt2,
      report.noc ? std::optional<double>(report.noc->gt2) : std::nullopt);
  put("gt3", report.all.gt3,
      report.noc ? std::optional<double>(report.noc->gt3) : std::nullopt);
  if (report.all.d1) {
    j["d1_all"] = *report.all.d1;
  }
  if (report.noc && report.noc->d1) {
    j["d1_noc"] = *report.noc->d1;
  }
  j["d1_bg"] = "unsupported";  // needs object masks the tool does not ingest
  j["d1_fg"] = "unsupported";
  j["n_eval"] = report.all.n_eval;
  j["n_invalid_pred"] = report.all.n_invalid_pred;
  if (report.noc) {
    j["n_noc"] = report.noc->n_eval;
    j["n_invalid_pred_noc"] = report.noc->n_invalid_pred;
  }
  return j;
}

}  // namespace stereorisk
