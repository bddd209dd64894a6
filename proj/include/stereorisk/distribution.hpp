#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "stereorisk/errors.hpp"

namespace stereorisk {

enum class KernelType { Laplacian, Gaussian };

/// Symmetric interpolation kernel with bandwidth sigma (pixels).
///
/// Laplacian: k(x, c) = exp(-|x - c| / sigma) / (2 sigma)
/// Gaussian:  normal density with mean c and standard deviation sigma
///
/// Both integrate to 1 over the real line for any center, so a
/// probability-weighted sum of kernels is again a density.
struct Kernel {
  KernelType type = KernelType::Laplacian;
  double sigma = 1.1;

  Kernel() = default;
  Kernel(KernelType t, double s) : type(t), sigma(s) {
    if (!std::isfinite(sigma) || sigma <= 0.0) {
      throw InputError("kernel bandwidth must be positive and finite");
    }
  }
};

/// Kernel density at x for a kernel centered at `center`.
inline double kernel_eval(const Kernel& kernel, double x, double center) {
  if (!std::isfinite(x) || !std::isfinite(center)) {
    throw InputError("kernel_eval: non-finite evaluation point");
  }
  if (!(kernel.sigma > 0.0)) {
    throw InputError("kernel_eval: bandwidth must be positive");
  }
  const double u = std::abs(x - center) / kernel.sigma;
  if (kernel.type == KernelType::Laplacian) {
    return std::exp(-u) / (2.0 * kernel.sigma);
  }
  return std::exp(-0.5 * u * u) /
         (kernel.sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// Rescales nonnegative weights into a probability vector.
inline std::vector<double> normalize(std::span<const double> weights) {
  if (weights.empty()) {
    throw InputError("normalize: empty weight list");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InputError("normalize: weights must be finite and nonnegative");
    }
    sum += w;
  }
  if (sum <= 0.0) {
    throw InputError("normalize: degenerate weights");
  }
  std::vector<double> probs(weights.begin(), weights.end());
  for (double& p : probs) p /= sum;
  return probs;
}

/// Categorical distribution over a finite, strictly increasing set of
/// disparity hypotheses.
///
/// Construction sorts hypothesis/probability pairs, merges duplicate
/// hypotheses by summing their probabilities, and renormalizes when the
/// probability sum deviates from 1 by at most kSumTolerance (softmax
/// outputs accumulate rounding error); larger deviations are rejected.
/// Probabilities are kept at double precision regardless of the cost
/// volume's storage type.
class DisparityPmf {
 public:
  static constexpr double kSumTolerance = 1e-6;

  DisparityPmf(std::vector<double> hypotheses, std::vector<double> probs)
      : hyps_(std::move(hypotheses)), probs_(std::move(probs)) {
    if (hyps_.empty()) {
      throw InputError("pmf: at least one hypothesis required");
    }
    if (hyps_.size() != probs_.size()) {
      throw InputError("pmf: hypotheses and probabilities differ in length");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < hyps_.size(); ++i) {
      if (!std::isfinite(hyps_[i])) {
        throw InputError("pmf: non-finite hypothesis");
      }
      if (!std::isfinite(probs_[i]) || probs_[i] < 0.0) {
        throw InputError("pmf: probabilities must be finite and nonnegative");
      }
      sum += probs_[i];
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw InputError("probabilities do not sum to 1");
    }
    if (!std::is_sorted(hyps_.begin(), hyps_.end()) || has_duplicates()) {
      sort_and_merge();
    }
    for (double& p : probs_) p /= sum;
  }

  std::size_t size() const { return hyps_.size(); }
  std::span<const double> hypotheses() const { return hyps_; }
  std::span<const double> probs() const { return probs_; }
  double min_hypothesis() const { return hyps_.front(); }
  double max_hypothesis() const { return hyps_.back(); }

 private:
  bool has_duplicates() const {
    return std::adjacent_find(hyps_.begin(), hyps_.end()) != hyps_.end();
  }

  void sort_and_merge() {
    std::vector<std::size_t> order(hyps_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return hyps_[a] < hyps_[b];
    });
    std::vector<double> d, p;
    d.reserve(hyps_.size());
    p.reserve(hyps_.size());
    for (std::size_t idx : order) {
      if (!d.empty() && hyps_[idx] == d.back()) {
        p.back() += probs_[idx];
      } else {
        d.push_back(hyps_[idx]);
        p.push_back(probs_[idx]);
      }
    }
    hyps_ = std::move(d);
    probs_ = std::move(p);
  }

  std::vector<double> hyps_;
  std::vector<double> probs_;
};

/// Kernel-interpolated probability density of the disparity at x:
/// p(x) = sum_i k(x, d_i) p_i. Nonnegative and integrates to 1.
inline double pmf_density(const DisparityPmf& pmf, const Kernel& kernel,
                          double x) {
  if (!std::isfinite(x)) {
    throw InputError("pmf_density: non-finite evaluation point");
  }
  const auto d = pmf.hypotheses();
  const auto p = pmf.probs();
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    acc += p[i] * kernel_eval(kernel, x, d[i]);
  }
  return acc;
}

}  // namespace stereorisk
