#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "stereorisk/distribution.hpp"
#include "stereorisk/errors.hpp"
#include "stereorisk/risk.hpp"

namespace stereorisk {

/// dy/dp_i at the L1 risk minimum, one component per hypothesis (pixels per
/// unit probability). Component i carries the sign of d_i - y*: mass above
/// the optimum pulls it up, mass below pulls it down.
struct PmfGradient {
  std::vector<double> components;
};

/// Gradient of the solved disparity with respect to the categorical
/// probabilities via the implicit function theorem applied to G(y, p) == 0:
///
///   dy/dp = -(dG/dp) / (dG/dy)
///
/// Laplacian kernel, component i:
///   sigma * Sign(d_i - y) (1 - exp(-|y - d_i| / sigma))
///     / max(sum_j p_j exp(-|y - d_j| / sigma), clip_floor)
///
/// Gaussian kernel, component i:
///   erf((d_i - y) / (sigma sqrt 2)) / max(dG/dy, clip_floor)
/// with dG/dy = sum_j p_j sqrt(2/pi) exp(-(y - d_j)^2 / (2 sigma^2)) / sigma,
/// twice the mixture density at y.
///
/// The denominator floor avoids exploding gradients when the density at the
/// optimum is nearly zero (far-apart modes). y_star must be the solver
/// output for this pmf, i.e. |G(y_star)| <= tau.
inline PmfGradient implicit_gradient(const DisparityPmf& pmf,
                                     const RiskConfig& cfg, double y_star) {
  validate(cfg);
  if (!std::isfinite(y_star) || y_star < pmf.min_hypothesis() ||
      y_star > pmf.max_hypothesis()) {
    throw InputError("implicit_gradient: y outside the hypothesis range");
  }
  const auto d = pmf.hypotheses();
  const auto p = pmf.probs();
  const double s = cfg.kernel.sigma;
  PmfGradient grad;
  grad.components.resize(d.size());

  if (cfg.kernel.type == KernelType::Laplacian) {
    double denom = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      denom += p[j] * std::exp(-std::abs(y_star - d[j]) / s);
    }
    denom = std::max(denom, cfg.clip_floor);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double a = std::abs(y_star - d[i]);
      const double sign = d[i] > y_star ? 1.0 : (d[i] < y_star ? -1.0 : 0.0);
      grad.components[i] = sign * s * (1.0 - std::exp(-a / s)) / denom;
    }
  } else {
    constexpr double root_two_over_pi =
        std::numbers::sqrt2 * std::numbers::inv_sqrtpi;
    double denom = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double z = (y_star - d[j]) / s;
      denom += p[j] * root_two_over_pi * std::exp(-0.5 * z * z) / s;
    }
    denom = std::max(denom, cfg.clip_floor);
    for (std::size_t i = 0; i < d.size(); ++i) {
      grad.components[i] =
          std::erf((d[i] - y_star) / (s * std::numbers::sqrt2)) / denom;
    }
  }
  return grad;
}

/// Smooth L1 training loss:
///   0.5 (gt - pred)^2        if |gt - pred| < 1
///   |gt - pred| - 0.5        otherwise
/// Continuous and continuously differentiable at |diff| = 1.
inline double smooth_l1_loss(double pred, double gt) {
  const double a = std::abs(gt - pred);
  return a < 1.0 ? 0.5 * a * a : a - 0.5;
}

/// d/dpred of smooth_l1_loss.
inline double smooth_l1_grad(double pred, double gt) {
  const double r = pred - gt;
  if (std::abs(r) < 1.0) return r;
  return r > 0.0 ? 1.0 : -1.0;
}

/// Total training loss: 0.1 * coarse + 1.0 * refined.
inline double total_loss(double loss_coarse, double loss_refined) {
  return 0.1 * loss_coarse + 1.0 * loss_refined;
}

struct FitStep {
  double loss;
  double y;
};

inline RiskConfig fit_demo_config() {
  RiskConfig cfg;
  cfg.tau = 1e-9;  // the implicit gradient treats y* as an exact root
  return cfg;
}

/// End-to-end differentiability demo: fits a logit vector so the solved L1
/// disparity matches `target`.
///
/// Logits start at zero, map to a pmf through exponential normalization
/// (softmax), the pmf is solved for y*, and smooth_l1_loss(y*, target) is
/// back-propagated through the implicit gradient and the softmax Jacobian.
/// Plain gradient descent with a fixed rate keeps the trace deterministic.
/// Returns steps + 1 entries; entry 0 is the initial state.
inline std::vector<FitStep> fit_pmf_demo(double target,
                                         std::vector<double> hypotheses,
                                         int steps, double lr,
                                         const RiskConfig& cfg = fit_demo_config()) {
  validate(cfg);
  if (cfg.norm != ErrorNorm::L1) {
    throw InputError("fit_pmf_demo: demo optimizes the L1 risk");
  }
  if (steps < 0) {
    throw InputError("fit_pmf_demo: steps must be nonnegative");
  }
  if (!std::isfinite(lr) || lr <= 0.0) {
    throw InputError("fit_pmf_demo: learning rate must be positive");
  }
  std::sort(hypotheses.begin(), hypotheses.end());
  if (hypotheses.empty() ||
      std::adjacent_find(hypotheses.begin(), hypotheses.end()) !=
          hypotheses.end()) {
    throw InputError("fit_pmf_demo: hypotheses must be distinct");
  }
  if (!std::isfinite(target) || target < hypotheses.front() ||
      target > hypotheses.back()) {
    throw InputError("fit_pmf_demo: target outside the hypothesis range");
  }

  const std::size_t n = hypotheses.size();
  std::vector<double> logits(n, 0.0);
  std::vector<double> probs(n);
  std::vector<FitStep> trace;
  trace.reserve(static_cast<std::size_t>(steps) + 1);

  for (int step = 0; step <= steps; ++step) {
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double zsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      probs[i] = std::exp(logits[i] - zmax);
      zsum += probs[i];
    }
    for (double& q : probs) q /= zsum;

    const DisparityPmf pmf(hypotheses, probs);
    const double y = solve_l1(pmf, cfg).y_star;
    trace.push_back(FitStep{smooth_l1_loss(y, target), y});
    if (step == steps) break;

    const PmfGradient g = implicit_gradient(pmf, cfg, y);
    const double dl_dy = smooth_l1_grad(y, target);
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += g.components[i] * probs[i];
    }
    // softmax Jacobian: dp_i/dz_k = p_i (delta_ik - p_k)
    for (std::size_t k = 0; k < n; ++k) {
      logits[k] -= lr * dl_dy * probs[k] * (g.components[k] - dot);
    }
  }
  return trace;
}

}  // namespace stereorisk
