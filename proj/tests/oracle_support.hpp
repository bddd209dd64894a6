#pragma once

// Test-side reference computations, kept independent of the library's
// closed forms: densities are evaluated from the textbook formulas and
// risks by adaptive Gauss-Kronrod quadrature split at the integrand kinks.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "stereorisk/distribution.hpp"
#include "stereorisk/risk.hpp"

namespace testsupport {

inline double direct_density(const std::vector<double>& d,
                             const std::vector<double>& p,
                             stereorisk::KernelType type, double sigma,
                             double x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double u = std::abs(x - d[i]) / sigma;
    if (type == stereorisk::KernelType::Laplacian) {
      acc += p[i] * std::exp(-u) / (2.0 * sigma);
    } else {
      acc += p[i] * std::exp(-0.5 * u * u) /
             (sigma * std::sqrt(2.0 * std::numbers::pi));
    }
  }
  return acc;
}

inline double loss_value(stereorisk::ErrorNorm norm, double beta, double r) {
  switch (norm) {
    case stereorisk::ErrorNorm::L1:
      return std::abs(r);
    case stereorisk::ErrorNorm::L2:
      return r * r;
    case stereorisk::ErrorNorm::Huber: {
      const double a = std::abs(r);
      return a <= beta ? a * a / (2.0 * beta) : a - 0.5 * beta;
    }
  }
  return 0.0;
}

// Adaptive quadrature of the risk integral, segments split at the density
// kinks (hypotheses) and the loss kinks (y, y +- beta).
inline double quad_risk(const stereorisk::DisparityPmf& pmf,
                        const stereorisk::Kernel& kernel,
                        stereorisk::ErrorNorm norm, double beta, double y) {
  const auto d = pmf.hypotheses();
  const std::vector<double> dv(d.begin(), d.end());
  const std::vector<double> pv(pmf.probs().begin(), pmf.probs().end());
  const double s = kernel.sigma;
  const double tail =
      kernel.type == stereorisk::KernelType::Laplacian ? 45.0 * s : 10.0 * s;
  const double lo = std::min(dv.front(), y) - tail;
  const double hi = std::max(dv.back(), y) + tail;

  std::vector<double> cuts{lo, hi};
  for (double c : dv) cuts.push_back(c);
  for (double c : {y, y - beta, y + beta}) {
    if (c > lo && c < hi) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const auto f = [&](double x) {
    return loss_value(norm, beta, y - x) *
           direct_density(dv, pv, kernel.type, s, x);
  };
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, cuts[k], cuts[k + 1], 14, 1e-11);
  }
  return acc;
}

inline double quad_risk_l1(const stereorisk::DisparityPmf& pmf,
                           const stereorisk::Kernel& kernel, double y) {
  return quad_risk(pmf, kernel, stereorisk::ErrorNorm::L1, 1.0, y);
}

// Deterministic pmf generator for property tests.
class PmfGen {
 public:
  explicit PmfGen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  stereorisk::DisparityPmf pmf(int max_n = 64, double span = 32.0,
                               double min_prob = 0.0) {
    const int n = uniform_int(1, max_n);
    std::vector<double> d(static_cast<std::size_t>(n));
    std::vector<double> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      d[static_cast<std::size_t>(i)] = uniform(0.0, span);
      p[static_cast<std::size_t>(i)] = min_prob + uniform(0.0, 1.0);
    }
    std::sort(d.begin(), d.end());
    for (int i = 1; i < n; ++i) {
      // keep hypotheses separated so merging never changes N mid-test
      d[static_cast<std::size_t>(i)] = std::max(
          d[static_cast<std::size_t>(i)],
          d[static_cast<std::size_t>(i - 1)] + 1e-6);
    }
    double sum = 0.0;
    for (double v : p) sum += v;
    for (double& v : p) v /= sum;
    return stereorisk::DisparityPmf(std::move(d), std::move(p));
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace testsupport
