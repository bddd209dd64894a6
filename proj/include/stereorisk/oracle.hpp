#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "stereorisk/distribution.hpp"
#include "stereorisk/errors.hpp"
#include "stereorisk/risk.hpp"

namespace stereorisk {

/// Brute-force reference minimizer for the risk solvers.
///
/// Evaluates the risk integral by composite midpoint quadrature on a dense
/// lattice and scans the disparity grid {d_1, d_1 + step, ...} for the
/// minimizer, ties broken toward the smaller disparity. Deliberately avoids
/// the closed forms in risk.hpp: the density is accumulated numerically on
/// the lattice (for the Laplacian kernel through an exact two-sided
/// exponential recursion, for the Gaussian by truncated per-component
/// accumulation) and the loss sums are reduced through prefix sums, so the
/// whole evaluation shares no algebra with the solver it checks.
inline double oracle_grid_minimize(const DisparityPmf& pmf,
                                   const RiskConfig& cfg, double step) {
  validate(cfg);
  if (!std::isfinite(step) || step <= 0.0) {
    throw InputError("oracle_grid_minimize: step must be positive");
  }
  const auto d = pmf.hypotheses();
  const auto p = pmf.probs();
  const std::size_t n = pmf.size();
  if (n == 1) {
    return d.front();
  }
  const double span = d.back() - d.front();
  if (step > span) {
    throw InputError("oracle_grid_minimize: step larger than hypothesis span");
  }

  const double s = cfg.kernel.sigma;
  const bool laplacian = cfg.kernel.type == KernelType::Laplacian;

  // Lattice step h divides the grid step so every grid node lands exactly
  // on a lattice node; the |y - x| kink then falls on a node and the sum
  // splits cleanly. h additionally resolves the kernel bandwidth.
  const int substeps = std::max(1, static_cast<int>(std::ceil(step / (s / 50.0))));
  const double h = step / substeps;
  const double tail = (laplacian ? 45.0 : 10.0) * s;  // truncation below 1e-18
  const std::int64_t k_tail = static_cast<std::int64_t>(std::ceil(tail / h));
  const std::int64_t n_grid =
      static_cast<std::int64_t>(std::floor(span / step * (1.0 + 1e-12)));
  const std::int64_t k_count = k_tail * 2 + n_grid * substeps + 1;
  if (k_count > 20'000'000) {
    throw InputError("oracle_grid_minimize: lattice too large for this step");
  }
  const double x0 = d.front() - static_cast<double>(k_tail) * h;
  const auto node = [&](std::int64_t k) {
    return x0 + static_cast<double>(k) * h;
  };

  // Density at every lattice node.
  std::vector<double> dens(static_cast<std::size_t>(k_count), 0.0);
  if (laplacian) {
    // Forward pass: sum of p_i e^{-(x_k - d_i)/s} over d_i <= x_k.
    // Backward pass: the strict complement. Both are exact recursions.
    const double decay = std::exp(-h / s);
    double carry = 0.0;
    std::size_t next = 0;
    for (std::int64_t k = 0; k < k_count; ++k) {
      carry *= decay;
      const double x = node(k);
      while (next < n && d[next] <= x) {
        carry += p[next] * std::exp(-(x - d[next]) / s);
        ++next;
      }
      dens[static_cast<std::size_t>(k)] += carry;
    }
    carry = 0.0;
    std::ptrdiff_t prev = static_cast<std::ptrdiff_t>(n) - 1;
    for (std::int64_t k = k_count - 1; k >= 0; --k) {
      carry *= decay;
      const double x = node(k);
      while (prev >= 0 && d[static_cast<std::size_t>(prev)] > x) {
        carry += p[static_cast<std::size_t>(prev)] *
                 std::exp(-(d[static_cast<std::size_t>(prev)] - x) / s);
        --prev;
      }
      dens[static_cast<std::size_t>(k)] += carry;
    }
    const double scale = 1.0 / (2.0 * s);
    for (double& v : dens) v *= scale;
  } else {
    const double norm = 1.0 / (s * std::sqrt(2.0 * std::numbers::pi));
    const std::int64_t reach = static_cast<std::int64_t>(std::ceil(9.0 * s / h));
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t kc =
          static_cast<std::int64_t>(std::llround((d[i] - x0) / h));
      const std::int64_t ka = std::max<std::int64_t>(0, kc - reach);
      const std::int64_t kb = std::min<std::int64_t>(k_count - 1, kc + reach);
      for (std::int64_t k = ka; k <= kb; ++k) {
        const double z = (node(k) - d[i]) / s;
        dens[static_cast<std::size_t>(k)] += p[i] * norm * std::exp(-0.5 * z * z);
      }
    }
  }

  // Prefix sums of mass, first and second moments over the lattice.
  std::vector<double> mass(dens.size()), mom1(dens.size()), mom2(dens.size());
  double am = 0.0, a1 = 0.0, a2 = 0.0;
  for (std::int64_t k = 0; k < k_count; ++k) {
    const double w = dens[static_cast<std::size_t>(k)] * h;
    const double x = node(k);
    am += w;
    a1 += x * w;
    a2 += x * x * w;
    mass[static_cast<std::size_t>(k)] = am;
    mom1[static_cast<std::size_t>(k)] = a1;
    mom2[static_cast<std::size_t>(k)] = a2;
  }
  const auto pre = [](const std::vector<double>& v, std::int64_t k) {
    return k < 0 ? 0.0 : v[static_cast<std::size_t>(k)];
  };
  const double total_mass = am, total_mom1 = a1, total_mom2 = a2;

  const double beta = cfg.huber_beta;
  const std::int64_t beta_reach =
      cfg.norm == ErrorNorm::Huber
          ? static_cast<std::int64_t>(std::floor(beta / h * (1.0 + 1e-12)))
          : 0;

  const auto risk_at = [&](std::int64_t ky) {
    const double y = node(ky);
    switch (cfg.norm) {
      case ErrorNorm::L1:
        return y * (2.0 * pre(mass, ky) - total_mass) + total_mom1 -
               2.0 * pre(mom1, ky);
      case ErrorNorm::L2:
        return y * y * total_mass - 2.0 * y * total_mom1 + total_mom2;
      case ErrorNorm::Huber: {
        // Quadratic core on |y - x| <= beta, L1 flanks shifted by beta/2.
        const std::int64_t ka = ky - beta_reach;
        const std::int64_t kb = std::min(ky + beta_reach, k_count - 1);
        const double m_in = pre(mass, kb) - pre(mass, ka - 1);
        const double s1_in = pre(mom1, kb) - pre(mom1, ka - 1);
        const double s2_in = pre(mom2, kb) - pre(mom2, ka - 1);
        const double core = (y * y * m_in - 2.0 * y * s1_in + s2_in) / (2.0 * beta);
        const double m_lo = pre(mass, ka - 1);
        const double s1_lo = pre(mom1, ka - 1);
        const double m_hi = total_mass - pre(mass, kb);
        const double s1_hi = total_mom1 - pre(mom1, kb);
        const double flanks = (y * m_lo - s1_lo) + (s1_hi - y * m_hi) -
                              0.5 * beta * (m_lo + m_hi);
        return core + flanks;
      }
    }
    return 0.0;
  };

  double best = risk_at(k_tail);
  std::int64_t best_j = 0;
  for (std::int64_t j = 1; j <= n_grid; ++j) {
    const double f = risk_at(k_tail + j * substeps);
    if (f < best) {
      best = f;
      best_j = j;
    }
  }
  return node(k_tail + best_j * substeps);
}

}  // namespace stereorisk
