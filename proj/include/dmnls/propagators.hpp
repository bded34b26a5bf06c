#pragma once

// Exact linear propagators as Fourier multipliers.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dmnls/errors.hpp"
#include "dmnls/fiber_model.hpp"
#include "dmnls/grid_spectral.hpp"

namespace dmnls {

/// Free Schrodinger group: (T_t f)^(xi) = exp(-i t xi^2) fhat(xi).
template <class Real>
Field<Real> free_evolution(const Field<Real>& f, double t) {
  if (t == 0.0) return f;
  return apply_phase(f, [t](double xi) { return -Real(t) * xi * xi; });
}

/// U(t0, t1): linear flow of i u_t + d(t) u_xx = 0 from t0 to t1, applied as
/// one multiplier with phase int_{t0}^{t1} d.
template <class Real>
Field<Real> linear_propagator(const Field<Real>& f, double t0, double t1, const FiberParams& p) {
  return free_evolution(f, integral_dispersion(t0, t1, p));
}

/// ||U(t0,t1) f||_inf * sqrt(4 pi |int d|) / ||f||_1.
///
/// The exact free kernel bounds this ratio by 1. The probe is restricted to
/// t0, t1 inside one dispersion half-cell and raises ResonantDispersion when
/// the accumulated dispersion vanishes (d_av = -/+1 on the even/odd half).
inline double dispersive_decay_ratio(const ComplexField& f, double t0, double t1,
                                     const FiberParams& p) {
  if (std::floor(t0 / p.eps) != std::floor(t1 / p.eps)) {
    throw std::invalid_argument("decay probe needs t0 and t1 in the same half-cell");
  }
  const double phase = integral_dispersion(t0, t1, p);
  const double scale = (std::abs(p.d_av) + 1.0 / p.eps) * std::abs(t1 - t0);
  if (t1 == t0 || std::abs(phase) <= 1e-12 * scale) {
    throw ResonantDispersion("accumulated dispersion vanishes on [" + std::to_string(t0) +
                             ", " + std::to_string(t1) + "] (d_av = " +
                             std::to_string(p.d_av) + ")");
  }
  const double l1 = lp_norm(f, 1.0);
  if (l1 == 0.0) return 0.0;
  const double sup = lp_norm(linear_propagator(f, t0, t1, p),
                             std::numeric_limits<double>::infinity());
  return sup * std::sqrt(4.0 * std::numbers::pi * std::abs(phase)) / l1;
}

}  // namespace dmnls
