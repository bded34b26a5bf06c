#pragma once

// Coefficient functions of a strongly dispersion-managed fiber with lumped
// amplification:
//
//   dispersion   d(t) = d_av + (1/eps) d0(t/eps),  d0 = +1 on [0,1), -1 on [1,2)
//   gain         G(t/eps),  G(s) = exp(-gamma * (s mod 2))
//
// d0 and G are 2-periodic and right-continuous. The amplifier at s = 2j resets
// the gain to 1; the power then decays to exp(-2 gamma) before the next
// amplifier.

#include <cmath>
#include <stdexcept>

namespace dmnls {

struct FiberParams {
  double eps = 0.1;
  double gamma = 0.0;
  double d_av = 0.0;
  // Test hook: count the amplifier atom at s = 0 inside the cell, giving
  // G(s) = exp(2 gamma) exp(-gamma s). Only used as a negative control.
  bool include_amplifier_atom = false;

  void validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be > 0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
      throw std::invalid_argument("gamma must be >= 0");
    }
    if (!std::isfinite(d_av)) throw std::invalid_argument("d_av must be finite");
  }
};

namespace detail {

struct PeriodPosition {
  double cell;   // floor(s / 2)
  double phase;  // s mod 2 in [0, 2)
};

inline PeriodPosition split_period(double s) {
  PeriodPosition pos{std::floor(0.5 * s), 0.0};
  pos.phase = s - 2.0 * pos.cell;
  if (pos.phase >= 2.0) {
    pos.phase = 0.0;
    pos.cell += 1.0;
  }
  return pos;
}

inline double period_phase(double s) { return split_period(s).phase; }

// (1 - exp(-gamma r)) / gamma with the gamma -> 0 limit r.
inline double decay_integral(double gamma, double r) {
  return gamma == 0.0 ? r : -std::expm1(-gamma * r) / gamma;
}

}  // namespace detail

/// Mean-zero part of the dispersion, d0(s).
inline double dispersion_profile(double s) {
  return detail::period_phase(s) < 1.0 ? 1.0 : -1.0;
}

/// Accumulated mean-zero dispersion D(s) = int_0^s d0, a triangle wave in [0,1].
inline double accumulated_dispersion(double s) {
  const double r = detail::period_phase(s);
  return r <= 1.0 ? r : 2.0 - r;
}

/// Gain G at fast time s (= t/eps).
inline double gain(double s, const FiberParams& p) {
  const double g = std::exp(-p.gamma * detail::period_phase(s));
  return p.include_amplifier_atom ? g * std::exp(2.0 * p.gamma) : g;
}

/// Gain at period phase r in [0, 2]; r = 2 gives the value just before the
/// amplifier.
inline double gain_at_phase(double r, const FiberParams& p) {
  const double g = std::exp(-p.gamma * r);
  return p.include_amplifier_atom ? g * std::exp(2.0 * p.gamma) : g;
}

/// Averaging kernel psi(r) = exp(-gamma) cosh(gamma (r - 1)) on [0, 1].
inline double averaging_kernel(double r, double gamma) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::domain_error("averaging kernel needs r in [0,1]");
  if (gamma == 0.0) return 1.0;
  return std::exp(-gamma) * std::cosh(gamma * (r - 1.0));
}

/// int_0^1 psi(r) dr = (1 - exp(-2 gamma)) / (2 gamma).
inline double averaging_kernel_integral(double gamma) {
  return 0.5 * detail::decay_integral(gamma, 2.0);
}

/// Exact int_{t0}^{t1} d(t) dt.
inline double integral_dispersion(double t0, double t1, const FiberParams& p) {
  return p.d_av * (t1 - t0) + accumulated_dispersion(t1 / p.eps) -
         accumulated_dispersion(t0 / p.eps);
}

/// Exact int_{t0}^{t1} G(t/eps) dt, summed cell by cell between amplifiers.
inline double integral_gain(double t0, double t1, const FiberParams& p) {
  if (t1 < t0) throw std::invalid_argument("integral_gain requires t0 <= t1");
  const double s0 = t0 / p.eps;
  const double s1 = t1 / p.eps;
  const auto [cell0, r0] = detail::split_period(s0);
  const auto [cell1, r1] = detail::split_period(s1);
  double total;
  if (cell0 == cell1) {
    total = std::exp(-p.gamma * r0) * detail::decay_integral(p.gamma, r1 - r0);
  } else {
    const double full = detail::decay_integral(p.gamma, 2.0);
    total = (cell1 - cell0 - 1.0) * full;
    total += std::exp(-p.gamma * r0) * detail::decay_integral(p.gamma, 2.0 - r0);
    total += detail::decay_integral(p.gamma, r1);
  }
  if (p.include_amplifier_atom) total *= std::exp(2.0 * p.gamma);
  return p.eps * total;
}

}  // namespace dmnls
