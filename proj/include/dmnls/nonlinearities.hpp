#pragma once

// The oscillating cubic nonlinearity of the transformed equation and its
// period average.
//
//   Q_eps(v)(t) = G(t/eps) T_{D(t/eps)}^{-1} ( |T_{D(t/eps)} v|^2 T_{D(t/eps)} v )
//   <Q>(v)      = int_0^1 T_r^{-1} ( |T_r v|^2 T_r v ) psi(r) dr

#include <cmath>
#include <complex>
#include <cstdlib>
#include <span>
#include <vector>

#include "dmnls/fiber_model.hpp"
#include "dmnls/grid_spectral.hpp"
#include "dmnls/propagators.hpp"
#include "dmnls/quadrature.hpp"

namespace dmnls {

namespace detail {

// Zeroes modes with |k| > n/3 of an unnormalized spectrum.
template <class C>
void truncate_two_thirds(std::span<C> spectrum) {
  const std::size_t n = spectrum.size();
  const std::size_t keep = n / 3;
  for (std::size_t k = keep + 1; k < n - keep; ++k) spectrum[k] = 0.0;
}

}  // namespace detail

/// gain * T_{-phase}( |T_phase v|^2 T_phase v )
inline ComplexField cubic_pullback(const ComplexField& v, double phase, double gain_value,
                                   bool dealias = false) {
  const auto& g = v.grid();
  const auto& plans = detail::fft_plans(g.n());
  const auto xi = g.frequencies();
  const std::size_t n = g.n();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<Complex> multiplier(n), spectrum(n), work(n);
  for (std::size_t k = 0; k < n; ++k) multiplier[k] = std::polar(1.0, -phase * xi[k] * xi[k]);

  plans.forward(v.values(), spectrum);
  for (std::size_t k = 0; k < n; ++k) spectrum[k] *= multiplier[k] * inv_n;
  plans.backward(spectrum, work);
  for (auto& z : work) z *= std::norm(z);
  plans.forward(work, spectrum);
  if (dealias) detail::truncate_two_thirds(std::span<Complex>(spectrum));
  for (std::size_t k = 0; k < n; ++k) spectrum[k] *= std::conj(multiplier[k]) * (gain_value * inv_n);
  ComplexField out(v.grid_ptr());
  plans.backward(spectrum, out.values());
  return out;
}

/// Q_eps(v) at slow time t; G and D are evaluated from their closed forms.
inline ComplexField oscillating_nonlinearity(const ComplexField& v, double t,
                                             const FiberParams& p, bool dealias = false) {
  const double s = t / p.eps;
  return cubic_pullback(v, accumulated_dispersion(s), gain(s, p), dealias);
}

/// Period-averaged nonlinearity with psi-weighted quadrature over r in [0,1].
/// Node multipliers exp(-i r_k xi^2) are tabulated once per grid; the node sum
/// is accumulated in node order so results are bit-reproducible.
template <class Real = double>
class AveragedNonlinearity {
  using C = std::complex<Real>;

 public:
  AveragedNonlinearity(GridPtr grid, double gamma, QuadratureRule rule, bool dealias = false)
      : grid_(std::move(grid)), rule_(std::move(rule)), dealias_(dealias) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
    const auto xi = grid_->frequencies();
    const std::size_t n = grid_->n();
    multipliers_.resize(rule_.size());
    coefficients_.resize(rule_.size());
    for (std::size_t q = 0; q < rule_.size(); ++q) {
      const double r = rule_.nodes[q];
      multipliers_[q].resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        multipliers_[q][k] = std::polar(Real(1), -Real(r) * xi[k] * xi[k]);
      }
      coefficients_[q] = Real(rule_.weights[q]) * averaging_kernel(r, gamma);
    }
  }

  const QuadratureRule& rule() const { return rule_; }

  /// sum_k c_k T_{-(r_k + shift)}( |T_{r_k + shift} v|^2 T_{r_k + shift} v ).
  /// shift = 0 gives <Q>(v); a nonzero shift evaluates the nonlinearity in an
  /// interaction frame rotated by T_shift.
  Field<Real> operator()(const Field<Real>& v, double shift = 0.0) const {
    return evaluate(v, Real(shift));
  }

  /// As operator() with the frame shift carried in Real.
  Field<Real> evaluate(const Field<Real>& v, Real shift) const {
    if (!(v.grid() == *grid_)) throw std::invalid_argument("grid mismatch");
    const std::size_t n = grid_->n();
    const auto& plans = detail::fft_plans<Real>(n);
    const auto xi = grid_->frequencies();
    const Real inv_n = Real(1) / static_cast<Real>(n);

    std::vector<C> vhat(n), spectrum(n), work(n), accum(n, C{});
    plans.forward(v.values(), vhat);
    if (shift != 0) {
      for (std::size_t k = 0; k < n; ++k) vhat[k] *= std::polar(Real(1), -shift * xi[k] * xi[k]);
    }
    for (std::size_t q = 0; q < rule_.size(); ++q) {
      const auto& m = multipliers_[q];
      for (std::size_t k = 0; k < n; ++k) spectrum[k] = vhat[k] * m[k] * inv_n;
      plans.backward(spectrum, work);
      for (auto& z : work) z *= std::norm(z);
      plans.forward(work, spectrum);
      const Real c = coefficients_[q];
      for (std::size_t k = 0; k < n; ++k) accum[k] += std::conj(m[k]) * spectrum[k] * c;
    }
    if (shift != 0) {
      for (std::size_t k = 0; k < n; ++k) accum[k] *= std::polar(Real(1), shift * xi[k] * xi[k]);
    }
    if (dealias_) detail::truncate_two_thirds(std::span<C>(accum));
    for (auto& z : accum) z *= inv_n;
    Field<Real> out(grid_);
    plans.backward(accum, out.values());
    return out;
  }

 private:
  GridPtr grid_;
  QuadratureRule rule_;
  bool dealias_;
  std::vector<std::vector<C>> multipliers_;
  std::vector<Real> coefficients_;
};

template <class Real>
Field<Real> averaged_nonlinearity(const Field<Real>& v, double gamma, const QuadratureRule& rule) {
  return AveragedNonlinearity<Real>(v.grid_ptr(), gamma, rule)(v);
}

struct KernelIdentityReport {
  double discrepancy = 0.0;  // H^1 norm of (time average of Q_eps) - <Q>
  double tolerance = 0.0;
  double reference_h1 = 0.0;  // H^1 norm of <Q>(v)
  int evaluations = 0;        // Q_eps evaluations used by the time quadrature
  bool pass = false;
};

/// Compares the period time average (1/2eps) int_0^{2eps} Q_eps(v,t) dt,
/// computed by adaptive Gauss-Kronrod quadrature in t, with the
/// psi-weighted r-quadrature <Q>(v). Agreement pins the gain normalization.
inline KernelIdentityReport kernel_identity_check(const ComplexField& v, const FiberParams& p,
                                                  const QuadratureRule& rule,
                                                  double tol = 1e-8) {
  p.validate();
  KernelIdentityReport report;
  report.tolerance = tol;
  auto integrand = [&](double t) { return oscillating_nonlinearity(v, t, p); };
  auto norm = [](const ComplexField& f) { return h1_norm(f); };
  const double local_tol = 1e-3 * tol * p.eps;
  // The integrand has a kink at t = eps (D turns around); split there.
  ComplexField total = integrate_adaptive<ComplexField>(integrand, 0.0, p.eps, local_tol, norm,
                                                        &report.evaluations);
  total += integrate_adaptive<ComplexField>(integrand, p.eps, 2.0 * p.eps, local_tol, norm,
                                            &report.evaluations);
  total *= Complex(1.0 / (2.0 * p.eps));
  const auto averaged = averaged_nonlinearity(v, p.gamma, rule);
  report.reference_h1 = h1_norm(averaged);
  report.discrepancy = h1_norm(total - averaged);
  report.pass = report.discrepancy <= tol;
  return report;
}

}  // namespace dmnls
