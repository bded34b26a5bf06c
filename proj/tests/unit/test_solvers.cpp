#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dmnls/solvers.hpp"
#include "support.hpp"

namespace dmnls {
namespace {

using test::default_grid;
using test::max_abs_diff;
using test::random_field;

const double pi = std::numbers::pi;

ComplexField single_mode(const GridPtr& g, std::size_t k, double a) {
  const double xi = g->frequencies()[k];
  ComplexField f(g);
  for (std::size_t j = 0; j < g->n(); ++j) f[j] = a * std::polar(1.0, xi * g->x(j));
  return f;
}

SolveConfig short_run(double t_end = 0.2) {
  SolveConfig c;
  c.t_end = t_end;
  c.snapshot_stride = 10;
  return c;
}

TEST(StrangStep, SingleModePlaneWave) {
  const auto g = default_grid();
  const double a = 0.8;
  const auto u = single_mode(g, 4, a);
  const double xi = g->frequencies()[4];
  for (double gamma : {0.0, 0.2}) {
    const FiberParams p{0.1, gamma, 0.5};
    const double t = 0.12, dt = 0.005;
    const double phi = integral_dispersion(t, t + dt, p);
    ComplexField expected = u;
    expected *= std::polar(1.0, -phi * xi * xi) * std::polar(1.0, a * a * integral_gain(t, t + dt, p));
    EXPECT_LT(max_abs_diff(strang_step(u, t, dt, p), expected), 1e-13) << gamma;
  }
}

TEST(StrangStep, ZeroAndSmallSteps) {
  const auto g = default_grid();
  const FiberParams p{0.1, 0.2, 0.5};
  ComplexField zero(g);
  EXPECT_EQ(h1_norm(strang_step(zero, 0.0, 0.005, p)), 0.0);
  const auto u = gaussian_profile(g, 1.0, 1.0);
  EXPECT_LT(h1_norm(strang_step(u, 0.01, 1e-9, p) - u), 1e-7);
  EXPECT_THROW(strang_step(u, 0.09, 0.02, p), BreakpointCrossed);
  EXPECT_THROW(strang_step(u, 0.0, 0.0, p), std::invalid_argument);
}

TEST(SolveFull, ZeroDatumStaysZero) {
  const FiberParams p{0.1, 0.2, 0.5};
  const auto tr = solve_full(ComplexField(default_grid()), p, short_run());
  for (const auto& f : tr.snapshots) EXPECT_EQ(h1_norm(f), 0.0);
}

TEST(SolveFull, MassConservation) {
  const FiberParams p{0.1, 0.2, 0.5};
  SolveConfig c = short_run(10.0);  // 2000 steps
  c.snapshot_stride = 100;
  const auto tr = solve_full(gaussian_profile(default_grid(), 1.0, 1.0), p, c);
  for (const auto& d : tr.diagnostics) EXPECT_NEAR(d.mass / tr.diagnostics[0].mass, 1.0, 1e-12);
}

TEST(SolveFull, MergedHalfStepsMatchSingleSteps) {
  const FiberParams p{0.1, 0.2, 0.5};
  const auto u0 = gaussian_profile(default_grid(), 1.0, 1.0);
  SolveConfig c = short_run(0.3);
  c.snapshot_stride = 1000;
  const auto tr = solve_full(u0, p, c);
  ComplexField u = u0;
  const double dt = p.eps / c.steps_per_half_cell;
  for (int k = 0; k < 60; ++k) u = strang_step(u, k * dt, dt, p);
  EXPECT_LE(h1_norm(tr.snapshots.back() - u), 1e-13);
  EXPECT_NEAR(tr.times.back(), 0.3, 1e-15);
}

TEST(SolveFull, GrowthMonitorAborts) {
  detail::GrowthMonitor monitor(1.0, 1e3);
  const auto g = default_grid();
  ComplexField big = gaussian_profile(g, 2000.0, 1.0);
  EXPECT_THROW(monitor.check(big, 0.5), BlowUp);
  ComplexField bad = gaussian_profile(g, 1.0, 1.0);
  bad[10] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(monitor.check(bad, 0.5), BlowUp);
}

TEST(SolveTransformed, AgreesWithLabAtCellBoundaries) {
  const FiberParams p{0.1, 0.2, 0.5};
  const auto u0 = gaussian_profile(default_grid(), 1.0, 1.0);
  SolveConfig c = short_run(0.4);
  c.snapshot_stride = 40;  // every 2 eps
  const auto lab = solve_full(u0, p, c);
  const auto pulled = solve_transformed(u0, p, c);
  ASSERT_EQ(lab.size(), pulled.size());
  for (std::size_t i = 0; i < lab.size(); ++i) {
    EXPECT_EQ(max_abs_diff(lab.snapshots[i], pulled.snapshots[i]), 0.0);
    EXPECT_NEAR(pulled.diagnostics[i].mass, lab.diagnostics[i].mass, 1e-13);
  }
}

TEST(SolveTransformed, TwoRoutesAgree) {
  const FiberParams p{0.1, 0.2, 0.5};
  const auto u0 = gaussian_profile(default_grid(), 1.0, 1.0);
  SolveConfig c = short_run(0.4);
  c.steps_per_half_cell = 100;
  const auto report = compare_transformed_paths(u0, p, c);
  EXPECT_TRUE(report.pass) << report.discrepancy << " vs " << report.tolerance;
  EXPECT_GE(report.shared_times, 10u);
}

TEST(SolveTransformed, RejectsMisalignedStep) {
  const FiberParams p{0.1, 0.2, 0.5};
  SolveConfig c = short_run();
  c.dt = 0.003;
  EXPECT_THROW(solve_transformed(gaussian_profile(default_grid(), 1.0, 1.0), p, c,
                                 TransformedMethod::interaction_rk4),
               std::invalid_argument);
}

TEST(SolveAveraged, ZeroAndMass) {
  const auto g = default_grid();
  const auto zero = solve_averaged(ComplexField(g), 0.2, 0.5, short_run());
  for (const auto& f : zero.snapshots) EXPECT_EQ(h1_norm(f), 0.0);
  SolveConfig c = short_run(1.0);
  const auto tr = solve_averaged(gaussian_profile(g, 1.0, 1.0), 0.2, 0.5, c);
  for (const auto& d : tr.diagnostics) {
    EXPECT_NEAR(d.mass / tr.diagnostics[0].mass, 1.0, 1e-8);
    EXPECT_NEAR(d.energy, tr.diagnostics[0].energy, 1e-8);
  }
}

TEST(SolveAveraged, ExtendedPrecisionMatchesDouble) {
  const auto g = default_grid();
  SolveConfig c = short_run(0.2);
  c.dt = 1e-2;
  const auto v0 = gaussian_profile(g, 1.0, 1.0);
  const auto lo = solve_averaged(v0, 0.2, 0.5, c);
  const auto hi = solve_averaged(Field<long double>(v0), 0.2, 0.5, c);
  ASSERT_EQ(lo.size(), hi.size());
  const ComplexField rounded(hi.snapshots.back());
  EXPECT_LT(h1_norm(rounded - lo.snapshots.back()), 1e-12);
  EXPECT_GT(h1_norm(rounded - lo.snapshots.back()), 0.0);
  EXPECT_NEAR(hi.diagnostics.back().energy, lo.diagnostics.back().energy, 1e-12);
}

TEST(SolveAveraged, ExtendedPrecisionRoundTrip) {
  std::mt19937_64 rng(7);
  const ComplexField f = random_field(default_grid(), rng);
  const Field<long double> hi(f);
  const auto back = apply_multiplier(hi, [](double) { return 1.0L; });
  long double worst = 0;
  for (std::size_t j = 0; j < f.size(); ++j) worst = std::max(worst, std::abs(back[j] - hi[j]));
  EXPECT_LT(static_cast<double>(worst), 1e-17);
}

TEST(SolveAveraged, CoarseStepTripsDriftGuard) {
  SolveConfig c = short_run(1.0);
  c.dt = 0.25;
  c.snapshot_stride = 1;
  EXPECT_ANY_THROW(solve_averaged(gaussian_profile(default_grid(), 3.0, 0.5), 0.2, 0.5, c));
}

TEST(Solvers, GaugeEquivariance) {
  const FiberParams p{0.1, 0.2, 0.5};
  std::mt19937_64 rng(40);
  const auto u0 = random_field(default_grid(), rng);
  const Complex phase = std::polar(1.0, -1.1);
  ComplexField rotated = u0;
  rotated *= phase;
  const auto c = short_run(0.1);
  auto check = [&](const Trajectory& a, const Trajectory& b) {
    ComplexField expected = a.snapshots.back();
    expected *= phase;
    EXPECT_LE(h1_norm(b.snapshots.back() - expected), 1e-12 * h1_norm(expected));
  };
  check(solve_full(u0, p, c), solve_full(rotated, p, c));
  check(solve_transformed(u0, p, c, TransformedMethod::interaction_rk4),
        solve_transformed(rotated, p, c, TransformedMethod::interaction_rk4));
  check(solve_averaged(u0, 0.2, 0.5, c), solve_averaged(rotated, 0.2, 0.5, c));
}

TEST(Energy, GaussianQuarticExample) {
  const auto v = gaussian_profile(default_grid(), 1.0, 1.0);
  const FiberParams p{0.1, 0.2, 0.0};
  EXPECT_NEAR(energy(v, 0.0, p), -std::sqrt(pi / 2.0) / 4.0, 1e-10);
  EXPECT_NEAR(energy(v, 0.0, p), -0.31332853, 1e-8);
  EXPECT_EQ(energy(ComplexField(default_grid()), 0.3, p), 0.0);
}

TEST(Energy, QuarticRateMatchesFiniteDifference) {
  std::mt19937_64 rng(41);
  const auto v = random_field(default_grid(), rng);
  const double s = 0.37, h = 1e-4;
  const double fd = (quartic_integral(v, s + h) - quartic_integral(v, s - h)) / (2 * h);
  EXPECT_NEAR(quartic_integral_rate(v, s), fd, 1e-6 * std::abs(fd) + 1e-9);
}

TEST(Energy, ResidualWithDispersionTermIsSmall) {
  const FiberParams p{0.1, 0.2, 0.5};
  SolveConfig c = short_run(0.4);
  c.snapshot_stride = 1;
  const auto tr = solve_transformed(gaussian_profile(default_grid(), 1.0, 1.0), p, c,
                                    TransformedMethod::interaction_rk4);
  const auto full = energy_derivative_residual(tr, p, EnergyRate::with_dispersion_term);
  EXPECT_LT(full.max_residual, 1e-3);
  EXPECT_EQ(full.jumps.size(), 2u);
  for (const auto& j : full.jumps) EXPECT_GT(j.jump, -1e9);
  EXPECT_GT(full.intervals_skipped, 0u);
  const auto gain_only = energy_derivative_residual(tr, p, EnergyRate::gain_only);
  EXPECT_GT(gain_only.max_residual, 100 * full.max_residual);
}

}  // namespace
}  // namespace dmnls
