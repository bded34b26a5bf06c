#pragma once

// Experiment drivers: the epsilon sweep comparing the transformed and
// averaged solutions, its perturbed-datum variant, the Lipschitz probe and
// the bundled verification suite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmnls/errors.hpp"
#include "dmnls/fiber_model.hpp"
#include "dmnls/grid_spectral.hpp"
#include "dmnls/nonlinearities.hpp"
#include "dmnls/propagators.hpp"
#include "dmnls/quadrature.hpp"
#include "dmnls/snapshot_io.hpp"
#include "dmnls/solvers.hpp"

namespace dmnls {

struct InitialDatum {
  double amplitude = 1.0;
  double width = 1.0;
  double center = 0.0;
  double chirp = 0.0;
  std::string snapshot_path;  // when set, overrides the Gaussian parameters
};

struct RunConfig {
  std::size_t n = 512;
  double length = 16.0 * std::numbers::pi;
  FiberParams fiber{0.1, 0.2, 0.5};
  InitialDatum initial;
  double t_end = 1.0;
  double dt = 1e-3;
  int steps_per_half_cell = 20;
  int quad_nodes = 32;
  int snapshot_stride = 10;  // RK4 steps between snapshots; sets the shared snapshot grid
  std::uint64_t seed = 20211;

  void validate() const {
    fiber.validate();
    if (quad_nodes < 1) throw std::invalid_argument("quad_nodes must be >= 1");
    solve_config().validate();
  }

  GridPtr make_grid() const { return SpatialGrid::make(n, length); }

  /// Initial datum on `grid`; a snapshot file must match the grid exactly.
  ComplexField initial_field(const GridPtr& grid) const {
    if (!initial.snapshot_path.empty()) {
      auto [field, t] = snapshot_read(initial.snapshot_path);
      if (!(field.grid() == *grid)) {
        throw std::invalid_argument("snapshot " + initial.snapshot_path +
                                    " does not match the configured grid");
      }
      return ComplexField(grid, {field.values().begin(), field.values().end()});
    }
    return gaussian_profile(grid, initial.amplitude, initial.width, initial.center,
                            initial.chirp);
  }

  SolveConfig solve_config() const {
    SolveConfig c;
    c.t_end = t_end;
    c.dt = dt;
    c.steps_per_half_cell = steps_per_half_cell;
    c.snapshot_stride = snapshot_stride;
    c.quadrature = gauss_legendre(quad_nodes);
    return c;
  }

  double snapshot_interval() const { return snapshot_stride * dt; }
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares fit of log(y) against log(x).
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit needs >= 2 points");
  const double m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

struct SweepResult {
  std::vector<double> eps_values;  // decreasing
  std::vector<double> errors;      // sup_t ||v_eps(t) - v(t)||_{H1} on the shared grid
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> initial_offsets;     // ||u0 - v0||_{H1} per eps
  std::vector<bool> hypothesis_violating;  // initial offset exceeded eps
  std::vector<std::size_t> inversions;     // i with errors[i+1] > errors[i]
};

/// A solve inside a sweep failed; `partial` holds the entries completed so far.
class SweepAborted : public Error {
 public:
  SweepAborted(SweepResult partial, const std::string& what)
      : Error(what), partial_(std::move(partial)) {}
  const SweepResult& partial() const { return partial_; }

 private:
  SweepResult partial_;
};

namespace detail {

inline int aligned_stride(double interval, double step, const std::string& what) {
  const double q = interval / step;
  const double r = std::round(q);
  if (r < 1.0 || std::abs(q - r) > 1e-9 * q) {
    throw std::invalid_argument("snapshot interval " + std::to_string(interval) +
                                " is not a multiple of the " + what + " step " +
                                std::to_string(step));
  }
  return static_cast<int>(r);
}

inline void validate_eps_list(const std::vector<double>& eps_list) {
  if (eps_list.size() < 3) throw std::invalid_argument("eps sweep needs at least 3 values");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw std::invalid_argument("eps values must be > 0");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) {
      throw std::invalid_argument("eps values must be strictly decreasing");
    }
  }
  if (eps_list.front() > 0.25) throw std::invalid_argument("eps values must be <= 0.25");
}

// Transformed solutions for each eps from u0_for(eps), compared with the
// averaged solution started from v0. Solves run concurrently; results are
// gathered in eps order before fitting.
template <class InitialFor>
SweepResult run_sweep(const RunConfig& cfg, const std::vector<double>& eps_list,
                      InitialFor&& u0_for) {
  cfg.validate();
  validate_eps_list(eps_list);
  const auto grid = cfg.make_grid();
  const auto v0 = cfg.initial_field(grid);
  const double interval = cfg.snapshot_interval();

  SolveConfig averaged_cfg = cfg.solve_config();
  const auto averaged = solve_averaged(v0, cfg.fiber.gamma, cfg.fiber.d_av, averaged_cfg);

  struct Entry {
    double error;
    double offset;
  };
  std::vector<std::future<Entry>> jobs;
  for (double eps : eps_list) {
    FiberParams p = cfg.fiber;
    p.eps = eps;
    SolveConfig c = cfg.solve_config();
    c.snapshot_stride = aligned_stride(interval, eps / cfg.steps_per_half_cell, "split");
    jobs.push_back(std::async(std::launch::async, [&, eps, p, c]() {
      const auto u0 = u0_for(eps, v0);
      const auto tr = solve_transformed(u0, p, c, TransformedMethod::pullback);
      std::size_t matched = 0;
      const double err = max_h1_difference(tr, averaged, &matched);
      if (matched != averaged.size()) {
        throw std::logic_error("snapshot grids of the two solvers are not aligned");
      }
      return Entry{err, h1_norm(u0 - v0)};
    }));
  }

  SweepResult result;
  std::string failure;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      const auto e = jobs[i].get();
      if (!failure.empty()) continue;
      result.eps_values.push_back(eps_list[i]);
      result.errors.push_back(e.error);
      result.initial_offsets.push_back(e.offset);
      result.hypothesis_violating.push_back(e.offset > eps_list[i] * (1.0 + 1e-12));
    } catch (const std::exception& ex) {
      if (failure.empty()) {
        failure = "solve for eps = " + std::to_string(eps_list[i]) + " failed: " + ex.what();
      }
    }
  }
  if (!failure.empty()) throw SweepAborted(result, failure);

  for (std::size_t i = 0; i + 1 < result.errors.size(); ++i) {
    if (result.errors[i + 1] > result.errors[i]) result.inversions.push_back(i);
  }
  const auto fit = fit_loglog(result.eps_values, result.errors);
  result.slope = fit.slope;
  result.intercept = fit.intercept;
  return result;
}

}  // namespace detail

/// Averaging-rate sweep with identical initial data for both equations.
inline SweepResult sweep_epsilon(const RunConfig& cfg, const std::vector<double>& eps_list) {
  return detail::run_sweep(cfg, eps_list,
                           [](double, const ComplexField& v0) { return v0; });
}

/// Sweep with u0 = v0 + eps * scale * g / ||g||_{H1}. scale <= 1 keeps
/// ||u0 - v0||_{H1} <= eps; larger values are run and flagged.
inline SweepResult perturbed_sweep(const RunConfig& cfg, const std::vector<double>& eps_list,
                                   const ComplexField& perturbation, double scale = 1.0) {
  const double norm = h1_norm(perturbation);
  return detail::run_sweep(cfg, eps_list, [&](double eps, const ComplexField& v0) {
    if (norm == 0.0 || scale == 0.0) return v0;
    ComplexField u0 = v0;
    u0.axpy(eps * scale / norm, perturbation);
    return u0;
  });
}

struct LipschitzRow {
  double delta = 0.0;
  double difference = 0.0;  // sup_t ||v(t) - w(t)||_{H1}
  double ratio = std::numeric_limits<double>::quiet_NaN();  // difference / delta
};

struct LipschitzResult {
  std::vector<LipschitzRow> rows;
  bool stabilized = false;  // last two ratios within 20%
  bool non_growing = false;  // ratios do not increase as delta shrinks (2% slack)
};

/// Transformed solutions from v0 and v0 + delta * g/||g||_{H1} for each delta.
inline LipschitzResult lipschitz_probe(const RunConfig& cfg, const std::vector<double>& deltas,
                                       const ComplexField& direction) {
  cfg.validate();
  const double norm = h1_norm(direction);
  if (norm == 0.0) throw std::invalid_argument("perturbation direction must be nonzero");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] >= 0.0)) throw std::invalid_argument("deltas must be >= 0");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) {
      throw std::invalid_argument("deltas must be decreasing");
    }
  }
  const auto grid = cfg.make_grid();
  const auto v0 = cfg.initial_field(grid);
  const auto c = cfg.solve_config();
  const auto base = solve_transformed(v0, cfg.fiber, c);

  LipschitzResult result;
  for (double delta : deltas) {
    LipschitzRow row;
    row.delta = delta;
    if (delta > 0.0) {
      ComplexField w0 = v0;
      w0.axpy(delta / norm, direction);
      row.difference = max_h1_difference(base, solve_transformed(w0, cfg.fiber, c));
      row.ratio = row.difference / delta;
    }
    result.rows.push_back(row);
  }

  std::vector<double> ratios;
  for (const auto& r : result.rows) {
    if (r.delta > 0.0) ratios.push_back(r.ratio);
  }
  if (ratios.size() >= 2) {
    const double a = ratios[ratios.size() - 2];
    const double b = ratios.back();
    result.stabilized = std::abs(b - a) < 0.2 * std::abs(a);
    result.non_growing = true;
    for (std::size_t i = 1; i < ratios.size(); ++i) {
      if (ratios[i] > 1.02 * ratios[i - 1]) result.non_growing = false;
    }
  }
  return result;
}

/// Smooth random field: Gaussian envelope times a random trigonometric
/// polynomial with unit-variance complex coefficients for |k| <= modes.
inline ComplexField random_smooth_field(const GridPtr& grid, std::mt19937_64& rng,
                                        int modes = 6, double width = 2.0) {
  std::normal_distribution<double> normal;
  ComplexField f(grid);
  const double base = 2.0 * std::numbers::pi / 8.0;
  std::vector<Complex> coeff(2 * modes + 1);
  for (auto& c : coeff) c = {normal(rng), normal(rng)};
  const double shift = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
  for (std::size_t j = 0; j < grid->n(); ++j) {
    const double x = grid->x(j);
    Complex s{};
    for (int k = -modes; k <= modes; ++k) s += coeff[k + modes] * std::polar(1.0, base * k * x);
    const double y = x - shift;
    f[j] = s * std::exp(-y * y / (2.0 * width * width));
  }
  return f;
}

struct CheckRecord {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::optional<double> target;  // set for two-sided checks |value - target| <= tolerance
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckRecord> checks;
  double seconds = 0.0;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }
};

inline nlohmann::json to_json(const CheckRecord& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["value"] = std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(nullptr);
  j["tolerance"] = c.tolerance;
  if (c.target) j["target"] = *c.target;
  j["pass"] = c.pass;
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

inline std::string to_jsonl(const VerifyReport& report) {
  std::string out;
  for (const auto& c : report.checks) out += to_json(c).dump() + "\n";
  return out;
}

namespace detail {

inline constexpr double resolution_threshold = 1e-10;

inline CheckRecord upper_bound_check(std::string name, double value, double tolerance) {
  return {std::move(name), value, tolerance, std::nullopt, value <= tolerance, {}};
}

inline CheckRecord target_check(std::string name, double value, double target, double tolerance) {
  return {std::move(name), value, tolerance, target, std::abs(value - target) <= tolerance, {}};
}

// Marks a check failed when `field` is not resolved by its grid.
inline void require_resolved(CheckRecord& check, const ComplexField& field, const char* what) {
  const double tail = spectral_tail_fraction(field);
  if (tail > resolution_threshold) {
    check.pass = false;
    if (!check.detail.empty()) check.detail += "; ";
    check.detail += std::string("under-resolved ") + what + ": spectral tail fraction " +
                    format_real(tail) + " > " + format_real(resolution_threshold);
  }
}

inline double relative_mass_drift(const Trajectory& tr) {
  const double m0 = tr.diagnostics.front().mass;
  double worst = 0.0;
  for (const auto& d : tr.diagnostics) worst = std::max(worst, std::abs(d.mass / m0 - 1.0));
  return worst;
}

}  // namespace detail

/// Every registered check runs and is reported exactly once; a check that
/// throws is reported as failed with the exception text.
inline VerifyReport verify_suite(const RunConfig& cfg) {
  using detail::target_check;
  using detail::upper_bound_check;
  const auto start = std::chrono::steady_clock::now();
  VerifyReport report;

  auto run = [&](const std::string& name, auto&& body) {
    try {
      report.checks.push_back(body());
    } catch (const std::exception& e) {
      CheckRecord failed;
      failed.name = name;
      failed.value = std::numeric_limits<double>::quiet_NaN();
      failed.detail = std::string("error: ") + e.what();
      report.checks.push_back(failed);
    }
  };

  const auto grid = cfg.make_grid();
  const auto u0 = cfg.initial_field(grid);
  const FiberParams& fiber = cfg.fiber;

  run("unitarity_random_fields", [&] {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> time(-2.0, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto f = random_smooth_field(grid, rng);
      const double s = time(rng), t = time(rng), t2 = time(rng);
      const auto a = linear_propagator(f, s, t, fiber);
      const auto b = free_evolution(f, s);
      const double l2 = l2_norm(f), h1 = h1_norm(f);
      worst = std::max({worst, std::abs(l2_norm(a) / l2 - 1.0), std::abs(h1_norm(a) / h1 - 1.0),
                        std::abs(l2_norm(b) / l2 - 1.0), std::abs(h1_norm(b) / h1 - 1.0)});
      const auto chained = linear_propagator(a, t, t2, fiber);
      const auto direct = linear_propagator(f, s, t2, fiber);
      worst = std::max(worst, h1_norm(chained - direct) / h1);
    }
    return upper_bound_check("unitarity_random_fields", worst, 1e-12);
  });

  run("kernel_identity", [&] {
    const auto r = kernel_identity_check(u0, fiber, gauss_legendre(cfg.quad_nodes), 1e-8);
    auto c = upper_bound_check("kernel_identity", r.discrepancy, 1e-8);
    c.detail = "time-quadrature evaluations " + std::to_string(r.evaluations);
    return c;
  });

  run("dispersive_decay", [&] {
    FiberParams p = fiber;
    p.eps = 1.0;
    p.include_amplifier_atom = false;
    const double ratio = dispersive_decay_ratio(u0, 0.1, 0.9, p);
    auto c = upper_bound_check("dispersive_decay", ratio, 1.02);
    detail::require_resolved(c, u0, "initial datum");
    detail::require_resolved(c, linear_propagator(u0, 0.1, 0.9, p), "propagated datum");
    return c;
  });

  run("dispersive_decay_resonant_rejected", [&] {
    FiberParams p = fiber;
    p.eps = 1.0;
    p.d_av = 1.0;
    bool raised = false;
    try {
      dispersive_decay_ratio(u0, 1.1, 1.9, p);
    } catch (const ResonantDispersion&) {
      raised = true;
    }
    CheckRecord c{"dispersive_decay_resonant_rejected", raised ? 1.0 : 0.0, 1.0, 1.0, raised, {}};
    if (!raised) c.detail = "d_av = 1 on an odd half-cell was not rejected";
    return c;
  });

  run("mass_full_solver", [&] {
    SolveConfig c = cfg.solve_config();
    const double h = fiber.eps / cfg.steps_per_half_cell;
    c.t_end = 1e4 * h;
    c.snapshot_stride = 1000;
    const auto tr = solve_full(u0, fiber, c);
    return upper_bound_check("mass_full_solver", detail::relative_mass_drift(tr), 1e-12);
  });

  run("mass_averaged_solver", [&] {
    SolveConfig c = cfg.solve_config();
    const auto tr = solve_averaged(u0, fiber.gamma, fiber.d_av, c);
    return upper_bound_check("mass_averaged_solver", detail::relative_mass_drift(tr), 1e-8);
  });

  run("averaged_energy_conservation", [&] {
    SolveConfig c = cfg.solve_config();
    const auto tr = solve_averaged(u0, fiber.gamma, fiber.d_av, c);
    double worst = 0.0;
    for (const auto& d : tr.diagnostics) {
      worst = std::max(worst, std::abs(d.energy - tr.diagnostics.front().energy));
    }
    return upper_bound_check("averaged_energy_conservation", worst, 1e-8);
  });

  run("energy_rate_identity", [&] {
    FiberParams p = fiber;
    p.eps = 0.1;
    SolveConfig c = cfg.solve_config();
    c.snapshot_stride = 1;
    const auto coarse = solve_transformed(u0, p, c, TransformedMethod::interaction_rk4);
    c.dt = 0.5 * cfg.dt;
    const auto fine = solve_transformed(u0, p, c, TransformedMethod::interaction_rk4);
    const auto rc = energy_derivative_residual(coarse, p, EnergyRate::with_dispersion_term);
    const auto rf = energy_derivative_residual(fine, p, EnergyRate::with_dispersion_term);
    auto check = target_check("energy_rate_identity", rc.max_residual / rf.max_residual, 4.0, 0.5);
    check.detail = "residual " + format_real(rc.max_residual) + " -> " +
                   format_real(rf.max_residual) + "; amplifier jumps reported " +
                   std::to_string(rc.jumps.size());
    return check;
  });

  run("transform_equivalence", [&] {
    FiberParams p = fiber;
    p.eps = 0.05;
    SolveConfig c = cfg.solve_config();
    c.steps_per_half_cell = 500;
    c.snapshot_stride = 10;
    const auto r = compare_transformed_paths(u0, p, c);
    auto check = upper_bound_check("transform_equivalence", r.discrepancy, r.tolerance);
    check.detail = "shared times " + std::to_string(r.shared_times);
    return check;
  });

  run("strang_self_convergence", [&] {
    SolveConfig c = cfg.solve_config();
    c.snapshot_stride = std::numeric_limits<int>::max();
    std::vector<double> steps, errors;
    ComplexField finest;
    for (int m : {10, 20, 40}) {
      c.steps_per_half_cell = m;
      const auto coarse = solve_full(u0, fiber, c);
      c.steps_per_half_cell = 4 * m;
      const auto reference = solve_full(u0, fiber, c);
      steps.push_back(fiber.eps / m);
      errors.push_back(h1_norm(coarse.snapshots.back() - reference.snapshots.back()));
      finest = reference.snapshots.back();
    }
    auto check = target_check("strang_self_convergence", fit_loglog(steps, errors).slope, 2.0, 0.1);
    detail::require_resolved(check, u0, "initial datum");
    detail::require_resolved(check, finest, "final state");
    return check;
  });

  run("rk4_self_convergence", [&] {
    SolveConfig c = cfg.solve_config();
    c.snapshot_stride = std::numeric_limits<int>::max();
    c.mass_drift_budget = 1e-4;
    std::vector<double> steps, errors;
    ComplexField finest;
    for (double h : {0.04, 0.02, 0.01}) {
      c.dt = h;
      const auto coarse = solve_averaged(u0, fiber.gamma, fiber.d_av, c);
      c.dt = 0.25 * h;
      const auto reference = solve_averaged(u0, fiber.gamma, fiber.d_av, c);
      steps.push_back(h);
      errors.push_back(h1_norm(coarse.snapshots.back() - reference.snapshots.back()));
      finest = reference.snapshots.back();
    }
    auto check = target_check("rk4_self_convergence", fit_loglog(steps, errors).slope, 4.0, 0.2);
    detail::require_resolved(check, u0, "initial datum");
    detail::require_resolved(check, finest, "final state");
    return check;
  });

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace dmnls
