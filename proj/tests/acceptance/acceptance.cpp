// Acceptance runner. Each criterion prints one line
//   criterion N [name]: PASS|FAIL <measured values>
// followed by indented supplementary lines. Exit status is 0 iff every
// selected criterion passes.
//
// usage: acceptance [--criterion N]... [--cli PATH]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "dmnls/harness.hpp"

namespace fs = std::filesystem;
using namespace dmnls;

namespace {

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> info;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

RunConfig defaults() { return RunConfig{}; }

std::string cli_path = DMNLS_CLI_PATH;

// ---------------------------------------------------------------------------

Outcome averaging_rate() {
  Outcome out;
  const std::vector<double> eps_list{0.1, 0.05, 0.025, 0.0125};
  const auto start = std::chrono::steady_clock::now();
  bool slopes_ok = true;
  std::ostringstream summary;
  for (double gamma : {0.0, 0.2}) {
    RunConfig cfg = defaults();
    cfg.fiber.gamma = gamma;
    const auto r = sweep_epsilon(cfg, eps_list);
    const bool ok = r.slope >= 0.8 && r.slope <= 1.15;
    slopes_ok = slopes_ok && ok;
    summary << "gamma " << gamma << " slope " << num(r.slope) << "; ";
    std::ostringstream errors;
    for (double e : r.errors) errors << ' ' << num(e);
    out.info.push_back("gamma " + num(gamma) + " errors" + errors.str() +
                       (r.inversions.empty() ? ", monotone" : ", NOT monotone"));
  }
  const double elapsed = seconds_since(start);
  summary << "runtime " << num(elapsed) << " s (limit 120)";
  out.pass = slopes_ok && elapsed <= 120.0;
  out.summary = summary.str();

  // Supplementary: snapshot-grid sensitivity and a perturbed datum.
  RunConfig fine = defaults();
  fine.snapshot_stride = 5;
  const auto r_fine = sweep_epsilon(fine, eps_list);
  out.info.push_back("gamma 0.2, halved snapshot interval: slope " + num(r_fine.slope));
  RunConfig cfg = defaults();
  const auto grid = cfg.make_grid();
  const auto r_pert = perturbed_sweep(cfg, eps_list, gaussian_profile(grid, 0.3, 0.7, 1.5));
  out.info.push_back("gamma 0.2, perturbed datum ||u0 - v0||_H1 = eps: slope " +
                     num(r_pert.slope));
  return out;
}

Outcome mass_conservation() {
  Outcome out;
  const RunConfig cfg = defaults();
  const auto u0 = cfg.initial_field(cfg.make_grid());

  SolveConfig full = cfg.solve_config();
  full.t_end = 1e4 * cfg.fiber.eps / cfg.steps_per_half_cell;
  full.snapshot_stride = 100;
  const auto tr_full = solve_full(u0, cfg.fiber, full);
  const double drift_full = detail::relative_mass_drift(tr_full);

  SolveConfig avg = cfg.solve_config();
  avg.snapshot_stride = 1;
  const auto tr_avg = solve_averaged(u0, cfg.fiber.gamma, cfg.fiber.d_av, avg);
  const double drift_avg = detail::relative_mass_drift(tr_avg);

  out.pass = drift_full <= 1e-12 && drift_avg <= 1e-8;
  out.summary = "full solver drift " + num(drift_full) + " over 1e4 steps (<= 1e-12), averaged " +
                num(drift_avg) + " (<= 1e-8)";
  return out;
}

Outcome kernel_identity() {
  Outcome out;
  const RunConfig cfg = defaults();
  const auto v = cfg.initial_field(cfg.make_grid());
  const auto rule = gauss_legendre(cfg.quad_nodes);
  const auto r = kernel_identity_check(v, cfg.fiber, rule, 1e-8);
  FiberParams atom = cfg.fiber;
  atom.include_amplifier_atom = true;
  const auto control = kernel_identity_check(v, atom, rule, 1e-8);
  out.pass = r.discrepancy <= 1e-8 && control.discrepancy > 1e-2;
  out.summary = "discrepancy " + num(r.discrepancy) + " (<= 1e-8), atom control " +
                num(control.discrepancy) + " (> 1e-2)";
  out.info.push_back("time-quadrature evaluations " + std::to_string(r.evaluations));
  return out;
}

Outcome transform_equivalence() {
  Outcome out;
  const RunConfig cfg = defaults();
  const auto u0 = cfg.initial_field(cfg.make_grid());
  FiberParams p = cfg.fiber;
  p.eps = 0.05;
  SolveConfig c = cfg.solve_config();
  c.steps_per_half_cell = 500;
  c.snapshot_stride = 10;
  const auto r = compare_transformed_paths(u0, p, c);
  out.pass = r.pass;
  out.summary = "H1 discrepancy " + num(r.discrepancy) + " (<= " + num(r.tolerance) + ") at " +
                std::to_string(r.shared_times) + " shared times";
  out.info.push_back("split step " + num(p.eps / c.steps_per_half_cell) + ", RK4 dt " +
                     num(c.dt) + "; with dt = RK4 step the bound would be " +
                     num(std::max(5e-7, 10.0 * c.dt * c.dt)));
  return out;
}

Outcome energy_identity() {
  Outcome out;
  const RunConfig cfg = defaults();
  const auto v0 = cfg.initial_field(cfg.make_grid());
  FiberParams p = cfg.fiber;
  SolveConfig c = cfg.solve_config();
  c.snapshot_stride = 1;
  const auto coarse = solve_transformed(v0, p, c, TransformedMethod::interaction_rk4);
  SolveConfig cf = c;
  cf.dt = 0.5 * c.dt;
  const auto fine = solve_transformed(v0, p, cf, TransformedMethod::interaction_rk4);

  // As stated: dE/dt = -(1/4) G'(t) int |T_D v|^4.
  const auto gc = energy_derivative_residual(coarse, p, EnergyRate::gain_only);
  const auto gf = energy_derivative_residual(fine, p, EnergyRate::gain_only);
  const double ratio = gc.max_residual / gf.max_residual;

  FiberParams lossless = p;
  lossless.gamma = 0.0;
  const auto tr0 = solve_transformed(v0, lossless, c, TransformedMethod::interaction_rk4);
  double drift0 = 0.0;
  for (const auto& d : tr0.diagnostics) {
    drift0 = std::max(drift0, std::abs(d.energy - tr0.diagnostics.front().energy));
  }

  out.pass = std::abs(ratio - 4.0) <= 0.5 && drift0 <= 1e-7;
  out.summary = "residual ratio " + num(ratio) + " (4 +- 0.5; residuals " +
                num(gc.max_residual) + " -> " + num(gf.max_residual) +
                "), gamma 0 energy change " + num(drift0) + " (<= 1e-7)";

  // Supplementary: the rate including the explicit D(t/eps) dependence of E.
  const auto dc = energy_derivative_residual(coarse, p, EnergyRate::with_dispersion_term);
  const auto df = energy_derivative_residual(fine, p, EnergyRate::with_dispersion_term);
  out.info.push_back("with the dispersion term: residuals " + num(dc.max_residual) + " -> " +
                     num(df.max_residual) + ", ratio " +
                     num(dc.max_residual / df.max_residual));
  const auto d0 = energy_derivative_residual(tr0, lossless, EnergyRate::with_dispersion_term);
  out.info.push_back("gamma 0 with the dispersion term: residual " + num(d0.max_residual));
  if (!gc.jumps.empty()) {
    out.info.push_back("energy jump at t = " + num(gc.jumps.front().t) + ": " +
                       num(gc.jumps.front().jump));
  }
  return out;
}

Outcome dispersive_decay() {
  Outcome out;
  const RunConfig cfg = defaults();
  const auto f = cfg.initial_field(cfg.make_grid());
  FiberParams p = cfg.fiber;
  p.eps = 1.0;
  p.d_av = 0.5;
  double worst = 0.0;
  int probes = 0;
  for (double cell : {0.0, 1.0}) {
    for (double a : {0.0, 0.05, 0.2, 0.5}) {
      for (double b : {0.1, 0.3, 0.6, 0.95}) {
        if (!(b > a)) continue;
        worst = std::max(worst, dispersive_decay_ratio(f, cell + a, cell + b, p));
        ++probes;
      }
    }
  }
  auto raises = [&](double d_av, double t0, double t1) {
    FiberParams q = p;
    q.d_av = d_av;
    try {
      dispersive_decay_ratio(f, t0, t1, q);
    } catch (const ResonantDispersion&) {
      return true;
    }
    return false;
  };
  const bool resonant = raises(1.0, 1.1, 1.9) && raises(-1.0, 0.1, 0.9);
  out.pass = worst <= 1.02 && resonant;
  out.summary = "max ratio " + num(worst) + " over " + std::to_string(probes) +
                " intervals (<= 1.02), resonant d_av = +-1 " + (resonant ? "raised" : "NOT raised");
  return out;
}

Outcome self_convergence() {
  Outcome out;
  const RunConfig cfg = defaults();
  const auto u0 = cfg.initial_field(cfg.make_grid());

  SolveConfig c = cfg.solve_config();
  c.snapshot_stride = std::numeric_limits<int>::max();
  std::vector<double> steps, errors;
  for (int m : {10, 20, 40}) {
    c.steps_per_half_cell = m;
    const auto coarse = solve_full(u0, cfg.fiber, c);
    c.steps_per_half_cell = 4 * m;
    const auto reference = solve_full(u0, cfg.fiber, c);
    steps.push_back(cfg.fiber.eps / m);
    errors.push_back(h1_norm(coarse.snapshots.back() - reference.snapshots.back()));
  }
  const double strang = fit_loglog(steps, errors).slope;

  // RK4 in extended precision: at these steps the double-precision
  // differences reach the roundoff floor.
  using Wide = Field<long double>;
  const Wide w0(u0);
  SolveConfig a = cfg.solve_config();
  a.snapshot_stride = std::numeric_limits<int>::max();
  std::vector<double> ladder{4e-3, 2e-3, 1e-3};
  std::map<double, Wide> finals;  // 1e-3 serves as both a rung and a reference
  auto final_at = [&](double dt) -> const Wide& {
    auto it = finals.find(dt);
    if (it == finals.end()) {
      a.dt = dt;
      auto tr = solve_averaged(w0, cfg.fiber.gamma, cfg.fiber.d_av, a);
      it = finals.emplace(dt, std::move(tr.snapshots.back())).first;
    }
    return it->second;
  };
  std::vector<double> rk_errors;
  for (double h : ladder) {
    rk_errors.push_back(static_cast<double>(h1_norm(final_at(h) - final_at(0.25 * h))));
  }
  const double rk4 = fit_loglog(ladder, rk_errors).slope;

  out.pass = std::abs(strang - 2.0) <= 0.1 && std::abs(rk4 - 4.0) <= 0.2;
  out.summary = "Strang slope " + num(strang) + " (2 +- 0.1), RK4 slope " + num(rk4) +
                " (4 +- 0.2)";
  std::ostringstream s, r;
  for (double e : errors) s << ' ' << num(e);
  for (double e : rk_errors) r << ' ' << num(e);
  out.info.push_back("Strang steps/half-cell {10, 20, 40} vs 4x, errors" + s.str());
  out.info.push_back("RK4 dt {4e-3, 2e-3, 1e-3} vs dt/4 (long double), errors" + r.str());
  return out;
}

Outcome lipschitz() {
  Outcome out;
  RunConfig cfg = defaults();
  cfg.fiber.gamma = 0.2;
  cfg.fiber.eps = 0.1;
  const auto grid = cfg.make_grid();
  const auto r = lipschitz_probe(cfg, {1e-2, 1e-3, 1e-4}, gaussian_profile(grid, 1.0, 0.7, 1.5));
  out.pass = r.stabilized && r.non_growing;
  std::ostringstream s;
  s << "ratios";
  for (const auto& row : r.rows) s << ' ' << num(row.ratio);
  s << "; last two within 20% " << (r.stabilized ? "yes" : "no") << ", non-growing "
    << (r.non_growing ? "yes" : "no");
  out.summary = s.str();
  return out;
}

Outcome unitarity() {
  Outcome out;
  const RunConfig cfg = defaults();
  const auto grid = cfg.make_grid();
  std::mt19937_64 rng(cfg.seed + 9);
  std::uniform_real_distribution<double> time(-3.0, 3.0);
  double norms = 0.0, cocycle = 0.0, group = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_smooth_field(grid, rng);
    const double s = time(rng), t = time(rng), r = time(rng);
    const double l2 = l2_norm(f), h1 = h1_norm(f);
    for (const auto& g : {free_evolution(f, s), linear_propagator(f, s, t, cfg.fiber)}) {
      norms = std::max({norms, std::abs(l2_norm(g) / l2 - 1.0), std::abs(h1_norm(g) / h1 - 1.0)});
    }
    const auto chained = linear_propagator(linear_propagator(f, s, t, cfg.fiber), t, r, cfg.fiber);
    cocycle = std::max(cocycle, h1_norm(chained - linear_propagator(f, s, r, cfg.fiber)) / h1);
    const auto composed = free_evolution(free_evolution(f, s), t);
    group = std::max(group, h1_norm(composed - free_evolution(f, s + t)) / h1);
  }
  out.pass = norms <= 1e-12 && cocycle <= 1e-12 && group <= 1e-12;
  out.summary = "norm defect " + num(norms) + ", cocycle " + num(cocycle) + ", group law " +
                num(group) + " (each <= 1e-12, 100 fields)";
  return out;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + cli_path + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Lists regular files under dir with their bytes, sorted by name.
std::vector<std::pair<std::string, std::vector<unsigned char>>> contents(const fs::path& dir) {
  std::vector<std::pair<std::string, std::vector<unsigned char>>> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.emplace_back(e.path().filename().string(), slurp(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism() {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / ("dmnls_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);

  bool identical = true;
  std::size_t compared = 0;
  const std::vector<std::string> runs{
      "simulate --equation full --tmax 0.5",
      "simulate --equation transformed --method rk4 --tmax 0.5",
      "simulate --equation averaged --tmax 0.5",
      "sweep --tmax 0.5 --eps-list 0.1,0.05,0.025",
  };
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto a = root / ("a" + std::to_string(i));
    const auto b = root / ("b" + std::to_string(i));
    const int sa = run_cli(runs[i] + " --out \"" + a.string() + "\"");
    const int sb = run_cli(runs[i] + " --out \"" + b.string() + "\"");
    const auto fa = contents(a), fb = contents(b);
    if (sa != 0 || sb != 0 || fa.empty() || fa != fb) {
      identical = false;
      out.info.push_back("outputs differ or run failed: " + runs[i]);
    }
    compared += fa.size();
  }

  // Snapshot round trip: file -> field -> file.
  bool round_trip = true;
  for (const auto& e : fs::directory_iterator(root / "a0")) {
    if (e.path().extension() != ".dmnls") continue;
    const auto bytes = slurp(e.path());
    const auto [field, t] = snapshot_read(e.path().string());
    const auto again = encode_snapshot(field, t);
    if (again != bytes) round_trip = false;
  }
  std::mt19937_64 rng(3);
  const auto f = random_smooth_field(defaults().make_grid(), rng);
  const auto path = (root / "random.dmnls").string();
  snapshot_write(f, 0.125, path);
  const auto [g, tg] = snapshot_read(path);
  if (tg != 0.125 || std::memcmp(g.values().data(), f.values().data(), 16 * f.size()) != 0) {
    round_trip = false;
  }

  const auto start = std::chrono::steady_clock::now();
  const int verify = run_cli("verify --out \"" + (root / "verify").string() + "\"");
  const double verify_seconds = seconds_since(start);

  out.pass = identical && round_trip && verify == 0 && verify_seconds < 60.0;
  out.summary = std::string("repeat runs ") + (identical ? "bitwise identical" : "DIFFER") + " (" +
                std::to_string(compared) + " files), snapshot round trip " +
                (round_trip ? "exact" : "NOT exact") + ", verify exit " + std::to_string(verify) +
                " in " + num(verify_seconds) + " s (< 60)";
  fs::remove_all(root);
  return out;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "averaging rate", averaging_rate},
      {2, "mass conservation", mass_conservation},
      {3, "kernel identity", kernel_identity},
      {4, "transform equivalence", transform_equivalence},
      {5, "energy derivative identity", energy_identity},
      {6, "dispersive decay", dispersive_decay},
      {7, "solver self-convergence", self_convergence},
      {8, "Lipschitz dependence", lipschitz},
      {9, "unitarity and group laws", unitarity},
      {10, "determinism and I/O", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      selected.push_back(std::atoi(argv[++i]));
    } else if (arg == "--cli" && i + 1 < argc) {
      cli_path = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--criterion N]... [--cli PATH]\n";
      return 2;
    }
  }

  bool all_pass = true;
  for (const auto& c : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("error: ") + e.what();
    }
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << c.id << " [" << c.name << "]: " << (o.pass ? "PASS" : "FAIL")
              << "  " << o.summary << "  (" << num(seconds_since(start)) << " s)\n";
    for (const auto& line : o.info) std::cout << "    " << line << "\n";
    std::cout.flush();
  }
  return all_pass ? 0 : 1;
}
