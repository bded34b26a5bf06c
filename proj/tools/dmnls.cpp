// dmnls: command-line driver for the dispersion-managed NLS toolkit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dmnls/harness.hpp"

namespace fs = std::filesystem;
using namespace dmnls;

namespace {

struct Options {
  RunConfig run;
  std::string out_dir = "out";
  std::string equation = "transformed";
  std::string method = "pullback";
  bool dealias = false;
  std::vector<double> eps_list{0.1, 0.05, 0.025, 0.0125};
  double perturb_scale = 1.0;
  double perturb_amplitude = 0.3;
  double perturb_width = 0.7;
  double perturb_shift = 1.5;
  std::vector<double> deltas{1e-2, 1e-3, 1e-4};
  std::string snapshot_file;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

fs::path prepare_out(const Options& o) {
  fs::path dir(o.out_dir);
  fs::create_directories(dir);
  return dir;
}

ComplexField perturbation_profile(const Options& o, const GridPtr& grid) {
  return gaussian_profile(grid, o.perturb_amplitude, o.perturb_width, o.perturb_shift);
}

int run_simulate(const Options& o) {
  const auto& cfg = o.run;
  cfg.validate();
  const auto grid = cfg.make_grid();
  const auto u0 = cfg.initial_field(grid);
  auto sc = cfg.solve_config();
  sc.dealias = o.dealias;

  Trajectory tr;
  if (o.equation == "full") {
    tr = solve_full(u0, cfg.fiber, sc);
  } else if (o.equation == "transformed") {
    const auto method = o.method == "rk4" ? TransformedMethod::interaction_rk4
                                          : TransformedMethod::pullback;
    tr = solve_transformed(u0, cfg.fiber, sc, method);
  } else if (o.equation == "averaged") {
    tr = solve_averaged(u0, cfg.fiber.gamma, cfg.fiber.d_av, sc);
  } else {
    throw std::invalid_argument("unknown equation " + o.equation);
  }

  const auto dir = prepare_out(o);
  write_diagnostics_csv(tr, (dir / "diagnostics.csv").string());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "snapshot_%05zu.dmnls", i);
    snapshot_write(tr.snapshots[i], tr.times[i], (dir / name).string());
  }
  std::cout << o.equation << ": " << tr.size() << " snapshots, final h1 "
            << format_real(tr.diagnostics.back().h1) << ", written to " << dir.string() << "\n";
  return 0;
}

void write_sweep(const fs::path& dir, const SweepResult& r) {
  std::ostringstream csv;
  csv << "eps,sup_h1_error\n";
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    csv << format_real(r.eps_values[i]) << ',' << format_real(r.errors[i]) << '\n';
  }
  write_text(dir / "sweep.csv", csv.str());
}

void print_sweep(const SweepResult& r) {
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    std::cout << "eps " << r.eps_values[i] << "  sup_h1_error " << r.errors[i];
    if (i < r.hypothesis_violating.size() && r.hypothesis_violating[i]) {
      std::cout << "  [hypothesis-violating: ||u0-v0||_H1 = " << r.initial_offsets[i] << "]";
    }
    std::cout << "\n";
  }
  if (!r.inversions.empty()) {
    std::cout << "non-monotone errors at " << r.inversions.size() << " position(s)\n";
  }
  std::cout << "slope " << r.slope << "  intercept " << r.intercept << "\n";
}

int run_sweep(const Options& o, bool perturbed) {
  const auto dir = prepare_out(o);
  try {
    SweepResult r;
    if (perturbed) {
      const auto grid = o.run.make_grid();
      r = perturbed_sweep(o.run, o.eps_list, perturbation_profile(o, grid), o.perturb_scale);
    } else {
      r = sweep_epsilon(o.run, o.eps_list);
    }
    write_sweep(dir, r);
    print_sweep(r);
  } catch (const SweepAborted& e) {
    write_sweep(dir, e.partial());
    std::cerr << "sweep aborted: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run_lipschitz(const Options& o) {
  const auto grid = o.run.make_grid();
  auto direction = gaussian_profile(grid, 1.0, o.perturb_width, o.perturb_shift);
  const auto r = lipschitz_probe(o.run, o.deltas, direction);
  std::ostringstream csv;
  csv << "delta,sup_h1_difference,ratio\n";
  for (const auto& row : r.rows) {
    csv << format_real(row.delta) << ',' << format_real(row.difference) << ','
        << format_real(row.ratio) << '\n';
  }
  write_text(prepare_out(o) / "lipschitz.csv", csv.str());
  std::cout << csv.str() << "stabilized " << (r.stabilized ? "yes" : "no") << ", non-growing "
            << (r.non_growing ? "yes" : "no") << "\n";
  return 0;
}

int run_verify(const Options& o) {
  const auto report = verify_suite(o.run);
  const auto lines = to_jsonl(report);
  write_text(prepare_out(o) / "verify.jsonl", lines);
  std::cout << lines;
  std::cerr << (report.all_pass() ? "verify: all checks passed" : "verify: FAILED") << " ("
            << report.checks.size() << " checks, " << report.seconds << " s)\n";
  return report.all_pass() ? 0 : 1;
}

int run_snapshot_dump(const Options& o) {
  const auto [field, t] = snapshot_read(o.snapshot_file);
  const auto& g = field.grid();
  std::cout << "# n = " << g.n() << ", length = " << format_real(g.length())
            << ", t = " << format_real(t) << "\n";
  std::cout << "x,re,im\n";
  for (std::size_t j = 0; j < g.n(); ++j) {
    std::cout << format_real(g.x(j)) << ',' << format_real(field[j].real()) << ','
              << format_real(field[j].imag()) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  auto& run = o.run;
  CLI::App app{"Dispersion-managed NLS toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file; flags override it");

  app.add_option("--n", run.n, "Grid points (power of two, >= 8)");
  app.add_option("--length", run.length, "Domain length L");
  app.add_option("--eps", run.fiber.eps, "Dispersion period parameter eps");
  app.add_option("--gamma", run.fiber.gamma, "Loss coefficient Gamma");
  app.add_option("--dav", run.fiber.d_av, "Average dispersion d_av");
  app.add_option("--tmax", run.t_end, "Final time M");
  app.add_option("--dt", run.dt, "RK4 step");
  app.add_option("--steps-per-half-cell", run.steps_per_half_cell, "Split steps per half-cell");
  app.add_option("--quad-nodes", run.quad_nodes, "Gauss-Legendre nodes for the averaged kernel");
  app.add_option("--snapshot-stride", run.snapshot_stride, "RK4 steps between snapshots");
  app.add_option("--out", o.out_dir, "Output directory");
  app.add_option("--seed", run.seed, "Seed for randomized checks");
  app.add_option("--amplitude", run.initial.amplitude, "Gaussian amplitude");
  app.add_option("--width", run.initial.width, "Gaussian width");
  app.add_option("--center", run.initial.center, "Gaussian center");
  app.add_option("--chirp", run.initial.chirp, "Gaussian chirp");
  app.add_option("--initial", run.initial.snapshot_path, "Initial datum snapshot file")
      ->check(CLI::ExistingFile);
  app.add_flag("--include-amplifier-atom", run.fiber.include_amplifier_atom)->group("");

  auto* simulate = app.add_subcommand("simulate", "Integrate one equation");
  simulate->add_option("--equation", o.equation, "full | transformed | averaged")
      ->check(CLI::IsMember({"full", "transformed", "averaged"}));
  simulate->add_option("--method", o.method, "Transformed solver: pullback | rk4")
      ->check(CLI::IsMember({"pullback", "rk4"}));
  simulate->add_flag("--dealias", o.dealias, "Two-thirds truncation of the nonlinearity");

  auto* sweep = app.add_subcommand("sweep", "Averaging-rate sweep over eps");
  sweep->add_option("--eps-list", o.eps_list, "Decreasing eps values")->delimiter(',');

  auto* psweep = app.add_subcommand("perturbed-sweep", "Sweep with u0 = v0 + eps * g");
  psweep->add_option("--eps-list", o.eps_list, "Decreasing eps values")->delimiter(',');
  psweep->add_option("--perturb-scale", o.perturb_scale, "||u0 - v0||_H1 / eps");
  psweep->add_option("--perturb-amplitude", o.perturb_amplitude, "Perturbation amplitude");
  psweep->add_option("--perturb-width", o.perturb_width, "Perturbation width");
  psweep->add_option("--perturb-shift", o.perturb_shift, "Perturbation center");

  auto* lipschitz = app.add_subcommand("lipschitz", "Lipschitz-dependence probe");
  lipschitz->add_option("--deltas", o.deltas, "Decreasing perturbation sizes")->delimiter(',');
  lipschitz->add_option("--perturb-width", o.perturb_width, "Perturbation width");
  lipschitz->add_option("--perturb-shift", o.perturb_shift, "Perturbation center");

  auto* verify = app.add_subcommand("verify", "Run the verification suite");

  auto* dump = app.add_subcommand("snapshot-dump", "Print a snapshot file as CSV");
  dump->add_option("file", o.snapshot_file, "Snapshot path")->required()->check(CLI::ExistingFile);

  for (auto* sub : {simulate, sweep, psweep, lipschitz, verify, dump}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(o);
    if (*sweep) return run_sweep(o, false);
    if (*psweep) return run_sweep(o, true);
    if (*lipschitz) return run_lipschitz(o);
    if (*verify) return run_verify(o);
    if (*dump) return run_snapshot_dump(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
