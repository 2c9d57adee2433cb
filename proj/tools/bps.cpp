// Command-line front end: model checks, time stepping, linear solves,
// resolvent sweeps, diagnostics, and plots for the two-phase interface solver.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bps/config.hpp"
#include "bps/diagnostics.hpp"
#include "bps/io.hpp"

namespace fs = std::filesystem;
using namespace bps;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "run";
  bool seed_check = false;
};

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("--config", o.config_path, "configuration file");
  app->add_option("--set", o.overrides, "override as section.key=value")->take_all();
  app->add_option("--out", o.out_dir, "output directory");
  app->add_flag("--seed-check", o.seed_check, "run twice and verify identical output");
}

RunConfig load_config(const CommonOpts& o) {
  RunConfig c;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError(0, 0, "cannot open " + o.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    c = parse_run_config(ss.str());
  } else {
    validate(c);
  }
  for (const auto& kv : o.overrides) apply_override(c, kv);
  return c;
}

fs::path prepare_run_dir(const CommonOpts& o, const RunConfig& c) {
  fs::path dir(o.out_dir);
  fs::create_directories(dir);
  std::ofstream cfg(dir / "resolved.cfg");
  cfg << print_config(c);
  return dir;
}

// ------------------------------------------------------------ check-model

int cmd_check_model(const CommonOpts& o) {
  RunConfig c = load_config(o);
  MaterialSystem mat = make_material(c);
  SampleBox box;
  box.rho_min = 0.5 * c.rho_star_plus;
  box.rho_max = 2.0 * c.rho_star_minus;
  box.theta_min = 0.5 * c.theta_star;
  box.theta_max = 2.0 * c.theta_star;

  ValidationReport rep = validate(mat, box, c.N);
  std::cout << rep.to_string();
  ConsistencyReport cons = thermo_consistency(mat, box);
  std::cout << "thermo consistency: |d(e)/dtheta - kappa| <= "
            << std::max(cons.max_deviation_plus, cons.max_deviation_minus)
            << ", specific heat positive: " << (cons.specific_heat_positive ? "yes" : "no")
            << "\n";
  const double eq = equilibrium_residual(mat);
  std::cout << "equilibrium identity residual: " << eq << "\n";
  if (!rep.all_pass() || !cons.specific_heat_positive || std::abs(eq) > 1e-10) {
    std::cerr << "check-model: model hypotheses violated\n";
    return 3;
  }
  std::cout << "check-model: all hypotheses hold\n";
  return 0;
}

// ------------------------------------------------------------ simulate

struct SimArtifacts {
  CsvTable trace;
  nlohmann::json record;
  std::vector<std::pair<int, SimState>> snaps;
  RunResult result;
  SimState final_state;

  explicit SimArtifacts(const Grid& g) : final_state(g) {}
};

SimArtifacts run_simulation(const RunConfig& c) {
  Grid g = make_grid(c);
  MaterialSystem mat = make_material(c);
  DriverConfig dc = make_driver_config(c);

  SimArtifacts art(g);
  art.trace.columns = {"step",    "t",        "iterations",       "change",
                       "ratio",   "gate",     "min_jacobian",     "max_condition",
                       "max_rel_residual", "h_max", "u_max"};

  SimState state = initialize(g, mat, c.epsilon, dc);
  art.snaps.emplace_back(0, state);

  int step = 0;
  art.result = simulate(state, mat, c.dt, c.T_final, dc,
                        [&](const SimState& s, const StepReport& rep) {
                          ++step;
                          double umax = 0;
                          for (int i = 0; i < g.N; ++i)
                            umax = std::max({umax, s.fields.u_up[i].max_abs(),
                                             s.fields.u_lo[i].max_abs()});
                          art.trace.add_row({static_cast<double>(step), s.t,
                                             static_cast<double>(rep.iterations),
                                             rep.change.empty() ? 0.0 : rep.change.back(),
                                             rep.ratio.empty() ? 0.0 : rep.ratio.back(), rep.gate,
                                             rep.min_jacobian, rep.max_condition,
                                             rep.max_rel_residual, s.h.max_abs(), umax});
                          if (step % c.output_every == 0) art.snaps.emplace_back(step, s);
                        });
  if (art.snaps.empty() || art.snaps.back().first != step) art.snaps.emplace_back(step, state);
  art.final_state = state;

  art.record["config"] = print_config(c);
  art.record["exit_code"] = art.result.exit_code;
  art.record["reason"] = art.result.reason;
  art.record["t_end"] = art.result.t_end;
  art.record["n_steps"] = art.result.steps.size();
  nlohmann::json steps = nlohmann::json::array();
  int idx = 0;
  for (const auto& rep : art.result.steps) steps.push_back(step_record(++idx, idx * c.dt, rep));
  art.record["steps"] = std::move(steps);
  return art;
}

void write_artifacts(const fs::path& dir, const SimArtifacts& art) {
  write_csv(dir / "trace.csv", art.trace);
  std::ofstream rec(dir / "run.json");
  rec << art.record.dump(2) << "\n";
  for (const auto& [step, snap] : art.snaps) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%06d.bps", step);
    write_snapshot(dir / name, snap);
  }
}

bool states_identical(const SimState& a, const SimState& b) {
  auto same = [](const std::vector<double>& x, const std::vector<double>& y) { return x == y; };
  for (int i = 0; i < a.g.N; ++i)
    if (!same(a.fields.u_up[i].a, b.fields.u_up[i].a) ||
        !same(a.fields.u_lo[i].a, b.fields.u_lo[i].a))
      return false;
  return same(a.fields.rho_up.a, b.fields.rho_up.a) &&
         same(a.fields.theta_up.a, b.fields.theta_up.a) &&
         same(a.fields.theta_lo.a, b.fields.theta_lo.a) && same(a.h.a, b.h.a) &&
         same(a.dth.a, b.dth.a) && a.t == b.t;
}

int cmd_simulate(const CommonOpts& o) {
  RunConfig c = load_config(o);
  fs::path dir = prepare_run_dir(o, c);
  SimArtifacts art = run_simulation(c);
  write_artifacts(dir, art);
  if (o.seed_check) {
    SimArtifacts again = run_simulation(c);
    const bool ok = states_identical(art.final_state, again.final_state);
    std::cout << "seed-check: " << (ok ? "identical" : "MISMATCH") << "\n";
    if (!ok) return 1;
  }
  std::cout << "simulate: t_end = " << art.result.t_end << ", steps = "
            << art.result.steps.size() << ", exit = " << art.result.exit_code;
  if (!art.result.reason.empty()) std::cout << " (" << art.result.reason << ")";
  std::cout << "\n";
  return art.result.exit_code;
}

// ------------------------------------------------------------ solve-linear

StokesData probe_stokes_data(const Grid& g) {
  StokesData sd(g);
  const double k = 2.0 * M_PI / g.L_tan;
  sd.T_plus.fill_from([&](const Vec& x) { return std::cos(k * x[0]); });
  sd.g_tan[0].fill_from([&](const Vec& x) { return 0.3 * std::sin(k * x[0]); });
  sd.f_up[g.N - 1].fill_from([&](const Vec& x) { return std::exp(-x[g.N - 1]); });
  return sd;
}

HeatData probe_heat_data(const Grid& g, const MaterialSystem& mat) {
  HeatData hd(g);
  const double k = 2.0 * M_PI / g.L_tan;
  hd.g_flux.fill_from([&](const Vec& x) { return std::cos(k * x[0]); });
  hd.theta_up_outer = LineField(g, mat.theta_star);
  hd.theta_lo_outer = LineField(g, mat.theta_star);
  hd.f_up.fill_from([&](const Vec& x) { return std::sin(k * x[0]); });
  return hd;
}

int cmd_solve_linear(const CommonOpts& o, double lam_re, double lam_im) {
  RunConfig c = load_config(o);
  Grid g = make_grid(c);
  MaterialSystem mat = make_material(c);
  const cdouble lam(lam_re, lam_im);

  StokesSolver ss(g, mat, lam);
  StokesSolution su = ss.solve(probe_stokes_data(g));
  HeatSolver hs(g, mat, lam);
  HeatSolution hu = hs.solve(probe_heat_data(g, mat));

  std::cout << "lambda = " << lam_re << (lam_im < 0 ? " - " : " + ") << std::abs(lam_im) << "i\n"
            << "momentum block: condition = " << su.max_condition
            << ", relative residual = " << su.max_rel_residual
            << ", |u|_max = " << std::max(su.u_up[g.N - 1].max_abs(), su.u_lo[g.N - 1].max_abs())
            << ", |h|_max = " << su.h.max_abs() << "\n"
            << "heat block: condition = " << hu.max_condition
            << ", relative residual = " << hu.max_rel_residual
            << ", |theta|_max = " << std::max(hu.theta_up.max_abs(), hu.theta_lo.max_abs())
            << "\n";
  return 0;
}

// ------------------------------------------------------------ resolvent-sweep

int cmd_resolvent_sweep(const CommonOpts& o, double lam0, int n_radii, int n_angles) {
  RunConfig c = load_config(o);
  Grid g = make_grid(c);
  MaterialSystem mat = make_material(c);
  fs::path dir = prepare_run_dir(o, c);

  CsvTable t;
  t.columns = {"lambda_re", "lambda_im", "stokes_condition", "stokes_residual",
               "heat_condition", "heat_residual"};
  StokesData sd = probe_stokes_data(g);
  HeatData hd = probe_heat_data(g, mat);
  const double arg_max = M_PI - 0.1;
  for (int i = 0; i < n_radii; ++i) {
    const double r = lam0 * std::pow(1e3, n_radii == 1 ? 0.0 : double(i) / (n_radii - 1));
    for (int j = 0; j < n_angles; ++j) {
      const double a = n_angles == 1 ? 0.0 : -arg_max + 2 * arg_max * j / (n_angles - 1);
      const cdouble lam = std::polar(r, a);
      StokesSolver ss(g, mat, lam);
      StokesSolution su = ss.solve(sd);
      HeatSolver hs(g, mat, lam);
      HeatSolution hu = hs.solve(hd);
      t.add_row({lam.real(), lam.imag(), su.max_condition, su.max_rel_residual, hu.max_condition,
                 hu.max_rel_residual});
    }
  }
  write_csv(dir / "resolvent.csv", t);
  double worst_cond = 0, worst_res = 0;
  for (const auto& r : t.rows) {
    worst_cond = std::max({worst_cond, r[2], r[4]});
    worst_res = std::max({worst_res, r[3], r[5]});
  }
  std::cout << "resolvent-sweep: " << t.rows.size() << " points, worst condition = " << worst_cond
            << ", worst residual = " << worst_res << "\n";
  return 0;
}

// ------------------------------------------------------------ diagnose

int cmd_diagnose(const CommonOpts& o, const std::string& snap_a, const std::string& snap_b,
                 int case_id) {
  RunConfig c = load_config(o);
  MaterialSystem mat = make_material(c);
  SimState a = read_snapshot(snap_a);
  SimState b = read_snapshot(snap_b);

  BudgetReport br = conservation_budgets(mat, a, b);
  EntropyReport er = entropy_monitor(mat, a, b);
  std::cout << "interval [" << a.t << ", " << b.t << "]\n"
            << "mass rate (flux corrected, relative): " << br.mass_rate_rel << "\n"
            << "energy rate (relative): " << br.energy_rate_rel << "\n"
            << "surface measure: " << br.surface_start << " -> " << br.surface_end << "\n"
            << "entropy increment: " << er.increment
            << ", production integral: " << er.production_integral
            << ", min pointwise viscous production: " << er.min_viscous_production << "\n";
  auto res = jump_residuals(mat, b, case_id);
  std::cout << "interface condition residuals (case " << case_id << "):\n";
  for (const auto& r : res)
    std::cout << "  " << r.name << ": sup = " << r.sup << ", trace norm = " << r.trace_norm
              << "\n";
  if (!o.out_dir.empty() && o.out_dir != "run") {
    fs::path dir(o.out_dir);
    fs::create_directories(dir);
    nlohmann::json j;
    j["t_start"] = a.t;
    j["t_end"] = b.t;
    j["mass_rate_rel"] = br.mass_rate_rel;
    j["energy_rate_rel"] = br.energy_rate_rel;
    j["entropy_increment"] = er.increment;
    j["entropy_production"] = er.production_integral;
    j["min_viscous_production"] = er.min_viscous_production;
    for (const auto& r : res) j["jump_residuals"][r.name] = r.sup;
    std::ofstream out(dir / "diagnose.json");
    out << j.dump(2) << "\n";
  }
  return 0;
}

// ------------------------------------------------------------ plot

int cmd_plot(const std::string& run_dir) {
  fs::path dir(run_dir);
  CsvTable t = read_csv(dir / "trace.csv");
  auto col = [&](const std::string& name) {
    for (size_t j = 0; j < t.columns.size(); ++j)
      if (t.columns[j] == name) {
        std::vector<double> v;
        for (const auto& r : t.rows) v.push_back(r[j]);
        return v;
      }
    throw SimError("plot: column '" + name + "' not in trace.csv");
  };
  std::vector<double> time = col("t");
  write_svg_plot(dir / "amplitudes.svg", "interface and velocity amplitudes",
                 {{"h_max", time, col("h_max")}, {"u_max", time, col("u_max")}});
  write_svg_plot(dir / "iteration.svg", "fixed-point behaviour per step",
                 {{"iterations", time, col("iterations")}, {"last ratio", time, col("ratio")}});
  std::cout << "plot: wrote amplitudes.svg and iteration.svg in " << run_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-phase interface flow solver"};
  app.require_subcommand(1);

  CommonOpts check_o, sim_o, lin_o, sweep_o, diag_o;
  double lam_re = 100.0, lam_im = 0.0, lam0 = 1.0;
  int n_radii = 7, n_angles = 9, case_id = 32;
  std::string snap_a, snap_b, run_dir = "run";

  auto* check = app.add_subcommand("check-model", "validate the constitutive model");
  add_common(check, check_o);

  auto* sim = app.add_subcommand("simulate", "run the nonlinear time stepper");
  add_common(sim, sim_o);

  auto* lin = app.add_subcommand("solve-linear", "solve one resolvent problem");
  add_common(lin, lin_o);
  lin->add_option("--lambda-re", lam_re, "resolvent parameter, real part");
  lin->add_option("--lambda-im", lam_im, "resolvent parameter, imaginary part");

  auto* sweep = app.add_subcommand("resolvent-sweep", "condition survey over a sector");
  add_common(sweep, sweep_o);
  sweep->add_option("--lambda0", lam0, "smallest modulus of the sweep");
  sweep->add_option("--n-radii", n_radii, "number of moduli (log spaced up to 1e3*lambda0)");
  sweep->add_option("--n-angles", n_angles, "number of arguments across the sector");

  auto* diag = app.add_subcommand("diagnose", "physical budgets between two snapshots");
  add_common(diag, diag_o);
  diag->add_option("--a", snap_a, "first snapshot")->required();
  diag->add_option("--b", snap_b, "second snapshot")->required();
  diag->add_option("--case", case_id, "interface condition family (31, 32, or 33)");

  auto* plot = app.add_subcommand("plot", "render SVG plots from a run directory");
  plot->add_option("--run", run_dir, "run directory containing trace.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check_model(check_o);
    if (sim->parsed()) return cmd_simulate(sim_o);
    if (lin->parsed()) return cmd_solve_linear(lin_o, lam_re, lam_im);
    if (sweep->parsed()) return cmd_resolvent_sweep(sweep_o, lam0, n_radii, n_angles);
    if (diag->parsed()) return cmd_diagnose(diag_o, snap_a, snap_b, case_id);
    if (plot->parsed()) return cmd_plot(run_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
