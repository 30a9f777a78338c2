// Command-line front end: loads a JSON run configuration, dispatches to the
// solvers, and writes plot-ready CSV/JSON artifacts.  Exit codes: 0 success,
// 1 validation error, 2 non-convergence, 3 I/O error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sedctrl/config.hpp"
#include "sedctrl/csv.hpp"
#include "sedctrl/errors.hpp"
#include "sedctrl/exact_single_regime.hpp"
#include "sedctrl/fpe.hpp"
#include "sedctrl/hjbe.hpp"
#include "sedctrl/markov_chain.hpp"
#include "sedctrl/model.hpp"
#include "sedctrl/monte_carlo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sedctrl;

namespace {

struct Args {
  std::string config_path;
  std::string out_dir;      // overrides the config's output_dir when nonempty
  std::string policy_path;  // solve-fpe / simulate input
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig load_config(const Args& args) {
  if (args.config_path.empty()) throw ValidationError("--config is required");
  RunConfig cfg = load_run_config(args.config_path);
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (args.seed_set) cfg.simulation.seed = args.seed;
  return cfg;
}

fs::path prepare_output_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failure: " + path.string());
}

json thresholds_to_json(const Policy& policy) {
  json arr = json::array();
  for (const auto& th : policy.thresholds) {
    if (th)
      arr.push_back(*th);
    else
      arr.push_back(nullptr);
  }
  return arr;
}

double hjbe_dt_used(const RunConfig& cfg, const Grid& grid) {
  return cfg.hjbe_dt > 0.0 ? cfg.hjbe_dt : 5.0 * std::pow(grid.dx, 1.5);
}

json summarize_boundary(const PdfSummary& s) {
  json j;
  j["regimes"] = s.regimes;
  j["weight_zero_nonwaiting"] = s.weight0_n;
  j["weight_zero_waiting"] = s.weight0_w;
  j["weight_one_nonwaiting"] = s.weight1_n;
  j["weight_one_waiting"] = s.weight1_w;
  j["concentrated_zero_nonwaiting"] = s.concentrated0_n;
  j["concentrated_zero_waiting"] = s.concentrated0_w;
  j["concentrated_one_nonwaiting"] = s.concentrated1_n;
  j["concentrated_one_waiting"] = s.concentrated1_w;
  j["regime_mass"] = s.regime_mass;
  j["resetting_masses"] = s.resetting_masses;
  j["p_zero"] = s.p_zero;
  j["p_one"] = s.p_one;
  j["p_zero_plus_one"] = s.p_zero_plus_one;
  j["waiting_mass"] = s.waiting_mass;
  j["total_mass"] = s.total_mass;
  return j;
}

Policy require_policy(const Args& args) {
  if (args.policy_path.empty())
    throw ValidationError("policy required: pass --policy with a file written by solve-hjbe");
  return load_policy_json(args.policy_path);
}

void require_single_regime(const RunConfig& cfg, const char* what) {
  if (cfg.chain.regime_count != 1)
    throw ValidationError(std::string(what) + " requires a single regime, got " +
                          std::to_string(cfg.chain.regime_count));
  if (!cfg.model.speed_profiles.empty())
    throw ValidationError(std::string(what) + " requires a constant speed, not a profile");
}

// ---------------------------------------------------------------- exact ----

int run_exact(const Args& args) {
  RunConfig cfg = load_config(args);
  require_single_regime(cfg, "exact");
  const ModelSpec& m = cfg.model;

  ExactSolution sol = solve_smooth_pasting(m);
  ExactPdf pdf = exact_stationary_pdf(m.obs_rate, m.exec_rate, m.speeds[0], sol.threshold);
  ErgodicLimit ergodic =
      ergodic_threshold(m.obs_rate, m.speeds[0], m.cost_linear, m.cost_fixed);

  fs::path dir = prepare_output_dir(cfg);

  {
    Grid grid = Grid::with_intervals(cfg.hjbe_intervals);
    CsvWriter csv((dir / "value_exact.csv").string(), {"x", "value", "waiting_value"});
    for (int l = 0; l < grid.vertex_count(); ++l) {
      double x = grid.vertex(l);
      csv.write_row({x, sol.value(x), sol.waiting_value(x)});
    }
  }
  {
    Grid grid = Grid::with_intervals(cfg.fpe_intervals);
    CsvWriter csv((dir / "pdf_exact.csv").string(),
                  {"x", "density_nonwaiting", "density_waiting"});
    for (int l = 0; l < grid.vertex_count(); ++l) {
      double x = grid.vertex(l);
      csv.write_row({x, pdf.density_nonwaiting(x), pdf.density_waiting(x)});
    }
  }

  json j;
  j["threshold"] = sol.threshold;
  j["value_at_one"] = sol.value_at_one;
  j["value_at_zero"] = sol.value(0.0);
  j["pasting_residual_value"] = sol.residual_value;
  j["pasting_residual_slope"] = sol.residual_slope;
  j["mass_zero_nonwaiting"] = pdf.mass_zero_nonwaiting;
  j["mass_zero_waiting"] = pdf.mass_zero_waiting;
  j["pdf_total_mass"] = pdf.total_mass();
  j["ergodic_threshold"] = ergodic.threshold;
  j["ergodic_mean_cost"] = ergodic.mean_cost;
  write_json_file(j, dir / "exact_summary.json");

  std::cout << "threshold " << format_double(sol.threshold) << ", value_at_one "
            << format_double(sol.value_at_one) << "\n";
  return 0;
}

// ----------------------------------------------------------- solve-hjbe ----

int run_solve_hjbe(const Args& args) {
  RunConfig cfg = load_config(args);
  Grid grid = Grid::with_intervals(cfg.hjbe_intervals);
  HjbeOptions opts;
  opts.dt = cfg.hjbe_dt;
  opts.tolerance = cfg.hjbe_tolerance;

  HjbeResult res = solve_hjbe(cfg.model, cfg.chain, grid, opts);
  Policy policy = extract_policy(res.fields);

  fs::path dir = prepare_output_dir(cfg);
  {
    CsvWriter csv((dir / "values.csv").string(),
                  {"regime", "x", "value", "waiting_value", "active"});
    for (int i = 0; i < res.fields.regimes; ++i)
      for (int l = 0; l < grid.vertex_count(); ++l) {
        double phi = res.fields.phi_at(i, l);
        double phi_hat = res.fields.phi_hat_at(i, l);
        csv.write_row({static_cast<double>(i), grid.vertex(l), phi, phi_hat,
                       phi >= phi_hat ? 1.0 : 0.0});
      }
  }
  save_policy_json(policy, (dir / "policy.json").string());

  json j;
  j["intervals"] = grid.intervals;
  j["regimes"] = res.fields.regimes;
  j["iterations"] = res.iterations;
  j["final_residual"] = res.final_residual;
  j["dt"] = hjbe_dt_used(cfg, grid);
  j["policy_mode"] = policy.mode == Policy::Mode::Threshold ? "threshold" : "activation_set";
  if (policy.mode == Policy::Mode::Threshold) j["thresholds"] = thresholds_to_json(policy);
  write_json_file(j, dir / "hjbe_summary.json");

  std::cout << "converged after " << res.iterations << " steps, residual "
            << format_double(res.final_residual) << "\n";
  return 0;
}

// ------------------------------------------------------------ solve-fpe ----

int run_solve_fpe(const Args& args) {
  RunConfig cfg = load_config(args);
  Policy policy = require_policy(args);
  CellGrid grid = CellGrid::with_intervals(cfg.fpe_intervals);
  FpeOptions opts;
  opts.reconstruction = cfg.reconstruction;
  opts.dt = cfg.fpe_dt;
  opts.tolerance = cfg.fpe_tolerance;

  FpeResult res = solve_fpe_stationary(cfg.model, cfg.chain, policy, grid, opts);

  fs::path dir = prepare_output_dir(cfg);
  {
    CsvWriter csv((dir / "density.csv").string(),
                  {"regime", "cell_center", "cell_size", "p_nonwaiting", "p_waiting"});
    for (int i = 0; i < res.fields.regimes; ++i)
      for (int l = 0; l < grid.cell_count(); ++l)
        csv.write_row({static_cast<double>(i), grid.center(l), grid.cell_size(l),
                       res.fields.p_n_at(i, l), res.fields.p_w_at(i, l)});
  }

  json j = summarize_boundary(res.summary);
  j["intervals"] = grid.intervals;
  j["iterations"] = res.iterations;
  j["final_residual"] = res.final_residual;
  j["max_step_mass_drift"] = res.audit.max_step_drift;
  j["clipped_mass"] = res.audit.clipped_mass;
  j["reconstruction"] = cfg.reconstruction == Reconstruction::Weno ? "weno" : "upwind";
  write_json_file(j, dir / "fpe_summary.json");

  std::cout << "converged after " << res.iterations << " steps, residual "
            << format_double(res.final_residual) << ", P(0)+P(1) "
            << format_double(res.summary.p_zero_plus_one) << "\n";
  return 0;
}

// ------------------------------------------------------------- simulate ----

int run_simulate(const Args& args) {
  RunConfig cfg = load_config(args);
  Policy policy = require_policy(args);
  const SimConfig& sim = cfg.simulation;

  SimStats stats = simulate_paths(cfg.model, cfg.chain, policy, sim);
  fs::path dir = prepare_output_dir(cfg);

  {
    CsvWriter csv((dir / "histogram.csv").string(),
                  {"regime", "bin", "x_lo", "x_hi", "mean_nonwaiting", "se_nonwaiting",
                   "mean_waiting", "se_waiting"});
    double width = 1.0 / stats.bins;
    for (int i = 0; i < stats.regimes; ++i)
      for (int b = 0; b < stats.bins; ++b) {
        const BinStat& n = stats.bin_n(i, b);
        const BinStat& w = stats.bin_w(i, b);
        csv.write_row({static_cast<double>(i), static_cast<double>(b), b * width,
                       (b + 1) * width, n.mean, n.se, w.mean, w.se});
      }
  }
  if (stats.cell_grid_intervals > 0) {
    CellGrid grid = CellGrid::with_intervals(stats.cell_grid_intervals);
    CsvWriter csv((dir / "cells.csv").string(),
                  {"regime", "cell", "center", "mean_nonwaiting", "se_nonwaiting",
                   "mean_waiting", "se_waiting"});
    for (int i = 0; i < stats.regimes; ++i)
      for (int l = 0; l < grid.cell_count(); ++l) {
        const BinStat& n = stats.cell_stat_n(i, l);
        const BinStat& w = stats.cell_stat_w(i, l);
        csv.write_row({static_cast<double>(i), static_cast<double>(l), grid.center(l),
                       n.mean, n.se, w.mean, w.se});
      }
  }

  json j;
  j["paths"] = stats.paths;
  j["mean_inspections"] = stats.mean_inspections;
  j["time_step"] = sim.time_step;
  j["horizon"] = sim.horizon;
  j["burn_in_fraction"] = sim.burn_in_fraction;
  j["seed"] = sim.seed;
  auto stat_pair = [](const BinStat& s) { return json{{"mean", s.mean}, {"se", s.se}}; };
  json atoms = json::array();
  for (int i = 0; i < stats.regimes; ++i) {
    json a;
    a["regime"] = i;
    a["zero_nonwaiting"] = stat_pair(stats.atom0_n[i]);
    a["zero_waiting"] = stat_pair(stats.atom0_w[i]);
    a["one_nonwaiting"] = stat_pair(stats.atom1_n[i]);
    a["one_waiting"] = stat_pair(stats.atom1_w[i]);
    a["regime_fraction"] = stat_pair(stats.regime_fraction[i]);
    atoms.push_back(a);
  }
  j["boundary"] = atoms;
  j["waiting_fraction"] = stat_pair(stats.waiting_fraction);
  write_json_file(j, dir / "boundary.json");

  CostEstimate cost = estimate_cost(cfg.model, cfg.chain, policy, sim.initial_regime,
                                    sim.initial_storage, sim);
  {
    CsvWriter csv((dir / "cost.csv").string(), {"x0", "mean", "se", "paths", "horizon"});
    csv.write_row({sim.initial_storage, cost.mean, cost.se,
                   static_cast<double>(cost.paths), cost.horizon});
  }

  std::cout << stats.paths << " paths, mean inspections per path "
            << format_double(stats.mean_inspections) << ", cost "
            << format_double(cost.mean) << " +- " << format_double(cost.se) << "\n";
  return 0;
}

// ------------------------------------------------------- sediment-build ----

int run_sediment_build(const Args& args) {
  RunConfig cfg = load_config(args);
  if (!cfg.built_from_hydraulics)
    throw ValidationError("sediment-build requires a hydraulics section in the config");

  fs::path dir = prepare_output_dir(cfg);
  save_model_json(cfg.model, (dir / "sediment_model.json").string());
  {
    CsvWriter csv((dir / "speeds.csv").string(),
                  {"regime", "discharge", "shields_number", "speed"});
    for (int i = 0; i < cfg.chain.regime_count; ++i)
      csv.write_row({static_cast<double>(i), cfg.discharges[i],
                     shields_number(cfg.discharges[i], cfg.hydraulics),
                     cfg.model.speeds[i]});
  }

  std::cout << cfg.chain.regime_count << " regimes, max speed "
            << format_double(cfg.model.max_speed()) << "\n";
  return 0;
}

// ---------------------------------------------------- convergence-study ----

int run_convergence_study(const Args& args) {
  RunConfig cfg = load_config(args);
  require_single_regime(cfg, "convergence-study");
  const ModelSpec& m = cfg.model;

  ExactSolution sol = solve_smooth_pasting(m);
  ExactPdf pdf = exact_stationary_pdf(m.obs_rate, m.exec_rate, m.speeds[0], sol.threshold);
  fs::path dir = prepare_output_dir(cfg);

  const std::vector<int> refinements = {1, 2, 4, 8, 16};
  std::vector<double> value_errors, density_errors;

  CsvWriter hjbe_csv((dir / "hjbe_error.csv").string(),
                     {"n", "intervals", "value_error", "waiting_error", "rate"});
  CsvWriter thr_csv((dir / "threshold_detect.csv").string(),
                    {"n", "intervals", "threshold", "exact", "error", "spacing"});
  CsvWriter fpe_csv((dir / "fpe_error.csv").string(),
                    {"n", "intervals", "density_error", "rate"});
  CsvWriter dirac_csv((dir / "dirac_weights.csv").string(),
                      {"n", "intervals", "weight_nonwaiting", "weight_waiting",
                       "error_nonwaiting", "error_waiting"});

  for (int n : refinements) {
    int L = 50 * n;
    Grid grid = Grid::with_intervals(L);

    HjbeOptions hopts;
    hopts.dt = cfg.hjbe_dt;
    hopts.tolerance = cfg.hjbe_tolerance;
    HjbeResult hres = solve_hjbe(m, cfg.chain, grid, hopts);

    double err_phi = 0.0, err_hat = 0.0;
    for (int l = 0; l < grid.vertex_count(); ++l) {
      double x = grid.vertex(l);
      err_phi = std::max(err_phi, std::abs(hres.fields.phi_at(0, l) - sol.value(x)));
      err_hat = std::max(err_hat, std::abs(hres.fields.phi_hat_at(0, l) - sol.waiting_value(x)));
    }
    double rate = value_errors.empty()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : std::log2(value_errors.back() / err_phi);
    value_errors.push_back(err_phi);
    hjbe_csv.write_row({static_cast<double>(n), static_cast<double>(L), err_phi, err_hat, rate});

    Policy detected = extract_policy(hres.fields);
    double th = detected.thresholds.at(0) ? *detected.thresholds[0]
                                          : std::numeric_limits<double>::quiet_NaN();
    thr_csv.write_row({static_cast<double>(n), static_cast<double>(L), th, sol.threshold,
                       std::abs(th - sol.threshold), grid.dx});

    CellGrid cells = CellGrid::with_intervals(L);
    Policy exact_policy = Policy::from_thresholds({sol.threshold}, cells.cell_count());
    FpeOptions fopts;
    fopts.reconstruction = cfg.reconstruction;
    fopts.dt = cfg.fpe_dt;
    fopts.tolerance = cfg.fpe_tolerance;
    FpeResult fres = solve_fpe_stationary(m, cfg.chain, exact_policy, cells, fopts);

    double err_density = 0.0;
    for (int l = 1; l < cells.cell_count(); ++l) {
      double a = cells.interface_pos(l - 1);
      double b = l == cells.intervals ? 1.0 : cells.interface_pos(l);
      double size = cells.cell_size(l);
      err_density = std::max(
          err_density, std::abs(fres.fields.p_n_at(0, l) - pdf.mass_nonwaiting(a, b) / size));
      err_density = std::max(
          err_density, std::abs(fres.fields.p_w_at(0, l) - pdf.mass_waiting(a, b) / size));
    }
    double frate = density_errors.empty()
                       ? std::numeric_limits<double>::quiet_NaN()
                       : std::log2(density_errors.back() / err_density);
    density_errors.push_back(err_density);
    fpe_csv.write_row({static_cast<double>(n), static_cast<double>(L), err_density, frate});

    double w_n = fres.summary.weight0_n.at(0);
    double w_w = fres.summary.weight0_w.at(0);
    dirac_csv.write_row({static_cast<double>(n), static_cast<double>(L), w_n, w_w,
                         std::abs(w_n - pdf.mass_zero_nonwaiting),
                         std::abs(w_w - pdf.mass_zero_waiting)});

    std::cout << "L=" << L << ": value error " << format_double(err_phi)
              << ", density error " << format_double(err_density) << "\n";
  }
  return 0;
}

// ------------------------------------------------------------- sweep-mu ----

int run_sweep_mu(const Args& args) {
  RunConfig cfg = load_config(args);
  if (cfg.mu_sweep.empty())
    throw ValidationError("sweep-mu requires a mu_sweep list in the config");

  fs::path dir = prepare_output_dir(cfg);
  std::vector<std::string> header = {"mu", "p_zero", "p_one", "p_zero_plus_one"};
  for (int i = 0; i < cfg.chain.regime_count; ++i)
    header.push_back("threshold_" + std::to_string(i));
  CsvWriter sweep_csv((dir / "sweep.csv").string(), header);

  for (double mu : cfg.mu_sweep) {
    ModelSpec m = cfg.model;
    m.exec_rate = mu;

    Grid grid = Grid::with_intervals(cfg.hjbe_intervals);
    HjbeOptions hopts;
    hopts.dt = cfg.hjbe_dt;
    hopts.tolerance = cfg.hjbe_tolerance;
    HjbeResult hres = solve_hjbe(m, cfg.chain, grid, hopts);
    Policy policy = extract_policy(hres.fields);

    CellGrid cells = CellGrid::with_intervals(cfg.fpe_intervals);
    Policy fpe_policy = policy;
    if (policy.mode == Policy::Mode::Threshold)
      fpe_policy = Policy::from_thresholds(policy.thresholds, cells.cell_count());
    FpeOptions fopts;
    fopts.reconstruction = cfg.reconstruction;
    fopts.dt = cfg.fpe_dt;
    fopts.tolerance = cfg.fpe_tolerance;
    FpeResult fres = solve_fpe_stationary(m, cfg.chain, fpe_policy, cells, fopts);

    fs::path sub = dir / ("mu_" + format_double(mu));
    std::error_code ec;
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());
    save_policy_json(policy, (sub / "policy.json").string());
    json j = summarize_boundary(fres.summary);
    j["mu"] = mu;
    j["iterations"] = fres.iterations;
    j["final_residual"] = fres.final_residual;
    write_json_file(j, sub / "fpe_summary.json");

    std::vector<double> row = {mu, fres.summary.p_zero, fres.summary.p_one,
                               fres.summary.p_zero_plus_one};
    for (int i = 0; i < cfg.chain.regime_count; ++i) {
      const auto& th = policy.thresholds.size() > static_cast<std::size_t>(i)
                           ? policy.thresholds[i]
                           : std::optional<double>{};
      row.push_back(th ? *th : std::numeric_limits<double>::quiet_NaN());
    }
    sweep_csv.write_row(row);

    std::cout << "mu=" << format_double(mu) << ": P(0)+P(1) "
              << format_double(fres.summary.p_zero_plus_one) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solvers for impulse control of regime-switching storage dynamics"};
  app.require_subcommand(1);

  Args args;
  auto add_common = [&](CLI::App* cmd, bool with_policy) {
    cmd->add_option("--config", args.config_path, "run configuration (JSON)")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "RNG seed (overrides config)")
        ->each([&](const std::string&) { args.seed_set = true; });
    if (with_policy)
      cmd->add_option("--policy", args.policy_path, "decision rule (JSON from solve-hjbe)");
  };

  CLI::App* c_exact = app.add_subcommand("exact", "closed-form single-regime solution");
  CLI::App* c_hjbe = app.add_subcommand("solve-hjbe", "value functions and decision rule");
  CLI::App* c_fpe = app.add_subcommand("solve-fpe", "stationary state distribution");
  CLI::App* c_sim = app.add_subcommand("simulate", "Monte-Carlo paths under a decision rule");
  CLI::App* c_build = app.add_subcommand("sediment-build", "assemble model from hydraulics");
  CLI::App* c_conv = app.add_subcommand("convergence-study", "grid refinement against closed form");
  CLI::App* c_sweep = app.add_subcommand("sweep-mu", "repeat solve over execution rates");
  add_common(c_exact, false);
  add_common(c_hjbe, false);
  add_common(c_fpe, true);
  add_common(c_sim, true);
  add_common(c_build, false);
  add_common(c_conv, false);
  add_common(c_sweep, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_exact->parsed()) return run_exact(args);
    if (c_hjbe->parsed()) return run_solve_hjbe(args);
    if (c_fpe->parsed()) return run_solve_fpe(args);
    if (c_sim->parsed()) return run_simulate(args);
    if (c_build->parsed()) return run_sediment_build(args);
    if (c_conv->parsed()) return run_convergence_study(args);
    if (c_sweep->parsed()) return run_sweep_mu(args);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const NonConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
