#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <optional>
#include <vector>

#include "sedctrl/errors.hpp"
#include "sedctrl/exact_single_regime.hpp"
#include "sedctrl/hjbe.hpp"
#include "sedctrl/markov_chain.hpp"
#include "sedctrl/model.hpp"
#include "sedctrl/monte_carlo.hpp"

using namespace sedctrl;

namespace {

constexpr double kThreshold = 0.807182429286096;

ModelSpec reference_model() {
  ModelSpec m;
  m.obs_rate = 1.0 / 7.0;
  m.exec_rate = 1.0;
  m.discount = 0.1;
  m.cost_linear = 0.30;
  m.cost_fixed = 0.20;
  m.speeds = {0.07};
  return m;
}

RegimeChain single_chain() { return RegimeChain(std::vector<std::vector<double>>{{0.0}}); }

bool same_stats(const std::vector<BinStat>& a, const std::vector<BinStat>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].mean != b[k].mean || a[k].se != b[k].se) return false;
  }
  return true;
}

bool identical(const SimStats& a, const SimStats& b) {
  return a.paths == b.paths && a.mean_inspections == b.mean_inspections &&
         same_stats(a.hist_n, b.hist_n) && same_stats(a.hist_w, b.hist_w) &&
         same_stats(a.atom0_n, b.atom0_n) && same_stats(a.atom0_w, b.atom0_w) &&
         same_stats(a.atom1_n, b.atom1_n) && same_stats(a.atom1_w, b.atom1_w) &&
         same_stats(a.cell_n, b.cell_n) && same_stats(a.cell_w, b.cell_w) &&
         same_stats(a.regime_fraction, b.regime_fraction) &&
         a.waiting_fraction.mean == b.waiting_fraction.mean &&
         a.waiting_fraction.se == b.waiting_fraction.se;
}

}  // namespace

TEST_CASE("a never-replenished empty reservoir costs the discounted grid sum exactly") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Policy never = Policy::from_thresholds({std::nullopt}, 51);

  SimConfig cfg;
  cfg.path_count = 8;
  cfg.time_step = 0.0025;
  cfg.seed = 11;
  CostEstimate est = estimate_cost(m, chain, never, 0, 0.0, cfg);

  // derived horizon: remaining discounted tail below 1e-6
  const double horizon = std::ceil(std::log(1e6 / m.discount) / m.discount);
  CHECK(est.horizon == horizon);

  // every path sits at x = 0 for the whole horizon; the left-endpoint rule
  // gives a pure geometric sum over the quadrature grid
  const double dt = cfg.time_step;
  const long last = static_cast<long>(std::ceil(horizon / dt - 1e-9)) - 1;
  const double expected = dt * (1.0 - std::exp(-m.discount * dt * static_cast<double>(last + 1))) /
                          (1.0 - std::exp(-m.discount * dt));
  CHECK(est.mean == doctest::Approx(expected).epsilon(1e-11));
  // identical path costs: the reported spread is only the cancellation floor
  // of the moment-based variance formula, orders below any real variability
  CHECK(est.se <= 1e-6);
  CHECK(est.paths == 8);
}

TEST_CASE("simulated discounted cost matches the closed-form value function") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Policy policy = Policy::from_thresholds({kThreshold}, 51);
  ExactSolution exact = solve_smooth_pasting(m);

  SimConfig cfg;
  cfg.time_step = 0.0025;
  cfg.seed = 404;

  cfg.path_count = 200000;
  CostEstimate full = estimate_cost(m, chain, policy, 0, 1.0, cfg);
  CHECK(full.se > 0.0);
  CHECK(full.se < 2e-3);
  CHECK(std::fabs(full.mean - exact.value(1.0)) <= 3.0 * full.se);

  cfg.path_count = 100000;
  cfg.seed = 405;
  CostEstimate half = estimate_cost(m, chain, policy, 0, 0.5, cfg);
  CHECK(std::fabs(half.mean - exact.value(0.5)) <= 3.0 * half.se);
}

TEST_CASE("runs are reproducible and independent of the worker count") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Policy policy = Policy::from_thresholds({kThreshold}, 51);

  SimConfig cfg;
  cfg.path_count = 3000;
  cfg.time_step = 0.0025;
  cfg.horizon = 60.0;
  cfg.cell_grid_intervals = 20;
  cfg.seed = 5;

  SimStats a = simulate_paths(m, chain, policy, cfg);
  SimStats b = simulate_paths(m, chain, policy, cfg);
  CHECK(identical(a, b));

  cfg.workers = 3;
  SimStats c = simulate_paths(m, chain, policy, cfg);
  CHECK(identical(a, c));

  cfg.workers = 1;
  cfg.seed = 6;
  SimStats d = simulate_paths(m, chain, policy, cfg);
  CHECK(a.waiting_fraction.mean != d.waiting_fraction.mean);
}

TEST_CASE("long-run occupancy reproduces the closed-form stationary law") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Policy policy = Policy::from_thresholds({kThreshold}, 51);
  ExactPdf pdf = exact_stationary_pdf(m.obs_rate, m.exec_rate, m.speeds[0], kThreshold);

  SimConfig cfg;
  cfg.path_count = 60000;
  cfg.time_step = 0.0025;
  cfg.horizon = 350.0;
  cfg.bins = 200;
  cfg.cell_grid_intervals = 50;
  cfg.seed = 20240811;

  SimStats s = simulate_paths(m, chain, policy, cfg);
  CHECK(s.paths == 60000);
  CHECK(s.mean_inspections == doctest::Approx(0.8 * 350.0).epsilon(0.02));

  // point masses at the empty state, split by phase
  CHECK(std::fabs(s.atom0_n[0].mean - pdf.mass_zero_nonwaiting) <= 3.0 * s.atom0_n[0].se);
  CHECK(std::fabs(s.atom0_w[0].mean - pdf.mass_zero_waiting) <= 3.0 * s.atom0_w[0].se);
  CHECK(s.atom1_n[0].mean == 0.0);  // drift leaves the full state immediately
  CHECK(s.atom1_w[0].mean == 0.0);

  // total waiting mass
  const double exact_waiting = pdf.mass_zero_waiting + pdf.mass_waiting(0.0, 1.0);
  CHECK(std::fabs(s.waiting_fraction.mean - exact_waiting) <= 3.0 * s.waiting_fraction.se);

  // continuous histograms: nearly all bins inside three standard errors
  int inside = 0, total = 0;
  for (int b = 0; b < cfg.bins; ++b) {
    const double a = static_cast<double>(b) / cfg.bins;
    const double c = static_cast<double>(b + 1) / cfg.bins;
    const double en = pdf.mass_nonwaiting(a, c);
    const double ew = pdf.mass_waiting(a, c);
    total += 2;
    if (std::fabs(s.bin_n(0, b).mean - en) <= 3.0 * s.bin_n(0, b).se) ++inside;
    if (std::fabs(s.bin_w(0, b).mean - ew) <= 3.0 * s.bin_w(0, b).se) ++inside;
  }
  CHECK(static_cast<double>(inside) / total >= 0.93);

  // cell occupancy: a per-path partition of unity consistent with the atoms
  double cell_sum = 0.0, cell_wait = 0.0;
  int cell_inside = 0, cell_total = 0;
  CellGrid grid = CellGrid::with_intervals(cfg.cell_grid_intervals);
  for (int l = 0; l <= cfg.cell_grid_intervals; ++l) {
    cell_sum += s.cell_stat_n(0, l).mean + s.cell_stat_w(0, l).mean;
    cell_wait += s.cell_stat_w(0, l).mean;
    const double a = (l == 0) ? 0.0 : grid.interface_pos(l - 1);
    const double b = (l == cfg.cell_grid_intervals) ? 1.0 : grid.interface_pos(l);
    double en = pdf.mass_nonwaiting(a, b);
    double ew = pdf.mass_waiting(a, b);
    if (l == 0) {
      en += pdf.mass_zero_nonwaiting;
      ew += pdf.mass_zero_waiting;
    }
    cell_total += 2;
    if (std::fabs(s.cell_stat_n(0, l).mean - en) <= 3.0 * s.cell_stat_n(0, l).se) ++cell_inside;
    if (std::fabs(s.cell_stat_w(0, l).mean - ew) <= 3.0 * s.cell_stat_w(0, l).se) ++cell_inside;
  }
  CHECK(cell_sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cell_wait == doctest::Approx(s.waiting_fraction.mean).epsilon(1e-10));
  CHECK(s.cell_stat_n(0, 0).mean >= s.atom0_n[0].mean);
  CHECK(static_cast<double>(cell_inside) / cell_total >= 0.9);

  CHECK(s.regime_fraction[0].mean == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("a flat speed profile reproduces the constant-speed integrator") {
  ModelSpec constant = reference_model();
  ModelSpec profiled = reference_model();
  profiled.speed_profiles = {{0.07, 0.07}};
  REQUIRE(profiled.has_profiles());
  RegimeChain chain = single_chain();
  Policy policy = Policy::from_thresholds({kThreshold}, 51);

  SimConfig cfg;
  cfg.path_count = 2000;
  cfg.time_step = 0.0025;
  cfg.horizon = 50.0;
  cfg.seed = 99;

  SimStats a = simulate_paths(constant, chain, policy, cfg);
  SimStats b = simulate_paths(profiled, chain, policy, cfg);
  CHECK(std::fabs(a.atom0_n[0].mean - b.atom0_n[0].mean) <= 5e-5);
  CHECK(std::fabs(a.atom0_w[0].mean - b.atom0_w[0].mean) <= 5e-5);
  CHECK(std::fabs(a.waiting_fraction.mean - b.waiting_fraction.mean) <= 5e-5);

  CostEstimate ca = estimate_cost(constant, chain, policy, 0, 1.0, cfg);
  CostEstimate cb = estimate_cost(profiled, chain, policy, 0, 1.0, cfg);
  CHECK(std::fabs(ca.mean - cb.mean) <= 1e-4);
}

TEST_CASE("near-instant execution leaves almost no waiting mass") {
  ModelSpec m = reference_model();
  m.exec_rate = 1000.0;
  RegimeChain chain = single_chain();
  Policy policy = Policy::from_thresholds({kThreshold}, 51);

  SimConfig cfg;
  cfg.path_count = 3000;
  cfg.time_step = 2e-4;  // must stay below 1/(total event rate)
  cfg.horizon = 100.0;
  cfg.seed = 7;

  SimStats s = simulate_paths(m, chain, policy, cfg);
  CHECK(s.waiting_fraction.mean < 5e-3);
  CHECK(s.atom0_w[0].mean < 1e-3);
}

TEST_CASE("switching paths recover the chain's stationary occupancy") {
  ModelSpec m = reference_model();
  m.speeds = {0.07, 0.07};
  RegimeChain chain(std::vector<std::vector<double>>{{0.0, 0.2}, {0.6, 0.0}});
  Policy policy = Policy::from_thresholds({kThreshold, kThreshold}, 51);

  SimConfig cfg;
  cfg.path_count = 20000;
  cfg.time_step = 0.0025;
  cfg.horizon = 200.0;
  cfg.seed = 31;

  SimStats s = simulate_paths(m, chain, policy, cfg);
  CHECK(s.regime_fraction[0].mean + s.regime_fraction[1].mean ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(s.regime_fraction[0].mean - 0.75) <= 3.0 * s.regime_fraction[0].se);
  CHECK(s.regime_fraction[0].se < 0.01);
}

TEST_CASE("configuration validation rejects inconsistent simulation inputs") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Policy policy = Policy::from_thresholds({kThreshold}, 51);

  auto run = [&](SimConfig cfg) { return simulate_paths(m, chain, policy, cfg); };
  SimConfig base;
  base.path_count = 10;
  base.horizon = 1.0;

  SimConfig c0 = base;
  c0.path_count = 0;
  CHECK_THROWS_AS(run(c0), ValidationError);
  SimConfig c1 = base;
  c1.time_step = 0.0;
  CHECK_THROWS_AS(run(c1), ValidationError);
  SimConfig c2 = base;
  c2.time_step = 0.9;  // above 1/(lambda + mu)
  CHECK_THROWS_AS(run(c2), ValidationError);
  SimConfig c3 = base;
  c3.burn_in_fraction = 1.0;
  CHECK_THROWS_AS(run(c3), ValidationError);
  SimConfig c4 = base;
  c4.inspection_rate = 0.0;
  CHECK_THROWS_AS(run(c4), ValidationError);
  SimConfig c5 = base;
  c5.bins = 0;
  CHECK_THROWS_AS(run(c5), ValidationError);
  SimConfig c6 = base;
  c6.cell_grid_intervals = 2;
  CHECK_THROWS_AS(run(c6), ValidationError);
  SimConfig c7 = base;
  c7.initial_regime = 1;
  CHECK_THROWS_AS(run(c7), ValidationError);
  SimConfig c8 = base;
  c8.initial_storage = 1.5;
  CHECK_THROWS_AS(run(c8), ValidationError);
  SimConfig c9 = base;
  c9.workers = -1;
  CHECK_THROWS_AS(run(c9), ValidationError);
  SimConfig c10 = base;
  c10.horizon = 0.0;
  CHECK_THROWS_AS(run(c10), ValidationError);

  CHECK_THROWS_AS(estimate_cost(m, chain, policy, 3, 1.0, base), ValidationError);
  CHECK_THROWS_AS(estimate_cost(m, chain, policy, 0, -0.5, base), ValidationError);

  Policy two = Policy::from_thresholds({0.5, 0.5}, 51);
  CHECK_THROWS_AS(simulate_paths(m, chain, two, base), ValidationError);

  // a horizon far shorter than the inspection clock yields no samples
  SimConfig tiny = base;
  tiny.path_count = 100;
  tiny.horizon = 1e-6;
  CHECK_THROWS_AS(simulate_paths(m, chain, policy, tiny), NonConvergenceError);
}
