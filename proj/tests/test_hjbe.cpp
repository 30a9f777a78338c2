#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "sedctrl/errors.hpp"
#include "sedctrl/exact_single_regime.hpp"
#include "sedctrl/hjbe.hpp"
#include "sedctrl/markov_chain.hpp"
#include "sedctrl/model.hpp"

using namespace sedctrl;

namespace {

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

RegimeChain symmetric_pair(double rate) {
  return RegimeChain(std::vector<std::vector<double>>{{0.0, rate}, {rate, 0.0}});
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::fabs(a[k] - b[k]));
  return m;
}

}  // namespace

TEST_CASE("one pseudo-step from zero fields deposits only the boundary source") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Grid grid = Grid::with_intervals(8);
  const double dt = 1e-3;

  ValueFields state = ValueFields::zeros(1, grid);
  ValueFields next = hjbe_pseudo_step(state, m, chain, dt);

  CHECK(next.phi_at(0, 0) == dt);  // occupancy source acts at x = 0 only
  for (int l = 1; l < grid.vertex_count(); ++l) CHECK(next.phi_at(0, l) == 0.0);

  // the waiting field additionally picks up the expected execution payoff
  for (int l = 0; l < grid.vertex_count(); ++l) {
    const double x = grid.vertex(l);
    const double source = (l == 0) ? 1.0 : 0.0;
    const double expected =
        dt * (source + m.exec_rate * (m.cost_linear * (1.0 - x) + m.cost_fixed));
    CHECK(next.phi_hat_at(0, l) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("zero-speed dynamics converge to the local fixed point") {
  // With no depletion the update is purely local and the converged fields obey
  // closed-form algebra: phi vanishes away from empty storage, and the waiting
  // value is the discounted execution payoff.
  ModelSpec m = reference_model();
  m.speeds = {0.0};
  RegimeChain chain = single_chain();
  Grid grid = Grid::with_intervals(50);

  HjbeResult res = solve_hjbe(m, chain, grid);
  const double mu = m.exec_rate, delta = m.discount, lam = m.obs_rate;

  const double hat0 = (1.0 + mu * (m.cost_linear + m.cost_fixed)) / (mu + delta);
  const double phi0 = (1.0 + lam * hat0) / (delta + lam);
  CHECK(res.fields.phi_at(0, 0) == doctest::Approx(phi0).epsilon(1e-9));
  CHECK(res.fields.phi_hat_at(0, 0) == doctest::Approx(hat0).epsilon(1e-9));

  for (int l = 1; l < grid.vertex_count(); ++l) {
    const double x = grid.vertex(l);
    const double hat = mu * (m.cost_linear * (1.0 - x) + m.cost_fixed) / (mu + delta);
    CHECK(std::fabs(res.fields.phi_at(0, l)) <= 1e-9);
    CHECK(res.fields.phi_hat_at(0, l) == doctest::Approx(hat).epsilon(1e-9));
  }

  // only the empty-storage vertex is worth intervening at
  Policy p = extract_policy(res.fields);
  REQUIRE(p.mode == Policy::Mode::Threshold);
  REQUIRE(p.thresholds[0].has_value());
  CHECK(*p.thresholds[0] == doctest::Approx(grid.dx / 2.0).epsilon(1e-12));
}

TEST_CASE("a vanishing inspection rate collapses phi to the never-replenish cost") {
  // When decisions can (almost) never be taken the value is the discounted
  // occupancy of the empty state: phi(x) = exp(-delta x / S) / delta.
  ModelSpec m = reference_model();
  m.obs_rate = 1e-12;
  RegimeChain chain = single_chain();
  Grid grid = Grid::with_intervals(200);

  HjbeResult res = solve_hjbe(m, chain, grid);
  double err = 0.0;
  for (int l = 0; l < grid.vertex_count(); ++l) {
    const double x = grid.vertex(l);
    const double exact = std::exp(-m.discount * x / m.speeds[0]) / m.discount;
    err = std::max(err, std::fabs(res.fields.phi_at(0, l) - exact));
  }
  CHECK(err <= 0.05);
  CHECK(res.fields.phi_at(0, 0) == doctest::Approx(1.0 / m.discount).epsilon(1e-6));
}

TEST_CASE("reference model at 50 intervals lands in the recorded accuracy band") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Grid grid = Grid::with_intervals(50);
  ExactSolution exact = solve_smooth_pasting(m);

  HjbeResult res = solve_hjbe(m, chain, grid);
  CHECK(res.final_residual <= 1e-14);
  CHECK(res.iterations >= 1000);
  CHECK(res.iterations <= 200000);

  double err_phi = 0.0, err_hat = 0.0;
  for (int l = 0; l < grid.vertex_count(); ++l) {
    const double x = grid.vertex(l);
    err_phi = std::max(err_phi, std::fabs(res.fields.phi_at(0, l) - exact.value(x)));
    err_hat = std::max(err_hat, std::fabs(res.fields.phi_hat_at(0, l) - exact.waiting_value(x)));
  }
  // frozen from the recorded convergence study: 1.204e-2 and 3.05e-2
  CHECK(err_phi > 0.005);
  CHECK(err_phi < 0.028);
  CHECK(err_hat > 0.012);
  CHECK(err_hat < 0.07);

  CHECK(res.fields.phi_at(0, 0) == doctest::Approx(5.24973785054792).epsilon(6e-3));
  CHECK(res.fields.phi_at(0, grid.intervals) ==
        doctest::Approx(0.6170097805246076).epsilon(2e-2));

  // structural properties of the converged fields
  for (int l = 0; l < grid.vertex_count(); ++l) {
    CHECK(res.fields.phi_at(0, l) >= 0.0);
    CHECK(res.fields.phi_at(0, l) <= 1.0 / m.discount + 1e-9);
    CHECK(res.fields.phi_hat_at(0, l) >= 0.0);
    if (l > 0) {
      CHECK(res.fields.phi_at(0, l) <= res.fields.phi_at(0, l - 1) + 1e-10);
      CHECK(res.fields.phi_hat_at(0, l) <= res.fields.phi_hat_at(0, l - 1) + 1e-10);
    }
  }

  // converged fields are a fixed point of the step map
  const double dt = 5.0 * grid.dx * std::sqrt(grid.dx);
  ValueFields stepped = hjbe_pseudo_step(res.fields, m, chain, dt);
  CHECK(sup_diff(stepped.phi, res.fields.phi) <= 1e-13);
  CHECK(sup_diff(stepped.phi_hat, res.fields.phi_hat) <= 1e-13);

  // decision rule: prefix in x with the split between vertices 40 and 41
  Policy p = extract_policy(res.fields);
  REQUIRE(p.mode == Policy::Mode::Threshold);
  REQUIRE(p.thresholds[0].has_value());
  CHECK(*p.thresholds[0] == doctest::Approx(0.81).epsilon(1e-12));
  CHECK(p.activation[0][40] == 1);
  CHECK(p.activation[0][41] == 0);

  REQUIRE(!res.residual_history.empty());
  CHECK(res.residual_history.back() <= res.residual_history.front());
}

TEST_CASE("identical regimes stay identical and match the single-regime solve") {
  ModelSpec m = reference_model();
  m.speeds = {0.07, 0.07};
  RegimeChain chain = symmetric_pair(0.3);
  Grid grid = Grid::with_intervals(50);

  HjbeResult res = solve_hjbe(m, chain, grid);
  double between = 0.0;
  for (int l = 0; l < grid.vertex_count(); ++l) {
    between = std::max(between, std::fabs(res.fields.phi_at(0, l) - res.fields.phi_at(1, l)));
    between =
        std::max(between, std::fabs(res.fields.phi_hat_at(0, l) - res.fields.phi_hat_at(1, l)));
  }
  CHECK(between <= 1e-13);

  HjbeResult single = solve_hjbe(reference_model(), single_chain(), grid);
  double vs_single = 0.0;
  for (int l = 0; l < grid.vertex_count(); ++l) {
    vs_single = std::max(vs_single, std::fabs(res.fields.phi_at(0, l) - single.fields.phi_at(0, l)));
  }
  CHECK(vs_single <= 1e-8);
}

TEST_CASE("a faster-depleting regime is costlier everywhere") {
  ModelSpec m = reference_model();
  m.speeds = {0.07, 0.14};
  RegimeChain chain = symmetric_pair(0.3);
  Grid grid = Grid::with_intervals(50);

  HjbeResult res = solve_hjbe(m, chain, grid);
  for (int l = 0; l < grid.vertex_count(); ++l) {
    CHECK(res.fields.phi_at(1, l) >= res.fields.phi_at(0, l) - 1e-12);
    CHECK(res.fields.phi_hat_at(1, l) >= res.fields.phi_hat_at(0, l) - 1e-12);
  }
}

TEST_CASE("solver rejects inconsistent arguments") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Grid grid = Grid::with_intervals(50);

  HjbeOptions bad_dt;
  bad_dt.dt = 1.0;  // dt * (delta + mu + lambda) > 1
  CHECK_THROWS_AS(solve_hjbe(m, chain, grid, bad_dt), ValidationError);

  HjbeOptions bad_tol;
  bad_tol.tolerance = 0.0;
  CHECK_THROWS_AS(solve_hjbe(m, chain, grid, bad_tol), ValidationError);

  HjbeOptions bad_steps;
  bad_steps.max_steps = 0;
  CHECK_THROWS_AS(solve_hjbe(m, chain, grid, bad_steps), ValidationError);

  CHECK_THROWS_AS(solve_hjbe(m, symmetric_pair(0.3), grid), ValidationError);

  ValueFields state = ValueFields::zeros(1, grid);
  CHECK_THROWS_AS(hjbe_pseudo_step(state, m, chain, 0.0), ValidationError);
  ValueFields wrong = ValueFields::zeros(2, grid);
  CHECK_THROWS_AS(hjbe_pseudo_step(wrong, m, chain, 1e-3), ValidationError);

  HjbeOptions few;
  few.max_steps = 3;
  CHECK_THROWS_AS(solve_hjbe(m, chain, grid, few), NonConvergenceError);
}

TEST_CASE("threshold policies answer point queries consistently") {
  Policy p = Policy::from_thresholds({0.5}, 5);
  CHECK(p.mode == Policy::Mode::Threshold);
  CHECK(p.activation[0] == std::vector<std::uint8_t>{1, 1, 1, 0, 0});
  CHECK(p.intervene(0, 0.0));
  CHECK(p.intervene(0, 0.5));
  CHECK(!p.intervene(0, 0.500001));
  CHECK(!p.intervene(0, 1.0));

  Policy never = Policy::from_thresholds({std::nullopt}, 5);
  for (double x : {0.0, 0.3, 1.0}) CHECK(!never.intervene(0, x));

  CHECK_THROWS_AS(Policy::from_thresholds({0.5}, 3), ValidationError);
  CHECK_THROWS_AS(Policy::from_thresholds({1.5}, 5), ValidationError);
  CHECK_THROWS_AS(Policy::from_thresholds({-0.2}, 5), ValidationError);
  CHECK_THROWS_AS(p.intervene(2, 0.5), ValidationError);
}

TEST_CASE("activation-set policies use the nearest vertex, upper index on ties") {
  Policy p;
  p.mode = Policy::Mode::ActivationSet;
  p.vertex_count = 5;
  p.activation = {{0, 1, 0, 1, 0}};

  CHECK(!p.intervene(0, 0.0));
  CHECK(p.intervene(0, 0.25));
  CHECK(p.intervene(0, 0.24));
  CHECK(p.intervene(0, 0.374));
  CHECK(!p.intervene(0, 0.375));  // midpoint resolves to the higher vertex
  CHECK(!p.intervene(0, 0.5));
  CHECK(p.intervene(0, 0.625));
  CHECK(!p.intervene(0, 1.0));
  CHECK(!p.intervene(0, 5.0));  // clamped to the last vertex
}

TEST_CASE("policy extraction classifies prefix and non-prefix activation patterns") {
  Grid grid = Grid::with_intervals(4);

  ValueFields prefix = ValueFields::zeros(1, grid);
  prefix.phi = {2.0, 2.0, 0.0, 0.0, 0.0};
  prefix.phi_hat = {1.0, 1.0, 1.0, 1.0, 1.0};
  Policy p1 = extract_policy(prefix);
  REQUIRE(p1.mode == Policy::Mode::Threshold);
  REQUIRE(p1.thresholds[0].has_value());
  CHECK(*p1.thresholds[0] == doctest::Approx(0.375).epsilon(1e-12));

  ValueFields always = ValueFields::zeros(1, grid);
  always.phi = {1.0, 1.0, 1.0, 1.0, 1.0};
  always.phi_hat = {1.0, 1.0, 1.0, 1.0, 1.0};  // ties count as active
  Policy p2 = extract_policy(always);
  REQUIRE(p2.mode == Policy::Mode::Threshold);
  CHECK(*p2.thresholds[0] == 1.0);

  ValueFields none = ValueFields::zeros(1, grid);
  none.phi = {0.0, 0.0, 0.0, 0.0, 0.0};
  none.phi_hat = {1.0, 1.0, 1.0, 1.0, 1.0};
  Policy p3 = extract_policy(none);
  REQUIRE(p3.mode == Policy::Mode::Threshold);
  CHECK(!p3.thresholds[0].has_value());

  ValueFields mixed = ValueFields::zeros(2, grid);
  for (int l = 0; l < 5; ++l) {
    mixed.phi_at(0, l) = (l <= 1) ? 2.0 : 0.0;       // prefix
    mixed.phi_at(1, l) = (l % 2 == 0) ? 2.0 : 0.0;   // gap pattern
    mixed.phi_hat_at(0, l) = 1.0;
    mixed.phi_hat_at(1, l) = 1.0;
  }
  Policy p4 = extract_policy(mixed);
  CHECK(p4.mode == Policy::Mode::ActivationSet);
  CHECK(p4.activation[0] == std::vector<std::uint8_t>{1, 1, 0, 0, 0});
  CHECK(p4.activation[1] == std::vector<std::uint8_t>{1, 0, 1, 0, 1});
}

TEST_CASE("history stride controls the sampled residual trace") {
  ModelSpec m = reference_model();
  RegimeChain chain = single_chain();
  Grid grid = Grid::with_intervals(50);

  HjbeOptions opts;
  opts.history_stride = 50;
  HjbeResult res = solve_hjbe(m, chain, grid, opts);
  CHECK(res.history_stride == 50);
  CHECK(static_cast<long>(res.residual_history.size()) == res.iterations / 50);
  REQUIRE(res.residual_history.size() >= 2);
  CHECK(res.residual_history.back() < res.residual_history.front());
}
