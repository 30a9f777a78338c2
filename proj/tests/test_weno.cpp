#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sedctrl/errors.hpp"
#include "sedctrl/grid.hpp"
#include "sedctrl/rng.hpp"
#include "sedctrl/weno.hpp"

using namespace sedctrl;

namespace {

std::vector<double> sample(const Grid& g, double (*f)(double)) {
  std::vector<double> v(g.vertex_count());
  for (int l = 0; l < g.vertex_count(); ++l) v[l] = f(g.vertex(l));
  return v;
}

}  // namespace

TEST_CASE("quadratics are reproduced exactly between interior vertices") {
  // both candidate stencils agree on a quadratic, so any weighting is exact
  auto f = [](double x) { return 3.0 * x * x - 2.0 * x + 0.25; };
  Grid g = Grid::with_intervals(10);
  std::vector<double> v(g.vertex_count());
  for (int l = 0; l < g.vertex_count(); ++l) v[l] = f(g.vertex(l));

  for (double y : {0.137, 0.25, 0.333, 0.61, 0.88}) {
    CHECK(weno_interpolate(g, v, y) == doctest::Approx(f(y)).epsilon(1e-12));
  }
}

TEST_CASE("smooth data gets the accuracy of the four-point cubic") {
  // once the grid resolves the data, the adaptive weights sit close enough to
  // the ideal ones that a cubic is interpolated almost exactly
  auto f = [](double x) { return x * x * x; };
  Grid g = Grid::with_intervals(100);
  std::vector<double> v(g.vertex_count());
  for (int l = 0; l < g.vertex_count(); ++l) v[l] = f(g.vertex(l));
  for (int k = 1; k < 300; ++k) {
    double y = 0.05 + 0.9 * k / 300.0;
    CHECK(weno_interpolate(g, v, y) == doctest::Approx(f(y)).epsilon(1e-8));
  }

  // and convergence order ~3 on a generic smooth function
  auto s = [](double x) { return std::sin(3.0 * x) + 0.5 * std::cos(7.0 * x); };
  double err_coarse = 0.0, err_fine = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    Grid g = Grid::with_intervals(pass == 0 ? 40 : 80);
    std::vector<double> v(g.vertex_count());
    for (int l = 0; l < g.vertex_count(); ++l) v[l] = s(g.vertex(l));
    double worst = 0.0;
    for (int k = 1; k < 400; ++k) {
      double y = 0.1 + 0.8 * k / 400.0;  // stay away from the linear fallback zone
      worst = std::max(worst, std::abs(weno_interpolate(g, v, y) - s(y)));
    }
    (pass == 0 ? err_coarse : err_fine) = worst;
  }
  double rate = std::log2(err_coarse / err_fine);
  CHECK(rate >= 2.5);
}

TEST_CASE("no overshoot on step profiles") {
  Rng rng(2024);
  Grid g = Grid::with_intervals(50);
  for (int trial = 0; trial < 100; ++trial) {
    double lo = rng.uniform();
    double hi = lo + 0.5 + rng.uniform();
    int edge = 5 + static_cast<int>(rng.uniform() * 40.0);
    std::vector<double> v(g.vertex_count());
    for (int l = 0; l < g.vertex_count(); ++l) v[l] = l < edge ? lo : hi;

    double height = hi - lo;
    for (int k = 0; k <= 500; ++k) {
      double y = k / 500.0;
      double got = weno_interpolate(g, v, y);
      CHECK(got >= lo - 1e-6 * height);
      CHECK(got <= hi + 1e-6 * height);
    }
  }
}

TEST_CASE("boundary intervals fall back to linear interpolation") {
  Grid g = Grid::with_intervals(8);
  Rng rng(11);
  std::vector<double> v(g.vertex_count());
  for (double& x : v) x = rng.uniform();

  for (double theta : {0.2, 0.7}) {
    double y0 = theta * g.dx;
    CHECK(weno_interpolate(g, v, y0) ==
          doctest::Approx((1.0 - theta) * v[0] + theta * v[1]).epsilon(1e-14));
    double y1 = (g.intervals - 1 + theta) * g.dx;
    CHECK(weno_interpolate(g, v, y1) ==
          doctest::Approx((1.0 - theta) * v[g.intervals - 1] + theta * v[g.intervals])
              .epsilon(1e-12));
  }
}

TEST_CASE("endpoint queries return the endpoint values") {
  Grid g = Grid::with_intervals(5);
  std::vector<double> v = {9.0, 1.0, 2.0, 3.0, 4.0, -7.0};
  CHECK(weno_interpolate(g, v, 0.0) == 9.0);
  CHECK(weno_interpolate(g, v, 1.0) == -7.0);
  CHECK(weno_interpolate(g, v, -5e-13) == 9.0);   // round-off slack
  CHECK(weno_interpolate(g, v, 1.0 + 5e-13) == -7.0);
}

TEST_CASE("domain and size violations are rejected") {
  Grid g = Grid::with_intervals(5);
  std::vector<double> v(6, 1.0);
  CHECK_THROWS_AS(weno_interpolate(g, v, -0.01), ValidationError);
  CHECK_THROWS_AS(weno_interpolate(g, v, 1.01), ValidationError);
  CHECK_THROWS_AS(weno_interpolate(g, v, std::nan("")), ValidationError);
  std::vector<double> wrong(5, 1.0);
  CHECK_THROWS_AS(weno_interpolate(g, wrong, 0.5), ValidationError);
}

TEST_CASE("edge reconstruction is exact for linear cell-average data") {
  // cell averages of a linear function are its midpoint values, and the left
  // edge lies half a cell below the center
  for (double a : {0.0, 2.0}) {
    for (double b : {1.0, -3.0}) {
      double am1 = a + b * 1.0, a0 = a + b * 2.0, ap1 = a + b * 3.0;
      CHECK(weno_left_edge(am1, a0, ap1) == doctest::Approx(a + b * 1.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("edge reconstruction converges at better than second order on smooth averages") {
  auto f = [](double x) { return std::exp(x) * std::sin(2.0 * x); };
  auto F = [](double x) {  // antiderivative of f
    return std::exp(x) / 5.0 * (std::sin(2.0 * x) - 2.0 * std::cos(2.0 * x));
  };
  double errs[2];
  for (int pass = 0; pass < 2; ++pass) {
    int n = pass == 0 ? 40 : 80;
    double h = 1.0 / n;
    double worst = 0.0;
    for (int j = 1; j + 1 < n; ++j) {
      double am1 = (F(j * h) - F((j - 1) * h)) / h;
      double a0 = (F((j + 1) * h) - F(j * h)) / h;
      double ap1 = (F((j + 2) * h) - F((j + 1) * h)) / h;
      worst = std::max(worst, std::abs(weno_left_edge(am1, a0, ap1) - f(j * h)));
    }
    errs[pass] = worst;
  }
  // third-order asymptotically; gate the preasymptotic rate at two
  CHECK(std::log2(errs[0] / errs[1]) >= 2.0);
  CHECK(errs[1] <= 5e-4);
}

TEST_CASE("edge reconstruction does not overshoot a step in the averages") {
  // downstream-biased candidates must collapse onto the smooth side at a jump
  double lo = 1.0, hi = 4.0;
  CHECK(weno_left_edge(lo, lo, hi) == doctest::Approx(lo).epsilon(1e-4));
  CHECK(weno_left_edge(lo, hi, hi) <= hi + 1e-4 * (hi - lo));
  CHECK(weno_left_edge(lo, hi, hi) >= lo - 1e-4 * (hi - lo));
}
