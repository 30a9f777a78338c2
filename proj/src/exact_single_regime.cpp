#include "sedctrl/exact_single_regime.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "sedctrl/csv.hpp"
#include "sedctrl/errors.hpp"

namespace sedctrl {

namespace {

void require_single_regime(const ModelSpec& m) {
  if (m.regime_count() != 1 || m.has_profiles())
    throw ValidationError("exact solution: single constant-speed regime required");
  if (!(m.speeds[0] > 0.0))
    throw ValidationError("exact solution: speed must be positive");
  ModelSpec copy = m;
  copy.ensure_valid();
}

}  // namespace

WaitingCoefficients waiting_value_coefficients(const ModelSpec& m) {
  require_single_regime(m);
  const double S = m.speeds[0], lam = m.obs_rate, mu = m.exec_rate, del = m.discount;
  (void)lam;
  WaitingCoefficients w;
  w.carry = mu / (del + mu);
  w.base = w.carry * (m.cost_linear + m.cost_fixed + m.cost_linear * S / (del + mu));
  w.exp_coeff = 1.0 / (del + mu) - mu * m.cost_linear * S / ((del + mu) * (del + mu));
  return w;
}

ValueCoefficients value_coefficients(const ModelSpec& m, double value_at_one) {
  require_single_regime(m);
  const double S = m.speeds[0], lam = m.obs_rate, mu = m.exec_rate, del = m.discount;
  const double c = m.cost_linear;
  const WaitingCoefficients w = waiting_value_coefficients(m);
  const double dl = del + lam;

  ValueCoefficients v;
  v.affine_slope = -lam * c * w.carry / dl;
  v.affine_const = lam * w.base / dl + lam * c * S * w.carry / (dl * dl) +
                   lam * w.carry * value_at_one / dl;
  v.exp_exec = -lam * w.exp_coeff / (mu - lam);
  v.exp_obs = (1.0 - lam * c * S * w.carry / dl +
               lam * (del + mu) * w.exp_coeff / (mu - lam)) / dl;
  return v;
}

double ExactSolution::value(double x) const {
  const double S = model.speeds[0], lam = model.obs_rate, mu = model.exec_rate,
               del = model.discount;
  if (x <= threshold) {
    return coeffs.exp_obs * std::exp(-(del + lam) * x / S) + coeffs.affine_const +
           coeffs.affine_slope * x + coeffs.exp_exec * std::exp(-(del + mu) * x / S);
  }
  return value_at_one * std::exp(del * (1.0 - x) / S);
}

double ExactSolution::value_slope(double x) const {
  const double S = model.speeds[0], lam = model.obs_rate, mu = model.exec_rate,
               del = model.discount;
  if (x <= threshold) {
    return -(del + lam) / S * coeffs.exp_obs * std::exp(-(del + lam) * x / S) +
           coeffs.affine_slope -
           (del + mu) / S * coeffs.exp_exec * std::exp(-(del + mu) * x / S);
  }
  return -del / S * value_at_one * std::exp(del * (1.0 - x) / S);
}

double ExactSolution::waiting_value(double x) const {
  const double S = model.speeds[0], mu = model.exec_rate, del = model.discount;
  return waiting.base - model.cost_linear * waiting.carry * x +
         waiting.exp_coeff * std::exp(-(del + mu) * x / S) + waiting.carry * value_at_one;
}

double ExactSolution::waiting_value_slope(double x) const {
  const double S = model.speeds[0], mu = model.exec_rate, del = model.discount;
  return -model.cost_linear * waiting.carry -
         (del + mu) / S * waiting.exp_coeff * std::exp(-(del + mu) * x / S);
}

namespace {

// Pieces of the smooth-pasting system for a candidate threshold.  The
// affine_const coefficient is affine in value_at_one, so value continuity
// determines value_at_one(threshold) in closed form and slope continuity
// becomes a scalar residual.
struct PastingEval {
  double value_at_one;
  double slope_residual;
};

PastingEval eval_pasting(const ModelSpec& m, double xb) {
  const double S = m.speeds[0], lam = m.obs_rate, mu = m.exec_rate, del = m.discount;
  const double dl = del + lam;
  const ValueCoefficients v0 = value_coefficients(m, 0.0);
  const double carry_gain = lam * (mu / (del + mu)) / dl;  // d affine_const / d value(1)

  const double e_obs = std::exp(-dl * xb / S);
  const double e_exec = std::exp(-(del + mu) * xb / S);
  const double growth = std::exp(del * (1.0 - xb) / S);

  PastingEval out;
  out.value_at_one =
      (v0.exp_obs * e_obs + v0.affine_const + v0.affine_slope * xb + v0.exp_exec * e_exec) /
      (growth - carry_gain);
  out.slope_residual = -dl / S * v0.exp_obs * e_obs + v0.affine_slope -
                       (del + mu) / S * v0.exp_exec * e_exec +
                       del / S * out.value_at_one * growth;
  return out;
}

}  // namespace

ExactSolution solve_smooth_pasting(const ModelSpec& m) {
  require_single_regime(m);

  const double lo = 1e-8, hi = 1.0 - 1e-8;
  const int scan = 4096;
  auto residual = [&m](double x) { return eval_pasting(m, x).slope_residual; };

  // Bracket every sign change on a uniform scan; exactly one is acceptable.
  std::vector<std::pair<double, double>> brackets;
  double xa = lo, ra = residual(lo);
  for (int k = 1; k <= scan; ++k) {
    double xb = lo + (hi - lo) * k / scan;
    double rb = residual(xb);
    if (ra == 0.0) brackets.emplace_back(xa, xa);
    else if (ra * rb < 0.0) brackets.emplace_back(xa, xb);
    xa = xb;
    ra = rb;
  }
  if (brackets.empty())
    throw NonConvergenceError("smooth pasting: no interior root of the slope condition");
  if (brackets.size() > 1) {
    std::string msg = "smooth pasting: multiple candidate thresholds:";
    for (auto& b : brackets) {
      double a = b.first, c = b.second;
      for (int it = 0; it < 100 && c - a > 4e-16; ++it) {
        double mid = 0.5 * (a + c);
        (residual(a) * residual(mid) <= 0.0 ? c : a) = mid;
      }
      msg += " " + format_double(0.5 * (a + c));
    }
    throw NonConvergenceError(msg);
  }

  double a = brackets[0].first, b = brackets[0].second;
  for (int it = 0; it < 200 && b - a > 4e-16; ++it) {
    double mid = 0.5 * (a + b);
    if (residual(a) * residual(mid) <= 0.0)
      b = mid;
    else
      a = mid;
  }
  const double xb = 0.5 * (a + b);

  ExactSolution sol;
  sol.model = m;
  sol.threshold = xb;
  PastingEval pe = eval_pasting(m, xb);
  sol.value_at_one = pe.value_at_one;
  sol.coeffs = value_coefficients(m, sol.value_at_one);
  sol.waiting = waiting_value_coefficients(m);
  sol.residual_slope = pe.slope_residual;
  {
    const double S = m.speeds[0], lam = m.obs_rate, mu = m.exec_rate, del = m.discount;
    sol.residual_value = sol.coeffs.exp_obs * std::exp(-(del + lam) * xb / S) +
                         sol.coeffs.affine_const + sol.coeffs.affine_slope * xb +
                         sol.coeffs.exp_exec * std::exp(-(del + mu) * xb / S) -
                         sol.value_at_one * std::exp(del * (1.0 - xb) / S);
  }
  if (std::abs(sol.residual_value) > 1e-10 || std::abs(sol.residual_slope) > 1e-10)
    throw NonConvergenceError("smooth pasting: residuals too large (value " +
                              format_double(sol.residual_value) + ", slope " +
                              format_double(sol.residual_slope) + ")");
  return sol;
}

ErgodicLimit ergodic_threshold(double obs_rate, double speed, double cost_linear,
                               double cost_fixed) {
  if (!(obs_rate > 0.0) || !(speed > 0.0) || !(cost_linear > 0.0) || !(cost_fixed > 0.0))
    throw ValidationError("ergodic threshold: rates, speed and costs must be positive");
  if (!(cost_linear * speed < 1.0))
    throw ValidationError("ergodic threshold: cost_linear * speed must be below 1");
  const double rhs = cost_fixed * speed / (1.0 - cost_linear * speed);
  if (!(rhs < 1.0))
    throw ValidationError("ergodic threshold: no interior root (cost_fixed too large: rhs = " +
                          format_double(rhs) + ")");

  // (1-x) e^{-obs_rate x / speed} is strictly decreasing from 1 to 0, so the
  // root is unique; bisect to machine precision.
  auto f = [&](double x) { return (1.0 - x) * std::exp(-obs_rate * x / speed) - rhs; };
  double a = 0.0, b = 1.0;
  for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
    double mid = 0.5 * (a + b);
    if (f(mid) > 0.0)
      a = mid;
    else
      b = mid;
  }
  ErgodicLimit out;
  out.threshold = 0.5 * (a + b);
  out.mean_cost = cost_linear * speed + cost_fixed * speed / (1.0 - out.threshold);
  out.residual = f(out.threshold);
  return out;
}

ExactPdf exact_stationary_pdf(double obs_rate, double exec_rate, double speed,
                              double threshold) {
  if (!(obs_rate > 0.0) || !(exec_rate > obs_rate) || !(speed > 0.0))
    throw ValidationError("stationary pdf: need exec_rate > obs_rate > 0 and speed > 0");
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw ValidationError("stationary pdf: threshold must lie in (0,1)");

  ExactPdf p;
  p.obs_rate = obs_rate;
  p.exec_rate = exec_rate;
  p.speed = speed;
  p.threshold = threshold;
  const double lam = obs_rate, mu = exec_rate, S = speed, xb = threshold;
  p.norm_const = 1.0 / (1.0 + mu / lam + mu * (1.0 - xb) / S);
  p.mix_coeff = (mu * std::exp(-lam * xb / S) - lam * std::exp(-mu * xb / S)) / (mu - lam);
  p.shape_coeff = lam * mu / (S * (mu - lam));
  p.mass_zero_nonwaiting = (mu / lam) * p.norm_const * std::exp(-lam * xb / S);
  p.mass_zero_waiting = p.mix_coeff * p.norm_const;
  return p;
}

double ExactPdf::density_nonwaiting(double x) const {
  if (x <= 0.0 || x > 1.0) return 0.0;
  const double lam = obs_rate, mu = exec_rate, S = speed;
  if (x <= threshold)
    return mu / S * norm_const * std::exp(lam * (x - threshold) / S);
  return mu / S * norm_const;
}

double ExactPdf::density_waiting(double x) const {
  if (x <= 0.0 || x > threshold) return 0.0;
  const double lam = obs_rate, mu = exec_rate, S = speed;
  return shape_coeff * norm_const *
         (std::exp(lam * (x - threshold) / S) - std::exp(mu * (x - threshold) / S));
}

double ExactPdf::mass_nonwaiting(double a, double b) const {
  a = std::max(a, 0.0);
  b = std::min(b, 1.0);
  if (!(b > a)) return 0.0;
  const double lam = obs_rate, mu = exec_rate, S = speed, xb = threshold;
  auto lower = [&](double lo, double hi) {  // integral over [lo,hi] below xb
    return mu / lam * norm_const *
           (std::exp(lam * (hi - xb) / S) - std::exp(lam * (lo - xb) / S));
  };
  double m = 0.0;
  if (a < xb) m += lower(a, std::min(b, xb));
  if (b > xb) m += mu / S * norm_const * (b - std::max(a, xb));
  return m;
}

double ExactPdf::mass_waiting(double a, double b) const {
  a = std::max(a, 0.0);
  b = std::min(b, threshold);
  if (!(b > a)) return 0.0;
  const double lam = obs_rate, mu = exec_rate, S = speed, xb = threshold;
  auto anti = [&](double x) {
    return shape_coeff * norm_const *
           (S / lam * std::exp(lam * (x - xb) / S) - S / mu * std::exp(mu * (x - xb) / S));
  };
  return anti(b) - anti(a);
}

double ExactPdf::total_mass() const {
  return mass_zero_nonwaiting + mass_zero_waiting + mass_nonwaiting(0.0, 1.0) +
         mass_waiting(0.0, threshold);
}

}  // namespace sedctrl
