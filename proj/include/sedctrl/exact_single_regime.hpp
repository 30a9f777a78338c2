#pragma once

#include "sedctrl/model.hpp"

namespace sedctrl {

// Closed forms for the single-regime problem with constant speed S > 0.
//
// The pending-execution value function has the form
//   psi(x) = base - cost_linear * carry * x + exp_coeff * e^{-(delta+mu) x / S}
//            + carry * value(1),
// and the pre-decision value function, below the threshold,
//   phi(x) = exp_obs * e^{-(delta+lambda) x / S} + affine_const + affine_slope * x
//            + exp_exec * e^{-(delta+mu) x / S},
// while above the threshold phi(x) = value(1) * e^{(delta/S)(1-x)}.
// (delta = discount, lambda = obs_rate, mu = exec_rate.)

struct WaitingCoefficients {
  double base = 0.0;       // constant part
  double carry = 0.0;      // exec_rate / (discount + exec_rate)
  double exp_coeff = 0.0;  // coefficient of e^{-(discount+exec_rate) x / S}
};

struct ValueCoefficients {
  double exp_obs = 0.0;       // coefficient of e^{-(discount+obs_rate) x / S}
  double affine_const = 0.0;  // depends on value(1)
  double affine_slope = 0.0;
  double exp_exec = 0.0;      // coefficient of e^{-(discount+exec_rate) x / S}
};

WaitingCoefficients waiting_value_coefficients(const ModelSpec& m);
ValueCoefficients value_coefficients(const ModelSpec& m, double value_at_one);

struct ExactSolution {
  ModelSpec model;
  double threshold = 0.0;     // replenish when observed at or below this level
  double value_at_one = 0.0;  // phi(1)
  ValueCoefficients coeffs;
  WaitingCoefficients waiting;
  double residual_value = 0.0;  // smooth-pasting residuals at the threshold
  double residual_slope = 0.0;

  double value(double x) const;           // phi, two-branch closed form
  double value_slope(double x) const;
  double waiting_value(double x) const;   // psi
  double waiting_value_slope(double x) const;
};

// Solves the two smooth-pasting conditions (value and slope continuity at the
// free boundary) for (threshold, value_at_one).  value_at_one is eliminated
// analytically, the scalar residual is bracketed by a sign scan on
// (1e-8, 1-1e-8) and bisected to machine precision.  Zero or multiple sign
// changes raise NonConvergenceError listing every root found.
ExactSolution solve_smooth_pasting(const ModelSpec& m);

// Vanishing-discount / instantaneous-execution limit: the threshold solves
//   (1 - x) e^{-obs_rate x / S} = cost_fixed S / (1 - cost_linear S)
// and the long-run mean cost is
//   u = cost_linear S + cost_fixed S / (1 - threshold).
struct ErgodicLimit {
  double threshold = 0.0;
  double mean_cost = 0.0;
  double residual = 0.0;  // of the threshold equation
};
ErgodicLimit ergodic_threshold(double obs_rate, double speed, double cost_linear,
                               double cost_fixed);

// Stationary law of the controlled state under a threshold policy: two point
// masses at x = 0 (one per phase) plus continuous densities on (0, 1].  The
// waiting-phase density vanishes above the threshold; the non-waiting density
// is exponential below it and flat above (the pointwise value at x = 1 uses
// the continuous extension).
struct ExactPdf {
  double obs_rate = 0.0, exec_rate = 0.0, speed = 0.0, threshold = 0.0;
  double norm_const = 0.0;   // overall normalization c
  double mix_coeff = 0.0;    // weight of the waiting point mass before scaling
  double shape_coeff = 0.0;  // waiting-density prefactor before scaling
  double mass_zero_nonwaiting = 0.0;  // point mass at x = 0, non-waiting phase
  double mass_zero_waiting = 0.0;     // point mass at x = 0, waiting phase

  double density_nonwaiting(double x) const;  // continuous part, x in (0,1]
  double density_waiting(double x) const;
  double mass_nonwaiting(double a, double b) const;  // integral over [a,b] subset (0,1]
  double mass_waiting(double a, double b) const;
  double total_mass() const;  // point masses + continuous parts (should be 1)
};
ExactPdf exact_stationary_pdf(double obs_rate, double exec_rate, double speed,
                              double threshold);

}  // namespace sedctrl
