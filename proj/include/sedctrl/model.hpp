#pragma once

#include <vector>

#include "sedctrl/markov_chain.hpp"

namespace sedctrl {

// Control problem parameters plus per-regime degradation speeds.
//
// The storage level x lives on [0,1] and degrades with speed S(i,x) in regime
// i; the default family is constant-per-regime, S(i,x) = speeds[i] for x > 0
// and 0 at x = 0.  Optionally a tabulated profile per regime (sampled on a
// uniform grid over [0,1], linearly interpolated, forced to 0 at x = 0)
// replaces the constant.
struct ModelSpec {
  double obs_rate = 0.0;     // rate of random decision opportunities
  double exec_rate = 0.0;    // rate of completing a decided replenishment
  double discount = 0.0;     // continuous discount rate
  double cost_linear = 0.0;  // cost per unit of replenished storage
  double cost_fixed = 0.0;   // fixed cost per replenishment
  std::vector<double> speeds;
  std::vector<std::vector<double>> speed_profiles;  // empty => constant speeds

  int regime_count() const { return static_cast<int>(speeds.size()); }
  bool has_profiles() const { return !speed_profiles.empty(); }
  double speed(int regime, double x) const;
  double max_speed() const;

  // exec_rate > obs_rate > 0; discount, costs > 0; speeds finite and >= 0.
  ValidationReport validate() const;
  void ensure_valid() const;  // throws ValidationError
};

// Channel and sediment properties, SI units.
struct HydraulicParams {
  double gravity = 9.81;            // m/s^2
  double channel_width = 25.0;      // m
  double channel_slope = 0.001;     // (-)
  double manning_n = 0.03;          // s/m^{1/3}
  double water_density = 1000.0;    // kg/m^3
  double sediment_density = 2600.0; // kg/m^3
  double grain_diameter = 5.0e-3;   // m
  double lump_volume = 100.0;       // m^3, full replenished sediment volume
  double critical_shields = 0.047;  // (-)

  ValidationReport validate() const;
  void ensure_valid() const;
};

// Bed shear stress (Pa) for a steady discharge (m^3/s) via Manning's formula
// for a wide rectangular channel:
//   tau = rho g n^{3/5} l^{7/10} B^{-3/5} q^{3/5}.
double bed_shear_stress(double discharge, const HydraulicParams& h);

// Shields parameter tau / ((rho_s - rho) g d).
double shields_number(double discharge, const HydraulicParams& h);

// Meyer-Peter-Mueller bedload transport expressed as a depletion rate of the
// normalized lump volume, in 1/second:
//   S = (8 B d^{3/2} sqrt(g sigma) / V) * max(Theta - Theta_c, 0)^{3/2}.
// Continuous in q and exactly zero below the incipient-motion threshold.
double mpm_transport_rate(double discharge, const HydraulicParams& h);

// Discharge ladder used by the river application: q_i = 1.25 + 2.5 i (m^3/s).
std::vector<double> default_discharge_ladder(int regimes);

// Assembles a ModelSpec whose speeds come from the transport formula at the
// per-regime discharges.  Rates in `control` (obs/exec/discount) are taken as
// written; `seconds_per_time_unit` converts the SI transport rate into the
// same time unit (86400 when rates are per day).
ModelSpec build_sediment_model(const RegimeChain& chain, const HydraulicParams& h,
                               const ModelSpec& control,
                               const std::vector<double>& discharges,
                               double seconds_per_time_unit = 86400.0);

}  // namespace sedctrl
