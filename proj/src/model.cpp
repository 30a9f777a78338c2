#include "sedctrl/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sedctrl/errors.hpp"

namespace sedctrl {

double ModelSpec::speed(int regime, double x) const {
  if (x <= 0.0) return 0.0;
  if (!has_profiles()) return speeds[regime];
  const auto& tab = speed_profiles[regime];
  const int n = static_cast<int>(tab.size());
  double pos = x * (n - 1);
  int k = std::min(static_cast<int>(pos), n - 2);
  double w = pos - k;
  return tab[k] * (1.0 - w) + tab[k + 1] * w;
}

double ModelSpec::max_speed() const {
  double m = 0.0;
  for (double s : speeds) m = std::max(m, s);
  for (const auto& tab : speed_profiles)
    for (double s : tab) m = std::max(m, s);
  return m;
}

ValidationReport ModelSpec::validate() const {
  ValidationReport rep;
  auto positive = [&rep](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      rep.violations.push_back(std::string("model: ") + name + " must be positive and finite");
  };
  positive(obs_rate, "obs_rate");
  positive(exec_rate, "exec_rate");
  positive(discount, "discount");
  positive(cost_linear, "cost_linear");
  positive(cost_fixed, "cost_fixed");
  if (!(exec_rate > obs_rate))
    rep.violations.push_back("model: exec_rate must exceed obs_rate");
  if (speeds.empty()) rep.violations.push_back("model: at least one regime speed required");
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    if (!(speeds[i] >= 0.0) || !std::isfinite(speeds[i]))
      rep.violations.push_back("model: speed of regime " + std::to_string(i) +
                               " must be finite and nonnegative");
  }
  if (has_profiles()) {
    if (speed_profiles.size() != speeds.size())
      rep.violations.push_back("model: speed profile count must match regime count");
    for (std::size_t i = 0; i < speed_profiles.size(); ++i) {
      if (speed_profiles[i].size() < 2)
        rep.violations.push_back("model: speed profile " + std::to_string(i) +
                                 " needs at least 2 samples");
      for (double s : speed_profiles[i])
        if (!(s >= 0.0) || !std::isfinite(s))
          rep.violations.push_back("model: speed profile " + std::to_string(i) +
                                   " has a negative or non-finite sample");
    }
  }
  return rep;
}

void ModelSpec::ensure_valid() const {
  auto rep = validate();
  if (!rep.ok()) throw ValidationError(rep.joined());
}

ValidationReport HydraulicParams::validate() const {
  ValidationReport rep;
  auto positive = [&rep](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      rep.violations.push_back(std::string("hydraulics: ") + name + " must be positive and finite");
  };
  positive(gravity, "gravity");
  positive(channel_width, "channel_width");
  positive(channel_slope, "channel_slope");
  positive(manning_n, "manning_n");
  positive(water_density, "water_density");
  positive(sediment_density, "sediment_density");
  positive(grain_diameter, "grain_diameter");
  positive(lump_volume, "lump_volume");
  positive(critical_shields, "critical_shields");
  if (!(sediment_density > water_density))
    rep.violations.push_back("hydraulics: sediment_density must exceed water_density");
  return rep;
}

void HydraulicParams::ensure_valid() const {
  auto rep = validate();
  if (!rep.ok()) throw ValidationError(rep.joined());
}

double bed_shear_stress(double discharge, const HydraulicParams& h) {
  if (!(discharge >= 0.0) || !std::isfinite(discharge))
    throw ValidationError("bed_shear_stress: discharge must be finite and nonnegative");
  // Normal-flow depth of a wide rectangular channel, tau = rho g h l.
  return h.water_density * h.gravity * std::pow(h.manning_n, 0.6) *
         std::pow(h.channel_slope, 0.7) * std::pow(h.channel_width, -0.6) *
         std::pow(discharge, 0.6);
}

double shields_number(double discharge, const HydraulicParams& h) {
  double sigma = h.sediment_density / h.water_density - 1.0;
  return bed_shear_stress(discharge, h) /
         (h.water_density * sigma * h.gravity * h.grain_diameter);
}

double mpm_transport_rate(double discharge, const HydraulicParams& h) {
  double sigma = h.sediment_density / h.water_density - 1.0;
  double excess = shields_number(discharge, h) - h.critical_shields;
  if (excess <= 0.0) return 0.0;
  return 8.0 * h.channel_width * std::pow(h.grain_diameter, 1.5) *
         std::sqrt(h.gravity * sigma) * std::pow(excess, 1.5) / h.lump_volume;
}

std::vector<double> default_discharge_ladder(int regimes) {
  std::vector<double> q(regimes);
  for (int i = 0; i < regimes; ++i) q[i] = 1.25 + 2.5 * i;
  return q;
}

ModelSpec build_sediment_model(const RegimeChain& chain, const HydraulicParams& h,
                               const ModelSpec& control,
                               const std::vector<double>& discharges,
                               double seconds_per_time_unit) {
  ensure_valid(chain);
  h.ensure_valid();
  if (static_cast<int>(discharges.size()) != chain.regime_count)
    throw ValidationError("build_sediment_model: need one discharge per regime (" +
                          std::to_string(discharges.size()) + " given, " +
                          std::to_string(chain.regime_count) + " regimes)");
  if (!(seconds_per_time_unit > 0.0))
    throw ValidationError("build_sediment_model: seconds_per_time_unit must be positive");

  ModelSpec m = control;
  m.speeds.resize(discharges.size());
  m.speed_profiles.clear();
  for (std::size_t i = 0; i < discharges.size(); ++i)
    m.speeds[i] = mpm_transport_rate(discharges[i], h) * seconds_per_time_unit;
  m.ensure_valid();
  return m;
}

}  // namespace sedctrl
