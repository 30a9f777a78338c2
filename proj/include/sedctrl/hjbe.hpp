#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sedctrl/grid.hpp"
#include "sedctrl/markov_chain.hpp"
#include "sedctrl/model.hpp"

namespace sedctrl {

// Value function pair on a vertex grid: `phi` is the expected discounted cost
// under the optimal decision rule, `phi_hat` the cost conditional on an
// intervention having been ordered but not yet executed.
struct ValueFields {
  int regimes = 0;
  Grid grid;
  std::vector<double> phi;      // row-major regime x vertex
  std::vector<double> phi_hat;  // same layout

  static ValueFields zeros(int regimes, const Grid& grid);

  double& phi_at(int i, int l) { return phi[static_cast<std::size_t>(i) * grid.vertex_count() + l]; }
  double phi_at(int i, int l) const { return phi[static_cast<std::size_t>(i) * grid.vertex_count() + l]; }
  double& phi_hat_at(int i, int l) { return phi_hat[static_cast<std::size_t>(i) * grid.vertex_count() + l]; }
  double phi_hat_at(int i, int l) const { return phi_hat[static_cast<std::size_t>(i) * grid.vertex_count() + l]; }
};

// Decision rule: intervene (order a replenishment) or not, as a function of
// the observed (regime, storage) pair.
struct Policy {
  enum class Mode { Threshold, ActivationSet };

  Mode mode = Mode::Threshold;
  int vertex_count = 0;
  // Per regime: storage level at or below which an intervention is ordered;
  // nullopt means the regime never intervenes.  Meaningful in Threshold mode.
  std::vector<std::optional<double>> thresholds;
  // Per regime, per vertex: 1 where intervention is ordered.  In Threshold
  // mode this is always a prefix of the vertices.
  std::vector<std::vector<std::uint8_t>> activation;

  int regime_count() const { return static_cast<int>(activation.size()); }
  bool intervene(int regime, double x) const;

  // Build a prefix policy directly from per-regime thresholds.
  static Policy from_thresholds(const std::vector<std::optional<double>>& thresholds,
                                int vertex_count);
};

struct HjbeOptions {
  double dt = 0.0;           // 0 -> 5 * dx^1.5
  double tolerance = 1e-14;  // max-norm difference of successive iterates
  long max_steps = 10000000;
  int history_stride = 0;    // 0 -> max_steps / 10000, at least 1
};

struct HjbeResult {
  ValueFields fields;
  long iterations = 0;
  double final_residual = 0.0;
  int history_stride = 1;
  std::vector<double> residual_history;  // sampled every history_stride steps
};

// One explicit pseudo-time step: semi-Lagrangian transport of each field along
// the characteristic foot max(0, x - S dt) with adaptive third-order
// interpolation, plus explicit discounting, regime-coupling, decision and
// execution reaction terms.  The unit occupancy cost enters as a source at the
// x = 0 vertex only.
ValueFields hjbe_pseudo_step(const ValueFields& state, const ModelSpec& model,
                             const RegimeChain& chain, double dt);

// Iterate hjbe_pseudo_step from zero initial data until the max-norm change of
// both fields over one step drops below options.tolerance.
HjbeResult solve_hjbe(const ModelSpec& model, const RegimeChain& chain, const Grid& grid,
                      const HjbeOptions& options = {});

// Read the decision rule off converged fields: intervene where phi >= phi_hat.
// When the active vertices form a prefix in every regime the policy is
// reported as per-regime thresholds placed midway between the last active and
// first inactive vertex; otherwise the raw activation sets are kept.
Policy extract_policy(const ValueFields& fields);

}  // namespace sedctrl
