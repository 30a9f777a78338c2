#pragma once

#include <cstdint>
#include <vector>

#include "sedctrl/grid.hpp"
#include "sedctrl/hjbe.hpp"
#include "sedctrl/markov_chain.hpp"
#include "sedctrl/model.hpp"

namespace sedctrl {

// Cell-averaged stationary densities, split by phase: p_n for paths with no
// pending intervention, p_w for paths waiting out an execution delay.
struct DensityFields {
  int regimes = 0;
  CellGrid grid;
  std::vector<double> p_n, p_w;         // row-major regime x cell
  std::vector<int> threshold_cells;     // per regime: last order-active cell, -1 = never
  std::vector<std::vector<std::uint8_t>> activation;  // per regime, per cell
  // Largest cell any regime's decision rule activates.  Waiting-phase mass can
  // be carried above a single regime's own threshold by regime switching, but
  // never above this: p_w vanishes for all cells beyond it in every regime.
  int support_cell = -1;

  double& p_n_at(int i, int l) { return p_n[static_cast<std::size_t>(i) * grid.cell_count() + l]; }
  double p_n_at(int i, int l) const { return p_n[static_cast<std::size_t>(i) * grid.cell_count() + l]; }
  double& p_w_at(int i, int l) { return p_w[static_cast<std::size_t>(i) * grid.cell_count() + l]; }
  double p_w_at(int i, int l) const { return p_w[static_cast<std::size_t>(i) * grid.cell_count() + l]; }

  // Uniform nonnegative start: p_n = 1/regimes everywhere, p_w = 0, mass 1.
  static DensityFields uniform(int regimes, const CellGrid& grid, const Policy& policy);

  double total_mass() const;  // compensated summation
};

enum class Reconstruction { Upwind, Weno };

struct MassAudit {
  double max_step_drift = 0.0;  // largest per-step change of total mass before clipping
  double clipped_mass = 0.0;    // cumulative negative mass clipped in WENO mode
};

struct PdfSummary {
  int regimes = 0;
  double dx = 0.0;
  std::vector<double> weight0_n, weight0_w;  // per regime: boundary-cell mass at x = 0
  std::vector<double> weight1_n, weight1_w;  // same at x = 1
  // 1 where the boundary-cell mass exceeds twice the continuous contribution
  // implied by the interior average (i.e. genuine concentration, not just the
  // continuous density overlapping the half cell).
  std::vector<std::uint8_t> concentrated0_n, concentrated0_w, concentrated1_n, concentrated1_w;
  std::vector<double> regime_mass;       // per regime, both phases
  std::vector<double> resetting_masses;  // per regime waiting-phase mass feeding the reset
  double p_zero = 0.0, p_one = 0.0, p_zero_plus_one = 0.0;
  double waiting_mass = 0.0;
  double total_mass = 0.0;
};

struct FpeOptions {
  Reconstruction reconstruction = Reconstruction::Weno;
  double dt = 0.0;           // 0 -> stability bound
  double tolerance = 1e-14;
  long max_steps = 20000000;
  int history_stride = 0;    // 0 -> max_steps / 10000, at least 1
};

struct FpeResult {
  DensityFields fields;
  PdfSummary summary;
  long iterations = 0;
  double final_residual = 0.0;
  MassAudit audit;
  int history_stride = 1;
  std::vector<double> residual_history;
};

// Waiting-phase mass of one regime; multiplied by the execution rate it is the
// probability flux re-entering the full state x = 1.
double resetting_mass(const DensityFields& fields, int regime);

// Largest pseudo-time step for which the explicit update keeps cell averages
// nonnegative: half the smallest cell size over the sum of the fastest drift
// and all reaction rates.
double fpe_stable_dt(const ModelSpec& model, const RegimeChain& chain, const CellGrid& grid);

// One explicit finite-volume step.  Interface fluxes are upwinded against the
// leftward drift, optionally with a third-order reconstruction away from
// boundaries; re-entry mass is injected into the last cell.  Total mass is
// conserved to round-off every step; violations throw.
DensityFields fpe_step(const DensityFields& fields, const ModelSpec& model,
                       const RegimeChain& chain, double dt,
                       Reconstruction reconstruction = Reconstruction::Upwind);

// Boundary-cell masses and probe of whether they represent point masses.
PdfSummary extract_boundary_weights(const DensityFields& fields);

// Iterate fpe_step from the uniform start until the max-norm change of both
// fields over one step drops below options.tolerance.
FpeResult solve_fpe_stationary(const ModelSpec& model, const RegimeChain& chain,
                               const Policy& policy, const CellGrid& grid,
                               const FpeOptions& options = {});

}  // namespace sedctrl
