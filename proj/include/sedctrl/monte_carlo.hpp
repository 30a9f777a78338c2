#pragma once

#include <cstdint>
#include <vector>

#include "sedctrl/hjbe.hpp"
#include "sedctrl/markov_chain.hpp"
#include "sedctrl/model.hpp"

namespace sedctrl {

struct SimConfig {
  long path_count = 100000;
  double time_step = 0.0025;
  double horizon = 0.0;           // simulate_paths requires > 0; estimate_cost derives
                                  // one from the discount tail when left at 0
  double burn_in_fraction = 0.2;  // fraction of the horizon discarded before sampling
  double inspection_rate = 1.0;   // rate of the Poisson inspection clock
  int bins = 200;                 // uniform histogram bins over [0,1]
  int cell_grid_intervals = 0;    // also tally vertex-centred cell occupancy when > 0
  std::uint64_t seed = 1;
  int workers = 1;
  int initial_regime = -1;        // -1: drawn from the chain's stationary distribution
  double initial_storage = 1.0;

  void validate(const ModelSpec& model, const RegimeChain& chain) const;
};

// Mean and standard error of a per-path fraction, estimated over paths.
struct BinStat {
  double mean = 0.0;
  double se = 0.0;
};

struct SimStats {
  int regimes = 0;
  int bins = 0;
  int cell_grid_intervals = 0;
  long paths = 0;               // paths that contributed at least one inspection
  double mean_inspections = 0.0;

  // Continuous-part histograms: fraction of inspections in each bin, excluding
  // inspections that found the state parked exactly at 0 or 1.
  std::vector<BinStat> hist_n, hist_w;  // regime-major: index i*bins + b
  // Point-mass estimates: fraction of inspections with the state exactly at
  // the boundary, split by phase.
  std::vector<BinStat> atom0_n, atom0_w, atom1_n, atom1_w;  // per regime
  // Occupancy of vertex-centred cells (atoms included), for direct comparison
  // with cell-averaged density output.  Empty when cell_grid_intervals == 0.
  std::vector<BinStat> cell_n, cell_w;  // index i*(cell_grid_intervals+1) + l
  BinStat waiting_fraction;
  std::vector<BinStat> regime_fraction;  // per regime, both phases

  const BinStat& bin_n(int i, int b) const { return hist_n[static_cast<std::size_t>(i) * bins + b]; }
  const BinStat& bin_w(int i, int b) const { return hist_w[static_cast<std::size_t>(i) * bins + b]; }
  const BinStat& cell_stat_n(int i, int l) const {
    return cell_n[static_cast<std::size_t>(i) * (cell_grid_intervals + 1) + l];
  }
  const BinStat& cell_stat_w(int i, int l) const {
    return cell_w[static_cast<std::size_t>(i) * (cell_grid_intervals + 1) + l];
  }
};

struct CostEstimate {
  double mean = 0.0;
  double se = 0.0;
  long paths = 0;
  double horizon = 0.0;
};

// Simulate independent controlled paths and sample their state at Poisson
// inspection times after burn-in.  Results are deterministic for a given seed,
// independently of the worker count.
SimStats simulate_paths(const ModelSpec& model, const RegimeChain& chain, const Policy& policy,
                        const SimConfig& cfg);

// Estimate the expected discounted cost from a given start: occupancy of the
// empty state integrated by left-endpoint quadrature on the time_step grid,
// plus the discounted intervention costs at execution instants.
CostEstimate estimate_cost(const ModelSpec& model, const RegimeChain& chain, const Policy& policy,
                           int start_regime, double start_storage, const SimConfig& cfg);

}  // namespace sedctrl
