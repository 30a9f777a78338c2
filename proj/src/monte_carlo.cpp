#include "sedctrl/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "sedctrl/errors.hpp"
#include "sedctrl/grid.hpp"
#include "sedctrl/rng.hpp"

namespace sedctrl {

namespace {

constexpr long kBlock = 4096;  // paths per reduction block; merges run in block
                               // order so results do not depend on worker count
constexpr double kInf = std::numeric_limits<double>::infinity();

// Flat index layout for all per-path fraction statistics.
struct VarLayout {
  int regimes = 0, bins = 0, cells = 0;
  int total = 0;

  static VarLayout make(int regimes, int bins, int cell_intervals) {
    VarLayout v;
    v.regimes = regimes;
    v.bins = bins;
    v.cells = cell_intervals > 0 ? cell_intervals + 1 : 0;
    v.total = 4 * regimes + 2 * regimes * bins + 2 * regimes * v.cells + 1 + regimes;
    return v;
  }
  int atom0(int i, int p) const { return i * 2 + p; }
  int atom1(int i, int p) const { return 2 * regimes + i * 2 + p; }
  int bin(int i, int p, int b) const { return 4 * regimes + (i * 2 + p) * bins + b; }
  int cell(int i, int p, int l) const {
    return 4 * regimes + 2 * regimes * bins + (i * 2 + p) * cells + l;
  }
  int waiting() const { return 4 * regimes + 2 * regimes * bins + 2 * regimes * cells; }
  int regime(int i) const { return waiting() + 1 + i; }
};

struct BlockAcc {
  std::vector<double> s1, s2;  // per-variable sums of path fractions and their squares
  long paths = 0;              // paths with at least one inspection
  double inspections = 0.0;
};

struct Tally {
  const VarLayout* layout = nullptr;
  std::vector<std::uint32_t> count;
  std::vector<int> touched;
  long inspections = 0;

  void reset(const VarLayout& vl) {
    layout = &vl;
    count.assign(vl.total, 0);
    touched.clear();
    touched.reserve(256);
  }
  void hit(int idx) {
    if (count[idx]++ == 0) touched.push_back(idx);
  }
  void flush(BlockAcc& acc) {
    if (inspections > 0) {
      const double inv = 1.0 / static_cast<double>(inspections);
      for (int idx : touched) {
        const double f = count[idx] * inv;
        acc.s1[idx] += f;
        acc.s2[idx] += f * f;
        count[idx] = 0;
      }
      acc.paths += 1;
      acc.inspections += static_cast<double>(inspections);
    } else {
      for (int idx : touched) count[idx] = 0;
    }
    touched.clear();
    inspections = 0;
  }
};

int draw_next_regime(Rng& rng, const RegimeChain& chain, int i) {
  const int n = chain.regime_count;
  const double exit = chain.exit_rate(i);
  const double u = rng.uniform() * exit;
  double acc = 0.0;
  int last = i;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const double r = chain.rate(i, j);
    if (r == 0.0) continue;
    acc += r;
    last = j;
    if (u < acc) return j;
  }
  return last;
}

// Inclusive index range [first, last] of quadrature grid points k (at times
// k * dt) falling in the half-open interval [t0, t1).  The small slack keeps
// the ranges of consecutive segments an exact partition.
struct GridRange {
  long first = 0, last = -1;
};
GridRange grid_range(double t0, double t1, double dt) {
  GridRange r;
  r.first = static_cast<long>(std::ceil(t0 / dt - 1e-9));
  r.last = static_cast<long>(std::ceil(t1 / dt - 1e-9)) - 1;
  return r;
}

struct StatsHooks {
  static constexpr bool kInspect = true;
  static constexpr bool kCost = false;
  Tally* tally = nullptr;
  const VarLayout* vl = nullptr;
  const CellGrid* cells = nullptr;

  void on_inspection(int regime, int phase, double x) {
    Tally& t = *tally;
    t.inspections += 1;
    if (x == 0.0) {
      t.hit(vl->atom0(regime, phase));
    } else if (x == 1.0) {
      t.hit(vl->atom1(regime, phase));
    } else {
      int b = static_cast<int>(x * vl->bins);
      if (b > vl->bins - 1) b = vl->bins - 1;
      t.hit(vl->bin(regime, phase, b));
    }
    if (cells != nullptr) t.hit(vl->cell(regime, phase, cells->containing_cell(x)));
    if (phase == 1) t.hit(vl->waiting());
    t.hit(vl->regime(regime));
  }
  void on_segment(double, double, double, double) {}
  void on_zero_gridpoint(long) {}
  void on_execution(double, double) {}
};

struct CostHooks {
  static constexpr bool kInspect = false;
  static constexpr bool kCost = true;
  double dt = 0.0;
  double discount = 0.0;
  double cost_linear = 0.0;
  double cost_fixed = 0.0;
  double decay = 0.0;          // e^{-discount * dt}
  double inv_one_minus = 0.0;  // 1 / (1 - decay)
  double cost = 0.0;

  void prepare(double dt_, double discount_, double c, double d) {
    dt = dt_;
    discount = discount_;
    cost_linear = c;
    cost_fixed = d;
    decay = std::exp(-discount * dt);
    inv_one_minus = 1.0 / (1.0 - decay);
    cost = 0.0;
  }
  void on_inspection(int, int, double) {}
  // Discounted occupancy of the empty state over one constant-speed segment:
  // geometric sum over the quadrature grid points at which the state is 0.
  void on_segment(double t0, double t1, double x0, double speed) {
    double t_hit;
    if (x0 <= 0.0) {
      t_hit = t0;
    } else if (speed > 0.0) {
      t_hit = t0 + x0 / speed;
      if (t_hit >= t1) return;
    } else {
      return;
    }
    GridRange r = grid_range(t0, t1, dt);
    const long hit_first = static_cast<long>(std::ceil(t_hit / dt - 1e-9));
    const long first = std::max(r.first, hit_first);
    if (first > r.last) return;
    const long m = r.last - first + 1;
    cost += dt * std::exp(-discount * (dt * static_cast<double>(first))) *
            (1.0 - std::exp(-discount * (dt * static_cast<double>(m)))) * inv_one_minus;
  }
  void on_zero_gridpoint(long k) { cost += dt * std::exp(-discount * (dt * static_cast<double>(k))); }
  void on_execution(double t, double x_before) {
    if (x_before < 1.0) {
      cost += std::exp(-discount * t) * (cost_linear * (1.0 - x_before) + cost_fixed);
    }
  }
};

struct Engine {
  const ModelSpec& model;
  const RegimeChain& chain;
  const Policy& policy;
  const SimConfig& cfg;
  double horizon = 0.0;
  double burn_start = 0.0;
  int start_regime = -1;
  double start_storage = 1.0;
  std::vector<double> init_dist{};  // stationary distribution when start_regime < 0
  bool profiles = false;

  // Euler sub-stepping on the quadrature grid, used only for state-dependent
  // speed profiles; the constant-speed drift composes exactly and needs no
  // sub-steps.
  template <class Hooks>
  double advance_profile(double t0, double t1, double x, int regime, Hooks& h) const {
    const double dt = cfg.time_step;
    GridRange r = grid_range(t0, t1, dt);
    double tc = t0;
    for (long k = r.first; k <= r.last; ++k) {
      const double tg = dt * static_cast<double>(k);
      x = std::max(0.0, x - model.speed(regime, x) * (tg - tc));
      tc = tg;
      if (Hooks::kCost && x == 0.0) h.on_zero_gridpoint(k);
    }
    return std::max(0.0, x - model.speed(regime, x) * (t1 - tc));
  }

  template <class Hooks>
  void run_path(std::uint64_t path_id, Hooks& h) const {
    const std::uint64_t base = mix_seed(cfg.seed, path_id);
    Rng rng_init(mix_seed(base, 0));
    Rng rng_chain(mix_seed(base, 1));
    Rng rng_obs(mix_seed(base, 2));
    Rng rng_delay(mix_seed(base, 3));
    Rng rng_insp(mix_seed(base, 4));

    int regime = start_regime >= 0
                     ? start_regime
                     : rng_init.choose(init_dist.data(), chain.regime_count, 1.0);
    double x = start_storage;
    double t = 0.0;
    int phase = 0;  // 0: no pending intervention, 1: waiting for execution
    double next_jump = rng_chain.exponential(chain.exit_rate(regime));
    double next_obs = rng_obs.exponential(model.obs_rate);  // no decision at t = 0
    double exec_time = kInf;
    double next_insp = Hooks::kInspect ? burn_start + rng_insp.exponential(cfg.inspection_rate)
                                       : kInf;

    while (true) {
      const double decision = phase == 0 ? next_obs : exec_time;
      const double t_next = std::min(std::min(next_jump, decision), std::min(next_insp, horizon));
      if (profiles) {
        x = advance_profile(t, t_next, x, regime, h);
      } else {
        const double s = model.speeds[regime];
        if (Hooks::kCost) h.on_segment(t, t_next, x, s);
        x = std::max(0.0, x - s * (t_next - t));
      }
      t = t_next;
      if (t >= horizon) break;
      if (t == next_jump) {
        regime = draw_next_regime(rng_chain, chain, regime);
        next_jump = t + rng_chain.exponential(chain.exit_rate(regime));
      } else if (t == decision) {
        if (phase == 0) {
          if (policy.intervene(regime, x)) {
            phase = 1;
            exec_time = t + rng_delay.exponential(model.exec_rate);
            next_obs = kInf;
          } else {
            next_obs = t + rng_obs.exponential(model.obs_rate);
          }
        } else {
          h.on_execution(t, x);
          x = 1.0;
          phase = 0;
          exec_time = kInf;
          next_obs = t + rng_obs.exponential(model.obs_rate);
        }
      } else {
        h.on_inspection(regime, phase, x);
        next_insp = t + rng_insp.exponential(cfg.inspection_rate);
      }
    }
  }
};

void check_common(const ModelSpec& model, const RegimeChain& chain, const Policy& policy,
                  const SimConfig& cfg) {
  model.ensure_valid();
  ensure_valid(chain);
  if (model.regime_count() != chain.regime_count) {
    throw ValidationError("model has " + std::to_string(model.regime_count()) +
                          " regimes but chain has " + std::to_string(chain.regime_count));
  }
  if (policy.regime_count() != model.regime_count()) {
    throw ValidationError("policy covers " + std::to_string(policy.regime_count()) +
                          " regimes but the model has " + std::to_string(model.regime_count()));
  }
  cfg.validate(model, chain);
}

// Run all blocks, in parallel when cfg.workers > 1, and hand each finished
// block accumulator to `merge` in strict block order.
template <class RunBlock>
void run_blocks(long block_count, int workers, RunBlock&& run_block) {
  if (workers <= 1) {
    for (long b = 0; b < block_count; ++b) run_block(b);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (long b = w; b < block_count; b += workers) run_block(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void SimConfig::validate(const ModelSpec& model, const RegimeChain& chain) const {
  if (path_count < 1) throw ValidationError("simulation needs at least one path");
  double max_exit = 0.0;
  for (int i = 0; i < chain.regime_count; ++i) max_exit = std::max(max_exit, chain.exit_rate(i));
  const double rate_sum = model.obs_rate + model.exec_rate + max_exit;
  if (!(time_step > 0.0) || !(time_step < 1.0 / rate_sum)) {
    throw ValidationError("time step must lie in (0, 1/(total event rate)) = (0, " +
                          std::to_string(1.0 / rate_sum) + ")");
  }
  if (!(burn_in_fraction >= 0.0) || !(burn_in_fraction < 1.0)) {
    throw ValidationError("burn-in fraction must lie in [0, 1)");
  }
  if (!(inspection_rate > 0.0)) throw ValidationError("inspection rate must be positive");
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  if (cell_grid_intervals != 0 && cell_grid_intervals < 3) {
    throw ValidationError("cell occupancy tally needs at least 3 intervals");
  }
  if (initial_regime < -1 || initial_regime >= chain.regime_count) {
    throw ValidationError("initial regime out of range");
  }
  if (!(initial_storage >= 0.0) || !(initial_storage <= 1.0)) {
    throw ValidationError("initial storage must lie in [0, 1]");
  }
  if (workers < 0) throw ValidationError("worker count must be nonnegative");
}

SimStats simulate_paths(const ModelSpec& model, const RegimeChain& chain, const Policy& policy,
                        const SimConfig& cfg) {
  check_common(model, chain, policy, cfg);
  if (!(cfg.horizon > 0.0)) throw ValidationError("simulation horizon must be positive");

  const VarLayout vl = VarLayout::make(model.regime_count(), cfg.bins, cfg.cell_grid_intervals);
  CellGrid cells;
  if (cfg.cell_grid_intervals > 0) cells = CellGrid::with_intervals(cfg.cell_grid_intervals);

  Engine engine{model, chain, policy, cfg};
  engine.horizon = cfg.horizon;
  engine.burn_start = cfg.burn_in_fraction * cfg.horizon;
  engine.start_regime = cfg.initial_regime;
  engine.start_storage = cfg.initial_storage;
  engine.profiles = model.has_profiles();
  if (cfg.initial_regime < 0) engine.init_dist = stationary_distribution(chain);

  const long block_count = (cfg.path_count + kBlock - 1) / kBlock;
  std::vector<BlockAcc> blocks(block_count);

  run_blocks(block_count, cfg.workers, [&](long b) {
    thread_local Tally tally;
    tally.reset(vl);
    BlockAcc& acc = blocks[b];
    acc.s1.assign(vl.total, 0.0);
    acc.s2.assign(vl.total, 0.0);
    StatsHooks hooks;
    hooks.tally = &tally;
    hooks.vl = &vl;
    hooks.cells = cfg.cell_grid_intervals > 0 ? &cells : nullptr;
    const long lo = b * kBlock;
    const long hi = std::min(cfg.path_count, lo + kBlock);
    for (long p = lo; p < hi; ++p) {
      engine.run_path(static_cast<std::uint64_t>(p), hooks);
      tally.flush(acc);
    }
  });

  // Merge in block order with compensated sums.
  std::vector<double> s1(vl.total, 0.0), s2(vl.total, 0.0);
  std::vector<double> c1(vl.total, 0.0), c2(vl.total, 0.0);
  long paths = 0;
  double inspections = 0.0;
  for (const BlockAcc& acc : blocks) {
    paths += acc.paths;
    inspections += acc.inspections;
    for (int k = 0; k < vl.total; ++k) {
      double y = acc.s1[k] - c1[k];
      double t = s1[k] + y;
      c1[k] = (t - s1[k]) - y;
      s1[k] = t;
      y = acc.s2[k] - c2[k];
      t = s2[k] + y;
      c2[k] = (t - s2[k]) - y;
      s2[k] = t;
    }
  }
  if (paths == 0) {
    throw NonConvergenceError("no inspections recorded; horizon or inspection rate too small");
  }

  auto stat = [&](int idx) {
    BinStat b;
    const double n = static_cast<double>(paths);
    b.mean = s1[idx] / n;
    if (paths > 1) {
      const double var = std::max(0.0, (s2[idx] - s1[idx] * s1[idx] / n) / (n - 1.0));
      b.se = std::sqrt(var / n);
    }
    return b;
  };

  SimStats out;
  out.regimes = model.regime_count();
  out.bins = cfg.bins;
  out.cell_grid_intervals = cfg.cell_grid_intervals;
  out.paths = paths;
  out.mean_inspections = inspections / static_cast<double>(paths);
  out.hist_n.resize(static_cast<std::size_t>(out.regimes) * cfg.bins);
  out.hist_w.resize(static_cast<std::size_t>(out.regimes) * cfg.bins);
  out.atom0_n.resize(out.regimes);
  out.atom0_w.resize(out.regimes);
  out.atom1_n.resize(out.regimes);
  out.atom1_w.resize(out.regimes);
  out.regime_fraction.resize(out.regimes);
  if (cfg.cell_grid_intervals > 0) {
    out.cell_n.resize(static_cast<std::size_t>(out.regimes) * (cfg.cell_grid_intervals + 1));
    out.cell_w.resize(static_cast<std::size_t>(out.regimes) * (cfg.cell_grid_intervals + 1));
  }
  for (int i = 0; i < out.regimes; ++i) {
    out.atom0_n[i] = stat(vl.atom0(i, 0));
    out.atom0_w[i] = stat(vl.atom0(i, 1));
    out.atom1_n[i] = stat(vl.atom1(i, 0));
    out.atom1_w[i] = stat(vl.atom1(i, 1));
    out.regime_fraction[i] = stat(vl.regime(i));
    for (int b = 0; b < cfg.bins; ++b) {
      out.hist_n[static_cast<std::size_t>(i) * cfg.bins + b] = stat(vl.bin(i, 0, b));
      out.hist_w[static_cast<std::size_t>(i) * cfg.bins + b] = stat(vl.bin(i, 1, b));
    }
    for (int l = 0; l < vl.cells; ++l) {
      out.cell_n[static_cast<std::size_t>(i) * vl.cells + l] = stat(vl.cell(i, 0, l));
      out.cell_w[static_cast<std::size_t>(i) * vl.cells + l] = stat(vl.cell(i, 1, l));
    }
  }
  out.waiting_fraction = stat(vl.waiting());
  return out;
}

CostEstimate estimate_cost(const ModelSpec& model, const RegimeChain& chain, const Policy& policy,
                           int start_regime, double start_storage, const SimConfig& cfg) {
  check_common(model, chain, policy, cfg);
  if (start_regime < -1 || start_regime >= chain.regime_count) {
    throw ValidationError("start regime out of range");
  }
  if (!(start_storage >= 0.0) || !(start_storage <= 1.0)) {
    throw ValidationError("start storage must lie in [0, 1]");
  }

  Engine engine{model, chain, policy, cfg};
  // Truncate where the remaining discounted tail is below 1e-6.
  engine.horizon = cfg.horizon > 0.0
                       ? cfg.horizon
                       : std::ceil(std::log(1e6 / model.discount) / model.discount);
  engine.burn_start = 0.0;
  engine.start_regime = start_regime;
  engine.start_storage = start_storage;
  engine.profiles = model.has_profiles();
  if (start_regime < 0) engine.init_dist = stationary_distribution(chain);

  const long block_count = (cfg.path_count + kBlock - 1) / kBlock;
  struct CostAcc {
    long n = 0;
    double sum = 0.0, sumsq = 0.0;
  };
  std::vector<CostAcc> blocks(block_count);

  run_blocks(block_count, cfg.workers, [&](long b) {
    CostAcc& acc = blocks[b];
    CostHooks hooks;
    const long lo = b * kBlock;
    const long hi = std::min(cfg.path_count, lo + kBlock);
    for (long p = lo; p < hi; ++p) {
      hooks.prepare(cfg.time_step, model.discount, model.cost_linear, model.cost_fixed);
      engine.run_path(static_cast<std::uint64_t>(p), hooks);
      acc.n += 1;
      acc.sum += hooks.cost;
      acc.sumsq += hooks.cost * hooks.cost;
    }
  });

  double sum = 0.0, sumsq = 0.0, comp = 0.0, compsq = 0.0;
  long n = 0;
  for (const CostAcc& acc : blocks) {
    n += acc.n;
    double y = acc.sum - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    y = acc.sumsq - compsq;
    t = sumsq + y;
    compsq = (t - sumsq) - y;
    sumsq = t;
  }

  CostEstimate est;
  est.paths = n;
  est.horizon = engine.horizon;
  est.mean = sum / static_cast<double>(n);
  if (n > 1) {
    const double var = std::max(0.0, (sumsq - sum * sum / n) / (static_cast<double>(n) - 1.0));
    est.se = std::sqrt(var / static_cast<double>(n));
  }
  return est;
}

}  // namespace sedctrl
