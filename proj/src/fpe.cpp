#include "sedctrl/fpe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sedctrl/csv.hpp"
#include "sedctrl/errors.hpp"
#include "sedctrl/weno.hpp"

namespace sedctrl {

namespace {

double kahan_mass(const DensityFields& f) {
  // Neumaier-compensated sum of |C_l| (p_n + p_w) over all regimes and cells.
  double sum = 0.0, comp = 0.0;
  const int L = f.grid.intervals;
  for (int i = 0; i < f.regimes; ++i) {
    for (int l = 0; l <= L; ++l) {
      const double term = f.grid.cell_size(l) * (f.p_n_at(i, l) + f.p_w_at(i, l));
      const double t = sum + term;
      if (std::fabs(sum) >= std::fabs(term)) {
        comp += (sum - t) + term;
      } else {
        comp += (term - t) + sum;
      }
      sum = t;
    }
  }
  return sum + comp;
}

void check_inputs(const ModelSpec& model, const RegimeChain& chain, const DensityFields& f) {
  model.ensure_valid();
  ensure_valid(chain);
  if (model.regime_count() != chain.regime_count) {
    throw ValidationError("model has " + std::to_string(model.regime_count()) +
                          " regimes but chain has " + std::to_string(chain.regime_count));
  }
  if (f.regimes != model.regime_count()) {
    throw ValidationError("density fields have " + std::to_string(f.regimes) +
                          " regimes but model has " + std::to_string(model.regime_count()));
  }
}

// Shared per-step state for the explicit finite-volume update.
struct Stepper {
  const ModelSpec& model;
  const RegimeChain& chain;
  CellGrid grid;
  std::vector<double> iface_speed;  // regime x interface
  std::vector<double> g_n, g_w;     // leftward transport rate through each interface

  Stepper(const ModelSpec& m, const RegimeChain& c, const CellGrid& g)
      : model(m), chain(c), grid(g) {
    const int L = grid.intervals;
    iface_speed.resize(static_cast<std::size_t>(m.regime_count()) * L);
    for (int i = 0; i < m.regime_count(); ++i) {
      for (int l = 0; l < L; ++l) {
        iface_speed[static_cast<std::size_t>(i) * L + l] = m.speed(i, grid.interface_pos(l));
      }
    }
    g_n.resize(L);
    g_w.resize(L);
  }

  // Leftward interface rates for one field of one regime.  `cap` bounds the
  // interfaces that can carry mass: everything at or beyond it is zero (the
  // waiting field has no mass above the largest activated cell, so its edge
  // acts as a wall; the non-waiting field uses cap = L).
  void fill_rates(const double* p, const double* sp, int cap, Reconstruction recon,
                  std::vector<double>& g) const {
    const int L = grid.intervals;
    for (int l = 0; l < L; ++l) {
      if (l >= cap) {
        g[l] = 0.0;
        continue;
      }
      double edge;
      if (recon == Reconstruction::Weno && l >= 1 && l <= L - 2) {
        // Positivity limiter: the absolute smoothness floor in the weights
        // misreads near-vacuum cells as smooth and can reconstruct an edge far
        // above the upwind average, overdrawing the cell.  Clamping to twice
        // the upwind average keeps the explicit step nonnegative under the
        // stable-dt budget and never binds on resolved profiles; the flux
        // stays in conservation form either way.
        edge = std::clamp(weno_left_edge(p[l], p[l + 1], p[l + 2]), 0.0, 2.0 * p[l + 1]);
      } else {
        edge = p[l + 1];
      }
      g[l] = sp[l] * edge;
    }
  }

  // Raw explicit update of `next` from `cur`; returns the max-norm change.
  double step(const DensityFields& cur, DensityFields& next, double dt, Reconstruction recon,
              long step_index) {
    const int n = cur.regimes;
    const int L = grid.intervals;
    const double lam = model.obs_rate;
    const double mu = model.exec_rate;
    const int support = cur.support_cell;
    double residual = 0.0;

    for (int i = 0; i < n; ++i) {
      const double* pn = cur.p_n.data() + static_cast<std::size_t>(i) * (L + 1);
      const double* pw = cur.p_w.data() + static_cast<std::size_t>(i) * (L + 1);
      double* qn = next.p_n.data() + static_cast<std::size_t>(i) * (L + 1);
      double* qw = next.p_w.data() + static_cast<std::size_t>(i) * (L + 1);
      const double* sp = iface_speed.data() + static_cast<std::size_t>(i) * L;
      const auto& act = cur.activation[i];
      const double exit = chain.exit_rate(i);

      double reset_mass = 0.0;
      for (int l = 0; l <= support; ++l) reset_mass += grid.cell_size(l) * pw[l];

      fill_rates(pn, sp, L, recon, g_n);
      fill_rates(pw, sp, support, recon, g_w);

      for (int l = 0; l <= L; ++l) {
        double mix_n = 0.0, mix_w = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double r = chain.rate(j, i);
          if (r == 0.0) continue;
          mix_n += r * cur.p_n_at(j, l);
          mix_w += r * cur.p_w_at(j, l);
        }
        const double inv_size = 1.0 / grid.cell_size(l);
        const double transfer = act[l] ? lam * pn[l] : 0.0;
        const double flux_n = (l < L ? g_n[l] : 0.0) - (l > 0 ? g_n[l - 1] : 0.0);
        const double flux_w = (l < L ? g_w[l] : 0.0) - (l > 0 ? g_w[l - 1] : 0.0);
        double dn = flux_n * inv_size - transfer + mix_n - exit * pn[l];
        if (l == L) dn += mu * reset_mass * inv_size;
        const double dw = flux_w * inv_size + transfer - mu * pw[l] + mix_w - exit * pw[l];
        const double vn = pn[l] + dt * dn;
        const double vw = pw[l] + dt * dw;
        if (!std::isfinite(vn) || !std::isfinite(vw)) {
          throw NonConvergenceError("density step produced a non-finite value at step " +
                                    std::to_string(step_index) + ", regime " + std::to_string(i) +
                                    ", cell " + std::to_string(l));
        }
        residual = std::max(residual, std::fabs(vn - pn[l]));
        residual = std::max(residual, std::fabs(vw - pw[l]));
        qn[l] = vn;
        qw[l] = vw;
      }
    }
    return residual;
  }

  // Negative-average guard: tiny undershoot from the adaptive reconstruction
  // is clipped and the total renormalized; anything larger is a scheme
  // violation and aborts.  Returns the clipped mass.
  double clip_and_renormalize(DensityFields& f, double target_mass, long step_index) const {
    const int L = grid.intervals;
    double worst = 0.0;
    double clipped = 0.0;
    for (int i = 0; i < f.regimes; ++i) {
      for (int l = 0; l <= L; ++l) {
        for (double* v : {&f.p_n_at(i, l), &f.p_w_at(i, l)}) {
          if (*v < 0.0) {
            worst = std::min(worst, *v);
            clipped += -*v * grid.cell_size(l);
            *v = 0.0;
          }
        }
      }
    }
    if (worst < -1e-12) {
      throw NonConvergenceError("density step produced a negative cell average " +
                                format_double(worst) + " at step " + std::to_string(step_index) +
                                "; the scheme is operating outside its stability envelope");
    }
    if (clipped > 0.0) {
      const double mass = kahan_mass(f);
      if (mass > 0.0) {
        const double scale = target_mass / mass;
        for (double& v : f.p_n) v *= scale;
        for (double& v : f.p_w) v *= scale;
      }
    }
    return clipped;
  }
};

// The decision region [0, x̄] is represented by whole cells 0..l_i whose union
// ends at the interface (l_i + 0.5)Δx nearest to x̄.  A threshold detected as a
// vertex midpoint therefore maps onto its interface exactly, and the effective
// threshold is never off by more than half a cell.
int threshold_cell_from_policy(const Policy& policy, int regime, const CellGrid& grid) {
  if (policy.mode == Policy::Mode::Threshold) {
    const auto& th = policy.thresholds[regime];
    if (!th.has_value()) return -1;
    int l = static_cast<int>(*th * grid.intervals + 1e-9);
    return std::clamp(l, 0, grid.intervals);
  }
  int last = -1;
  for (int l = 0; l < static_cast<int>(policy.activation[regime].size()); ++l) {
    if (policy.activation[regime][l]) last = l;
  }
  return last;
}

}  // namespace

DensityFields DensityFields::uniform(int regimes, const CellGrid& grid, const Policy& policy) {
  if (regimes < 1) throw ValidationError("density fields need at least one regime");
  if (policy.regime_count() != regimes) {
    throw ValidationError("policy covers " + std::to_string(policy.regime_count()) +
                          " regimes but the density fields need " + std::to_string(regimes));
  }
  if (policy.mode == Policy::Mode::ActivationSet &&
      policy.vertex_count != grid.cell_count()) {
    throw ValidationError(
        "an activation-set policy must share the density grid: policy has " +
        std::to_string(policy.vertex_count) + " vertices, grid has " +
        std::to_string(grid.cell_count()) + " cells");
  }

  DensityFields f;
  f.regimes = regimes;
  f.grid = grid;
  f.p_n.assign(static_cast<std::size_t>(regimes) * grid.cell_count(), 1.0 / regimes);
  f.p_w.assign(static_cast<std::size_t>(regimes) * grid.cell_count(), 0.0);
  f.threshold_cells.resize(regimes);
  f.activation.assign(regimes, std::vector<std::uint8_t>(grid.cell_count(), 0));
  for (int i = 0; i < regimes; ++i) {
    const int li = threshold_cell_from_policy(policy, i, grid);
    f.threshold_cells[i] = li;
    if (policy.mode == Policy::Mode::Threshold) {
      for (int l = 0; l <= li; ++l) f.activation[i][l] = 1;
    } else {
      f.activation[i] = policy.activation[i];
    }
    f.support_cell = std::max(f.support_cell, li);
  }
  return f;
}

double DensityFields::total_mass() const { return kahan_mass(*this); }

double resetting_mass(const DensityFields& fields, int regime) {
  if (regime < 0 || regime >= fields.regimes) {
    throw ValidationError("resetting_mass: regime index out of range");
  }
  double sum = 0.0;
  for (int l = 0; l <= fields.support_cell; ++l) {
    sum += fields.grid.cell_size(l) * fields.p_w_at(regime, l);
  }
  return sum;
}

double fpe_stable_dt(const ModelSpec& model, const RegimeChain& chain, const CellGrid& grid) {
  double max_exit = 0.0;
  for (int i = 0; i < chain.regime_count; ++i) max_exit = std::max(max_exit, chain.exit_rate(i));
  const double rate = model.max_speed() + model.obs_rate + model.exec_rate + max_exit;
  return 0.5 * (0.5 * grid.dx) / rate;
}

DensityFields fpe_step(const DensityFields& fields, const ModelSpec& model,
                       const RegimeChain& chain, double dt, Reconstruction reconstruction) {
  check_inputs(model, chain, fields);
  if (!(dt > 0.0)) throw ValidationError("density step size must be positive");
  const double bound = fpe_stable_dt(model, chain, fields.grid);
  if (dt > bound * (1.0 + 1e-9)) {
    throw ValidationError("density step size " + format_double(dt) +
                          " exceeds the stability bound " + format_double(bound));
  }
  Stepper stepper(model, chain, fields.grid);
  DensityFields next = fields;
  const double before = kahan_mass(fields);
  stepper.step(fields, next, dt, reconstruction, 0);
  const double after = kahan_mass(next);
  if (std::fabs(after - before) > 1e-14) {
    throw NonConvergenceError("density step drifted total mass by " +
                              format_double(after - before));
  }
  stepper.clip_and_renormalize(next, after, 0);
  return next;
}

PdfSummary extract_boundary_weights(const DensityFields& fields) {
  const int n = fields.regimes;
  const int L = fields.grid.intervals;
  const double half = 0.5 * fields.grid.dx;
  PdfSummary s;
  s.regimes = n;
  s.dx = fields.grid.dx;
  s.weight0_n.resize(n);
  s.weight0_w.resize(n);
  s.weight1_n.resize(n);
  s.weight1_w.resize(n);
  s.concentrated0_n.resize(n);
  s.concentrated0_w.resize(n);
  s.concentrated1_n.resize(n);
  s.concentrated1_w.resize(n);
  s.regime_mass.resize(n);
  s.resetting_masses.resize(n);

  for (int i = 0; i < n; ++i) {
    double interior_n = 0.0, interior_w = 0.0, mass = 0.0;
    for (int l = 0; l <= L; ++l) {
      const double size = fields.grid.cell_size(l);
      mass += size * (fields.p_n_at(i, l) + fields.p_w_at(i, l));
      if (l > 0 && l < L) {
        interior_n += size * fields.p_n_at(i, l);
        interior_w += size * fields.p_w_at(i, l);
      }
    }
    const double avg_n = interior_n / (1.0 - fields.grid.dx);
    const double avg_w = interior_w / (1.0 - fields.grid.dx);
    s.weight0_n[i] = fields.p_n_at(i, 0) * half;
    s.weight0_w[i] = fields.p_w_at(i, 0) * half;
    s.weight1_n[i] = fields.p_n_at(i, L) * half;
    s.weight1_w[i] = fields.p_w_at(i, L) * half;
    s.concentrated0_n[i] = (s.weight0_n[i] > 2.0 * half * avg_n && s.weight0_n[i] > 0.0) ? 1 : 0;
    s.concentrated0_w[i] = (s.weight0_w[i] > 2.0 * half * avg_w && s.weight0_w[i] > 0.0) ? 1 : 0;
    s.concentrated1_n[i] = (s.weight1_n[i] > 2.0 * half * avg_n && s.weight1_n[i] > 0.0) ? 1 : 0;
    s.concentrated1_w[i] = (s.weight1_w[i] > 2.0 * half * avg_w && s.weight1_w[i] > 0.0) ? 1 : 0;
    s.regime_mass[i] = mass;
    s.resetting_masses[i] = resetting_mass(fields, i);
    s.p_zero += s.weight0_n[i] + s.weight0_w[i];
    s.p_one += s.weight1_n[i] + s.weight1_w[i];
    s.waiting_mass += s.resetting_masses[i];
  }
  s.p_zero_plus_one = s.p_zero + s.p_one;
  s.total_mass = fields.total_mass();
  return s;
}

FpeResult solve_fpe_stationary(const ModelSpec& model, const RegimeChain& chain,
                               const Policy& policy, const CellGrid& grid,
                               const FpeOptions& options) {
  model.ensure_valid();
  ensure_valid(chain);
  if (model.regime_count() != chain.regime_count) {
    throw ValidationError("model has " + std::to_string(model.regime_count()) +
                          " regimes but chain has " + std::to_string(chain.regime_count));
  }
  if (!(options.tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (options.max_steps < 1) throw ValidationError("max_steps must be at least 1");
  const double bound = fpe_stable_dt(model, chain, grid);
  const double dt = options.dt > 0.0 ? options.dt : bound;
  if (dt > bound * (1.0 + 1e-9)) {
    throw ValidationError("density step size " + format_double(dt) +
                          " exceeds the stability bound " + format_double(bound));
  }

  DensityFields cur = DensityFields::uniform(model.regime_count(), grid, policy);
  DensityFields next = cur;
  Stepper stepper(model, chain, grid);

  FpeResult result;
  result.history_stride = options.history_stride > 0
                              ? options.history_stride
                              : static_cast<int>(std::max<long>(1, options.max_steps / 10000));
  double prev_mass = kahan_mass(cur);

  for (long step = 1; step <= options.max_steps; ++step) {
    const double residual = stepper.step(cur, next, dt, options.reconstruction, step);
    const double raw_mass = kahan_mass(next);
    const double drift = std::fabs(raw_mass - prev_mass);
    result.audit.max_step_drift = std::max(result.audit.max_step_drift, drift);
    if (drift > 1e-14) {
      throw NonConvergenceError("stationary density solve drifted total mass by " +
                                format_double(raw_mass - prev_mass) + " at step " +
                                std::to_string(step));
    }
    result.audit.clipped_mass += stepper.clip_and_renormalize(next, raw_mass, step);
    prev_mass = raw_mass;
    std::swap(cur, next);
    if (step % result.history_stride == 0) result.residual_history.push_back(residual);
    if (residual <= options.tolerance) {
      result.iterations = step;
      result.final_residual = residual;
      result.fields = std::move(cur);
      result.summary = extract_boundary_weights(result.fields);
      return result;
    }
    if (step == options.max_steps) {
      std::string tail;
      const std::size_t h = result.residual_history.size();
      for (std::size_t k = h >= 3 ? h - 3 : 0; k < h; ++k) {
        tail += " " + format_double(result.residual_history[k]);
      }
      throw NonConvergenceError("stationary density solve did not reach tolerance " +
                                format_double(options.tolerance) + " within " +
                                std::to_string(options.max_steps) +
                                " steps; final residual " + format_double(residual) +
                                "; sampled residual tail:" + tail);
    }
  }
  return result;  // unreachable
}

}  // namespace sedctrl
