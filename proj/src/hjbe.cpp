#include "sedctrl/hjbe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sedctrl/csv.hpp"
#include "sedctrl/errors.hpp"
#include "sedctrl/weno.hpp"

namespace sedctrl {

namespace {

// Precomputed characteristic foot for one (regime, vertex) pair.  The foot
// never moves during the iteration, so the stencil location is fixed.
struct Foot {
  int cell = 0;        // interval index j with foot in [x_j, x_{j+1}]
  double theta = 0.0;  // fractional position inside the interval
  bool linear = false; // true where the 4-point stencil would leave the grid
  bool at_zero = false;
};

std::vector<Foot> locate_feet(const ModelSpec& model, const Grid& grid, double dt) {
  const int V = grid.vertex_count();
  const int L = grid.intervals;
  std::vector<Foot> feet(static_cast<std::size_t>(model.regime_count()) * V);
  for (int i = 0; i < model.regime_count(); ++i) {
    for (int l = 0; l < V; ++l) {
      const double x = grid.vertex(l);
      const double y = std::max(0.0, x - model.speed(i, x) * dt);
      Foot f;
      if (y <= 0.0) {
        f.at_zero = true;
      } else {
        int j = static_cast<int>(y * L);
        if (j > L - 1) j = L - 1;
        f.cell = j;
        f.theta = y * L - j;
        f.linear = (j == 0 || j == L - 1);
      }
      feet[static_cast<std::size_t>(i) * V + l] = f;
    }
  }
  return feet;
}

double interpolate_at_foot(const double* row, const Foot& f) {
  if (f.at_zero) return row[0];
  if (f.linear) return (1.0 - f.theta) * row[f.cell] + f.theta * row[f.cell + 1];
  return weno_cell_interpolate(row[f.cell - 1], row[f.cell], row[f.cell + 1], row[f.cell + 2],
                               f.theta);
}

// Core update: writes the stepped fields into `next` and returns the max-norm
// change against `cur`.  Throws on non-finite values.
double step_into(const ValueFields& cur, ValueFields& next, const ModelSpec& model,
                 const RegimeChain& chain, double dt, const std::vector<Foot>& feet,
                 long step_index) {
  const int n = cur.regimes;
  const int V = cur.grid.vertex_count();
  const int L = cur.grid.intervals;
  const double lam = model.obs_rate;
  const double mu = model.exec_rate;
  const double delta = model.discount;
  double residual = 0.0;

  for (int i = 0; i < n; ++i) {
    const double* phi_i = cur.phi.data() + static_cast<std::size_t>(i) * V;
    const double* hat_i = cur.phi_hat.data() + static_cast<std::size_t>(i) * V;
    double* phi_o = next.phi.data() + static_cast<std::size_t>(i) * V;
    double* hat_o = next.phi_hat.data() + static_cast<std::size_t>(i) * V;
    const Foot* feet_i = feet.data() + static_cast<std::size_t>(i) * V;
    const double exit = chain.exit_rate(i);
    const double phi_i_at_one = phi_i[L];

    for (int l = 0; l < V; ++l) {
      const double x = cur.grid.vertex(l);
      const double source = (l == 0) ? 1.0 : 0.0;

      double mix_phi = 0.0;
      double mix_hat = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double r = chain.rate(i, j);
        if (r == 0.0) continue;
        mix_phi += r * cur.phi_at(j, l);
        mix_hat += r * cur.phi_hat_at(j, l);
      }

      const double excess = std::max(phi_i[l] - hat_i[l], 0.0);
      const double phi_new =
          interpolate_at_foot(phi_i, feet_i[l]) -
          dt * (delta * phi_i[l] + exit * phi_i[l] - mix_phi + lam * excess - source);
      const double hat_new =
          interpolate_at_foot(hat_i, feet_i[l]) -
          dt * ((mu + delta) * hat_i[l] + exit * hat_i[l] - mix_hat - source -
                mu * (model.cost_linear * (1.0 - x) + model.cost_fixed) - mu * phi_i_at_one);

      if (!std::isfinite(phi_new) || !std::isfinite(hat_new)) {
        throw NonConvergenceError("value iteration produced a non-finite value at step " +
                                  std::to_string(step_index) + ", regime " + std::to_string(i) +
                                  ", vertex " + std::to_string(l));
      }
      residual = std::max(residual, std::fabs(phi_new - phi_i[l]));
      residual = std::max(residual, std::fabs(hat_new - hat_i[l]));
      phi_o[l] = phi_new;
      hat_o[l] = hat_new;
    }
  }
  return residual;
}

void check_inputs(const ModelSpec& model, const RegimeChain& chain) {
  model.ensure_valid();
  ensure_valid(chain);
  if (model.regime_count() != chain.regime_count) {
    throw ValidationError("model has " + std::to_string(model.regime_count()) +
                          " regimes but chain has " + std::to_string(chain.regime_count));
  }
}

}  // namespace

ValueFields ValueFields::zeros(int regimes, const Grid& grid) {
  ValueFields f;
  f.regimes = regimes;
  f.grid = grid;
  f.phi.assign(static_cast<std::size_t>(regimes) * grid.vertex_count(), 0.0);
  f.phi_hat.assign(static_cast<std::size_t>(regimes) * grid.vertex_count(), 0.0);
  return f;
}

bool Policy::intervene(int regime, double x) const {
  if (regime < 0 || regime >= regime_count()) {
    throw ValidationError("policy: regime index " + std::to_string(regime) + " out of range");
  }
  if (mode == Mode::Threshold) {
    const auto& th = thresholds[regime];
    return th.has_value() && x <= *th;
  }
  // Activation-set mode: use the flag of the nearest vertex (larger index on
  // exact midpoints, consistent with the cell convention).
  const int L = vertex_count - 1;
  int l = static_cast<int>(x * L + 0.5 + 1e-9);
  l = std::clamp(l, 0, L);
  return activation[regime][l] != 0;
}

Policy Policy::from_thresholds(const std::vector<std::optional<double>>& thresholds,
                               int vertex_count) {
  if (vertex_count < 4) throw ValidationError("policy: need at least 4 vertices");
  Policy p;
  p.mode = Mode::Threshold;
  p.vertex_count = vertex_count;
  p.thresholds = thresholds;
  const int L = vertex_count - 1;
  for (const auto& th : thresholds) {
    if (th.has_value() && (!(*th >= 0.0) || !(*th <= 1.0))) {
      throw ValidationError("policy: threshold outside [0,1]");
    }
    std::vector<std::uint8_t> act(vertex_count, 0);
    if (th.has_value()) {
      for (int l = 0; l < vertex_count; ++l) {
        act[l] = (static_cast<double>(l) / L <= *th) ? 1 : 0;
      }
    }
    p.activation.push_back(std::move(act));
  }
  return p;
}

ValueFields hjbe_pseudo_step(const ValueFields& state, const ModelSpec& model,
                             const RegimeChain& chain, double dt) {
  check_inputs(model, chain);
  if (!(dt > 0.0)) throw ValidationError("pseudo-time step must be positive");
  if (state.regimes != model.regime_count()) {
    throw ValidationError("field regime count does not match model");
  }
  const std::vector<Foot> feet = locate_feet(model, state.grid, dt);
  ValueFields next = ValueFields::zeros(state.regimes, state.grid);
  step_into(state, next, model, chain, dt, feet, 0);
  return next;
}

HjbeResult solve_hjbe(const ModelSpec& model, const RegimeChain& chain, const Grid& grid,
                      const HjbeOptions& options) {
  check_inputs(model, chain);
  const double dx = grid.dx;
  const double dt = options.dt > 0.0 ? options.dt : 5.0 * dx * std::sqrt(dx);
  if (!(options.tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (options.max_steps < 1) throw ValidationError("max_steps must be at least 1");
  double max_exit = 0.0;
  for (int i = 0; i < chain.regime_count; ++i) max_exit = std::max(max_exit, chain.exit_rate(i));
  const double reaction = dt * (model.discount + model.exec_rate + model.obs_rate + max_exit);
  if (reaction >= 1.0) {
    throw ValidationError("pseudo-time step " + std::to_string(dt) +
                          " too large for the explicit reaction terms (dt * total rate = " +
                          std::to_string(reaction) + " >= 1)");
  }

  const std::vector<Foot> feet = locate_feet(model, grid, dt);

  HjbeResult result;
  result.history_stride = options.history_stride > 0
                              ? options.history_stride
                              : static_cast<int>(std::max<long>(1, options.max_steps / 10000));
  ValueFields cur = ValueFields::zeros(model.regime_count(), grid);
  ValueFields next = cur;

  for (long step = 1; step <= options.max_steps; ++step) {
    const double residual = step_into(cur, next, model, chain, dt, feet, step);
    std::swap(cur, next);
    if (step % result.history_stride == 0) result.residual_history.push_back(residual);
    if (residual <= options.tolerance) {
      result.fields = std::move(cur);
      result.iterations = step;
      result.final_residual = residual;
      return result;
    }
    if (step == options.max_steps) {
      std::string tail;
      const std::size_t h = result.residual_history.size();
      for (std::size_t k = h >= 3 ? h - 3 : 0; k < h; ++k) {
        tail += " " + format_double(result.residual_history[k]);
      }
      throw NonConvergenceError("value iteration did not reach tolerance " +
                                format_double(options.tolerance) + " within " +
                                std::to_string(options.max_steps) +
                                " steps; final residual " + format_double(residual) +
                                "; sampled residual tail:" + tail);
    }
  }
  return result;  // unreachable
}

Policy extract_policy(const ValueFields& fields) {
  const int n = fields.regimes;
  const int V = fields.grid.vertex_count();
  const int L = fields.grid.intervals;
  Policy p;
  p.mode = Policy::Mode::Threshold;
  p.vertex_count = V;
  p.thresholds.assign(n, std::nullopt);
  p.activation.assign(n, std::vector<std::uint8_t>(V, 0));

  bool all_prefix = true;
  for (int i = 0; i < n; ++i) {
    auto& act = p.activation[i];
    int last_active = -1;
    for (int l = 0; l < V; ++l) {
      act[l] = (fields.phi_at(i, l) >= fields.phi_hat_at(i, l)) ? 1 : 0;
      if (act[l]) last_active = l;
    }
    bool prefix = true;
    for (int l = 0; l <= last_active; ++l) {
      if (!act[l]) {
        prefix = false;
        break;
      }
    }
    if (!prefix) {
      all_prefix = false;
      continue;
    }
    if (last_active < 0) {
      p.thresholds[i] = std::nullopt;  // never intervene
    } else if (last_active == L) {
      p.thresholds[i] = 1.0;
    } else {
      p.thresholds[i] = (fields.grid.vertex(last_active) + fields.grid.vertex(last_active + 1)) / 2.0;
    }
  }
  if (!all_prefix) p.mode = Policy::Mode::ActivationSet;
  return p;
}

}  // namespace sedctrl
