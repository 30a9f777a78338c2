#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sedctrl {

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string joined() const;
};

// Continuous-time Markov chain over regimes 0..n-1, defined by nonnegative
// off-diagonal switching rates.  Any diagonal entries supplied by the caller
// are ignored (forced to zero); the generator's diagonal is implied by the
// row sums.
struct RegimeChain {
  int regime_count = 0;
  std::vector<double> rates;       // row-major, diagonal zeroed
  std::vector<double> exit_rates;  // row sums of off-diagonal rates

  RegimeChain() = default;
  explicit RegimeChain(const std::vector<std::vector<double>>& nu);

  double rate(int i, int j) const { return rates[static_cast<std::size_t>(i) * regime_count + j]; }
  double exit_rate(int i) const { return exit_rates[i]; }
};

// Checks: square shape, finite nonnegative off-diagonal rates, and
// irreducibility (the directed graph of positive rates is strongly
// connected).  A single-regime chain is trivially valid.
ValidationReport validate_chain(const RegimeChain& chain);

// Throws ValidationError with all violations if the chain is invalid.
void ensure_valid(const RegimeChain& chain);

// Stationary distribution pi with pi * Q = 0 and sum(pi) = 1, computed by a
// direct least-squares solve of the augmented system [Q^T; 1^T] pi = [0; 1].
// Guarantees a nonnegative unit-sum result with residual |pi*Q|_inf <= 1e-12;
// throws NonConvergenceError if the solve cannot reach that.
std::vector<double> stationary_distribution(const RegimeChain& chain);

// One sampled trajectory of the chain.  regimes[k] is occupied on
// [jump_times[k-1], jump_times[k]) (with jump_times[-1] = 0); the last regime
// runs to the horizon.  Consecutive regimes always differ.
struct RegimePath {
  std::vector<double> jump_times;  // strictly increasing, < horizon
  std::vector<int> regimes;        // size jump_times.size() + 1
  double horizon = 0.0;

  int regime_at(double t) const;
};

// Exponential holding times with the row exit rates; deterministic for a
// given seed.
RegimePath sample_regime_path(const RegimeChain& chain, int initial_regime,
                              double horizon, std::uint64_t seed);

// Rate matrix from CSV (one row per regime; an optional non-numeric header
// line is skipped).  Parse failures report row and column.
RegimeChain load_chain_csv(const std::string& path);

// Writes columns (t_jump, regime); the first row is (0, initial regime).
void save_path_csv(const RegimePath& path, const std::string& file);

}  // namespace sedctrl
