#include "sedctrl/markov_chain.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <sstream>

#include "sedctrl/csv.hpp"
#include "sedctrl/errors.hpp"
#include "sedctrl/rng.hpp"

namespace sedctrl {

std::string ValidationReport::joined() const {
  std::string s;
  for (const auto& v : violations) {
    if (!s.empty()) s += "; ";
    s += v;
  }
  return s;
}

RegimeChain::RegimeChain(const std::vector<std::vector<double>>& nu) {
  regime_count = static_cast<int>(nu.size());
  if (regime_count == 0) throw ValidationError("chain: empty rate matrix");
  rates.assign(static_cast<std::size_t>(regime_count) * regime_count, 0.0);
  for (int i = 0; i < regime_count; ++i) {
    if (static_cast<int>(nu[i].size()) != regime_count) {
      throw ValidationError("chain: rate matrix row " + std::to_string(i) +
                            " has " + std::to_string(nu[i].size()) +
                            " entries, expected " + std::to_string(regime_count));
    }
    for (int j = 0; j < regime_count; ++j) {
      if (i != j) rates[static_cast<std::size_t>(i) * regime_count + j] = nu[i][j];
    }
  }
  exit_rates.assign(regime_count, 0.0);
  for (int i = 0; i < regime_count; ++i) {
    double s = 0.0;
    for (int j = 0; j < regime_count; ++j)
      if (j != i) s += rate(i, j);
    exit_rates[i] = s;
  }
}

namespace {

// Reachability over edges with positive rate; transpose = true follows edges
// backwards.  Used for the strong-connectivity check.
std::vector<char> reachable(const RegimeChain& c, bool transpose) {
  const int n = c.regime_count;
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < n; ++j) {
      double r = transpose ? c.rate(j, i) : c.rate(i, j);
      if (r > 0.0 && !seen[j]) {
        seen[j] = 1;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

}  // namespace

ValidationReport validate_chain(const RegimeChain& chain) {
  ValidationReport rep;
  const int n = chain.regime_count;
  if (n <= 0) {
    rep.violations.push_back("chain: no regimes");
    return rep;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double r = chain.rate(i, j);
      if (!std::isfinite(r)) {
        rep.violations.push_back("chain: non-finite rate at (" + std::to_string(i) +
                                 "," + std::to_string(j) + ")");
      } else if (r < 0.0) {
        rep.violations.push_back("chain: negative rate at (" + std::to_string(i) +
                                 "," + std::to_string(j) + ")");
      }
    }
  }
  if (!rep.ok()) return rep;
  if (n > 1) {
    auto fwd = reachable(chain, false);
    auto bwd = reachable(chain, true);
    for (int i = 0; i < n; ++i) {
      if (!fwd[i] || !bwd[i]) {
        rep.violations.push_back("chain: not irreducible (regime " + std::to_string(i) +
                                 " not strongly connected to regime 0)");
        break;
      }
    }
  }
  return rep;
}

void ensure_valid(const RegimeChain& chain) {
  auto rep = validate_chain(chain);
  if (!rep.ok()) throw ValidationError(rep.joined());
}

std::vector<double> stationary_distribution(const RegimeChain& chain) {
  ensure_valid(chain);
  const int n = chain.regime_count;
  if (n == 1) return {1.0};

  // Generator Q: off-diagonal rates, diagonal = -row sum.  Solve the
  // augmented least-squares system [Q^T; 1^T] pi = [0; 1].
  Eigen::MatrixXd m(n + 1, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(j, i) = (i == j) ? -chain.exit_rate(i) : chain.rate(i, j);
  for (int j = 0; j < n; ++j) m(n, j) = 1.0;
  b(n) = 1.0;

  Eigen::VectorXd pi = m.colPivHouseholderQr().solve(b);

  std::vector<double> out(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    // clip solver noise; genuinely negative entries are a failed solve
    if (pi(i) < 0.0 && pi(i) > -1e-10) pi(i) = 0.0;
    if (pi(i) < 0.0 || !std::isfinite(pi(i)))
      throw NonConvergenceError("stationary distribution: ill-conditioned solve (pi[" +
                                std::to_string(i) + "] = " + format_double(pi(i)) + ")");
    out[i] = pi(i);
    sum += pi(i);
  }
  if (!(sum > 0.0)) throw NonConvergenceError("stationary distribution: zero-sum solution");
  for (double& v : out) v /= sum;

  double resid = 0.0;
  for (int j = 0; j < n; ++j) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i)
      dot += out[i] * ((i == j) ? -chain.exit_rate(i) : chain.rate(i, j));
    resid = std::max(resid, std::abs(dot));
  }
  if (resid > 1e-12)
    throw NonConvergenceError("stationary distribution: residual " + format_double(resid) +
                              " exceeds 1e-12");
  return out;
}

int RegimePath::regime_at(double t) const {
  std::size_t k = 0;
  while (k < jump_times.size() && jump_times[k] <= t) ++k;
  return regimes[k];
}

RegimePath sample_regime_path(const RegimeChain& chain, int initial_regime,
                              double horizon, std::uint64_t seed) {
  ensure_valid(chain);
  if (initial_regime < 0 || initial_regime >= chain.regime_count)
    throw ValidationError("sample_regime_path: initial regime out of range");
  if (!(horizon > 0.0)) throw ValidationError("sample_regime_path: horizon must be positive");

  RegimePath path;
  path.horizon = horizon;
  path.regimes.push_back(initial_regime);
  Rng rng(mix_seed(seed, 0x636861696eULL));

  double t = 0.0;
  int i = initial_regime;
  while (true) {
    double hold = rng.exponential(chain.exit_rate(i));
    t += hold;
    if (!(t < horizon)) break;
    const double* row = &chain.rates[static_cast<std::size_t>(i) * chain.regime_count];
    int j = rng.choose(row, chain.regime_count, chain.exit_rate(i));
    path.jump_times.push_back(t);
    path.regimes.push_back(j);
    i = j;
  }
  return path;
}

RegimeChain load_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open chain CSV: " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    // strip whitespace-only lines
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    int col = 0;
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      ++col;
      try {
        std::size_t used = 0;
        double v = std::stod(field, &used);
        while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
        if (used != field.size()) throw std::invalid_argument("trailing");
        row.push_back(v);
      } catch (const std::exception&) {
        if (first_content) {
          numeric = false;  // header line, skip it
          break;
        }
        throw IoError("chain CSV parse failure at line " + std::to_string(lineno) +
                      ", column " + std::to_string(col) + ": '" + field + "'");
      }
    }
    first_content = false;
    if (numeric) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("chain CSV has no data rows: " + path);
  const std::size_t n = rows.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n)
      throw IoError("chain CSV is not square: row " + std::to_string(i + 1) + " has " +
                    std::to_string(rows[i].size()) + " columns, expected " + std::to_string(n));
  }
  return RegimeChain(rows);
}

void save_path_csv(const RegimePath& path, const std::string& file) {
  CsvWriter w(file, {"t_jump", "regime"});
  w.write_row({0.0, static_cast<double>(path.regimes[0])});
  for (std::size_t k = 0; k < path.jump_times.size(); ++k)
    w.write_row({path.jump_times[k], static_cast<double>(path.regimes[k + 1])});
}

}  // namespace sedctrl
