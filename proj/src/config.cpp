#include "sedctrl/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sedctrl/errors.hpp"

namespace sedctrl {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path);
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

double get_number(const json& j, const std::string& key) {
  if (!j.at(key).is_number()) throw ValidationError("key '" + key + "' must be a number");
  return j.at(key).get<double>();
}

// Fetch a numeric field that may be spelled by role or by its usual symbol.
double role_number(const json& j, const char* role, const char* alias) {
  if (j.contains(role)) return get_number(j, role);
  if (j.contains(alias)) return get_number(j, alias);
  throw ValidationError(std::string("missing key '") + role + "' (alias '" + alias + "')");
}

std::vector<double> number_array(const json& j, const std::string& key) {
  const json& a = j.at(key);
  if (!a.is_array()) throw ValidationError("key '" + key + "' must be an array");
  std::vector<double> out;
  out.reserve(a.size());
  for (const auto& v : a) {
    if (!v.is_number()) throw ValidationError("key '" + key + "' must hold numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

ModelSpec model_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("model section must be an object");
  ModelSpec m;
  m.obs_rate = role_number(j, "observation_rate", "lambda");
  m.exec_rate = role_number(j, "execution_rate", "mu");
  m.discount = role_number(j, "discount_rate", "delta");
  m.cost_linear = role_number(j, "proportional_cost", "c");
  m.cost_fixed = role_number(j, "fixed_cost", "d");
  if (j.contains("speeds")) m.speeds = number_array(j, "speeds");
  if (j.contains("speed_profiles")) {
    const json& p = j.at("speed_profiles");
    if (!p.is_array()) throw ValidationError("speed_profiles must be an array of arrays");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!p[i].is_array()) throw ValidationError("speed_profiles must be an array of arrays");
      std::vector<double> tab;
      for (const auto& v : p[i]) {
        if (!v.is_number()) throw ValidationError("speed_profiles must hold numbers only");
        tab.push_back(v.get<double>());
      }
      m.speed_profiles.push_back(std::move(tab));
    }
  }
  return m;
}

json model_to_json(const ModelSpec& m) {
  json j;
  j["observation_rate"] = m.obs_rate;
  j["execution_rate"] = m.exec_rate;
  j["discount_rate"] = m.discount;
  j["proportional_cost"] = m.cost_linear;
  j["fixed_cost"] = m.cost_fixed;
  j["speeds"] = m.speeds;
  if (!m.speed_profiles.empty()) j["speed_profiles"] = m.speed_profiles;
  return j;
}

bool is_absolute(const std::string& p) { return !p.empty() && p.front() == '/'; }

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (is_absolute(p) || base_dir.empty()) return p;
  return base_dir + "/" + p;
}

Policy parse_policy_impl(const json& j) {
  if (!j.is_object()) throw ValidationError("policy JSON must be an object");
  Policy p;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "threshold") {
    p.mode = Policy::Mode::Threshold;
  } else if (mode == "activation-set") {
    p.mode = Policy::Mode::ActivationSet;
  } else {
    throw ValidationError("policy mode must be 'threshold' or 'activation-set'");
  }
  p.vertex_count = j.at("vertex_count").get<int>();
  if (p.vertex_count < 4) throw ValidationError("policy vertex_count must be at least 4");
  const json& th = j.at("thresholds");
  if (!th.is_array()) throw ValidationError("policy thresholds must be an array");
  for (const auto& v : th) {
    if (v.is_null()) {
      p.thresholds.emplace_back(std::nullopt);
    } else if (v.is_number()) {
      p.thresholds.emplace_back(v.get<double>());
    } else {
      throw ValidationError("policy thresholds must be numbers or null");
    }
  }
  const json& act = j.at("activation");
  if (!act.is_array() || act.size() != th.size()) {
    throw ValidationError("policy activation must be an array with one row per regime");
  }
  for (const auto& row : act) {
    if (!row.is_array() || static_cast<int>(row.size()) != p.vertex_count) {
      throw ValidationError("each policy activation row must list every vertex");
    }
    std::vector<std::uint8_t> flags;
    flags.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number_integer()) throw ValidationError("activation flags must be 0 or 1");
      const int f = v.get<int>();
      if (f != 0 && f != 1) throw ValidationError("activation flags must be 0 or 1");
      flags.push_back(static_cast<std::uint8_t>(f));
    }
    p.activation.push_back(std::move(flags));
  }
  for (const auto& t : p.thresholds) {
    if (t.has_value() && (!(*t >= 0.0) || !(*t <= 1.0))) {
      throw ValidationError("policy thresholds must lie in [0, 1]");
    }
  }
  return p;
}

HydraulicParams hydraulics_from_json(const json& j) {
  HydraulicParams h;
  auto get = [&](const char* key, double& slot) {
    if (j.contains(key)) slot = get_number(j, key);
  };
  get("gravity", h.gravity);
  get("channel_width", h.channel_width);
  get("channel_slope", h.channel_slope);
  get("manning_n", h.manning_n);
  get("water_density", h.water_density);
  get("sediment_density", h.sediment_density);
  get("grain_diameter", h.grain_diameter);
  get("lump_volume", h.lump_volume);
  get("critical_shields", h.critical_shields);
  return h;
}

}  // namespace

ModelSpec parse_model_json(const std::string& text) {
  try {
    ModelSpec m = model_from_json(parse_json(text, "model JSON"));
    m.ensure_valid();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON: ") + e.what());
  }
}

ModelSpec load_model_json(const std::string& path) {
  try {
    return parse_model_json(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_model_json(const ModelSpec& model, const std::string& path) {
  model.ensure_valid();
  write_file(path, model_to_json(model).dump(2) + "\n");
}

Policy parse_policy_json(const std::string& text) {
  try {
    return parse_policy_impl(parse_json(text, "policy JSON"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("policy JSON: ") + e.what());
  }
}

Policy load_policy_json(const std::string& path) {
  try {
    return parse_policy_json(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_policy_json(const Policy& policy, const std::string& path) {
  json j;
  j["mode"] = policy.mode == Policy::Mode::Threshold ? "threshold" : "activation-set";
  j["vertex_count"] = policy.vertex_count;
  json th = json::array();
  for (const auto& t : policy.thresholds) {
    if (t.has_value()) {
      th.push_back(*t);
    } else {
      th.push_back(nullptr);
    }
  }
  j["thresholds"] = th;
  json act = json::array();
  for (const auto& row : policy.activation) {
    json r = json::array();
    for (std::uint8_t f : row) r.push_back(static_cast<int>(f));
    act.push_back(r);
  }
  j["activation"] = act;
  write_file(path, j.dump(2) + "\n");
}

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  const json j = parse_json(text, "run config");
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  try {
  RunConfig cfg;

  if (!j.contains("model")) throw ValidationError("run config needs a 'model' section");
  cfg.model = model_from_json(j.at("model"));

  if (j.contains("switching_rates")) {
    const json& r = j.at("switching_rates");
    if (!r.is_array()) throw ValidationError("switching_rates must be an array of arrays");
    std::vector<std::vector<double>> rows;
    for (const auto& row : r) {
      if (!row.is_array()) throw ValidationError("switching_rates must be an array of arrays");
      std::vector<double> vals;
      for (const auto& v : row) {
        if (!v.is_number()) throw ValidationError("switching_rates must hold numbers only");
        vals.push_back(v.get<double>());
      }
      rows.push_back(std::move(vals));
    }
    cfg.chain = RegimeChain(rows);
  } else if (j.contains("chain_csv")) {
    cfg.chain = load_chain_csv(resolve(base_dir, j.at("chain_csv").get<std::string>()));
  }

  if (j.contains("hydraulics")) {
    const json& h = j.at("hydraulics");
    if (!h.is_object()) throw ValidationError("hydraulics section must be an object");
    cfg.built_from_hydraulics = true;
    cfg.hydraulics = hydraulics_from_json(h);
    double time_unit = 86400.0;
    if (h.contains("time_unit_seconds")) time_unit = get_number(h, "time_unit_seconds");
    if (h.contains("discharges")) {
      cfg.discharges = number_array(h, "discharges");
    } else if (h.contains("regime_count")) {
      cfg.discharges = default_discharge_ladder(h.at("regime_count").get<int>());
    } else {
      throw ValidationError("hydraulics section needs 'discharges' or 'regime_count'");
    }
    if (cfg.chain.regime_count == 0) {
      throw ValidationError("hydraulics-built models need switching_rates or chain_csv");
    }
    cfg.model = build_sediment_model(cfg.chain, cfg.hydraulics, cfg.model, cfg.discharges,
                                     time_unit);
  }

  if (cfg.chain.regime_count == 0) {
    if (cfg.model.regime_count() != 1) {
      throw ValidationError("multi-regime models need switching_rates or chain_csv");
    }
    cfg.chain = RegimeChain(std::vector<std::vector<double>>{{0.0}});
  }
  cfg.model.ensure_valid();
  ensure_valid(cfg.chain);
  if (cfg.model.regime_count() != cfg.chain.regime_count) {
    throw ValidationError("model speeds cover " + std::to_string(cfg.model.regime_count()) +
                          " regimes but the chain has " + std::to_string(cfg.chain.regime_count));
  }

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.contains("hjbe_intervals")) cfg.hjbe_intervals = g.at("hjbe_intervals").get<int>();
    if (g.contains("fpe_intervals")) cfg.fpe_intervals = g.at("fpe_intervals").get<int>();
  }
  if (cfg.hjbe_intervals < 3 || cfg.fpe_intervals < 3) {
    throw ValidationError("grid sections need at least 3 intervals");
  }

  if (j.contains("scheme")) {
    const json& s = j.at("scheme");
    if (s.contains("reconstruction")) {
      const std::string r = s.at("reconstruction").get<std::string>();
      if (r == "weno") {
        cfg.reconstruction = Reconstruction::Weno;
      } else if (r == "upwind") {
        cfg.reconstruction = Reconstruction::Upwind;
      } else {
        throw ValidationError("reconstruction must be 'weno' or 'upwind'");
      }
    }
    auto get = [&](const char* key, double& slot) {
      if (s.contains(key)) slot = get_number(s, key);
    };
    get("hjbe_tolerance", cfg.hjbe_tolerance);
    get("fpe_tolerance", cfg.fpe_tolerance);
    get("hjbe_dt", cfg.hjbe_dt);
    get("fpe_dt", cfg.fpe_dt);
    if (!(cfg.hjbe_tolerance > 0.0) || !(cfg.fpe_tolerance > 0.0)) {
      throw ValidationError("tolerances must be positive");
    }
  }

  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    SimConfig& sim = cfg.simulation;
    if (s.contains("paths")) sim.path_count = s.at("paths").get<long>();
    if (s.contains("time_step")) sim.time_step = get_number(s, "time_step");
    if (s.contains("horizon")) sim.horizon = get_number(s, "horizon");
    if (s.contains("burn_in_fraction")) sim.burn_in_fraction = get_number(s, "burn_in_fraction");
    if (s.contains("inspection_rate")) sim.inspection_rate = get_number(s, "inspection_rate");
    if (s.contains("bins")) sim.bins = s.at("bins").get<int>();
    if (s.contains("cell_grid_intervals")) {
      sim.cell_grid_intervals = s.at("cell_grid_intervals").get<int>();
    }
    if (s.contains("seed")) sim.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("workers")) sim.workers = s.at("workers").get<int>();
    if (s.contains("initial_regime")) sim.initial_regime = s.at("initial_regime").get<int>();
    if (s.contains("initial_storage")) sim.initial_storage = get_number(s, "initial_storage");
  }

  if (j.contains("mu_sweep")) {
    cfg.mu_sweep = number_array(j, "mu_sweep");
    for (double mu : cfg.mu_sweep) {
      if (!(mu > cfg.model.obs_rate)) {
        throw ValidationError("every mu_sweep entry must exceed the observation rate");
      }
    }
  }
  if (j.contains("output_dir")) {
    cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  } else {
    cfg.output_dir = base_dir.empty() ? "." : base_dir;
  }
  return cfg;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::string dir = ".";
  const auto slash = path.find_last_of('/');
  if (slash != std::string::npos) dir = path.substr(0, slash);
  try {
    return parse_run_config(read_file(path), dir);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace sedctrl
