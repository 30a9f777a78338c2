#pragma once

#include <string>
#include <vector>

#include "sedctrl/fpe.hpp"
#include "sedctrl/hjbe.hpp"
#include "sedctrl/markov_chain.hpp"
#include "sedctrl/model.hpp"
#include "sedctrl/monte_carlo.hpp"

namespace sedctrl {

// Everything a command needs, collected from one JSON file.  See the README
// for the schema; unknown keys are rejected nowhere but wrong types and
// missing required keys are.
struct RunConfig {
  ModelSpec model;
  RegimeChain chain;
  bool built_from_hydraulics = false;
  HydraulicParams hydraulics;
  std::vector<double> discharges;  // only when built_from_hydraulics

  int hjbe_intervals = 50;
  int fpe_intervals = 50;
  Reconstruction reconstruction = Reconstruction::Weno;
  double hjbe_tolerance = 1e-14;
  double fpe_tolerance = 1e-14;
  double hjbe_dt = 0.0;  // 0 -> scheme default
  double fpe_dt = 0.0;

  SimConfig simulation;
  std::vector<double> mu_sweep;
  std::string output_dir = ".";
};

// Parse from text; `base_dir` resolves any relative file references.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

ModelSpec parse_model_json(const std::string& text);
ModelSpec load_model_json(const std::string& path);
void save_model_json(const ModelSpec& model, const std::string& path);

Policy parse_policy_json(const std::string& text);
Policy load_policy_json(const std::string& path);
void save_policy_json(const Policy& policy, const std::string& path);

}  // namespace sedctrl
