#pragma once

// Scenario configuration (JSON). Sections, all optional unless noted:
//
//   seed            integer, default 0; seeds synthetic profiles
//   threads         worker threads for the consensus engine, default 1
//   horizon         {slots: 24, slot_duration_h: 1.0}
//   tariff          {a_g: 0.01 $/kWh per kW, b_g: 0.03 $/kWh}; default for every agent
//   agent_defaults  {grid_cap_kw: 12, hvac: {...}, flex: {...}}
//   profiles        {csv: "path"} (relative to the scenario file) or
//                   {synthetic: {agents: N, mix: {sellers, buyers, mixed}, params: {...}}}
//   agents          [{id, profile, load_kw, renewable_kw, outdoor_temp_c,
//                     grid_cap_kw, hvac, flex, tariff}]; series given inline
//                   override the profile named by `profile` (default: id).
//                   Absent: one agent per profile with agent_defaults.
//   topology        {kind: complete | star | ring | edges | weights,
//                    hub: 0, k: 2, edges: [[i, j], ...], weights: [[...], ...]}
//   consensus       {epsilon: 0.005, auto_epsilon: false, tol_lambda: 1e-4,
//                    tol_e: 1e-3, clearing_tol: 1e-3, max_rounds: 5000,
//                    lambda_init: number or per-slot array (default b_g)}
//   solver          {qp_tol: 1e-8, max_qp_iter: 20000, regularization: 1e-9,
//                    rho: 0.1, sigma: 1e-6, alpha: 1.6, polish_interval: 25}
//
//   hvac            {phi_c: 3.3, phi_r: 1.35, eta: 1, t_ref: 24, t_min: 19,
//                    t_max: 27, beta_ac: 0.5 $/degC^2, t_init: t_ref}
//   flex            "none", or {p_min_kw, p_max_kw, p_ref_kw: number or array,
//                    beta_f: 0.01 $/kW^2}, or {shiftable: {energy_kwh,
//                    start_hour, end_hour, p_max_kw}, beta_f}
//
// Unknown keys are rejected.

#include "gridpool/consensus.hpp"
#include "gridpool/model.hpp"
#include "gridpool/profiles.hpp"
#include "gridpool/qp.hpp"
#include "gridpool/topology.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gridpool {

struct TopologySpec {
  std::string kind = "complete";
  std::size_t hub = 0;
  std::size_t k = 2;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<double>> weights;

  /// "complete", "star", "star:<hub>", "ring", "ring:<k>".
  static TopologySpec parse(const std::string& text);
  Topology build(std::size_t n) const;
  /// Metropolis weights unless explicit weights are given.
  WeightMatrix weights_for(std::size_t n) const;
};

/// Command-line values that take precedence over the file.
struct ScenarioOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<std::string> topology;
  std::optional<int> max_rounds;
  std::optional<unsigned> threads;
};

struct ScenarioBundle {
  Horizon horizon;
  std::vector<ProsumerSpec> specs;
  TopologySpec topology;
  ConsensusConfig consensus;
  SolverConfig solver;
  std::uint64_t seed = 0;
  /// The configuration after overrides and defaults, pretty-printed JSON.
  std::string effective_config;

  std::vector<std::string> ids() const;
};

/// Throws DataError for schema violations and ModelError for invalid agents.
ScenarioBundle parse_scenario(const std::string& json_text, const std::string& base_dir,
                              const ScenarioOverrides& overrides = {});
ScenarioBundle load_scenario(const std::string& path, const ScenarioOverrides& overrides = {});

}  // namespace gridpool
