#pragma once

// Decentralized price coordination. Each synchronous round runs
//   price update -> local ILP solve -> mismatch update -> termination test
// with agents exchanging only their price and mismatch estimates.

#include "gridpool/localopt.hpp"
#include "gridpool/model.hpp"
#include "gridpool/qp.hpp"
#include "gridpool/topology.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridpool {

struct ConsensusConfig {
  double epsilon = 0.005;    // $/kWh per kW of mismatch
  bool auto_epsilon = false; // use 0.5 * a_g instead of `epsilon`
  double tol_lambda = 1e-4;  // 2-norm over the horizon
  double tol_e = 1e-3;       // 2-norm over the horizon
  double clearing_tol = 1e-3;
  int max_rounds = 5000;
  std::optional<Series> lambda_init;  // defaults to b_g per agent
  unsigned threads = 1;
  /// Throw when the tracking identity drifts beyond `tracking_tol`.
  bool check_invariants = true;
  double tracking_tol = 1e-9;

  void validate() const;
  /// Step size actually used for these agents.
  double effective_epsilon(const std::vector<ProsumerSpec>& specs) const;
};

struct AgentState {
  Series lambda;
  Series e;
  Series p_et_prev;
  Schedule schedule;
  int round = 0;
};

std::vector<AgentState> init_states(const std::vector<ProsumerSpec>& specs, const ConsensusConfig& config);

/// lambda_i <- sum_j w_ij lambda_j + epsilon e_i
std::vector<Series> price_update(const std::vector<AgentState>& states, const WeightMatrix& w, double epsilon);

/// e_i <- sum_j w_ij e_j + p_et_i(new) - p_et_i(prev)
std::vector<Series> mismatch_update(const std::vector<AgentState>& states, const WeightMatrix& w,
                                    const std::vector<Series>& new_trades);

/// Every agent's price step and mismatch are within tolerance.
bool check_convergence(const std::vector<AgentState>& states, const std::vector<Series>& prev_lambda,
                       const ConsensusConfig& config);

struct RoundRecord {
  int round = 0;
  std::vector<Series> lambda;  // per agent
  Series e_norm;               // per agent
  Series net_trade;            // per slot, sum over agents
  Series objective;            // per agent, ILP cost at its own price
  double tracking_residual = 0.0;

  bool operator==(const RoundRecord&) const = default;
};

struct RunTrace {
  std::vector<RoundRecord> rounds;
  bool converged = false;
  int rounds_used = 0;
  double wall_time_s = 0.0;
  double epsilon = 0.0;

  bool operator==(const RunTrace&) const = default;
};

struct RunResult {
  RunTrace trace;
  std::vector<Schedule> schedules;
  std::vector<Series> lambda;
  Series costs;  // operating + trading at the agent's final price

  double total_cost() const;
  /// max over slots of |sum_i p_et_i|
  double clearing_residual() const;
};

/// Agent-level infeasibility surfaces as SolveError naming the agent.
RunResult run(const std::vector<ProsumerSpec>& specs, const WeightMatrix& w, const ConsensusConfig& config,
              const SolverConfig& solver);

/// Metropolis weights on `topology`.
RunResult run(const std::vector<ProsumerSpec>& specs, const Topology& topology, const ConsensusConfig& config,
              const SolverConfig& solver);

}  // namespace gridpool
