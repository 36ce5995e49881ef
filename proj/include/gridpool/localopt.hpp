#pragma once

// Per-agent cost minimization problems built on the dense QP solver.
//
// Decision vector layout (each block has one entry per slot):
//   [ p_re | p_g | p_ac | p_f | p_et ]       p_et only for the trading problems
//
// The indoor temperature is eliminated through the affine unroll, so the
// comfort band becomes 2H linear rows in p_ac.

#include "gridpool/model.hpp"
#include "gridpool/qp.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridpool {

/// A local problem that did not reach an optimal solution.
class SolveError : public std::runtime_error {
 public:
  SolveError(std::string agent_id, QpStatus status, const std::string& detail);

  const std::string& agent_id() const { return agent_id_; }
  QpStatus status() const { return status_; }

 private:
  std::string agent_id_;
  QpStatus status_;
};

struct VarLayout {
  std::size_t slots = 0;
  bool trading = false;

  Eigen::Index re(std::size_t t) const { return static_cast<Eigen::Index>(t); }
  Eigen::Index g(std::size_t t) const { return static_cast<Eigen::Index>(slots + t); }
  Eigen::Index ac(std::size_t t) const { return static_cast<Eigen::Index>(2 * slots + t); }
  Eigen::Index f(std::size_t t) const { return static_cast<Eigen::Index>(3 * slots + t); }
  Eigen::Index et(std::size_t t) const { return static_cast<Eigen::Index>(4 * slots + t); }
  Eigen::Index size() const { return static_cast<Eigen::Index>((trading ? 5 : 4) * slots); }
};

/// Upper bound on purchases per slot. Never binding at an optimum unless no
/// other agent can sell in that slot, in which case it is zero.
Series default_trade_cap(const ProsumerSpec& spec);
std::vector<Series> market_trade_caps(const std::vector<ProsumerSpec>& specs);

QpProblem build_ucmp(const ProsumerSpec& spec, double regularization = 1e-9);

/// `trade_cap` defaults to default_trade_cap(spec).
QpProblem build_ilp(const ProsumerSpec& spec, const Series& lambda,
                    const std::optional<Series>& trade_cap = std::nullopt,
                    double regularization = 1e-9);

/// Reads a schedule out of a solved local problem, clamps round-off at the
/// bounds, applies the renewable-before-grid tie-break for free grid power
/// and fills in the indoor temperature.
Schedule extract_schedule(const ProsumerSpec& spec, const VarLayout& layout, const Eigen::VectorXd& x);

struct LocalResult {
  Schedule schedule;
  double cost = 0.0;  // operating cost (+ trading cost for the ILP)
  QpSolution qp;
};

/// Standalone benchmark; throws SolveError unless optimal.
LocalResult solve_ucmp(const ProsumerSpec& spec, const SolverConfig& config);

/// Price-taking trading problem; throws SolveError unless optimal.
LocalResult solve_ilp(const ProsumerSpec& spec, const Series& lambda, const SolverConfig& config,
                      const std::optional<Series>& trade_cap = std::nullopt);

/// Repeated ILP solves for one agent at changing prices. Only the price
/// terms of the cached problem change between calls, and each solve starts
/// from the previous active set.
class IlpSession {
 public:
  IlpSession(ProsumerSpec spec, Series trade_cap, SolverConfig config);

  /// Throws SolveError unless optimal.
  LocalResult solve(const Series& lambda);
  const ProsumerSpec& spec() const { return spec_; }

 private:
  ProsumerSpec spec_;
  VarLayout layout_;
  QpProblem problem_;
  SolverConfig config_;
  ActiveSet last_;
};

struct CentralizedResult {
  std::vector<Schedule> schedules;
  Series lambda_star;  // multiplier of the per-slot clearing rows
  double total_cost = 0.0;
  QpSolution qp;
};

/// Joint problem over all agents with the market-clearing rows. A test
/// oracle only; agents never see its data.
CentralizedResult solve_ccmp_centralized(const std::vector<ProsumerSpec>& specs,
                                         const SolverConfig& config);

}  // namespace gridpool
