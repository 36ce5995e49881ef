#include "gridpool/consensus.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

namespace gridpool {

namespace {

double norm2(const Series& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::size_t common_horizon(const std::vector<ProsumerSpec>& specs) {
  if (specs.empty()) throw ModelError("no agents");
  const std::size_t h = specs.front().horizon();
  for (const auto& s : specs) {
    if (s.horizon() != h) throw ModelError("agent " + s.id + " has a different horizon");
  }
  return h;
}

void check_weights(const std::vector<AgentState>& states, const WeightMatrix& w) {
  if (w.size() != states.size()) throw ModelError("weight matrix size differs from agent count");
}

// Neighbour lists keep the per-round mixing cost proportional to the edges.
struct Mixing {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;

  explicit Mixing(const WeightMatrix& w) : rows(w.size()) {
    for (std::size_t i = 0; i < w.size(); ++i)
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double v = w.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v != 0.0) rows[i].emplace_back(j, v);
      }
  }

  Series mix(std::size_t i, const std::vector<Series>& values) const {
    Series out(values[i].size(), 0.0);
    for (const auto& [j, wij] : rows[i])
      for (std::size_t t = 0; t < out.size(); ++t) out[t] += wij * values[j][t];
    return out;
  }
};

// What agents publish to each other. Nothing else crosses between agents.
struct MessageBoard {
  std::vector<Series> lambda;
  std::vector<Series> e;
};

}  // namespace

void ConsensusConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ModelError("epsilon must be positive");
  if (!(tol_lambda > 0.0) || !(tol_e > 0.0) || !(clearing_tol > 0.0)) {
    throw ModelError("consensus tolerances must be positive");
  }
  if (max_rounds < 1) throw ModelError("max_rounds must be at least 1");
  if (threads < 1) throw ModelError("threads must be at least 1");
}

double ConsensusConfig::effective_epsilon(const std::vector<ProsumerSpec>& specs) const {
  if (!auto_epsilon) return epsilon;
  double a = 0.0;
  bool any = false;
  for (const auto& s : specs) {
    if (s.tariff.a_g > 0.0) {
      a = any ? std::min(a, s.tariff.a_g) : s.tariff.a_g;
      any = true;
    }
  }
  return any ? 0.5 * a : epsilon;
}

std::vector<AgentState> init_states(const std::vector<ProsumerSpec>& specs, const ConsensusConfig& config) {
  const std::size_t h = common_horizon(specs);
  if (config.lambda_init && config.lambda_init->size() != h) {
    throw ModelError("lambda_init length differs from horizon");
  }
  std::vector<AgentState> states;
  states.reserve(specs.size());
  for (const auto& s : specs) {
    AgentState a;
    a.lambda = config.lambda_init.value_or(Series(h, s.tariff.b_g));
    a.e.assign(h, 0.0);
    a.p_et_prev.assign(h, 0.0);
    a.schedule = Schedule::zeros(h);
    states.push_back(std::move(a));
  }
  return states;
}

std::vector<Series> price_update(const std::vector<AgentState>& states, const WeightMatrix& w, double epsilon) {
  check_weights(states, w);
  const Mixing m(w);
  std::vector<Series> lambdas;
  for (const auto& s : states) lambdas.push_back(s.lambda);
  std::vector<Series> out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    Series next = m.mix(i, lambdas);
    for (std::size_t t = 0; t < next.size(); ++t) next[t] += epsilon * states[i].e[t];
    out.push_back(std::move(next));
  }
  return out;
}

std::vector<Series> mismatch_update(const std::vector<AgentState>& states, const WeightMatrix& w,
                                    const std::vector<Series>& new_trades) {
  check_weights(states, w);
  if (new_trades.size() != states.size()) throw ModelError("trade list size differs from agent count");
  const Mixing m(w);
  std::vector<Series> es;
  for (const auto& s : states) es.push_back(s.e);
  std::vector<Series> out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    Series next = m.mix(i, es);
    for (std::size_t t = 0; t < next.size(); ++t) next[t] += new_trades[i][t] - states[i].p_et_prev[t];
    out.push_back(std::move(next));
  }
  return out;
}

bool check_convergence(const std::vector<AgentState>& states, const std::vector<Series>& prev_lambda,
                       const ConsensusConfig& config) {
  for (std::size_t i = 0; i < states.size(); ++i) {
    Series step(states[i].lambda.size());
    for (std::size_t t = 0; t < step.size(); ++t) step[t] = states[i].lambda[t] - prev_lambda[i][t];
    if (norm2(step) > config.tol_lambda || norm2(states[i].e) > config.tol_e) return false;
  }
  return true;
}

double RunResult::total_cost() const {
  double s = 0.0;
  for (double c : costs) s += c;
  return s;
}

double RunResult::clearing_residual() const {
  if (schedules.empty()) return 0.0;
  double worst = 0.0;
  for (std::size_t t = 0; t < schedules.front().horizon(); ++t) {
    double sum = 0.0;
    for (const auto& s : schedules) sum += s.p_et[t];
    worst = std::max(worst, std::abs(sum));
  }
  return worst;
}

RunResult run(const std::vector<ProsumerSpec>& specs, const WeightMatrix& w, const ConsensusConfig& config,
              const SolverConfig& solver) {
  config.validate();
  solver.validate();
  for (const auto& s : specs) s.validate();
  const auto started = std::chrono::steady_clock::now();
  std::vector<AgentState> states = init_states(specs, config);
  check_weights(states, w);
  {
    Topology support(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i)
      for (std::size_t j = i + 1; j < specs.size(); ++j)
        if (w.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) support.connect(i, j);
    validate_weights(w, support);
    if (!support.connected()) throw TopologyError("weight matrix does not connect all agents");
  }

  const std::size_t n = specs.size();
  const std::size_t h = specs.front().horizon();
  const double epsilon = config.effective_epsilon(specs);
  const Mixing mixing(w);
  const std::vector<Series> caps = market_trade_caps(specs);

  std::vector<IlpSession> sessions;
  sessions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) sessions.emplace_back(specs[i], caps[i], solver);

  MessageBoard board;
  for (const auto& s : states) {
    board.lambda.push_back(s.lambda);
    board.e.push_back(s.e);
  }

  RunResult result;
  result.trace.epsilon = epsilon;
  std::vector<Series> next_lambda(n), next_e(n);
  std::vector<LocalResult> solved(n);
  std::vector<std::exception_ptr> errors(n);
  std::exception_ptr fatal;
  std::atomic<bool> done{false};
  int round = 1;

  // Runs once per round after every agent has finished its mismatch update.
  const auto close_round = [&]() noexcept {
    try {
      for (std::size_t i = 0; i < n; ++i) {
        if (errors[i]) {
          fatal = errors[i];
          done = true;
          return;
        }
      }
      std::vector<Series> prev_lambda(n);
      RoundRecord rec;
      rec.round = round;
      rec.net_trade.assign(h, 0.0);
      Series e_sum(h, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        AgentState& a = states[i];
        prev_lambda[i] = std::move(a.lambda);
        a.lambda = next_lambda[i];
        a.e = next_e[i];
        a.p_et_prev = solved[i].schedule.p_et;
        a.schedule = solved[i].schedule;
        a.round = round;
        board.lambda[i] = a.lambda;
        board.e[i] = a.e;
        for (std::size_t t = 0; t < h; ++t) {
          rec.net_trade[t] += a.p_et_prev[t];
          e_sum[t] += a.e[t];
        }
        rec.lambda.push_back(a.lambda);
        rec.e_norm.push_back(norm2(a.e));
        rec.objective.push_back(solved[i].cost);
      }
      for (std::size_t t = 0; t < h; ++t) {
        rec.tracking_residual = std::max(rec.tracking_residual, std::abs(e_sum[t] - rec.net_trade[t]));
      }
      double clearing = 0.0;
      for (double v : rec.net_trade) clearing = std::max(clearing, std::abs(v));
      const double residual = rec.tracking_residual;
      result.trace.rounds.push_back(std::move(rec));
      if (config.check_invariants && residual > config.tracking_tol) {
        throw std::logic_error("tracking invariant violated at round " + std::to_string(round) + " by " +
                               std::to_string(residual));
      }
      const bool converged = check_convergence(states, prev_lambda, config) && clearing <= config.clearing_tol;
      result.trace.converged = converged;
      if (converged || round >= config.max_rounds) done = true;
      else ++round;
    } catch (...) {
      fatal = std::current_exception();
      done = true;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(n)));
  std::barrier<> phase(static_cast<std::ptrdiff_t>(workers));
  std::barrier round_end(static_cast<std::ptrdiff_t>(workers), close_round);

  // Agent i is always handled by worker i % workers; results do not depend on
  // the assignment because agents only read round r-1 values from the board.
  const auto worker = [&](unsigned id) {
    while (!done) {
      for (std::size_t i = id; i < n; i += workers) {
        Series lam = mixing.mix(i, board.lambda);
        for (std::size_t t = 0; t < h; ++t) lam[t] += epsilon * board.e[i][t];
        next_lambda[i] = std::move(lam);
      }
      phase.arrive_and_wait();
      for (std::size_t i = id; i < n; i += workers) {
        try {
          solved[i] = sessions[i].solve(next_lambda[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
      phase.arrive_and_wait();
      for (std::size_t i = id; i < n; i += workers) {
        if (errors[i]) continue;
        Series e = mixing.mix(i, board.e);
        for (std::size_t t = 0; t < h; ++t) e[t] += solved[i].schedule.p_et[t] - states[i].p_et_prev[t];
        next_e[i] = std::move(e);
      }
      round_end.arrive_and_wait();
    }
  };

  std::vector<std::jthread> pool;
  for (unsigned id = 1; id < workers; ++id) pool.emplace_back(worker, id);
  worker(0);
  pool.clear();
  if (fatal) std::rethrow_exception(fatal);

  result.trace.rounds_used = round;
  for (std::size_t i = 0; i < n; ++i) {
    result.schedules.push_back(states[i].schedule);
    result.lambda.push_back(states[i].lambda);
    result.costs.push_back(solved[i].cost);
  }
  result.trace.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

RunResult run(const std::vector<ProsumerSpec>& specs, const Topology& topology, const ConsensusConfig& config,
              const SolverConfig& solver) {
  if (topology.size() != specs.size()) throw TopologyError("topology size differs from agent count");
  return run(specs, metropolis_weights(topology), config, solver);
}

}  // namespace gridpool
