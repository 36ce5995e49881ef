// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include "gridpool/cli.hpp"
#include "gridpool/consensus.hpp"
#include "gridpool/localopt.hpp"
#include "gridpool/model.hpp"
#include "gridpool/qp.hpp"
#include "gridpool/scenario.hpp"

#include "fixtures.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace gridpool;
using namespace gridpool::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail.clear();
    if (!detail.empty()) detail += "; ";
    detail += what;
    pass = false;
  }
  void note(const std::string& what) {
    if (!pass) return;
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Every consensus run made by the checks, kept for the cross-cutting criteria.
struct Recorded {
  std::string label;
  std::vector<ProsumerSpec> specs;
  RunResult result;
};
std::vector<Recorded> g_runs;

const RunResult& record(std::string label, const std::vector<ProsumerSpec>& specs, RunResult r) {
  g_runs.push_back({std::move(label), specs, std::move(r)});
  return g_runs.back().result;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path synth_dir(std::size_t agents, std::uint64_t seed) {
  const fs::path dir =
      fs::temp_directory_path() / ("gridpool_acceptance_n" + std::to_string(agents) + "_s" + std::to_string(seed));
  fs::remove_all(dir);
  SynthOptions o;
  o.out = dir.string();
  o.agents = agents;
  o.seed = seed;
  std::ostringstream log;
  if (cmd_synth(o, log) != kExitOk) throw std::runtime_error("synth failed: " + log.str());
  return dir;
}

ScenarioBundle synth_bundle(std::size_t agents, std::uint64_t seed, const std::string& topology = "") {
  ScenarioOverrides ov;
  if (!topology.empty()) ov.topology = topology;
  return load_scenario((synth_dir(agents, seed) / "scenario.json").string(), ov);
}

RunResult run_bundle(const ScenarioBundle& b) {
  return run(b.specs, b.topology.weights_for(b.specs.size()), b.consensus, b.solver);
}

Outcome oracle_equivalence() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  const std::size_t ns[] = {2, 3, 4};
  const std::size_t hs[] = {1, 2, 4, 6};
  ConsensusConfig cfg;
  cfg.epsilon = 0.0005;
  double worst_cost = 0.0, worst_lambda = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = ns[trial % 3];
    const std::size_t h = hs[(trial / 3) % 4];
    const auto specs = random_market(rng, n, h);
    const CentralizedResult c = solve_ccmp_centralized(specs, SolverConfig{});
    const RunResult& r = record("oracle " + std::to_string(trial), specs, run(specs, complete(n), cfg, SolverConfig{}));
    const std::string tag = "trial " + std::to_string(trial) + " (N=" + std::to_string(n) + ", H=" + std::to_string(h) + ")";
    o.require(r.trace.converged, tag + " did not converge");
    const double rel = std::abs(r.total_cost() - c.total_cost) / std::max(std::abs(c.total_cost), 1e-12);
    worst_cost = std::max(worst_cost, rel);
    o.require(rel <= 1e-3, tag + " cost off by " + fmt("%.2e", rel) + " relative");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < h; ++t) worst_lambda = std::max(worst_lambda, std::abs(r.lambda[i][t] - c.lambda_star[t]));
  }
  o.require(worst_lambda <= 1e-3, "price off by " + fmt("%.2e", worst_lambda));
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, "took " + fmt("%.1f", secs) + " s");
  o.note("20 instances, worst cost error " + fmt("%.1e", worst_cost) + " rel, worst price error " +
         fmt("%.1e", worst_lambda) + ", " + fmt("%.1f", secs) + " s");
  return o;
}

Outcome hand_solved_market() {
  Outcome o;
  const auto specs = two_agent_market();
  ConsensusConfig cfg;
  cfg.epsilon = 0.05;
  cfg.tol_lambda = 1e-6;
  cfg.tol_e = 1e-5;
  cfg.clearing_tol = 1e-5;
  const RunResult& r = record("two-agent", specs, run(specs, complete(2), cfg, SolverConfig{}));
  o.require(r.trace.converged, "did not converge");
  for (std::size_t i = 0; i < 2; ++i) o.require(std::abs(r.lambda[i][0] - 0.2) <= 1e-3, "price " + fmt("%.6f", r.lambda[i][0]));
  // Purchases are positive.
  o.require(std::abs(r.schedules[0].p_et[0] + 1.0) <= 1e-3, "seller trade " + fmt("%.6f", r.schedules[0].p_et[0]));
  o.require(std::abs(r.schedules[1].p_et[0] - 1.0) <= 1e-3, "buyer trade " + fmt("%.6f", r.schedules[1].p_et[0]));
  o.require(std::abs(r.total_cost() - 0.1) <= 1e-4, "total cost " + fmt("%.8f", r.total_cost()));
  o.note("price " + fmt("%.6f", r.lambda[0][0]) + ", trade " + fmt("%.6f", r.schedules[1].p_et[0]) + " kW, cost " +
         fmt("%.6f", r.total_cost()) + " in " + std::to_string(r.trace.rounds_used) + " rounds");
  return o;
}

Outcome convergence_scale() {
  Outcome o;
  const ScenarioBundle b10 = synth_bundle(10, 7);
  const RunResult& r10 = record("synthetic N=10 complete", b10.specs, run_bundle(b10));
  o.require(r10.trace.converged && r10.trace.rounds_used <= 200,
            "N=10 used " + std::to_string(r10.trace.rounds_used) + " rounds");

  const ScenarioBundle b50 = synth_bundle(50, 7);
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult& r50 = record("synthetic N=50 complete", b50.specs, run_bundle(b50));
  const double secs = seconds_since(t0);
  o.require(r50.trace.converged && r50.trace.rounds_used <= 2000,
            "N=50 used " + std::to_string(r50.trace.rounds_used) + " rounds");
  o.require(secs < 60.0, "N=50 took " + fmt("%.1f", secs) + " s");
  o.note("N=10: " + std::to_string(r10.trace.rounds_used) + " rounds; N=50: " + std::to_string(r50.trace.rounds_used) +
         " rounds in " + fmt("%.2f", secs) + " s (epsilon " + fmt("%g", b10.consensus.epsilon) + ")");
  return o;
}

Outcome topology_ordering() {
  Outcome o;
  int rounds[3] = {};
  const char* kinds[3] = {"complete", "ring:2", "star:0"};
  for (int k = 0; k < 3; ++k) {
    const ScenarioBundle b = synth_bundle(10, 7, kinds[k]);
    const RunResult& r = record(std::string("synthetic N=10 ") + kinds[k], b.specs, run_bundle(b));
    o.require(r.trace.converged, std::string(kinds[k]) + " did not converge");
    rounds[k] = r.trace.rounds_used;
  }
  o.require(rounds[0] <= rounds[1] && rounds[1] <= rounds[2], "order violated");
  o.require(rounds[2] <= 150 || rounds[0] > 30, "star exceeds 150 rounds while complete needs only " +
                                                    std::to_string(rounds[0]));
  o.note("complete " + std::to_string(rounds[0]) + " <= ring:2 " + std::to_string(rounds[1]) + " <= star " +
         std::to_string(rounds[2]) + " rounds");
  return o;
}

Outcome market_clearing() {
  Outcome o;
  double worst = 0.0;
  int converged = 0;
  for (const auto& rec : g_runs) {
    if (!rec.result.trace.converged) continue;
    ++converged;
    const double c = rec.result.clearing_residual();
    worst = std::max(worst, c);
    o.require(c <= 1e-3, rec.label + " clears to " + fmt("%.2e", c) + " kW");
  }
  o.require(converged > 0, "no converged runs");
  o.note(std::to_string(converged) + " converged runs, worst residual " + fmt("%.2e", worst) + " kW");
  return o;
}

Outcome individual_rationality() {
  Outcome o;
  std::size_t agents = 0;
  double tightest = std::numeric_limits<double>::infinity();
  for (const auto& rec : g_runs) {
    for (std::size_t i = 0; i < rec.specs.size(); ++i) {
      const double standalone = solve_ucmp(rec.specs[i], SolverConfig{}).cost;
      const double gain = standalone - rec.result.costs[i];
      tightest = std::min(tightest, gain);
      o.require(gain >= -1e-6, rec.label + ": agent " + rec.specs[i].id + " pays " + fmt("%.3e", -gain) + " more");
      ++agents;
    }
  }
  // Sellers, buyers and mixed households on the synthetic day.
  const Recorded* synthetic = nullptr;
  for (const auto& rec : g_runs)
    if (rec.label == "synthetic N=10 complete") synthetic = &rec;
  if (synthetic == nullptr) {
    o.require(false, "synthetic run missing");
    return o;
  }
  double st = 0.0;
  for (const auto& s : synthetic->specs) st += solve_ucmp(s, SolverConfig{}).cost;
  const double reduction = 100.0 * (1.0 - synthetic->result.total_cost() / st);
  o.require(reduction > 0.0, "system reduction " + fmt("%.4f", reduction) + "%");
  o.note(std::to_string(agents) + " agent results, smallest saving " + fmt("%.2e", tightest) +
         "; synthetic N=10 system reduction " + fmt("%.2f", reduction) + "%");
  return o;
}

Outcome tracking_invariant() {
  Outcome o;
  double worst = 0.0;
  std::size_t rounds = 0;
  for (const auto& rec : g_runs) {
    for (const auto& r : rec.result.trace.rounds) {
      worst = std::max(worst, r.tracking_residual);
      ++rounds;
    }
  }
  o.require(worst <= 1e-9, "residual " + fmt("%.2e", worst));
  o.note(std::to_string(rounds) + " rounds over " + std::to_string(g_runs.size()) + " runs, worst " + fmt("%.2e", worst));
  return o;
}

Outcome qp_correctness() {
  Outcome o;
  std::mt19937_64 rng(8080);
  double worst_kkt = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const RandomQp rq = random_feasible_qp(rng, trial % 2 == 1);
    const QpSolution s = solve_qp(rq.problem, SolverConfig{});
    o.require(s.status == QpStatus::optimal, "QP " + std::to_string(trial) + " " + to_string(s.status));
    const double kkt = kkt_residual(rq.problem, s);
    worst_kkt = std::max(worst_kkt, kkt);
    o.require(kkt <= 1e-8, "QP " + std::to_string(trial) + " KKT " + fmt("%.2e", kkt));
  }

  double worst_fd = 0.0;
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const QpProblem p = random_feasible_qp(rng, trial % 2 == 0).problem;
    Eigen::VectorXd x(p.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = u(rng);
    const Eigen::VectorXd g = p.gradient(x);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double step = 1e-5;
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += step;
      xm(j) -= step;
      const double fd = (p.objective(xp) - p.objective(xm)) / (2.0 * step);
      worst_fd = std::max(worst_fd, std::abs(fd - g(j)) / std::max(1.0, std::abs(g(j))));
    }
  }
  o.require(worst_fd <= 1e-6, "gradient off by " + fmt("%.2e", worst_fd));

  // Flexible shift over two slots; the free scalar is the first-slot flexible power.
  const ProsumerSpec s = flex_shift_spec();
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 1000; ++k) {
    const double x = 0.001 * k;
    const double g0 = 2.0 + x, g1 = 1.0 - x;
    best = std::min(best, 0.1 * (g0 * g0 + g1 * g1) + 0.05 * ((x - 1.0) * (x - 1.0) + g1 * g1));
  }
  const double solved = solve_ucmp(s, SolverConfig{}).cost;
  o.require(std::round(solved * 100.0) == std::round(best * 100.0),
            "flex shift " + fmt("%.6f", solved) + " vs grid " + fmt("%.6f", best));
  o.note("worst KKT " + fmt("%.1e", worst_kkt) + ", worst gradient error " + fmt("%.1e", worst_fd) +
         ", flex shift " + fmt("%.4f", solved) + " vs grid search " + fmt("%.4f", best));
  return o;
}

Outcome thermal_model() {
  Outcome o;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> temp(15.0, 38.0), power(0.0, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    HvacParams h;
    h.phi_c = 3.3;
    h.phi_r = 1.35;
    h.t_init = temp(rng);
    const std::size_t slots = 1 + static_cast<std::size_t>(trial % 24);
    Series t_out(slots), p_ac(slots);
    for (std::size_t t = 0; t < slots; ++t) {
      t_out[t] = temp(rng);
      p_ac[t] = power(rng);
    }
    const Series loop = unroll_temperature(h, t_out, p_ac);
    const ThermalAffine aff = thermal_affine(h, t_out);
    const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(p_ac.data(), static_cast<Eigen::Index>(slots));
    const Eigen::VectorXd affine = aff.A * p + aff.d;
    for (std::size_t t = 0; t < slots; ++t) worst = std::max(worst, std::abs(affine(static_cast<Eigen::Index>(t)) - loop[t]));
  }
  o.require(worst <= 1e-9, "affine form off by " + fmt("%.2e", worst));

  std::size_t schedules = 0;
  for (const auto& rec : g_runs) {
    for (std::size_t i = 0; i < rec.specs.size(); ++i) {
      const Series t_in = unroll_temperature(rec.specs[i].hvac, rec.specs[i].outdoor_temp_c, rec.result.schedules[i].p_ac);
      for (double v : t_in) {
        o.require(v >= rec.specs[i].hvac.t_min - kFeasibilityTol && v <= rec.specs[i].hvac.t_max + kFeasibilityTol,
                  rec.label + ": agent " + rec.specs[i].id + " at " + fmt("%.4f", v) + " degC");
      }
      const auto standalone = solve_ucmp(rec.specs[i], SolverConfig{}).schedule;
      o.require(validate_schedule(rec.specs[i], standalone, BalanceMode::standalone).empty(),
                rec.label + ": standalone schedule of " + rec.specs[i].id + " invalid");
      o.require(validate_schedule(rec.specs[i], rec.result.schedules[i], BalanceMode::coordinated).empty(),
                rec.label + ": coordinated schedule of " + rec.specs[i].id + " invalid");
      schedules += 2;
    }
  }
  o.note("affine vs recursion " + fmt("%.1e", worst) + " degC; " + std::to_string(schedules) +
         " schedules inside the comfort band");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = synth_dir(10, 11);
  const std::string scenario = (dir / "scenario.json").string();
  const auto compare = [&](const std::string& out, unsigned threads) {
    RunOptions r;
    r.scenario = scenario;
    r.out = (dir / out).string();
    r.overrides.threads = threads;
    r.quiet = true;
    std::ostringstream log;
    const int code = cmd_compare(r, log);
    o.require(code == kExitOk, out + " exited " + std::to_string(code) + ": " + log.str());
  };
  compare("single_a", 1);
  compare("single_b", 1);
  compare("multi_a", 4);
  compare("multi_b", 4);
  int files = 0;
  for (const char* f : {"report.jsonl", "schedules.csv", "grid_draw.csv", "prices.csv", "mismatch.csv"}) {
    const std::string ref = slurp(dir / "single_a" / f);
    o.require(!ref.empty(), std::string(f) + " empty");
    for (const char* other : {"single_b", "multi_a", "multi_b"}) {
      o.require(slurp(dir / other / f) == ref, std::string(f) + " differs in " + other);
      ++files;
    }
  }
  o.note(std::to_string(files) + " file comparisons across 1 and 4 threads");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  // Order matters: later criteria audit the runs recorded by earlier ones.
  const std::vector<Criterion> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"hand-solved market", hand_solved_market},
      {"convergence scale", convergence_scale},
      {"topology ordering", topology_ordering},
      {"market clearing", market_clearing},
      {"individual rationality", individual_rationality},
      {"tracking invariant", tracking_invariant},
      {"qp correctness", qp_correctness},
      {"thermal model", thermal_model},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k + 1 << "] " << criteria[k].name << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
