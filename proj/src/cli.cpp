#include "gridpool/cli.hpp"

#include "gridpool/consensus.hpp"
#include "gridpool/localopt.hpp"
#include "gridpool/report.hpp"
#include "gridpool/trace_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <ostream>

namespace gridpool {

namespace fs = std::filesystem;

namespace {

// Maps failures onto exit codes and prints one line for the user.
int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const SolveError& e) {
    log << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const DataError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ModelError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TopologyError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

ScenarioBundle prepare(const RunOptions& o) {
  if (o.scenario.empty()) throw DataError("--scenario is required");
  ScenarioBundle b = load_scenario(o.scenario, o.overrides);
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "effective_config.json", b.effective_config);
  return b;
}

struct Standalone {
  Series costs;
  std::vector<Schedule> schedules;
};

Standalone run_standalone(const ScenarioBundle& b) {
  Standalone s;
  for (const auto& spec : b.specs) {
    const LocalResult r = solve_ucmp(spec, b.solver);
    s.costs.push_back(r.cost);
    s.schedules.push_back(r.schedule);
  }
  return s;
}

RunResult run_coordinated(const ScenarioBundle& b, const RunOptions& o) {
  const RunResult r = run(b.specs, b.topology.weights_for(b.specs.size()), b.consensus, b.solver);
  write_trace(r.trace, (fs::path(o.out) / "trace.jsonl").string());
  return r;
}

std::string money(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void log_market(std::ostream& log, const RunResult& r) {
  log << (r.trace.converged ? "converged" : "not converged") << " after " << r.trace.rounds_used
      << " rounds (epsilon " << r.trace.epsilon << "), clearing residual " << r.clearing_residual() << " kW\n";
}

}  // namespace

int cmd_standalone(const RunOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    const ScenarioBundle b = prepare(o);
    const Standalone s = run_standalone(b);
    ReportInput in;
    in.ids = b.ids();
    in.standalone_costs = s.costs;
    in.standalone_schedules = s.schedules;
    write_report(in, o.out);
    if (!o.quiet) {
      double total = 0.0;
      for (std::size_t i = 0; i < s.costs.size(); ++i) {
        log << in.ids[i] << "  " << money(s.costs[i]) << '\n';
        total += s.costs[i];
      }
      log << "total  " << money(total) << '\n';
    }
    return kExitOk;
  });
}

int cmd_coordinated(const RunOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    const ScenarioBundle b = prepare(o);
    const RunResult r = run_coordinated(b, o);
    ReportInput in;
    in.ids = b.ids();
    in.coordinated_costs = r.costs;
    in.coordinated_schedules = r.schedules;
    in.trace = &r.trace;
    in.final_lambda = r.lambda;
    write_report(in, o.out);
    if (!o.quiet) {
      for (std::size_t i = 0; i < r.costs.size(); ++i) log << in.ids[i] << "  " << money(r.costs[i]) << '\n';
      log << "total  " << money(r.total_cost()) << '\n';
    }
    log_market(log, r);
    return r.trace.converged ? kExitOk : kExitNotConverged;
  });
}

int cmd_compare(const RunOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    const ScenarioBundle b = prepare(o);
    const Standalone s = run_standalone(b);
    const RunResult r = run_coordinated(b, o);
    ReportInput in;
    in.ids = b.ids();
    in.standalone_costs = s.costs;
    in.standalone_schedules = s.schedules;
    in.coordinated_costs = r.costs;
    in.coordinated_schedules = r.schedules;
    in.trace = &r.trace;
    in.final_lambda = r.lambda;
    write_report(in, o.out);
    if (!o.quiet) {
      double st = 0.0;
      for (std::size_t i = 0; i < r.costs.size(); ++i) {
        log << in.ids[i] << "  " << money(s.costs[i]) << " -> " << money(r.costs[i]) << "  "
            << format_reduction(reduction_pct(s.costs[i], r.costs[i])) << '\n';
        st += s.costs[i];
      }
      log << "system  " << money(st) << " -> " << money(r.total_cost()) << "  "
          << format_reduction(reduction_pct(st, r.total_cost())) << '\n';
    }
    log_market(log, r);
    return r.trace.converged ? kExitOk : kExitNotConverged;
  });
}

int cmd_topology(const TopologyOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    TopologySpec spec = TopologySpec::parse(o.topology);
    std::size_t n = o.agents;
    if (!o.scenario.empty()) {
      ScenarioOverrides ov;
      if (o.topology != "complete") ov.topology = o.topology;
      const ScenarioBundle b = load_scenario(o.scenario, ov);
      spec = b.topology;
      if (n == 0) n = b.specs.size();
    }
    if (n == 0) throw DataError("--agents is required without --scenario");
    const Topology t = spec.build(n);
    const WeightMatrix w = spec.weights_for(n);
    char buf[32];
    log << "adjacency (" << n << " agents, " << t.edge_count() << " edges)\n";
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) log << (j ? " " : "") << (t.adjacent(i, j) ? 1 : 0);
      log << '\n';
    }
    log << "weights\n";
    for (Eigen::Index i = 0; i < w.w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.w.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.6f", w.w(i, j));
        log << (j ? " " : "") << buf;
      }
      log << '\n';
    }
    log << "row sums";
    for (Eigen::Index i = 0; i < w.w.rows(); ++i) {
      std::snprintf(buf, sizeof buf, " %.12f", w.w.row(i).sum());
      log << buf;
    }
    log << "\ncolumn sums";
    for (Eigen::Index j = 0; j < w.w.cols(); ++j) {
      std::snprintf(buf, sizeof buf, " %.12f", w.w.col(j).sum());
      log << buf;
    }
    std::snprintf(buf, sizeof buf, "%.12f", spectral_gap(w));
    log << "\nspectral gap " << buf << '\n';
    return kExitOk;
  });
}

std::string synth_scenario_json(const SynthOptions& o, const std::string& profiles_csv) {
  const TopologySpec topo = TopologySpec::parse(o.topology);
  nlohmann::json topology{{"kind", topo.kind}};
  if (topo.kind == "star") topology["hub"] = topo.hub;
  if (topo.kind == "ring") topology["k"] = topo.k;
  const nlohmann::json doc{
      {"description", "synthetic day, " + std::to_string(o.agents) + " agents"},
      {"seed", o.seed},
      {"horizon", {{"slots", 24}, {"slot_duration_h", 1.0}}},
      {"tariff", {{"a_g", 0.01}, {"b_g", 0.03}}},
      {"agent_defaults",
       {{"grid_cap_kw", 12.0},
        {"hvac", {{"beta_ac", 0.5}}},
        {"flex",
         {{"shiftable", {{"energy_kwh", 3.0}, {"start_hour", 18.0}, {"end_hour", 22.0}, {"p_max_kw", 2.0}}},
          {"beta_f", 0.02}}}}},
      {"profiles", {{"csv", profiles_csv}}},
      {"topology", topology},
      {"consensus", {{"epsilon", o.epsilon}, {"max_rounds", 5000}}},
  };
  return doc.dump(2) + "\n";
}

int cmd_synth(const SynthOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    if (o.agents < 1) throw DataError("--agents must be at least 1");
    const ProfileTable table = synth_profiles(o.seed, o.agents, Horizon{24, 1.0}, o.mix);
    const std::string scenario = synth_scenario_json(o, "profiles.csv");
    const std::string csv = [&] {
      std::ostringstream os;
      write_profiles(table, os);
      return os.str();
    }();
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "profiles.csv", csv);
    write_text(fs::path(o.out) / "scenario.json", scenario);
    (void)load_scenario((fs::path(o.out) / "scenario.json").string());
    log << "wrote " << (fs::path(o.out) / "scenario.json").string() << " and profiles.csv (" << o.agents
        << " agents, seed " << o.seed << ")\n";
    return kExitOk;
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Peer-to-peer energy trading simulator"};
  app.require_subcommand(1);

  RunOptions run_opts;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  std::string topology;
  int max_rounds = 0;
  unsigned threads = 0;

  const auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--scenario", run_opts.scenario, "Scenario JSON file")->required();
    sub->add_option("--out", run_opts.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Seed for synthetic profiles");
    sub->add_option("--epsilon", epsilon, "Consensus step size")->check(CLI::PositiveNumber);
    sub->add_option("--topology", topology, "complete | star[:hub] | ring[:k]");
    sub->add_option("--max-rounds", max_rounds, "Round limit")->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", run_opts.quiet, "Only print the summary line");
  };
  CLI::App* standalone = app.add_subcommand("standalone", "Benchmark costs without trading");
  CLI::App* coordinated = app.add_subcommand("coordinated", "Run the consensus market");
  CLI::App* compare = app.add_subcommand("compare", "Standalone vs coordinated costs");
  for (CLI::App* sub : {standalone, coordinated, compare}) add_run_flags(sub);

  TopologyOptions topo_opts;
  CLI::App* topo = app.add_subcommand("topology", "Print a communication graph and its weights");
  topo->add_option("--topology", topo_opts.topology, "complete | star[:hub] | ring[:k]")->capture_default_str();
  topo->add_option("--agents", topo_opts.agents, "Number of agents");
  topo->add_option("--scenario", topo_opts.scenario, "Take the graph from a scenario file");

  SynthOptions synth_opts;
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic scenario");
  synth->add_option("--out", synth_opts.out, "Output directory")->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "Random seed")->capture_default_str();
  synth->add_option("--agents", synth_opts.agents, "Number of agents")->capture_default_str();
  synth->add_option("--sellers", synth_opts.mix.sellers, "Share of high-renewable agents")->check(CLI::NonNegativeNumber);
  synth->add_option("--buyers", synth_opts.mix.buyers, "Share of low-renewable agents")->check(CLI::NonNegativeNumber);
  synth->add_option("--mixed", synth_opts.mix.mixed, "Share of medium agents")->check(CLI::NonNegativeNumber);
  synth->add_option("--topology", synth_opts.topology, "complete | star[:hub] | ring[:k]")->capture_default_str();
  synth->add_option("--epsilon", synth_opts.epsilon, "Consensus step size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  const auto collect = [&](CLI::App* sub) {
    if (sub->count("--seed")) run_opts.overrides.seed = seed;
    if (sub->count("--epsilon")) run_opts.overrides.epsilon = epsilon;
    if (sub->count("--topology")) run_opts.overrides.topology = topology;
    if (sub->count("--max-rounds")) run_opts.overrides.max_rounds = max_rounds;
    if (sub->count("--threads")) run_opts.overrides.threads = threads;
  };
  if (standalone->parsed()) {
    collect(standalone);
    return cmd_standalone(run_opts, out);
  }
  if (coordinated->parsed()) {
    collect(coordinated);
    return cmd_coordinated(run_opts, out);
  }
  if (compare->parsed()) {
    collect(compare);
    return cmd_compare(run_opts, out);
  }
  if (topo->parsed()) return cmd_topology(topo_opts, out);
  if (synth->parsed()) return cmd_synth(synth_opts, out);
  return kExitFailure;
}

}  // namespace gridpool
