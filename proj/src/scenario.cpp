#include "gridpool/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace gridpool {

using nlohmann::json;

namespace {

void check_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw DataError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw DataError(path + ": unknown key '" + key + "'");
    }
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw DataError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DataError(path + ": expected a finite number");
  return v;
}

double number_or(const json& obj, const char* key, double fallback, const std::string& path) {
  return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

std::uint64_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw DataError(path + ": expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

std::uint64_t count_or(const json& obj, const char* key, std::uint64_t fallback, const std::string& path) {
  return obj.contains(key) ? count(obj.at(key), path + "." + key) : fallback;
}

bool flag_or(const json& obj, const char* key, bool fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) throw DataError(path + "." + key + ": expected true or false");
  return obj.at(key).get<bool>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw DataError(path + ": expected a string");
  return j.get<std::string>();
}

/// A number broadcast over the horizon or an array of exactly `slots` numbers.
Series series(const json& j, std::size_t slots, const std::string& path) {
  if (j.is_number()) return Series(slots, number(j, path));
  if (!j.is_array()) throw DataError(path + ": expected a number or an array");
  if (j.size() != slots) {
    throw DataError(path + ": expected " + std::to_string(slots) + " values, found " + std::to_string(j.size()));
  }
  Series out;
  for (std::size_t t = 0; t < slots; ++t) out.push_back(number(j[t], path + "[" + std::to_string(t) + "]"));
  return out;
}

Horizon parse_horizon(const json& j) {
  check_object(j, "horizon", {"slots", "slot_duration_h"});
  Horizon h;
  h.slots = count_or(j, "slots", h.slots, "horizon");
  h.slot_duration_h = number_or(j, "slot_duration_h", h.slot_duration_h, "horizon");
  try {
    h.validate();
  } catch (const ModelError& e) {
    throw DataError(std::string("horizon: ") + e.what());
  }
  return h;
}

TariffModel parse_tariff(const json& j, TariffModel base, const std::string& path) {
  check_object(j, path, {"a_g", "b_g"});
  base.a_g = number_or(j, "a_g", base.a_g, path);
  base.b_g = number_or(j, "b_g", base.b_g, path);
  return base;
}

HvacParams parse_hvac(const json& j, HvacParams base, const std::string& path) {
  check_object(j, path, {"phi_c", "phi_r", "eta", "t_ref", "t_min", "t_max", "beta_ac", "t_init"});
  base.phi_c = number_or(j, "phi_c", base.phi_c, path);
  base.phi_r = number_or(j, "phi_r", base.phi_r, path);
  base.eta = number_or(j, "eta", base.eta, path);
  base.t_ref = number_or(j, "t_ref", base.t_ref, path);
  base.t_min = number_or(j, "t_min", base.t_min, path);
  base.t_max = number_or(j, "t_max", base.t_max, path);
  base.beta_ac = number_or(j, "beta_ac", base.beta_ac, path);
  if (j.contains("t_init")) base.t_init = number(j.at("t_init"), path + ".t_init");
  return base;
}

FlexLoadParams parse_flex(const json& j, const Horizon& horizon, const std::string& path) {
  const std::size_t h = horizon.slots;
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "none")) return FlexLoadParams::none(h);
  check_object(j, path, {"p_min_kw", "p_max_kw", "p_ref_kw", "beta_f", "shiftable"});
  FlexLoadParams f = FlexLoadParams::none(h);
  f.beta_f = number_or(j, "beta_f", f.beta_f, path);
  if (j.contains("shiftable")) {
    if (j.contains("p_min_kw") || j.contains("p_max_kw") || j.contains("p_ref_kw")) {
      throw DataError(path + ": give either shiftable or explicit p_min_kw/p_max_kw/p_ref_kw");
    }
    const json& s = j.at("shiftable");
    const std::string sp = path + ".shiftable";
    check_object(s, sp, {"energy_kwh", "start_hour", "end_hour", "p_max_kw"});
    const double energy = number_or(s, "energy_kwh", 0.0, sp);
    const double start = number_or(s, "start_hour", 0.0, sp);
    const double end = number_or(s, "end_hour", 24.0, sp);
    const double p_max = number_or(s, "p_max_kw", 0.0, sp);
    std::vector<std::size_t> window;
    for (std::size_t t = 0; t < h; ++t) {
      const double hour = std::fmod(static_cast<double>(t) * horizon.slot_duration_h, 24.0);
      if (hour >= start && hour < end) window.push_back(t);
    }
    if (energy > 0.0 && window.empty()) throw DataError(sp + ": window contains no slot");
    f.p_max.assign(h, p_max);
    for (std::size_t t : window) {
      f.p_ref[t] = energy / (static_cast<double>(window.size()) * horizon.slot_duration_h);
    }
  } else {
    if (j.contains("p_min_kw")) f.p_min = series(j.at("p_min_kw"), h, path + ".p_min_kw");
    if (j.contains("p_max_kw")) f.p_max = series(j.at("p_max_kw"), h, path + ".p_max_kw");
    if (j.contains("p_ref_kw")) f.p_ref = series(j.at("p_ref_kw"), h, path + ".p_ref_kw");
  }
  return f;
}

ArchetypeMix parse_mix(const json& j) {
  check_object(j, "profiles.synthetic.mix", {"sellers", "buyers", "mixed"});
  ArchetypeMix m;
  m.sellers = number_or(j, "sellers", m.sellers, "profiles.synthetic.mix");
  m.buyers = number_or(j, "buyers", m.buyers, "profiles.synthetic.mix");
  m.mixed = number_or(j, "mixed", m.mixed, "profiles.synthetic.mix");
  return m;
}

SynthParams parse_synth_params(const json& j) {
  const std::string path = "profiles.synthetic.params";
  check_object(j, path,
               {"sunrise_h", "sunset_h", "seller_peak_kw", "mixed_peak_kw", "buyer_peak_kw", "base_load_kw",
                "morning_peak_h", "morning_peak_kw", "evening_peak_h", "evening_peak_kw", "peak_width_h", "load_noise",
                "agent_scale_spread", "temp_mean_c", "temp_amplitude_c", "temp_peak_h"});
  SynthParams p;
  p.sunrise_h = number_or(j, "sunrise_h", p.sunrise_h, path);
  p.sunset_h = number_or(j, "sunset_h", p.sunset_h, path);
  p.seller_peak_kw = number_or(j, "seller_peak_kw", p.seller_peak_kw, path);
  p.mixed_peak_kw = number_or(j, "mixed_peak_kw", p.mixed_peak_kw, path);
  p.buyer_peak_kw = number_or(j, "buyer_peak_kw", p.buyer_peak_kw, path);
  p.base_load_kw = number_or(j, "base_load_kw", p.base_load_kw, path);
  p.morning_peak_h = number_or(j, "morning_peak_h", p.morning_peak_h, path);
  p.morning_peak_kw = number_or(j, "morning_peak_kw", p.morning_peak_kw, path);
  p.evening_peak_h = number_or(j, "evening_peak_h", p.evening_peak_h, path);
  p.evening_peak_kw = number_or(j, "evening_peak_kw", p.evening_peak_kw, path);
  p.peak_width_h = number_or(j, "peak_width_h", p.peak_width_h, path);
  p.load_noise = number_or(j, "load_noise", p.load_noise, path);
  p.agent_scale_spread = number_or(j, "agent_scale_spread", p.agent_scale_spread, path);
  p.temp_mean_c = number_or(j, "temp_mean_c", p.temp_mean_c, path);
  p.temp_amplitude_c = number_or(j, "temp_amplitude_c", p.temp_amplitude_c, path);
  p.temp_peak_h = number_or(j, "temp_peak_h", p.temp_peak_h, path);
  return p;
}

std::optional<ProfileTable> parse_profiles_section(const json& j, const Horizon& horizon, std::uint64_t seed,
                                                   const std::string& base_dir) {
  check_object(j, "profiles", {"csv", "synthetic"});
  if (j.contains("csv") == j.contains("synthetic")) throw DataError("profiles: give exactly one of csv or synthetic");
  if (j.contains("csv")) {
    std::filesystem::path p(text(j.at("csv"), "profiles.csv"));
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    return load_profiles(p.string(), horizon.slots);
  }
  const json& s = j.at("synthetic");
  check_object(s, "profiles.synthetic", {"agents", "mix", "params"});
  if (!s.contains("agents")) throw DataError("profiles.synthetic: missing 'agents'");
  const auto n = count(s.at("agents"), "profiles.synthetic.agents");
  const ArchetypeMix mix = s.contains("mix") ? parse_mix(s.at("mix")) : ArchetypeMix{};
  const SynthParams params = s.contains("params") ? parse_synth_params(s.at("params")) : SynthParams{};
  return synth_profiles(seed, n, horizon, mix, params);
}

json topology_json(const TopologySpec& t) {
  json j{{"kind", t.kind}};
  if (t.kind == "star") j["hub"] = t.hub;
  if (t.kind == "ring") j["k"] = t.k;
  if (t.kind == "edges") j["edges"] = t.edges;
  if (t.kind == "weights") j["weights"] = t.weights;
  return j;
}

TopologySpec parse_topology_section(const json& j) {
  check_object(j, "topology", {"kind", "hub", "k", "edges", "weights"});
  TopologySpec t;
  if (j.contains("kind")) t.kind = text(j.at("kind"), "topology.kind");
  t.hub = count_or(j, "hub", t.hub, "topology");
  t.k = count_or(j, "k", t.k, "topology");
  if (t.kind == "edges") {
    if (!j.contains("edges") || !j.at("edges").is_array()) throw DataError("topology.edges: expected an array");
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw DataError("topology.edges: each edge is a pair [i, j]");
      t.edges.emplace_back(count(e[0], "topology.edges"), count(e[1], "topology.edges"));
    }
  } else if (t.kind == "weights") {
    if (!j.contains("weights") || !j.at("weights").is_array()) throw DataError("topology.weights: expected rows");
    for (const auto& row : j.at("weights")) {
      if (!row.is_array()) throw DataError("topology.weights: expected rows of numbers");
      std::vector<double> r;
      for (const auto& v : row) r.push_back(number(v, "topology.weights"));
      t.weights.push_back(std::move(r));
    }
  } else if (t.kind != "complete" && t.kind != "star" && t.kind != "ring") {
    throw DataError("topology.kind: expected complete, star, ring, edges or weights, got '" + t.kind + "'");
  }
  return t;
}

}  // namespace

TopologySpec TopologySpec::parse(const std::string& spec) {
  TopologySpec t;
  const auto colon = spec.find(':');
  t.kind = spec.substr(0, colon);
  if (t.kind != "complete" && t.kind != "star" && t.kind != "ring") {
    throw DataError("topology '" + spec + "': expected complete, star[:hub] or ring[:k]");
  }
  if (colon != std::string::npos) {
    if (t.kind == "complete") throw DataError("topology '" + spec + "': complete takes no parameter");
    const std::string arg = spec.substr(colon + 1);
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (arg.empty() || used != arg.size() || arg[0] == '-') {
      throw DataError("topology '" + spec + "': parameter must be a nonnegative integer");
    }
    (t.kind == "star" ? t.hub : t.k) = v;
  }
  return t;
}

Topology TopologySpec::build(std::size_t n) const {
  if (kind == "complete") return complete(n);
  if (kind == "star") return star(n, hub);
  if (kind == "ring") return nearest_k_ring(n, k);
  if (kind == "edges") return Topology::from_edges(n, edges);
  if (kind == "weights") {
    const WeightMatrix w = weights_for(n);
    Topology t(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (w.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) t.connect(i, j);
    return t;
  }
  throw TopologyError("unknown topology kind '" + kind + "'");
}

WeightMatrix TopologySpec::weights_for(std::size_t n) const {
  if (kind != "weights") return metropolis_weights(build(n));
  if (weights.size() != n) throw TopologyError("explicit weights need " + std::to_string(n) + " rows");
  WeightMatrix w{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  Topology support(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i].size() != n) throw TopologyError("explicit weight row " + std::to_string(i) + " has wrong length");
    for (std::size_t j = 0; j < n; ++j) {
      w.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = weights[i][j];
      if (i != j && weights[i][j] != 0.0) support.connect(i, j);
    }
  }
  validate_weights(w, support);
  if (!support.connected()) throw TopologyError("explicit weights do not connect all agents");
  return w;
}

std::vector<std::string> ScenarioBundle::ids() const {
  std::vector<std::string> out;
  for (const auto& s : specs) out.push_back(s.id);
  return out;
}

ScenarioBundle parse_scenario(const std::string& json_text, const std::string& base_dir,
                              const ScenarioOverrides& overrides) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("scenario is not valid JSON: ") + e.what());
  }
  check_object(doc, "scenario",
               {"seed", "threads", "horizon", "tariff", "agent_defaults", "profiles", "agents", "topology", "consensus",
                "solver", "description"});

  // Flags win over the file.
  if (overrides.seed) doc["seed"] = *overrides.seed;
  if (overrides.threads) doc["threads"] = *overrides.threads;
  if (overrides.epsilon) {
    doc["consensus"]["epsilon"] = *overrides.epsilon;
    doc["consensus"]["auto_epsilon"] = false;
  }
  if (overrides.max_rounds) doc["consensus"]["max_rounds"] = *overrides.max_rounds;
  if (overrides.topology) doc["topology"] = topology_json(TopologySpec::parse(*overrides.topology));

  ScenarioBundle b;
  b.seed = count_or(doc, "seed", 0, "scenario");
  b.horizon = doc.contains("horizon") ? parse_horizon(doc.at("horizon")) : Horizon{};
  const std::size_t h = b.horizon.slots;
  const TariffModel tariff = doc.contains("tariff") ? parse_tariff(doc.at("tariff"), {}, "tariff") : TariffModel{};

  // Agent defaults.
  double grid_cap = 12.0;
  HvacParams hvac;
  json flex_default = nullptr;
  if (doc.contains("agent_defaults")) {
    const json& d = doc.at("agent_defaults");
    check_object(d, "agent_defaults", {"grid_cap_kw", "hvac", "flex"});
    grid_cap = number_or(d, "grid_cap_kw", grid_cap, "agent_defaults");
    if (d.contains("hvac")) hvac = parse_hvac(d.at("hvac"), hvac, "agent_defaults.hvac");
    if (d.contains("flex")) flex_default = d.at("flex");
  }

  std::optional<ProfileTable> profiles;
  if (doc.contains("profiles")) profiles = parse_profiles_section(doc.at("profiles"), b.horizon, b.seed, base_dir);

  const auto make_spec = [&](const std::string& id, const AgentProfile* profile) {
    ProsumerSpec s;
    s.id = id;
    s.grid_cap_kw = grid_cap;
    s.hvac = hvac;
    s.tariff = tariff;
    s.flex = parse_flex(flex_default, b.horizon, "agent_defaults.flex");
    if (profile) {
      s.inflexible_kw = profile->load_kw;
      s.renewable_kw = profile->renewable_kw;
      s.outdoor_temp_c = profile->outdoor_temp_c;
    }
    return s;
  };

  if (doc.contains("agents")) {
    const json& agents = doc.at("agents");
    if (!agents.is_array()) throw DataError("agents: expected an array");
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const json& a = agents[i];
      const std::string path = "agents[" + std::to_string(i) + "]";
      check_object(a, path,
                   {"id", "profile", "load_kw", "renewable_kw", "outdoor_temp_c", "grid_cap_kw", "hvac", "flex",
                    "tariff"});
      if (!a.contains("id")) throw DataError(path + ": missing 'id'");
      const std::string id = text(a.at("id"), path + ".id");
      const AgentProfile* profile = nullptr;
      if (a.contains("profile") || (profiles && !a.contains("load_kw"))) {
        if (!profiles) throw DataError(path + ".profile: scenario has no profiles section");
        profile = &profiles->find(a.contains("profile") ? text(a.at("profile"), path + ".profile") : id);
      }
      ProsumerSpec s = make_spec(id, profile);
      if (a.contains("load_kw")) s.inflexible_kw = series(a.at("load_kw"), h, path + ".load_kw");
      if (a.contains("renewable_kw")) s.renewable_kw = series(a.at("renewable_kw"), h, path + ".renewable_kw");
      if (a.contains("outdoor_temp_c")) s.outdoor_temp_c = series(a.at("outdoor_temp_c"), h, path + ".outdoor_temp_c");
      if (s.inflexible_kw.empty() || s.renewable_kw.empty() || s.outdoor_temp_c.empty()) {
        throw DataError(path + ": needs load_kw, renewable_kw and outdoor_temp_c inline or from a profile");
      }
      s.grid_cap_kw = number_or(a, "grid_cap_kw", s.grid_cap_kw, path);
      if (a.contains("hvac")) s.hvac = parse_hvac(a.at("hvac"), s.hvac, path + ".hvac");
      if (a.contains("flex")) s.flex = parse_flex(a.at("flex"), b.horizon, path + ".flex");
      if (a.contains("tariff")) s.tariff = parse_tariff(a.at("tariff"), s.tariff, path + ".tariff");
      b.specs.push_back(std::move(s));
    }
  } else if (profiles) {
    for (const auto& p : profiles->agents) b.specs.push_back(make_spec(p.id, &p));
  }
  if (b.specs.empty()) throw DataError("scenario defines no agents (give agents[] or profiles)");
  for (std::size_t i = 0; i < b.specs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (b.specs[i].id == b.specs[j].id) throw DataError("duplicate agent id '" + b.specs[i].id + "'");
    }
    b.specs[i].validate();
  }

  b.topology = doc.contains("topology") ? parse_topology_section(doc.at("topology")) : TopologySpec{};

  ConsensusConfig& c = b.consensus;
  if (doc.contains("consensus")) {
    const json& j = doc.at("consensus");
    check_object(j, "consensus",
                 {"epsilon", "auto_epsilon", "tol_lambda", "tol_e", "clearing_tol", "max_rounds", "lambda_init"});
    c.epsilon = number_or(j, "epsilon", c.epsilon, "consensus");
    c.auto_epsilon = flag_or(j, "auto_epsilon", c.auto_epsilon, "consensus");
    c.tol_lambda = number_or(j, "tol_lambda", c.tol_lambda, "consensus");
    c.tol_e = number_or(j, "tol_e", c.tol_e, "consensus");
    c.clearing_tol = number_or(j, "clearing_tol", c.clearing_tol, "consensus");
    if (j.contains("max_rounds")) {
      const json& m = j.at("max_rounds");
      if (!m.is_number_integer()) throw DataError("consensus.max_rounds: expected an integer");
      c.max_rounds = m.get<int>();
    }
    if (j.contains("lambda_init")) c.lambda_init = series(j.at("lambda_init"), h, "consensus.lambda_init");
  }
  c.threads = static_cast<unsigned>(count_or(doc, "threads", 1, "scenario"));
  try {
    c.validate();
  } catch (const ModelError& e) {
    throw DataError(std::string("consensus: ") + e.what());
  }

  SolverConfig& s = b.solver;
  if (doc.contains("solver")) {
    const json& j = doc.at("solver");
    check_object(j, "solver", {"qp_tol", "max_qp_iter", "regularization", "rho", "sigma", "alpha", "polish_interval"});
    s.qp_tol = number_or(j, "qp_tol", s.qp_tol, "solver");
    s.max_qp_iter = static_cast<int>(count_or(j, "max_qp_iter", static_cast<std::uint64_t>(s.max_qp_iter), "solver"));
    s.regularization = number_or(j, "regularization", s.regularization, "solver");
    s.rho = number_or(j, "rho", s.rho, "solver");
    s.sigma = number_or(j, "sigma", s.sigma, "solver");
    s.alpha = number_or(j, "alpha", s.alpha, "solver");
    s.polish_interval =
        static_cast<int>(count_or(j, "polish_interval", static_cast<std::uint64_t>(s.polish_interval), "solver"));
  }
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw DataError(std::string("solver: ") + e.what());
  }

  // Check the topology against the agent count now rather than mid-run.
  try {
    (void)b.topology.weights_for(b.specs.size());
  } catch (const TopologyError& e) {
    throw DataError(std::string("topology: ") + e.what());
  }

  json eff = doc;
  eff["seed"] = b.seed;
  eff["threads"] = c.threads;
  eff["horizon"] = {{"slots", h}, {"slot_duration_h", b.horizon.slot_duration_h}};
  eff["tariff"] = {{"a_g", tariff.a_g}, {"b_g", tariff.b_g}};
  eff["topology"] = topology_json(b.topology);
  eff["consensus"] = {{"epsilon", c.epsilon},       {"auto_epsilon", c.auto_epsilon}, {"tol_lambda", c.tol_lambda},
                      {"tol_e", c.tol_e},           {"clearing_tol", c.clearing_tol}, {"max_rounds", c.max_rounds}};
  if (c.lambda_init) eff["consensus"]["lambda_init"] = *c.lambda_init;
  eff["solver"] = {{"qp_tol", s.qp_tol}, {"max_qp_iter", s.max_qp_iter},       {"regularization", s.regularization},
                   {"rho", s.rho},       {"sigma", s.sigma},                   {"alpha", s.alpha},
                   {"polish_interval", s.polish_interval}};
  b.effective_config = eff.dump(2) + "\n";
  return b;
}

ScenarioBundle load_scenario(const std::string& path, const ScenarioOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scenario file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  const std::filesystem::path p(path);
  return parse_scenario(text.str(), p.has_parent_path() ? p.parent_path().string() : ".", overrides);
}

}  // namespace gridpool
