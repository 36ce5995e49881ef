#include "gridpool/report.hpp"

#include "gridpool/profiles.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace gridpool {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

double sum(const Series& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

json reduction_json(std::optional<double> pct) { return pct ? json(*pct) : json("n/a"); }

void write_schedules(std::ostream& out, const char* mode, const std::vector<std::string>& ids,
                     const std::vector<Schedule>& schedules) {
  for (std::size_t i = 0; i < schedules.size(); ++i) {
    const Schedule& s = schedules[i];
    for (std::size_t t = 0; t < s.horizon(); ++t) {
      out << mode << ',' << ids[i] << ',' << t << ',' << fmt(s.p_re[t]) << ',' << fmt(s.p_g[t]) << ','
          << fmt(s.p_ac[t]) << ',' << fmt(s.p_f[t]) << ',' << fmt(s.p_et[t]) << ',' << fmt(s.t_in[t]) << '\n';
    }
  }
}

}  // namespace

std::optional<double> reduction_pct(double standalone, double coordinated) {
  if (standalone == 0.0) return std::nullopt;
  return 100.0 * (1.0 - coordinated / standalone);
}

std::string format_reduction(std::optional<double> pct) {
  if (!pct) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%", *pct);
  return buf;
}

void write_report(const ReportInput& in, const std::string& dir) {
  const std::size_t n = in.ids.size();
  const bool have_stand = !in.standalone_costs.empty();
  const bool have_coord = !in.coordinated_costs.empty();
  if ((have_stand && in.standalone_costs.size() != n) || (have_coord && in.coordinated_costs.size() != n)) {
    throw DataError("cost vectors must have one entry per agent");
  }
  if ((!in.standalone_schedules.empty() && in.standalone_schedules.size() != n) ||
      (!in.coordinated_schedules.empty() && in.coordinated_schedules.size() != n)) {
    throw DataError("schedule lists must have one entry per agent");
  }
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);

  std::size_t slots = 0;
  if (!in.standalone_schedules.empty()) slots = in.standalone_schedules.front().horizon();
  if (!in.coordinated_schedules.empty()) slots = in.coordinated_schedules.front().horizon();

  {
    auto out = open(root / "report.jsonl");
    out << json{{"kind", "header"}, {"format_version", kReportFormatVersion}, {"agents", n}, {"slots", slots}}.dump()
        << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      json rec{{"kind", "agent"}, {"id", in.ids[i]}};
      if (have_stand) rec["standalone_cost"] = in.standalone_costs[i];
      if (have_coord) rec["coordinated_cost"] = in.coordinated_costs[i];
      if (have_stand && have_coord) {
        const auto pct = reduction_pct(in.standalone_costs[i], in.coordinated_costs[i]);
        rec["reduction_pct"] = reduction_json(pct);
        rec["reduction"] = format_reduction(pct);
      }
      out << rec.dump() << '\n';
    }
    json sys{{"kind", "system"}};
    if (have_stand) sys["standalone_total"] = sum(in.standalone_costs);
    if (have_coord) sys["coordinated_total"] = sum(in.coordinated_costs);
    if (have_stand && have_coord) {
      const auto pct = reduction_pct(sum(in.standalone_costs), sum(in.coordinated_costs));
      sys["reduction_pct"] = reduction_json(pct);
      sys["reduction"] = format_reduction(pct);
    }
    out << sys.dump() << '\n';
    if (in.trace) {
      json market{{"kind", "market"},
                  {"converged", in.trace->converged},
                  {"rounds", in.trace->rounds_used},
                  {"epsilon", in.trace->epsilon}};
      if (!in.final_lambda.empty()) market["final_lambda"] = in.final_lambda;
      if (!in.coordinated_schedules.empty()) {
        Series net(slots, 0.0);
        for (const auto& s : in.coordinated_schedules)
          for (std::size_t t = 0; t < slots; ++t) net[t] += s.p_et[t];
        double worst = 0.0;
        for (double v : net) worst = std::max(worst, std::abs(v));
        market["net_trade"] = net;
        market["clearing_residual"] = worst;
      }
      out << market.dump() << '\n';
    }
  }

  {
    auto out = open(root / "schedules.csv");
    out << "mode,agent_id,slot,p_re,p_g,p_ac,p_f,p_et,t_in\n";
    write_schedules(out, "standalone", in.ids, in.standalone_schedules);
    write_schedules(out, "coordinated", in.ids, in.coordinated_schedules);
  }

  if (!in.standalone_schedules.empty() || !in.coordinated_schedules.empty()) {
    auto out = open(root / "grid_draw.csv");
    out << "agent_id,slot,standalone_p_g,coordinated_p_g\n";
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < slots; ++t) {
        out << in.ids[i] << ',' << t << ','
            << (in.standalone_schedules.empty() ? "" : fmt(in.standalone_schedules[i].p_g[t])) << ','
            << (in.coordinated_schedules.empty() ? "" : fmt(in.coordinated_schedules[i].p_g[t])) << '\n';
      }
  }

  if (in.trace) {
    auto prices = open(root / "prices.csv");
    auto mismatch = open(root / "mismatch.csv");
    prices << "round,agent_id";
    mismatch << "round,max_e_norm,tracking_residual";
    for (std::size_t t = 0; t < slots; ++t) {
      prices << ",lambda_" << t;
      mismatch << ",net_" << t;
    }
    prices << '\n';
    mismatch << '\n';
    for (const auto& r : in.trace->rounds) {
      for (std::size_t i = 0; i < r.lambda.size() && i < n; ++i) {
        prices << r.round << ',' << in.ids[i];
        for (double v : r.lambda[i]) prices << ',' << fmt(v);
        prices << '\n';
      }
      const double max_e = r.e_norm.empty() ? 0.0 : *std::max_element(r.e_norm.begin(), r.e_norm.end());
      mismatch << r.round << ',' << fmt(max_e) << ',' << fmt(r.tracking_residual);
      for (double v : r.net_trade) mismatch << ',' << fmt(v);
      mismatch << '\n';
    }
  }
}

}  // namespace gridpool
