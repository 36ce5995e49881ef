#include "gridpool/trace_io.hpp"

#include "gridpool/profiles.hpp"

#include <json.hpp>

#include <fstream>

namespace gridpool {

using nlohmann::json;

void write_trace(const RunTrace& trace, std::ostream& out) {
  const std::size_t agents = trace.rounds.empty() ? 0 : trace.rounds.front().lambda.size();
  const std::size_t slots = trace.rounds.empty() ? 0 : trace.rounds.front().net_trade.size();
  out << json{{"kind", "header"},
              {"format_version", kTraceFormatVersion},
              {"agents", agents},
              {"slots", slots},
              {"epsilon", trace.epsilon}}
             .dump()
      << '\n';
  for (const auto& r : trace.rounds) {
    out << json{{"kind", "round"},
                {"round", r.round},
                {"lambda", r.lambda},
                {"e_norm", r.e_norm},
                {"net_trade", r.net_trade},
                {"objective", r.objective},
                {"tracking_residual", r.tracking_residual}}
               .dump()
        << '\n';
  }
  out << json{{"kind", "final"},
              {"converged", trace.converged},
              {"rounds_used", trace.rounds_used},
              {"wall_time_s", trace.wall_time_s}}
             .dump()
      << '\n';
}

void write_trace(const RunTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trace file " + path);
  write_trace(trace, out);
}

RunTrace read_trace(std::istream& in, const std::string& source) {
  RunTrace trace;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  bool final = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string at = source + ":" + std::to_string(line_no) + ": ";
    if (final) throw DataError(at + "records after the final record");
    try {
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (!header) {
        if (kind != "header") throw DataError(at + "expected a header record");
        const int version = j.at("format_version").get<int>();
        if (version != kTraceFormatVersion) {
          throw DataError(at + "trace format_version " + std::to_string(version) + " is incompatible with " +
                          std::to_string(kTraceFormatVersion));
        }
        trace.epsilon = j.at("epsilon").get<double>();
        header = true;
      } else if (kind == "round") {
        RoundRecord r;
        r.round = j.at("round").get<int>();
        r.lambda = j.at("lambda").get<std::vector<Series>>();
        r.e_norm = j.at("e_norm").get<Series>();
        r.net_trade = j.at("net_trade").get<Series>();
        r.objective = j.at("objective").get<Series>();
        r.tracking_residual = j.at("tracking_residual").get<double>();
        trace.rounds.push_back(std::move(r));
      } else if (kind == "final") {
        trace.converged = j.at("converged").get<bool>();
        trace.rounds_used = j.at("rounds_used").get<int>();
        trace.wall_time_s = j.at("wall_time_s").get<double>();
        final = true;
      } else {
        throw DataError(at + "unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw DataError(at + e.what());
    }
  }
  if (!header) throw DataError(source + ": missing header record");
  if (!final) throw DataError(source + ": missing final record");
  return trace;
}

RunTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file " + path);
  return read_trace(in, path);
}

}  // namespace gridpool
