#include "gridpool/profiles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace gridpool {

namespace {

constexpr const char* kHeader = "agent_id,slot,load_kw,renewable_kw,outdoor_temp_c";
constexpr const char* kColumns[] = {"agent_id", "slot", "load_kw", "renewable_kw", "outdoor_temp_c"};

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string where(const std::string& source, std::size_t line, const char* column) {
  return source + ":" + std::to_string(line) + ": column '" + column + "': ";
}

double parse_number(const std::string& cell, const std::string& source, std::size_t line, const char* column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw DataError(where(source, line, column) + "not a number: '" + cell + "'");
  }
  if (!std::isfinite(v)) throw DataError(where(source, line, column) + "value is not finite");
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double bump(double hour, double centre, double width) {
  const double d = (hour - centre) / width;
  return std::exp(-0.5 * d * d);
}

}  // namespace

const AgentProfile& ProfileTable::find(const std::string& id) const {
  for (const auto& a : agents)
    if (a.id == id) return a;
  throw DataError("profile table has no agent '" + id + "'");
}

void ProfileTable::validate() const {
  if (slots == 0) throw DataError("profile table has no slots");
  for (const auto& a : agents) {
    if (a.load_kw.size() != slots || a.renewable_kw.size() != slots || a.outdoor_temp_c.size() != slots) {
      throw DataError("agent '" + a.id + "' does not have " + std::to_string(slots) + " slots");
    }
    for (std::size_t t = 0; t < slots; ++t) {
      if (!std::isfinite(a.load_kw[t]) || a.load_kw[t] < 0.0) {
        throw DataError("agent '" + a.id + "' slot " + std::to_string(t) + ": invalid load_kw");
      }
      if (!std::isfinite(a.renewable_kw[t]) || a.renewable_kw[t] < 0.0) {
        throw DataError("agent '" + a.id + "' slot " + std::to_string(t) + ": invalid renewable_kw");
      }
      if (!std::isfinite(a.outdoor_temp_c[t])) {
        throw DataError("agent '" + a.id + "' slot " + std::to_string(t) + ": invalid outdoor_temp_c");
      }
    }
  }
}

ProfileTable parse_profiles(std::istream& in, const std::string& source, std::size_t expected_slots) {
  struct Row {
    double load, renewable, temp;
  };
  std::vector<std::string> order;
  std::map<std::string, std::map<std::size_t, Row>> rows;
  std::map<std::pair<std::string, std::size_t>, std::size_t> first_line;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      const auto cells = split(line);
      for (std::size_t c = 0; c < 5; ++c) {
        if (cells.size() <= c || cells[c] != kColumns[c]) {
          throw DataError(source + ":" + std::to_string(line_no) + ": expected header '" + kHeader + "'");
        }
      }
      if (cells.size() != 5) throw DataError(source + ":" + std::to_string(line_no) + ": unexpected extra columns");
      header_seen = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != 5) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected 5 fields, found " +
                      std::to_string(cells.size()));
    }
    const std::string& id = cells[0];
    if (id.empty()) throw DataError(where(source, line_no, "agent_id") + "empty");
    const double slot_v = parse_number(cells[1], source, line_no, "slot");
    if (slot_v < 0.0 || slot_v != std::floor(slot_v)) {
      throw DataError(where(source, line_no, "slot") + "not a nonnegative integer: '" + cells[1] + "'");
    }
    const auto slot = static_cast<std::size_t>(slot_v);
    Row r{parse_number(cells[2], source, line_no, "load_kw"), parse_number(cells[3], source, line_no, "renewable_kw"),
          parse_number(cells[4], source, line_no, "outdoor_temp_c")};
    if (r.load < 0.0) throw DataError(where(source, line_no, "load_kw") + "negative value " + cells[2]);
    if (r.renewable < 0.0) throw DataError(where(source, line_no, "renewable_kw") + "negative value " + cells[3]);
    if (!rows.count(id)) order.push_back(id);
    const auto [it, inserted] = rows[id].emplace(slot, r);
    if (!inserted) {
      throw DataError(source + ":" + std::to_string(line_no) + ": duplicate row for agent '" + id + "' slot " +
                      std::to_string(slot) + " (first on line " + std::to_string(first_line[{id, slot}]) + ")");
    }
    first_line[{id, slot}] = line_no;
  }
  if (!header_seen) throw DataError(source + ": empty file, expected header '" + kHeader + "'");
  if (order.empty()) throw DataError(source + ": no data rows");

  ProfileTable table;
  table.slots = expected_slots;
  if (table.slots == 0) {
    for (const auto& id : order) table.slots = std::max(table.slots, rows[id].rbegin()->first + 1);
  }
  for (const auto& id : order) {
    const auto& by_slot = rows[id];
    AgentProfile a;
    a.id = id;
    for (std::size_t t = 0; t < table.slots; ++t) {
      const auto it = by_slot.find(t);
      if (it == by_slot.end()) {
        throw DataError(source + ": agent '" + id + "' is missing slot " + std::to_string(t));
      }
      a.load_kw.push_back(it->second.load);
      a.renewable_kw.push_back(it->second.renewable);
      a.outdoor_temp_c.push_back(it->second.temp);
    }
    if (by_slot.size() != table.slots) {
      throw DataError(source + ": agent '" + id + "' has slot " + std::to_string(by_slot.rbegin()->first) +
                      " beyond the horizon of " + std::to_string(table.slots));
    }
    table.agents.push_back(std::move(a));
  }
  table.validate();
  return table;
}

ProfileTable load_profiles(const std::string& path, std::size_t expected_slots) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profile file " + path);
  return parse_profiles(in, path, expected_slots);
}

void write_profiles(const ProfileTable& table, std::ostream& out) {
  out << kHeader << '\n';
  for (const auto& a : table.agents)
    for (std::size_t t = 0; t < table.slots; ++t) {
      out << a.id << ',' << t << ',' << fmt(a.load_kw[t]) << ',' << fmt(a.renewable_kw[t]) << ','
          << fmt(a.outdoor_temp_c[t]) << '\n';
    }
}

void write_profiles(const ProfileTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write profile file " + path);
  write_profiles(table, out);
}

void ArchetypeMix::validate() const {
  if (sellers < 0.0 || buyers < 0.0 || mixed < 0.0 || sellers + buyers + mixed <= 0.0) {
    throw DataError("archetype mix needs nonnegative fractions with a positive sum");
  }
}

void SynthParams::validate() const {
  if (!(sunset_h > sunrise_h)) throw DataError("sunset must come after sunrise");
  if (seller_peak_kw < 0.0 || mixed_peak_kw < 0.0 || buyer_peak_kw < 0.0 || base_load_kw < 0.0 ||
      morning_peak_kw < 0.0 || evening_peak_kw < 0.0) {
    throw DataError("synthetic power levels must be nonnegative");
  }
  if (!(peak_width_h > 0.0)) throw DataError("peak width must be positive");
  if (load_noise < 0.0 || load_noise >= 1.0 || agent_scale_spread < 0.0 || agent_scale_spread >= 1.0) {
    throw DataError("noise levels must lie in [0, 1)");
  }
}

ProfileTable synth_profiles(std::uint64_t seed, std::size_t n, const Horizon& horizon, const ArchetypeMix& mix,
                            const SynthParams& params) {
  if (n < 1) throw DataError("synthetic profiles need at least one agent");
  horizon.validate();
  mix.validate();
  params.validate();

  const double total = mix.sellers + mix.buyers + mix.mixed;
  const auto count = [&](double share) {
    return static_cast<std::size_t>(std::llround(share / total * static_cast<double>(n)));
  };
  const std::size_t sellers = std::min(n, count(mix.sellers));
  const std::size_t buyers = std::min(n - sellers, count(mix.buyers));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double dt = horizon.slot_duration_h;
  const double day = params.sunset_h - params.sunrise_h;

  ProfileTable table;
  table.slots = horizon.slots;
  for (std::size_t i = 0; i < n; ++i) {
    enum { seller, mixed, buyer } kind = i < sellers ? seller : (i >= n - buyers ? buyer : mixed);
    const double peak = kind == seller ? params.seller_peak_kw
                        : kind == buyer ? params.buyer_peak_kw
                                        : params.mixed_peak_kw;
    const double pv_scale = 1.0 + params.agent_scale_spread * unit(rng);
    const double load_scale = 1.0 + params.agent_scale_spread * unit(rng);
    const double temp_shift = 0.5 * unit(rng);

    char name[32];
    std::snprintf(name, sizeof name, "agent%02zu", i);
    AgentProfile a;
    a.id = name;
    bool daylight = false;
    for (std::size_t t = 0; t < horizon.slots; ++t) {
      const double hour = std::fmod((static_cast<double>(t) + 0.5) * dt, 24.0);
      double pv = 0.0;
      if (hour > params.sunrise_h && hour < params.sunset_h) {
        pv = peak * pv_scale * std::sin(std::numbers::pi * (hour - params.sunrise_h) / day);
        daylight = true;
      }
      const double shape = params.base_load_kw +
                           params.morning_peak_kw * bump(hour, params.morning_peak_h, params.peak_width_h) +
                           params.evening_peak_kw * bump(hour, params.evening_peak_h, params.peak_width_h);
      const double load = std::max(0.0, shape * load_scale * (1.0 + params.load_noise * unit(rng)));
      const double temp = params.temp_mean_c + temp_shift +
                          params.temp_amplitude_c * std::cos(2.0 * std::numbers::pi * (hour - params.temp_peak_h) / 24.0);
      a.renewable_kw.push_back(pv);
      a.load_kw.push_back(load);
      a.outdoor_temp_c.push_back(temp);
    }
    if (kind == seller && daylight) {
      double pv_sum = 0.0, load_sum = 0.0;
      for (std::size_t t = 0; t < horizon.slots; ++t) {
        pv_sum += a.renewable_kw[t];
        load_sum += a.load_kw[t];
      }
      if (pv_sum > 0.0 && pv_sum < load_sum) {
        const double lift = load_sum / pv_sum * (1.0 + 1e-12);
        for (double& v : a.renewable_kw) v *= lift;
      }
    }
    table.agents.push_back(std::move(a));
  }
  table.validate();
  return table;
}

}  // namespace gridpool
