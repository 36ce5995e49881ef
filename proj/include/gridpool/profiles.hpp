#pragma once

// Exogenous per-agent series: inflexible load, renewable output, outdoor
// temperature. CSV layout, one row per (agent, slot):
//   agent_id,slot,load_kw,renewable_kw,outdoor_temp_c

#include "gridpool/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridpool {

/// Malformed input files or configuration.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentProfile {
  std::string id;
  Series load_kw;
  Series renewable_kw;
  Series outdoor_temp_c;

  bool operator==(const AgentProfile&) const = default;
};

struct ProfileTable {
  std::size_t slots = 0;
  std::vector<AgentProfile> agents;  // in order of first appearance

  std::size_t row_count() const { return slots * agents.size(); }
  const AgentProfile& find(const std::string& id) const;
  void validate() const;

  bool operator==(const ProfileTable&) const = default;
};

/// `expected_slots` of 0 accepts whatever horizon the file has.
ProfileTable parse_profiles(std::istream& in, const std::string& source, std::size_t expected_slots = 0);
ProfileTable load_profiles(const std::string& path, std::size_t expected_slots = 0);
void write_profiles(const ProfileTable& table, std::ostream& out);
void write_profiles(const ProfileTable& table, const std::string& path);

/// Fractions of high-, low- and medium-renewable agents. Normalized on use.
struct ArchetypeMix {
  double sellers = 1.0 / 3.0;
  double buyers = 1.0 / 3.0;
  double mixed = 1.0 / 3.0;

  void validate() const;
};

struct SynthParams {
  double sunrise_h = 6.0;
  double sunset_h = 19.0;
  double seller_peak_kw = 5.0;  // midday renewable per archetype
  double mixed_peak_kw = 2.0;
  double buyer_peak_kw = 0.3;
  double base_load_kw = 0.5;
  double morning_peak_h = 8.0;
  double morning_peak_kw = 1.0;
  double evening_peak_h = 19.0;
  double evening_peak_kw = 1.8;
  double peak_width_h = 1.5;
  double load_noise = 0.1;       // relative, per slot
  double agent_scale_spread = 0.2;  // relative, per agent
  double temp_mean_c = 27.0;
  double temp_amplitude_c = 5.0;
  double temp_peak_h = 15.0;

  void validate() const;
};

/// Deterministic for a fixed seed. Agents are named "agent00", "agent01", ...
/// and listed sellers first, then mixed, then buyers. Sellers produce at
/// least their daily load whenever the horizon contains daylight.
ProfileTable synth_profiles(std::uint64_t seed, std::size_t n, const Horizon& horizon, const ArchetypeMix& mix,
                            const SynthParams& params = {});

}  // namespace gridpool
