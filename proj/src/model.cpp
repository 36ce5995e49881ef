#include "gridpool/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridpool {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ModelError(what);
}

void require_length(const Series& s, std::size_t slots, const char* name) {
  if (s.size() != slots) {
    std::ostringstream os;
    os << name << " has " << s.size() << " slots, expected " << slots;
    throw ModelError(os.str());
  }
}

bool all_finite(const Series& s) {
  return std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void Horizon::validate() const {
  require(slots >= 1, "horizon must have at least one slot");
  require(slot_duration_h > 0.0, "slot duration must be positive");
}

void TariffModel::validate() const {
  require(a_g >= 0.0 && std::isfinite(a_g), "tariff a_g must be finite and >= 0");
  require(b_g >= 0.0 && std::isfinite(b_g), "tariff b_g must be finite and >= 0");
}

void HvacParams::validate() const {
  require(phi_c > 0.0, "hvac phi_c must be > 0");
  require(phi_r > 0.0, "hvac phi_r must be > 0");
  require(eta != 0.0 && std::isfinite(eta), "hvac eta must be nonzero");
  require(t_min <= t_ref && t_ref <= t_max, "hvac requires t_min <= t_ref <= t_max");
  require(beta_ac >= 0.0, "hvac beta_ac must be >= 0");
  require(std::isfinite(initial_temperature()), "hvac t_init must be finite");
}

FlexLoadParams FlexLoadParams::none(std::size_t slots) {
  FlexLoadParams f;
  f.p_min.assign(slots, 0.0);
  f.p_max.assign(slots, 0.0);
  f.p_ref.assign(slots, 0.0);
  f.beta_f = 0.0;
  return f;
}

void FlexLoadParams::validate(std::size_t slots) const {
  require_length(p_min, slots, "flex p_min");
  require_length(p_max, slots, "flex p_max");
  require_length(p_ref, slots, "flex p_ref");
  require(beta_f >= 0.0, "flex beta_f must be >= 0");
  for (std::size_t t = 0; t < slots; ++t) {
    if (!(0.0 <= p_min[t] && p_min[t] <= p_max[t])) {
      throw ModelError("flex bounds must satisfy 0 <= p_min <= p_max at slot " + std::to_string(t));
    }
    if (!(p_min[t] <= p_ref[t] && p_ref[t] <= p_max[t])) {
      throw ModelError("flex p_ref must lie within [p_min, p_max] at slot " + std::to_string(t));
    }
  }
}

void ProsumerSpec::validate() const {
  const std::string who = "prosumer '" + id + "': ";
  const std::size_t h = horizon();
  try {
    require(h >= 1, "empty horizon");
    require(grid_cap_kw > 0.0 && std::isfinite(grid_cap_kw), "grid_cap must be > 0");
    require_length(renewable_kw, h, "renewable_kw");
    require_length(outdoor_temp_c, h, "outdoor_temp_c");
    require(all_finite(renewable_kw) && all_finite(inflexible_kw) && all_finite(outdoor_temp_c),
            "series must be finite");
    for (std::size_t t = 0; t < h; ++t) {
      require(renewable_kw[t] >= 0.0, "renewable_kw must be >= 0 at slot " + std::to_string(t));
      require(inflexible_kw[t] >= 0.0, "inflexible_kw must be >= 0 at slot " + std::to_string(t));
    }
    hvac.validate();
    flex.validate(h);
    tariff.validate();
  } catch (const ModelError& e) {
    throw ModelError(who + e.what());
  }
}

Schedule Schedule::zeros(std::size_t slots) {
  Schedule s;
  s.p_re.assign(slots, 0.0);
  s.p_g.assign(slots, 0.0);
  s.p_ac.assign(slots, 0.0);
  s.p_f.assign(slots, 0.0);
  s.p_et.assign(slots, 0.0);
  s.t_in.assign(slots, 0.0);
  return s;
}

double thermal_step(double t_prev, double t_out, double p_ac, const HvacParams& hvac) {
  return t_prev - (t_prev - t_out + hvac.eta * hvac.phi_r * p_ac) / (hvac.phi_c * hvac.phi_r);
}

Series unroll_temperature(const HvacParams& hvac, const Series& t_out, const Series& p_ac) {
  require(t_out.size() == p_ac.size(), "outdoor temperature and HVAC power lengths differ");
  Series t_in(t_out.size());
  double prev = hvac.initial_temperature();
  for (std::size_t t = 0; t < t_out.size(); ++t) {
    prev = thermal_step(prev, t_out[t], p_ac[t], hvac);
    t_in[t] = prev;
  }
  return t_in;
}

ThermalAffine thermal_affine(const HvacParams& hvac, const Series& t_out) {
  const auto h = static_cast<Eigen::Index>(t_out.size());
  const double inflow = 1.0 / (hvac.phi_c * hvac.phi_r);
  const double retain = 1.0 - inflow;
  const double gain = -hvac.eta / hvac.phi_c;

  ThermalAffine out{Eigen::MatrixXd::Zero(h, h), Eigen::VectorXd::Zero(h)};
  double prev = hvac.initial_temperature();
  for (Eigen::Index t = 0; t < h; ++t) {
    prev = retain * prev + inflow * t_out[static_cast<std::size_t>(t)];
    out.d(t) = prev;
    out.A(t, t) = gain;
    for (Eigen::Index s = 0; s < t; ++s) out.A(t, s) = retain * out.A(t - 1, s);
  }
  return out;
}

double grid_cost(const Series& p_g, const TariffModel& tariff) {
  double total = 0.0;
  for (std::size_t t = 0; t < p_g.size(); ++t) {
    if (p_g[t] < 0.0) throw ModelError("grid draw must be >= 0 at slot " + std::to_string(t));
    total += tariff.a_g * p_g[t] * p_g[t] + tariff.b_g * p_g[t];
  }
  return total;
}

double hvac_discomfort(const Series& t_in, const HvacParams& hvac) {
  double total = 0.0;
  for (double v : t_in) total += (v - hvac.t_ref) * (v - hvac.t_ref);
  return hvac.beta_ac * total;
}

double flex_discomfort(const Series& p_f, const FlexLoadParams& flex) {
  require(p_f.size() == flex.p_ref.size(), "flexible load and preferred schedule lengths differ");
  double total = 0.0;
  for (std::size_t t = 0; t < p_f.size(); ++t) {
    const double dev = p_f[t] - flex.p_ref[t];
    total += dev * dev;
  }
  return flex.beta_f * total;
}

double operating_cost(const ProsumerSpec& spec, const Schedule& schedule) {
  const Series t_in = unroll_temperature(spec.hvac, spec.outdoor_temp_c, schedule.p_ac);
  return grid_cost(schedule.p_g, spec.tariff) + hvac_discomfort(t_in, spec.hvac) +
         flex_discomfort(schedule.p_f, spec.flex);
}

double trading_cost(const Series& p_et, const Series& lambda) {
  require(p_et.size() == lambda.size(), "trade and price lengths differ");
  double total = 0.0;
  for (std::size_t t = 0; t < p_et.size(); ++t) total += lambda[t] * p_et[t];
  return total;
}

std::string to_string(ConstraintId id) {
  switch (id) {
    case ConstraintId::grid_limit: return "grid_limit";
    case ConstraintId::renewable_limit: return "renewable_limit";
    case ConstraintId::hvac_nonnegative: return "hvac_nonnegative";
    case ConstraintId::comfort_band: return "comfort_band";
    case ConstraintId::flex_limit: return "flex_limit";
    case ConstraintId::flex_energy: return "flex_energy";
    case ConstraintId::overselling: return "overselling";
    case ConstraintId::no_trade: return "no_trade";
    case ConstraintId::balance: return "balance";
    case ConstraintId::dimension: return "dimension";
  }
  return "unknown";
}

std::string Violation::describe() const {
  std::ostringstream os;
  os << to_string(constraint);
  if (slot) os << " at slot " << *slot;
  os << " violated by " << magnitude;
  return os.str();
}

std::vector<Violation> validate_schedule(const ProsumerSpec& spec, const Schedule& schedule,
                                         BalanceMode mode, double tol) {
  std::vector<Violation> out;
  const std::size_t h = spec.horizon();

  const auto check_len = [&](const Series& s) {
    if (s.size() != h) {
      out.push_back({ConstraintId::dimension, std::nullopt,
                     std::abs(static_cast<double>(s.size()) - static_cast<double>(h))});
      return false;
    }
    return true;
  };
  bool ok = check_len(schedule.p_re) & check_len(schedule.p_g) & check_len(schedule.p_ac) &
            check_len(schedule.p_f);
  const bool has_trade = !schedule.p_et.empty();
  if (has_trade) ok &= check_len(schedule.p_et);
  if (!ok) return out;

  // Records max(0, excess) as a violation when it exceeds tol.
  const auto flag = [&](ConstraintId id, std::optional<std::size_t> slot, double excess) {
    if (excess > tol) out.push_back({id, slot, excess});
  };

  for (std::size_t t = 0; t < h; ++t) {
    flag(ConstraintId::grid_limit, t, -schedule.p_g[t]);
    flag(ConstraintId::grid_limit, t, schedule.p_g[t] - spec.grid_cap_kw);
    flag(ConstraintId::renewable_limit, t, -schedule.p_re[t]);
    flag(ConstraintId::renewable_limit, t, schedule.p_re[t] - spec.renewable_kw[t]);
    flag(ConstraintId::hvac_nonnegative, t, -schedule.p_ac[t]);
    flag(ConstraintId::flex_limit, t, spec.flex.p_min[t] - schedule.p_f[t]);
    flag(ConstraintId::flex_limit, t, schedule.p_f[t] - spec.flex.p_max[t]);
  }

  const Series t_in = unroll_temperature(spec.hvac, spec.outdoor_temp_c, schedule.p_ac);
  for (std::size_t t = 0; t < h; ++t) {
    flag(ConstraintId::comfort_band, t, spec.hvac.t_min - t_in[t]);
    flag(ConstraintId::comfort_band, t, t_in[t] - spec.hvac.t_max);
  }

  double shifted = 0.0;
  double preferred = 0.0;
  for (std::size_t t = 0; t < h; ++t) {
    shifted += schedule.p_f[t];
    preferred += spec.flex.p_ref[t];
  }
  flag(ConstraintId::flex_energy, std::nullopt, std::abs(shifted - preferred));

  for (std::size_t t = 0; t < h; ++t) {
    const double trade = has_trade ? schedule.p_et[t] : 0.0;
    if (mode == BalanceMode::standalone) {
      flag(ConstraintId::no_trade, t, std::abs(trade));
    } else {
      flag(ConstraintId::overselling, t, -spec.renewable_kw[t] - trade);
    }
    const double supply = schedule.p_re[t] + schedule.p_g[t] +
                          (mode == BalanceMode::coordinated ? trade : 0.0);
    const double demand = schedule.p_ac[t] + schedule.p_f[t] + spec.inflexible_kw[t];
    flag(ConstraintId::balance, t, std::abs(supply - demand));
  }
  return out;
}

}  // namespace gridpool
