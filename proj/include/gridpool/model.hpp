#pragma once

// Device models and cost functions for a single prosumer.
//
// Every formula the optimizer and the consensus engine evaluate lives here:
// grid/renewable supply bounds, the linearized tiered tariff, first-order
// HVAC thermal dynamics, flexible-load shifting and the trading balance.
// All functions are pure.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridpool {

using Series = std::vector<double>;

/// Thrown for parameter or dimension errors in model inputs.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Horizon {
  std::size_t slots = 24;
  double slot_duration_h = 1.0;

  void validate() const;
};

/// Unit price pi = a_g * p + b_g, so the per-slot charge is a_g p^2 + b_g p.
struct TariffModel {
  double a_g = 0.01;  // $/kWh per kW
  double b_g = 0.03;  // $/kWh

  void validate() const;
};

struct HvacParams {
  double phi_c = 3.3;
  double phi_r = 1.35;
  double eta = 1.0;  // > 0 cooling, < 0 heating
  double t_ref = 24.0;
  double t_min = 19.0;
  double t_max = 27.0;
  double beta_ac = 0.5;  // $/degC^2
  std::optional<double> t_init;  // defaults to t_ref

  double initial_temperature() const { return t_init.value_or(t_ref); }
  void validate() const;
};

struct FlexLoadParams {
  Series p_min;
  Series p_max;
  Series p_ref;
  double beta_f = 0.01;  // $/kW^2

  /// Zero flexible load over `slots`.
  static FlexLoadParams none(std::size_t slots);
  void validate(std::size_t slots) const;
};

struct ProsumerSpec {
  std::string id;
  double grid_cap_kw = 12.0;
  Series renewable_kw;
  Series inflexible_kw;
  Series outdoor_temp_c;
  HvacParams hvac;
  FlexLoadParams flex;
  TariffModel tariff;

  std::size_t horizon() const { return inflexible_kw.size(); }
  void validate() const;
};

/// One agent's decisions over the horizon. `t_in` is derived from `p_ac`.
struct Schedule {
  Series p_re;
  Series p_g;
  Series p_ac;
  Series p_f;
  Series p_et;  // > 0 buying from the pool, < 0 selling
  Series t_in;

  static Schedule zeros(std::size_t slots);
  std::size_t horizon() const { return p_g.size(); }
};

/// One step of the indoor temperature recursion.
double thermal_step(double t_prev, double t_out, double p_ac, const HvacParams& hvac);

/// Indoor temperature trajectory starting from hvac.initial_temperature().
Series unroll_temperature(const HvacParams& hvac, const Series& t_out, const Series& p_ac);

/// t_in = A * p_ac + d, with A lower-triangular. This is the form the QP
/// builders use to eliminate the thermal state.
struct ThermalAffine {
  Eigen::MatrixXd A;
  Eigen::VectorXd d;
};
ThermalAffine thermal_affine(const HvacParams& hvac, const Series& t_out);

double grid_cost(const Series& p_g, const TariffModel& tariff);
double hvac_discomfort(const Series& t_in, const HvacParams& hvac);
double flex_discomfort(const Series& p_f, const FlexLoadParams& flex);

/// Grid cost + HVAC discomfort + flexible-load discomfort.
double operating_cost(const ProsumerSpec& spec, const Schedule& schedule);

/// Sum over slots of lambda[t] * p_et[t]; negative for net revenue.
double trading_cost(const Series& p_et, const Series& lambda);

enum class BalanceMode { standalone, coordinated };

enum class ConstraintId {
  grid_limit,        // 0 <= p_g <= grid cap
  renewable_limit,   // 0 <= p_re <= available renewable
  hvac_nonnegative,  // p_ac >= 0
  comfort_band,      // t_min <= t_in <= t_max
  flex_limit,        // flexible load within per-slot bounds
  flex_energy,       // shifted total equals preferred total
  overselling,       // p_et >= -available renewable
  no_trade,          // standalone schedules must not trade
  balance,           // supply (+ trade) equals demand
  dimension,         // series length disagrees with the horizon
};

std::string to_string(ConstraintId id);

struct Violation {
  ConstraintId constraint;
  std::optional<std::size_t> slot;  // empty for horizon-wide constraints
  double magnitude;

  std::string describe() const;
};

constexpr double kFeasibilityTol = 1e-6;

/// Every violated constraint with its slot and magnitude. Empty iff feasible.
std::vector<Violation> validate_schedule(const ProsumerSpec& spec, const Schedule& schedule,
                                         BalanceMode mode, double tol = kFeasibilityTol);

}  // namespace gridpool
