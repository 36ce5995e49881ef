#pragma once

// Instance builders shared by the test binaries.

#include "gridpool/model.hpp"
#include "gridpool/qp.hpp"

#include <algorithm>

#include <random>
#include <string>
#include <vector>

namespace gridpool::testing {

// No HVAC need (outdoor at setpoint, zero sensitivity) and no flexible load.
inline ProsumerSpec bare_spec(std::string id, Series renewable, Series inflexible, TariffModel tariff) {
  const std::size_t h = inflexible.size();
  ProsumerSpec s;
  s.id = std::move(id);
  s.grid_cap_kw = 10.0;
  s.renewable_kw = std::move(renewable);
  s.inflexible_kw = std::move(inflexible);
  s.outdoor_temp_c.assign(h, 24.0);
  s.hvac.t_ref = 24.0;
  s.hvac.t_min = 20.0;
  s.hvac.t_max = 28.0;
  s.hvac.beta_ac = 0.0;
  s.flex = FlexLoadParams::none(h);
  s.tariff = tariff;
  return s;
}

inline ProsumerSpec flex_shift_spec() {
  ProsumerSpec s = bare_spec("shift", {0.0, 0.0}, {2.0, 0.0}, TariffModel{0.1, 0.0});
  s.flex.p_min = {0.0, 0.0};
  s.flex.p_max = {1.0, 1.0};
  s.flex.p_ref = {1.0, 0.0};
  s.flex.beta_f = 0.05;
  return s;
}

// Random instance with HVAC and flexible load, used for property checks.
inline ProsumerSpec random_spec(std::mt19937_64& rng, std::size_t h, const std::string& id) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProsumerSpec s;
  s.id = id;
  s.grid_cap_kw = 12.0;
  for (std::size_t t = 0; t < h; ++t) {
    s.renewable_kw.push_back(4.0 * u(rng));
    s.inflexible_kw.push_back(0.5 + 2.0 * u(rng));
    s.outdoor_temp_c.push_back(24.0 + 8.0 * u(rng));
  }
  s.hvac.beta_ac = 0.01 + 0.05 * u(rng);
  s.flex.p_min.assign(h, 0.0);
  s.flex.p_max.assign(h, 2.0);
  s.flex.p_ref.assign(h, 0.0);
  s.flex.p_ref[0] = 1.0 + u(rng);
  s.flex.beta_f = 0.01 + 0.05 * u(rng);
  s.tariff = TariffModel{0.005 + 0.02 * u(rng), 0.02 + 0.05 * u(rng)};
  return s;
}

// Market with renewable in every slot: agent 0 is a large seller, the rest
// have little renewable and draw grid power at the clearing price.
inline std::vector<ProsumerSpec> random_market(std::mt19937_64& rng, std::size_t n, std::size_t h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ProsumerSpec> specs;
  for (std::size_t i = 0; i < n; ++i) {
    ProsumerSpec s = random_spec(rng, h, "agent" + std::to_string(i));
    for (std::size_t t = 0; t < h; ++t) s.renewable_kw[t] = i == 0 ? 2.0 + 3.0 * u(rng) : 1.5 * u(rng);
    specs.push_back(std::move(s));
  }
  return specs;
}

// Seller with 1 kW of renewable and a buyer with 2 kW of load, one slot.
// Clears at 1 kW traded for a price of 0.2 and a total cost of 0.1.
inline std::vector<ProsumerSpec> two_agent_market() {
  const TariffModel tariff{0.1, 0.0};
  return {bare_spec("A", {1.0}, {0.0}, tariff), bare_spec("B", {0.0}, {2.0}, tariff)};
}

struct RandomQp {
  QpProblem problem;
  Eigen::VectorXd feasible_point;
};

// Feasible by construction: every constraint is satisfied by a hidden point.
// Problems with a singular Q get finite bounds on every variable so the
// minimum exists.
inline RandomQp random_feasible_qp(std::mt19937_64& rng, bool singular) {
  std::uniform_int_distribution<int> dim(2, 14);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  const int n = dim(rng);
  const int rank = singular ? std::max(1, n / 2) : n;
  Eigen::MatrixXd B(rank, n);
  for (int r = 0; r < rank; ++r)
    for (int j = 0; j < n; ++j) B(r, j) = u(rng);
  QpProblem p = QpProblem::unconstrained(n);
  p.Q = B.transpose() * B;
  if (!singular) p.Q.diagonal().array() += 0.1;
  for (int j = 0; j < n; ++j) p.c(j) = 3.0 * u(rng);

  Eigen::VectorXd x0(n);
  for (int j = 0; j < n; ++j) {
    x0(j) = 2.0 * u(rng);
    const bool bounded = singular || pos(rng) < 0.7;
    if (bounded) {
      p.lower(j) = x0(j) - (pos(rng) < 0.3 ? 0.0 : 2.0 * pos(rng));
      p.upper(j) = x0(j) + (pos(rng) < 0.3 ? 0.0 : 2.0 * pos(rng));
    }
  }
  const int me = std::uniform_int_distribution<int>(0, std::max(0, n / 3))(rng);
  for (int k = 0; k < me; ++k) {
    Eigen::RowVectorXd row(n);
    for (int j = 0; j < n; ++j) row(j) = u(rng);
    p.add_equality(row, row.dot(x0));
  }
  const int mi = std::uniform_int_distribution<int>(0, n)(rng);
  for (int k = 0; k < mi; ++k) {
    Eigen::RowVectorXd row(n);
    for (int j = 0; j < n; ++j) row(j) = u(rng);
    p.add_inequality(row, row.dot(x0) + (pos(rng) < 0.3 ? 0.0 : pos(rng)));
  }
  return {p, x0};
}

}  // namespace gridpool::testing
