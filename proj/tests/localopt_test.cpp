#include "gridpool/localopt.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace gridpool;

using namespace gridpool::testing;

TEST(Ucmp, FreeRenewableCoversEverything) {
  ProsumerSpec s = bare_spec("sun", {3.0, 2.0, 5.0}, {1.0, 2.0, 0.5}, TariffModel{0.01, 0.03});
  const LocalResult r = solve_ucmp(s, SolverConfig{});
  EXPECT_NEAR(r.cost, 0.0, 1e-9);
  for (double g : r.schedule.p_g) EXPECT_NEAR(g, 0.0, 1e-8);
  for (double e : r.schedule.p_et) EXPECT_EQ(e, 0.0);
  EXPECT_TRUE(validate_schedule(s, r.schedule, BalanceMode::standalone).empty());
}

TEST(Ucmp, NoDegreesOfFreedom) {
  ProsumerSpec s = bare_spec("fixed", {0.0, 0.0, 0.0}, {1.0, 4.0, 2.5}, TariffModel{0.02, 0.05});
  const LocalResult r = solve_ucmp(s, SolverConfig{});
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(r.schedule.p_g[t], s.inflexible_kw[t], 1e-8);
  EXPECT_NEAR(r.cost, grid_cost(s.inflexible_kw, s.tariff), 1e-9);
}

TEST(Ucmp, FlexibleShiftMatchesGridSearch) {
  const ProsumerSpec s = flex_shift_spec();
  // Oracle: the only free scalar is p_f[0]; p_f[1] = 1 - p_f[0], p_g = load.
  double best = std::numeric_limits<double>::infinity();
  double best_x = -1.0;
  for (int k = 0; k <= 100; ++k) {
    const double x = 0.01 * k;
    const double g0 = 2.0 + x;
    const double g1 = 1.0 - x;
    const double cost = 0.1 * (g0 * g0 + g1 * g1) + 0.05 * ((x - 1.0) * (x - 1.0) + g1 * g1);
    if (cost < best) {
      best = cost;
      best_x = x;
    }
  }
  const LocalResult r = solve_ucmp(s, SolverConfig{});
  EXPECT_NEAR(r.schedule.p_f[0], best_x, 0.005);
  EXPECT_NEAR(r.cost, best, 0.005);
  EXPECT_NEAR(r.cost, 0.6, 1e-8);  // frozen from the grid search above
  EXPECT_TRUE(validate_schedule(s, r.schedule, BalanceMode::standalone).empty());
  EXPECT_NEAR(r.cost, operating_cost(s, r.schedule), 1e-12);
}

TEST(Ucmp, InfeasibleInstanceReportsAgent) {
  ProsumerSpec s = bare_spec("overloaded", {0.0}, {15.0}, TariffModel{0.01, 0.03});
  try {
    solve_ucmp(s, SolverConfig{});
    FAIL() << "expected SolveError";
  } catch (const SolveError& e) {
    EXPECT_EQ(e.agent_id(), "overloaded");
    EXPECT_EQ(e.status(), QpStatus::infeasible);
  }
}

TEST(Ucmp, ProblemObjectiveMatchesOperatingCost) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const ProsumerSpec s = random_spec(rng, 6, "r");
    const QpProblem p = build_ucmp(s, 0.0);
    const LocalResult r = solve_ucmp(s, SolverConfig{});
    Eigen::VectorXd x(p.size());
    const VarLayout L{6, false};
    for (std::size_t t = 0; t < 6; ++t) {
      x(L.re(t)) = r.schedule.p_re[t];
      x(L.g(t)) = r.schedule.p_g[t];
      x(L.ac(t)) = r.schedule.p_ac[t];
      x(L.f(t)) = r.schedule.p_f[t];
    }
    EXPECT_NEAR(p.objective(x), operating_cost(s, r.schedule), 1e-10);
  }
}

TEST(Ucmp, SolverOutputPassesValidation) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const ProsumerSpec s = random_spec(rng, 1 + trial % 8, "r" + std::to_string(trial));
    const LocalResult r = solve_ucmp(s, SolverConfig{});
    EXPECT_LE(r.qp.kkt_residual, 1e-8);
    const auto v = validate_schedule(s, r.schedule, BalanceMode::standalone);
    EXPECT_TRUE(v.empty()) << v.front().describe();
    for (std::size_t t = 0; t < s.horizon(); ++t) {
      EXPECT_GE(r.schedule.t_in[t], s.hvac.t_min - kFeasibilityTol);
      EXPECT_LE(r.schedule.t_in[t], s.hvac.t_max + kFeasibilityTol);
    }
  }
}

TEST(Ilp, ZeroPriceMakesTradingWorthless) {
  ProsumerSpec s = bare_spec("sun", {5.0, 4.0}, {1.0, 1.0}, TariffModel{0.01, 0.03});
  const LocalResult standalone = solve_ucmp(s, SolverConfig{});
  const LocalResult trading = solve_ilp(s, {0.0, 0.0}, SolverConfig{});
  EXPECT_NEAR(trading.cost, standalone.cost, 1e-8);
}

TEST(Ilp, BuyerAtBasePriceBuysEverything) {
  // Single slot KKT: buy until 2 a p_g + b = lambda. At lambda = b the grid is idle.
  const TariffModel tariff{0.05, 0.03};
  ProsumerSpec s = bare_spec("buyer", {0.0}, {3.0}, tariff);
  s.renewable_kw = {0.0};
  const LocalResult at_base = solve_ilp(s, {tariff.b_g}, SolverConfig{});
  EXPECT_GE(at_base.schedule.p_et[0], 0.0);
  EXPECT_NEAR(at_base.schedule.p_g[0], 0.0, 1e-7);
  EXPECT_NEAR(at_base.schedule.p_et[0], 3.0, 1e-7);

  const double lambda = tariff.b_g + 2.0 * tariff.a_g * 1.0;  // grid marginal at 1 kW
  const LocalResult split = solve_ilp(s, {lambda}, SolverConfig{});
  EXPECT_NEAR(split.schedule.p_g[0], 1.0, 1e-7);
  EXPECT_NEAR(split.schedule.p_et[0], 2.0, 1e-7);
}

TEST(Ilp, SellerSellsEverythingMatchesExhaustiveCheck) {
  const TariffModel tariff{0.01, 0.03};
  ProsumerSpec s = bare_spec("seller", {2.0}, {0.0}, tariff);
  // Oracle: with no load, selling s costs -0.2 s (renewable covers it).
  double best = std::numeric_limits<double>::infinity();
  double best_trade = 1.0;
  for (int k = 0; k <= 200; ++k) {
    const double trade = -2.0 + 0.01 * k;
    const double cost = 0.2 * trade;
    if (cost < best) {
      best = cost;
      best_trade = trade;
    }
  }
  const LocalResult r = solve_ilp(s, {0.2}, SolverConfig{});
  EXPECT_NEAR(r.schedule.p_et[0], best_trade, 1e-7);
  EXPECT_NEAR(r.schedule.p_et[0], -2.0, 1e-7);
  EXPECT_NEAR(r.cost, -0.4, 1e-7);
  EXPECT_TRUE(validate_schedule(s, r.schedule, BalanceMode::coordinated).empty());
}

TEST(Ilp, IndividualRationalityAtAnyPrice) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> price(-0.05, 0.3);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t h = 1 + trial % 6;
    const ProsumerSpec s = random_spec(rng, h, "r");
    Series lambda(h);
    for (auto& l : lambda) l = price(rng);
    const LocalResult standalone = solve_ucmp(s, SolverConfig{});
    const LocalResult trading = solve_ilp(s, lambda, SolverConfig{});
    EXPECT_LE(trading.cost, standalone.cost + 1e-8);
    EXPECT_LE(trading.qp.kkt_residual, 1e-8);
    EXPECT_TRUE(validate_schedule(s, trading.schedule, BalanceMode::coordinated).empty());
  }
}

TEST(Ilp, PriceLengthChecked) {
  ProsumerSpec s = bare_spec("x", {1.0, 1.0}, {1.0, 1.0}, TariffModel{});
  EXPECT_THROW(build_ilp(s, {0.1}), ModelError);
}

TEST(Ccmp, SymmetricAgentsDoNotTrade) {
  const TariffModel tariff{0.02, 0.04};
  ProsumerSpec a = bare_spec("a", {0.0, 0.0}, {2.0, 3.0}, tariff);
  ProsumerSpec b = a;
  b.id = "b";
  const CentralizedResult r = solve_ccmp_centralized({a, b}, SolverConfig{});
  for (const auto& s : r.schedules)
    for (double e : s.p_et) EXPECT_NEAR(e, 0.0, 1e-8);
  EXPECT_NEAR(r.total_cost, 2.0 * solve_ucmp(a, SolverConfig{}).cost, 1e-8);
}

TEST(Ccmp, TwoAgentHandSolvedMarket) {
  // Seller A (1 kW renewable, no load), buyer B (2 kW load); price settles at
  // the buyer's marginal grid cost 2 * 0.1 * 1 = 0.2.
  const TariffModel tariff{0.1, 0.0};
  const ProsumerSpec a = bare_spec("A", {1.0}, {0.0}, tariff);
  const ProsumerSpec b = bare_spec("B", {0.0}, {2.0}, tariff);
  const CentralizedResult r = solve_ccmp_centralized({a, b}, SolverConfig{});
  EXPECT_NEAR(r.schedules[0].p_et[0], -1.0, 1e-7);
  EXPECT_NEAR(r.schedules[1].p_et[0], 1.0, 1e-7);
  EXPECT_NEAR(r.schedules[1].p_g[0], 1.0, 1e-7);
  EXPECT_NEAR(r.lambda_star[0], 0.2, 1e-7);
  EXPECT_NEAR(r.total_cost, 0.1, 1e-8);
}

TEST(Ccmp, ClearingAndPriceOptimality) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t h = 1 + trial % 4;
    std::vector<ProsumerSpec> specs;
    for (int i = 0; i < 3; ++i) specs.push_back(random_spec(rng, h, "a" + std::to_string(i)));
    const CentralizedResult r = solve_ccmp_centralized(specs, SolverConfig{});
    for (std::size_t t = 0; t < h; ++t) {
      double net = 0.0;
      for (const auto& s : r.schedules) net += s.p_et[t];
      EXPECT_NEAR(net, 0.0, 1e-8);
      for (std::size_t i = 0; i < specs.size(); ++i) {
        const double pg = r.schedules[i].p_g[t];
        const double et = r.schedules[i].p_et[t];
        const bool trade_interior = et > -specs[i].renewable_kw[t] + 1e-6;
        if (pg > 1e-6 && pg < specs[i].grid_cap_kw - 1e-6 && trade_interior) {
          EXPECT_NEAR(r.lambda_star[t], 2.0 * specs[i].tariff.a_g * pg + specs[i].tariff.b_g, 1e-6);
        }
      }
    }
    double standalone = 0.0;
    for (const auto& s : specs) standalone += solve_ucmp(s, SolverConfig{}).cost;
    EXPECT_LE(r.total_cost, standalone + 1e-8);
  }
}

TEST(Ccmp, NeedsTwoAgents) {
  ProsumerSpec a = bare_spec("a", {0.0}, {1.0}, TariffModel{});
  EXPECT_THROW(solve_ccmp_centralized({a}, SolverConfig{}), ModelError);
}
