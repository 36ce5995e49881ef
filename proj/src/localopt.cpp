#include "gridpool/localopt.hpp"

#include <algorithm>
#include <cmath>

namespace gridpool {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SolveError::SolveError(std::string agent_id, QpStatus status, const std::string& detail)
    : std::runtime_error("agent '" + agent_id + "': local problem " + to_string(status) +
                         (detail.empty() ? "" : " (" + detail + ")")),
      agent_id_(std::move(agent_id)),
      status_(status) {}

namespace {

constexpr double kTradeCapFactor = 10.0;

std::string slot_name(const char* base, std::size_t t) {
  return std::string(base) + "[" + std::to_string(t) + "]";
}

QpProblem build_local(const ProsumerSpec& spec, const Series* lambda, const Series* trade_cap,
                      double regularization) {
  spec.validate();
  const std::size_t h = spec.horizon();
  const VarLayout L{h, lambda != nullptr};
  QpProblem p = QpProblem::unconstrained(L.size());
  p.var_names.resize(static_cast<std::size_t>(L.size()));

  const ThermalAffine thermal = thermal_affine(spec.hvac, spec.outdoor_temp_c);
  const auto H = static_cast<Index>(h);
  const Index ac0 = L.ac(0);
  const Index f0 = L.f(0);

  for (std::size_t t = 0; t < h; ++t) {
    p.lower(L.re(t)) = 0.0;
    p.upper(L.re(t)) = spec.renewable_kw[t];
    p.lower(L.g(t)) = 0.0;
    p.upper(L.g(t)) = spec.grid_cap_kw;
    p.lower(L.ac(t)) = 0.0;
    p.lower(L.f(t)) = spec.flex.p_min[t];
    p.upper(L.f(t)) = spec.flex.p_max[t];
    p.var_names[static_cast<std::size_t>(L.re(t))] = slot_name("renewable_limit", t);
    p.var_names[static_cast<std::size_t>(L.g(t))] = slot_name("grid_limit", t);
    p.var_names[static_cast<std::size_t>(L.ac(t))] = slot_name("hvac_nonnegative", t);
    p.var_names[static_cast<std::size_t>(L.f(t))] = slot_name("flex_limit", t);

    p.Q(L.re(t), L.re(t)) = regularization;
    p.Q(L.g(t), L.g(t)) = 2.0 * spec.tariff.a_g + regularization;
    p.c(L.g(t)) = spec.tariff.b_g;

    p.Q(L.f(t), L.f(t)) = 2.0 * spec.flex.beta_f;
    p.c(L.f(t)) = -2.0 * spec.flex.beta_f * spec.flex.p_ref[t];
    p.offset += spec.flex.beta_f * spec.flex.p_ref[t] * spec.flex.p_ref[t];
  }

  // beta * || A p_ac + d - t_ref ||^2
  const VectorXd dev = thermal.d.array() - spec.hvac.t_ref;
  const double beta = spec.hvac.beta_ac;
  p.Q.block(ac0, ac0, H, H) = 2.0 * beta * thermal.A.transpose() * thermal.A;
  p.c.segment(ac0, H) = 2.0 * beta * thermal.A.transpose() * dev;
  p.offset += beta * dev.squaredNorm();

  if (L.trading) {
    for (std::size_t t = 0; t < h; ++t) {
      p.lower(L.et(t)) = -spec.renewable_kw[t];
      p.upper(L.et(t)) = (*trade_cap)[t];
      p.c(L.et(t)) = (*lambda)[t];
      p.var_names[static_cast<std::size_t>(L.et(t))] = slot_name("overselling", t);
    }
  }

  for (std::size_t t = 0; t < h; ++t) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(L.size());
    row(L.re(t)) = 1.0;
    row(L.g(t)) = 1.0;
    row(L.ac(t)) = -1.0;
    row(L.f(t)) = -1.0;
    if (L.trading) row(L.et(t)) = 1.0;
    p.add_equality(row, spec.inflexible_kw[t], slot_name("balance", t));
  }
  {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(L.size());
    row.segment(f0, H).setOnes();
    double total = 0.0;
    for (double v : spec.flex.p_ref) total += v;
    p.add_equality(row, total, "flex_energy");
  }
  for (std::size_t t = 0; t < h; ++t) {
    const auto ti = static_cast<Index>(t);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(L.size());
    row.segment(ac0, H) = thermal.A.row(ti);
    p.add_inequality(row, spec.hvac.t_max - thermal.d(ti), slot_name("comfort_band_max", t));
    p.add_inequality(-row, thermal.d(ti) - spec.hvac.t_min, slot_name("comfort_band_min", t));
  }
  return p;
}

LocalResult finish(const ProsumerSpec& spec, const VarLayout& layout, QpSolution qp,
                   const Series* lambda) {
  if (qp.status != QpStatus::optimal) throw SolveError(spec.id, qp.status, qp.diagnostic);
  LocalResult r;
  r.schedule = extract_schedule(spec, layout, qp.x);
  r.cost = operating_cost(spec, r.schedule);
  if (lambda) r.cost += trading_cost(r.schedule.p_et, *lambda);
  r.qp = std::move(qp);
  return r;
}

}  // namespace

Series default_trade_cap(const ProsumerSpec& spec) {
  return Series(spec.horizon(), kTradeCapFactor * spec.grid_cap_kw);
}

std::vector<Series> market_trade_caps(const std::vector<ProsumerSpec>& specs) {
  std::vector<Series> caps;
  caps.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Series cap = default_trade_cap(specs[i]);
    for (std::size_t t = 0; t < cap.size(); ++t) {
      double others = 0.0;
      for (std::size_t j = 0; j < specs.size(); ++j) {
        if (j != i) others += specs[j].renewable_kw.at(t);
      }
      if (others <= 0.0) cap[t] = 0.0;
    }
    caps.push_back(std::move(cap));
  }
  return caps;
}

QpProblem build_ucmp(const ProsumerSpec& spec, double regularization) {
  return build_local(spec, nullptr, nullptr, regularization);
}

QpProblem build_ilp(const ProsumerSpec& spec, const Series& lambda, const std::optional<Series>& trade_cap,
                    double regularization) {
  if (lambda.size() != spec.horizon()) throw ModelError("price vector length differs from horizon");
  const Series cap = trade_cap.value_or(default_trade_cap(spec));
  if (cap.size() != spec.horizon()) throw ModelError("trade cap length differs from horizon");
  return build_local(spec, &lambda, &cap, regularization);
}

Schedule extract_schedule(const ProsumerSpec& spec, const VarLayout& layout, const VectorXd& x) {
  const std::size_t h = layout.slots;
  Schedule s = Schedule::zeros(h);
  for (std::size_t t = 0; t < h; ++t) {
    s.p_re[t] = std::clamp(x(layout.re(t)), 0.0, spec.renewable_kw[t]);
    s.p_g[t] = std::clamp(x(layout.g(t)), 0.0, spec.grid_cap_kw);
    s.p_ac[t] = std::max(x(layout.ac(t)), 0.0);
    s.p_f[t] = std::clamp(x(layout.f(t)), spec.flex.p_min[t], spec.flex.p_max[t]);
    if (layout.trading) s.p_et[t] = std::max(x(layout.et(t)), -spec.renewable_kw[t]);
  }
  // With a free grid the renewable/grid split is not unique; prefer renewable.
  if (spec.tariff.a_g == 0.0 && spec.tariff.b_g == 0.0) {
    for (std::size_t t = 0; t < h; ++t) {
      const double shift = std::min(s.p_g[t], spec.renewable_kw[t] - s.p_re[t]);
      if (shift > 0.0) {
        s.p_g[t] -= shift;
        s.p_re[t] += shift;
      }
    }
  }
  s.t_in = unroll_temperature(spec.hvac, spec.outdoor_temp_c, s.p_ac);
  return s;
}

LocalResult solve_ucmp(const ProsumerSpec& spec, const SolverConfig& config) {
  const QpProblem p = build_ucmp(spec, config.regularization);
  return finish(spec, VarLayout{spec.horizon(), false}, solve_qp(p, config), nullptr);
}

LocalResult solve_ilp(const ProsumerSpec& spec, const Series& lambda, const SolverConfig& config,
                      const std::optional<Series>& trade_cap) {
  const QpProblem p = build_ilp(spec, lambda, trade_cap, config.regularization);
  return finish(spec, VarLayout{spec.horizon(), true}, solve_qp(p, config), &lambda);
}

IlpSession::IlpSession(ProsumerSpec spec, Series trade_cap, SolverConfig config)
    : spec_(std::move(spec)), layout_{spec_.horizon(), true}, config_(config) {
  problem_ = build_ilp(spec_, Series(spec_.horizon(), 0.0), trade_cap, config_.regularization);
  problem_.validate(config_.check_convexity);
  // Prices enter only the linear term, so convexity holds for every call.
  config_.check_convexity = false;
}

LocalResult IlpSession::solve(const Series& lambda) {
  if (lambda.size() != layout_.slots) throw ModelError("price vector length differs from horizon");
  for (std::size_t t = 0; t < layout_.slots; ++t) problem_.c(layout_.et(t)) = lambda[t];
  QpSolution qp = solve_qp(problem_, config_, last_.empty() ? nullptr : &last_);
  if (qp.status == QpStatus::optimal) last_ = qp.active;
  return finish(spec_, layout_, std::move(qp), &lambda);
}

CentralizedResult solve_ccmp_centralized(const std::vector<ProsumerSpec>& specs, const SolverConfig& config) {
  if (specs.size() < 2) throw ModelError("centralized problem needs at least two prosumers");
  const std::size_t h = specs.front().horizon();
  for (const auto& s : specs) {
    if (s.horizon() != h) throw ModelError("prosumers have inconsistent horizons");
  }
  const std::vector<Series> caps = market_trade_caps(specs);
  const Series zero_price(h, 0.0);
  const VarLayout L{h, true};
  const Index block = L.size();
  const auto N = static_cast<Index>(specs.size());
  const Index n = block * N;

  std::vector<QpProblem> locals;
  locals.reserve(specs.size());
  Index me = 0;
  Index mi = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    locals.push_back(build_ilp(specs[i], zero_price, caps[i], config.regularization));
    me += locals.back().eq_count();
    mi += locals.back().ineq_count();
  }

  QpProblem p = QpProblem::unconstrained(n);
  p.E = MatrixXd::Zero(me + static_cast<Index>(h), n);
  p.f = VectorXd::Zero(me + static_cast<Index>(h));
  p.G = MatrixXd::Zero(mi, n);
  p.h = VectorXd::Zero(mi);
  Index er = 0;
  Index ir = 0;
  for (Index i = 0; i < N; ++i) {
    const QpProblem& q = locals[static_cast<std::size_t>(i)];
    const Index off = i * block;
    const std::string prefix = specs[static_cast<std::size_t>(i)].id + ":";
    p.Q.block(off, off, block, block) = q.Q;
    p.c.segment(off, block) = q.c;
    p.offset += q.offset;
    p.lower.segment(off, block) = q.lower;
    p.upper.segment(off, block) = q.upper;
    p.E.block(er, off, q.eq_count(), block) = q.E;
    p.f.segment(er, q.eq_count()) = q.f;
    p.G.block(ir, off, q.ineq_count(), block) = q.G;
    p.h.segment(ir, q.ineq_count()) = q.h;
    for (const auto& name : q.var_names) p.var_names.push_back(prefix + name);
    for (const auto& name : q.eq_names) p.eq_names.push_back(prefix + name);
    for (const auto& name : q.ineq_names) p.ineq_names.push_back(prefix + name);
    er += q.eq_count();
    ir += q.ineq_count();
  }
  const Index clearing0 = er;
  for (std::size_t t = 0; t < h; ++t) {
    for (Index i = 0; i < N; ++i) p.E(er, i * block + L.et(t)) = 1.0;
    p.eq_names.push_back(slot_name("clearing", t));
    ++er;
  }

  QpSolution qp = solve_qp(p, config);
  if (qp.status != QpStatus::optimal) throw SolveError("centralized", qp.status, qp.diagnostic);

  CentralizedResult r;
  r.lambda_star.resize(h);
  for (std::size_t t = 0; t < h; ++t) r.lambda_star[t] = qp.eq_duals(clearing0 + static_cast<Index>(t));
  for (Index i = 0; i < N; ++i) {
    const auto& spec = specs[static_cast<std::size_t>(i)];
    const VectorXd xi = qp.x.segment(i * block, block);
    r.schedules.push_back(extract_schedule(spec, L, xi));
    r.total_cost += operating_cost(spec, r.schedules.back());
  }
  r.qp = std::move(qp);
  return r;
}

}  // namespace gridpool
