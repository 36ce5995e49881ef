#include "gridpool/qp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

namespace gridpool {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

QpProblem QpProblem::unconstrained(Index n) {
  QpProblem p;
  p.Q = MatrixXd::Zero(n, n);
  p.c = VectorXd::Zero(n);
  p.E = MatrixXd::Zero(0, n);
  p.f = VectorXd::Zero(0);
  p.G = MatrixXd::Zero(0, n);
  p.h = VectorXd::Zero(0);
  p.lower = VectorXd::Constant(n, -kInf);
  p.upper = VectorXd::Constant(n, kInf);
  return p;
}

namespace {

void append_row(MatrixXd& m, VectorXd& rhs, const Eigen::RowVectorXd& row, double value) {
  const Index r = m.rows();
  m.conservativeResize(r + 1, m.cols());
  m.row(r) = row;
  rhs.conservativeResize(r + 1);
  rhs(r) = value;
}

}  // namespace

void QpProblem::add_equality(const Eigen::RowVectorXd& row, double rhs, std::string name) {
  append_row(E, f, row, rhs);
  if (!name.empty() || !eq_names.empty()) {
    eq_names.resize(static_cast<std::size_t>(E.rows()) - 1);
    eq_names.push_back(std::move(name));
  }
}

void QpProblem::add_inequality(const Eigen::RowVectorXd& row, double rhs, std::string name) {
  append_row(G, h, row, rhs);
  if (!name.empty() || !ineq_names.empty()) {
    ineq_names.resize(static_cast<std::size_t>(G.rows()) - 1);
    ineq_names.push_back(std::move(name));
  }
}

double QpProblem::objective(const VectorXd& x) const {
  return 0.5 * x.dot(Q * x) + c.dot(x) + offset;
}

void QpProblem::validate(bool check_convexity) const {
  const Index n = size();
  if (n < 1) throw QpError("QP needs at least one variable");
  if (Q.rows() != n || Q.cols() != n) throw QpError("Q must be n x n");
  if (E.cols() != n || f.size() != E.rows()) throw QpError("equality block has wrong shape");
  if (G.cols() != n || h.size() != G.rows()) throw QpError("inequality block has wrong shape");
  if (lower.size() != n || upper.size() != n) throw QpError("bounds must have length n");
  if (!Q.allFinite() || !c.allFinite() || !E.allFinite() || !f.allFinite() || !G.allFinite()) {
    throw QpError("QP data must be finite");
  }
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw QpError("Q is not symmetric");
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) > upper(j)) {
      throw QpError("bounds violate lower <= upper at variable " + std::to_string(j));
    }
  }
  if (check_convexity) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Q, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8) throw QpError("Q is not positive semidefinite");
  }
}

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (!(qp_tol > 0.0) || max_qp_iter < 1 || !(regularization > 0.0) || !(rho > 0.0) ||
      !(sigma > 0.0) || !(alpha > 0.0 && alpha < 2.0) || polish_interval < 1) {
    throw QpError("solver configuration values must be positive (alpha in (0, 2))");
  }
}

double kkt_residual(const QpProblem& p, const QpSolution& s) {
  const VectorXd& x = s.x;
  double r = 0.0;
  const VectorXd stat = p.Q * x + p.c + p.E.transpose() * s.eq_duals +
                        p.G.transpose() * s.ineq_duals - s.lower_duals + s.upper_duals;
  if (stat.size() > 0) r = std::max(r, stat.cwiseAbs().maxCoeff());
  if (p.E.rows() > 0) r = std::max(r, (p.E * x - p.f).cwiseAbs().maxCoeff());
  if (p.G.rows() > 0) {
    const VectorXd slack = p.h - p.G * x;
    for (Index k = 0; k < slack.size(); ++k) {
      r = std::max(r, -slack(k));
      r = std::max(r, -s.ineq_duals(k));
      r = std::max(r, std::abs(s.ineq_duals(k) * slack(k)));
    }
  }
  for (Index j = 0; j < x.size(); ++j) {
    r = std::max(r, p.lower(j) - x(j));
    r = std::max(r, x(j) - p.upper(j));
    r = std::max(r, -s.lower_duals(j));
    r = std::max(r, -s.upper_duals(j));
    const double zl = s.lower_duals(j);
    const double zu = s.upper_duals(j);
    r = std::max(r, std::isfinite(p.lower(j)) ? std::abs(zl * (x(j) - p.lower(j))) : std::abs(zl));
    r = std::max(r, std::isfinite(p.upper(j)) ? std::abs(zu * (p.upper(j) - x(j))) : std::abs(zu));
  }
  return r;
}

namespace {

// Fills duals from a stacked multiplier y = [bounds; eq; ineq] in the
// "y < 0 lower active, y > 0 upper active" sign convention.
QpSolution make_solution(const QpProblem& p, const VectorXd& x, const VectorXd& y) {
  const Index n = p.size();
  const Index me = p.eq_count();
  const Index mi = p.ineq_count();
  QpSolution s;
  s.x = x;
  s.lower_duals = (-y.head(n)).cwiseMax(0.0);
  s.upper_duals = y.head(n).cwiseMax(0.0);
  s.eq_duals = y.segment(n, me);
  s.ineq_duals = y.tail(mi);
  s.objective = p.objective(x);
  s.kkt_residual = kkt_residual(p, s);
  return s;
}

ActiveSet empty_active_set(const QpProblem& p) {
  return ActiveSet{std::vector<signed char>(static_cast<std::size_t>(p.size()), 0),
                   std::vector<signed char>(static_cast<std::size_t>(p.ineq_count()), 0)};
}

// Equality-constrained solve on a fixed active set followed by
// primal-dual updates of the set. Returns a certified solution or nothing.
std::optional<QpSolution> polish(const QpProblem& p, ActiveSet active, const SolverConfig& cfg) {
  const Index n = p.size();
  const Index me = p.eq_count();
  const Index mi = p.ineq_count();
  const double tol = cfg.qp_tol;
  constexpr int kMaxSweeps = 40;
  constexpr int kRefineSteps = 8;

  std::set<std::pair<std::vector<signed char>, std::vector<signed char>>> seen;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (!seen.emplace(active.bounds, active.rows).second) return std::nullopt;

    VectorXd x = VectorXd::Zero(n);
    std::vector<Index> free_vars;
    for (Index j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (p.lower(j) == p.upper(j)) {
        active.bounds[ju] = -1;
        x(j) = p.lower(j);
      } else if (active.bounds[ju] < 0 && std::isfinite(p.lower(j))) {
        x(j) = p.lower(j);
      } else if (active.bounds[ju] > 0 && std::isfinite(p.upper(j))) {
        x(j) = p.upper(j);
      } else {
        active.bounds[ju] = 0;
        free_vars.push_back(j);
      }
    }
    std::vector<Index> rows;  // indices into G
    for (Index k = 0; k < mi; ++k) {
      if (active.rows[static_cast<std::size_t>(k)] > 0) rows.push_back(k);
    }

    const auto nf = static_cast<Index>(free_vars.size());
    const Index mr = me + static_cast<Index>(rows.size());
    const Index dim = nf + mr;

    VectorXd y_eq = VectorXd::Zero(me);
    VectorXd y_in = VectorXd::Zero(mi);
    if (dim > 0) {
      MatrixXd K = MatrixXd::Zero(dim, dim);
      VectorXd rhs = VectorXd::Zero(dim);
      const VectorXd qx = p.Q * x;  // contribution of fixed variables
      for (Index a = 0; a < nf; ++a) {
        for (Index b = 0; b < nf; ++b) K(a, b) = p.Q(free_vars[a], free_vars[b]);
        rhs(a) = -p.c(free_vars[a]) - qx(free_vars[a]);
      }
      const auto row_of = [&](Index r) -> Eigen::RowVectorXd {
        return r < me ? Eigen::RowVectorXd(p.E.row(r)) : Eigen::RowVectorXd(p.G.row(rows[r - me]));
      };
      for (Index r = 0; r < mr; ++r) {
        const Eigen::RowVectorXd arow = row_of(r);
        const double target = r < me ? p.f(r) : p.h(rows[r - me]);
        for (Index a = 0; a < nf; ++a) {
          K(nf + r, a) = arow(free_vars[a]);
          K(a, nf + r) = arow(free_vars[a]);
        }
        rhs(nf + r) = target - arow.dot(x);
      }
      const double delta = 1e-9 * std::max(1.0, K.cwiseAbs().maxCoeff());
      MatrixXd Kreg = K;
      for (Index a = 0; a < nf; ++a) Kreg(a, a) += delta;
      for (Index r = 0; r < mr; ++r) Kreg(nf + r, nf + r) -= delta;
      const Eigen::PartialPivLU<MatrixXd> lu(Kreg);
      VectorXd sol = lu.solve(rhs);
      for (int it = 0; it < kRefineSteps; ++it) {
        const VectorXd res = rhs - K * sol;
        if (res.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) break;
        sol += lu.solve(res);
      }
      if (!sol.allFinite()) return std::nullopt;
      for (Index a = 0; a < nf; ++a) x(free_vars[a]) = sol(a);
      for (Index r = 0; r < mr; ++r) {
        if (r < me) y_eq(r) = sol(nf + r);
        else y_in(rows[r - me]) = sol(nf + r);
      }
    }

    // Bound multipliers of fixed variables absorb the remaining gradient.
    const VectorXd g = p.Q * x + p.c + p.E.transpose() * y_eq + p.G.transpose() * y_in;
    VectorXd y = VectorXd::Zero(n + me + mi);
    for (Index j = 0; j < n; ++j) {
      if (active.bounds[static_cast<std::size_t>(j)] != 0) y(j) = -g(j);
    }
    y.segment(n, me) = y_eq;
    y.tail(mi) = y_in;

    bool changed = false;
    for (Index j = 0; j < n; ++j) {
      auto& state = active.bounds[static_cast<std::size_t>(j)];
      if (p.lower(j) == p.upper(j)) continue;
      if (state < 0 && y(j) > tol) {
        state = 0;
        changed = true;
      } else if (state > 0 && y(j) < -tol) {
        state = 0;
        changed = true;
      } else if (state == 0 && x(j) < p.lower(j) - tol) {
        state = -1;
        changed = true;
      } else if (state == 0 && x(j) > p.upper(j) + tol) {
        state = 1;
        changed = true;
      }
    }
    if (mi > 0) {
      const VectorXd gx = p.G * x;
      for (Index k = 0; k < mi; ++k) {
        auto& state = active.rows[static_cast<std::size_t>(k)];
        if (state > 0 && y_in(k) < -tol) {
          state = 0;
          changed = true;
        } else if (state == 0 && gx(k) > p.h(k) + tol) {
          state = 1;
          changed = true;
        }
      }
    }
    if (changed) continue;

    QpSolution s = make_solution(p, x, y);
    if (s.kkt_residual <= tol) {
      s.status = QpStatus::optimal;
      s.active = active;
      return s;
    }
    return std::nullopt;
  }
  return std::nullopt;
}

struct Scaling {
  VectorXd var;   // x = var .* x_hat
  VectorXd row;   // row scaling of the stacked constraint matrix
  double cost = 1.0;
};

// Ruiz equilibration of [Q A'; A 0] followed by a scalar cost scaling.
Scaling equilibrate(MatrixXd& Q, VectorXd& c, MatrixXd& A) {
  const Index n = Q.rows();
  const Index m = A.rows();
  Scaling s{VectorXd::Ones(n), VectorXd::Ones(m), 1.0};
  const auto clamp = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int it = 0; it < 15; ++it) {
    VectorXd dv(n);
    VectorXd dr(m);
    for (Index j = 0; j < n; ++j) {
      double norm = Q.col(j).cwiseAbs().maxCoeff();
      if (m > 0) norm = std::max(norm, A.col(j).cwiseAbs().maxCoeff());
      dv(j) = norm > 1e-12 ? clamp(1.0 / std::sqrt(norm)) : 1.0;
    }
    for (Index k = 0; k < m; ++k) {
      const double norm = A.row(k).cwiseAbs().maxCoeff();
      dr(k) = norm > 1e-12 ? clamp(1.0 / std::sqrt(norm)) : 1.0;
    }
    Q = dv.asDiagonal() * Q * dv.asDiagonal();
    c = dv.asDiagonal() * c;
    A = dr.asDiagonal() * A * dv.asDiagonal();
    s.var = s.var.cwiseProduct(dv);
    s.row = s.row.cwiseProduct(dr);
  }
  double qnorm = 0.0;
  for (Index j = 0; j < n; ++j) qnorm += Q.col(j).cwiseAbs().maxCoeff();
  qnorm /= static_cast<double>(std::max<Index>(n, 1));
  const double cnorm = c.size() > 0 ? c.cwiseAbs().maxCoeff() : 0.0;
  const double mag = std::max(qnorm, cnorm);
  s.cost = mag > 1e-12 ? clamp(1.0 / mag) : 1.0;
  Q *= s.cost;
  c *= s.cost;
  return s;
}

// Names the most violated general row at x clamped into the bounds; falls
// back to the bounds themselves when every row holds.
std::string worst_violation(const QpProblem& p, const VectorXd& x_raw) {
  const VectorXd x = x_raw.cwiseMax(p.lower).cwiseMin(p.upper);
  double worst = 0.0;
  std::string name = "none";
  const auto label = [](const std::vector<std::string>& names, Index i, const char* kind) {
    const auto iu = static_cast<std::size_t>(i);
    return iu < names.size() && !names[iu].empty() ? names[iu]
                                                   : std::string(kind) + "[" + std::to_string(i) + "]";
  };
  for (Index k = 0; k < p.eq_count(); ++k) {
    const double v = std::abs(p.E.row(k).dot(x) - p.f(k));
    if (v > worst) {
      worst = v;
      name = label(p.eq_names, k, "eq");
    }
  }
  for (Index k = 0; k < p.ineq_count(); ++k) {
    const double v = p.G.row(k).dot(x) - p.h(k);
    if (v > worst) {
      worst = v;
      name = label(p.ineq_names, k, "ineq");
    }
  }
  if (worst == 0.0) {
    for (Index j = 0; j < p.size(); ++j) {
      const double v = std::max(p.lower(j) - x_raw(j), x_raw(j) - p.upper(j));
      if (v > worst) {
        worst = v;
        name = label(p.var_names, j, "bound");
      }
    }
  }
  std::ostringstream os;
  os << "worst violated constraint: " << name << " by " << worst;
  return os.str();
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem, const SolverConfig& cfg, const ActiveSet* warm_start) {
  problem.validate(cfg.check_convexity);
  cfg.validate();

  const Index n = problem.size();
  const Index me = problem.eq_count();
  const Index mi = problem.ineq_count();
  const Index m = n + me + mi;

  if (warm_start && static_cast<Index>(warm_start->bounds.size()) == n &&
      static_cast<Index>(warm_start->rows.size()) == mi) {
    if (auto s = polish(problem, *warm_start, cfg)) return *s;
  }

  // Stacked constraints l <= A x <= u with A = [I; E; G].
  MatrixXd A(m, n);
  A << MatrixXd::Identity(n, n), problem.E, problem.G;
  VectorXd l(m);
  VectorXd u(m);
  l << problem.lower, problem.f, VectorXd::Constant(mi, -kInf);
  u << problem.upper, problem.f, problem.h;

  MatrixXd Q = problem.Q;
  VectorXd c = problem.c;
  const Scaling sc = equilibrate(Q, c, A);
  const VectorXd ls = sc.row.cwiseProduct(l);
  const VectorXd us = sc.row.cwiseProduct(u);

  VectorXd rho(m);
  for (Index k = 0; k < m; ++k) {
    if (l(k) == u(k)) rho(k) = 1e3 * cfg.rho;
    else if (!std::isfinite(l(k)) && !std::isfinite(u(k))) rho(k) = 1e-6;
    else rho(k) = cfg.rho;
  }
  MatrixXd K = Q + A.transpose() * rho.asDiagonal() * A;
  K.diagonal().array() += cfg.sigma;
  const Eigen::LLT<MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw QpError("ADMM system matrix is not positive definite");

  VectorXd x = VectorXd::Zero(n);
  VectorXd z = VectorXd::Zero(m).cwiseMax(ls).cwiseMin(us);
  VectorXd y = VectorXd::Zero(m);
  VectorXd y_check = y;

  const auto unscaled_x = [&](const VectorXd& xs) { return VectorXd(sc.var.cwiseProduct(xs)); };
  const auto unscaled_y = [&](const VectorXd& ys) { return VectorXd(sc.row.cwiseProduct(ys) / sc.cost); };

  const auto guess_active = [&]() {
    ActiveSet act = empty_active_set(problem);
    for (Index k = 0; k < m; ++k) {
      signed char state = 0;
      if (z(k) - ls(k) < -y(k)) state = -1;
      else if (us(k) - z(k) < y(k)) state = 1;
      if (k < n) act.bounds[static_cast<std::size_t>(k)] = state;
      else if (k >= n + me) act.rows[static_cast<std::size_t>(k - n - me)] = state > 0 ? 1 : 0;
    }
    return act;
  };

  constexpr double kEpsAbs = 1e-7;
  constexpr double kEpsRel = 1e-7;
  constexpr double kEpsInfeasible = 1e-7;
  constexpr int kCheckInterval = 5;

  const double alpha = cfg.alpha;
  for (int iter = 1; iter <= cfg.max_qp_iter; ++iter) {
    const VectorXd rhs = cfg.sigma * x - c + A.transpose() * (rho.cwiseProduct(z) - y);
    const VectorXd x_tilde = llt.solve(rhs);
    const VectorXd z_tilde = A * x_tilde;
    x = alpha * x_tilde + (1.0 - alpha) * x;
    const VectorXd z_relaxed = alpha * z_tilde + (1.0 - alpha) * z;
    const VectorXd z_next = (z_relaxed + y.cwiseQuotient(rho)).cwiseMax(ls).cwiseMin(us);
    y += rho.cwiseProduct(z_relaxed - z_next);
    z = z_next;

    if (iter % cfg.polish_interval == 0) {
      if (auto s = polish(problem, guess_active(), cfg)) {
        s->iterations = iter;
        return *s;
      }
    }

    if (iter % kCheckInterval != 0) continue;

    // Primal infeasibility certificate on the change in y.
    const VectorXd dy = y - y_check;
    y_check = y;
    const double dy_norm = dy.cwiseAbs().maxCoeff();
    if (dy_norm > 1e-12) {
      const double at_dy = (A.transpose() * dy).cwiseAbs().maxCoeff();
      double support = 0.0;
      for (Index k = 0; k < m; ++k) {
        if (dy(k) > 0) support += std::isfinite(us(k)) ? us(k) * dy(k) : kInf;
        else if (dy(k) < 0) support += std::isfinite(ls(k)) ? ls(k) * dy(k) : kInf;
      }
      if (at_dy <= kEpsInfeasible * dy_norm && support < -kEpsInfeasible * dy_norm) {
        QpSolution s = make_solution(problem, unscaled_x(x), unscaled_y(y));
        s.status = QpStatus::infeasible;
        s.iterations = iter;
        s.active = guess_active();
        s.diagnostic = "primal infeasible; " + worst_violation(problem, s.x);
        return s;
      }
    }

    const VectorXd xu = unscaled_x(x);
    const VectorXd ax = A * x;
    const double prim = (ax - z).cwiseQuotient(sc.row).cwiseAbs().maxCoeff();
    const VectorXd grad = Q * x + c + A.transpose() * y;
    const double dual = (grad.cwiseQuotient(sc.var) / sc.cost).cwiseAbs().maxCoeff();
    const double prim_scale = std::max(ax.cwiseQuotient(sc.row).cwiseAbs().maxCoeff(),
                                       z.cwiseQuotient(sc.row).cwiseAbs().maxCoeff());
    const double dual_scale = std::max({(Q * x).cwiseQuotient(sc.var).cwiseAbs().maxCoeff(),
                                        c.cwiseQuotient(sc.var).cwiseAbs().maxCoeff(),
                                        (A.transpose() * y).cwiseQuotient(sc.var).cwiseAbs().maxCoeff()}) /
                              sc.cost;
    if (prim <= kEpsAbs + kEpsRel * prim_scale && dual <= kEpsAbs + kEpsRel * dual_scale) {
      if (auto s = polish(problem, guess_active(), cfg)) {
        s->iterations = iter;
        return *s;
      }
      QpSolution s = make_solution(problem, xu, unscaled_y(y));
      s.iterations = iter;
      s.active = guess_active();
      s.status = s.kkt_residual <= cfg.qp_tol ? QpStatus::optimal : QpStatus::max_iter;
      if (s.status == QpStatus::optimal) return s;
    }
  }

  QpSolution s = make_solution(problem, unscaled_x(x), unscaled_y(y));
  s.iterations = cfg.max_qp_iter;
  s.active = guess_active();
  s.status = s.kkt_residual <= cfg.qp_tol ? QpStatus::optimal : QpStatus::max_iter;
  if (s.status != QpStatus::optimal) {
    std::ostringstream os;
    os << "iteration budget exhausted with KKT residual " << s.kkt_residual << "; "
       << worst_violation(problem, s.x);
    s.diagnostic = os.str();
  }
  return s;
}

}  // namespace gridpool
