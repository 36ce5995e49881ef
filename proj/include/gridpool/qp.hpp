#pragma once

// Dense convex quadratic programming.
//
//   minimize    0.5 x'Qx + c'x + offset
//   subject to  E x  = f
//               G x <= h
//               lower <= x <= upper      (entries may be +/-inf)
//
// The solver runs ADMM operator splitting on the equilibrated problem with a
// fixed penalty and over-relaxation, and periodically tries to polish the
// iterate: it guesses the active set, solves the equality-constrained KKT
// system exactly and refines the guess primal-dual style until the KKT
// conditions hold to qp_tol. A previous active set can be passed back in to
// skip the ADMM phase entirely when it is still correct.
//
// Multiplier convention (all returned duals refer to the unscaled problem):
//   Qx + c + E'eq + G'ineq - lower_duals + upper_duals = 0,
//   ineq, lower_duals, upper_duals >= 0.

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridpool {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class QpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  double offset = 0.0;
  Eigen::MatrixXd E;
  Eigen::VectorXd f;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  // Optional labels used in infeasibility diagnostics.
  std::vector<std::string> var_names;
  std::vector<std::string> eq_names;
  std::vector<std::string> ineq_names;

  /// n variables, zero cost, no rows, unbounded.
  static QpProblem unconstrained(Eigen::Index n);

  Eigen::Index size() const { return c.size(); }
  Eigen::Index eq_count() const { return E.rows(); }
  Eigen::Index ineq_count() const { return G.rows(); }

  void add_equality(const Eigen::RowVectorXd& row, double rhs, std::string name = {});
  void add_inequality(const Eigen::RowVectorXd& row, double rhs, std::string name = {});

  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return Q * x + c; }

  /// Throws QpError on inconsistent dimensions, asymmetric Q, lower > upper,
  /// or (when requested) a minimum eigenvalue of Q below -1e-8.
  void validate(bool check_convexity = true) const;
};

enum class QpStatus { optimal, max_iter, infeasible };
std::string to_string(QpStatus status);

/// -1 at lower bound, +1 at upper bound, 0 inactive. `bounds` has one entry
/// per variable, `rows` one per inequality row (only 0 / +1 are meaningful).
struct ActiveSet {
  std::vector<signed char> bounds;
  std::vector<signed char> rows;

  bool empty() const { return bounds.empty(); }
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd ineq_duals;
  Eigen::VectorXd lower_duals;
  Eigen::VectorXd upper_duals;
  double objective = 0.0;
  double kkt_residual = kInf;
  int iterations = 0;
  QpStatus status = QpStatus::max_iter;
  ActiveSet active;
  std::string diagnostic;
};

struct SolverConfig {
  double qp_tol = 1e-8;
  int max_qp_iter = 20000;
  double regularization = 1e-9;  // added to degenerate diagonal blocks by the builders
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int polish_interval = 25;
  bool check_convexity = true;

  void validate() const;
};

QpSolution solve_qp(const QpProblem& problem, const SolverConfig& config,
                    const ActiveSet* warm_start = nullptr);

/// Max of stationarity, primal infeasibility, dual infeasibility and
/// complementarity violations of `solution` for `problem`.
double kkt_residual(const QpProblem& problem, const QpSolution& solution);

}  // namespace gridpool
