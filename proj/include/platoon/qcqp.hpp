#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace platoon::qcqp {

/// One sparse linear coefficient.
struct LinTerm {
  int idx = 0;
  double coef = 0.0;
};

/**
 * One inequality  0.5*w_scale*(w'x)^2 + a'x + b <= 0  with sparse a and w.
 * w_scale >= 0 keeps the constraint convex; w empty means linear.
 */
struct Constraint {
  std::vector<LinTerm> a;
  double b = 0.0;
  std::vector<LinTerm> w;
  double w_scale = 0.0;
  std::string label;

  double value(const Eigen::VectorXd& x) const;
  double w_dot(const Eigen::VectorXd& x) const;
};

/// minimize 0.5 x'Px + q'x subject to the inequality list; P positive
/// semidefinite.
struct Problem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  std::vector<Constraint> ineqs;

  double objective(const Eigen::VectorXd& x) const;
};

enum class Status { Optimal, Infeasible, MaxIterations };

struct Solution {
  Status status = Status::MaxIterations;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // one multiplier per inequality
  double objective = 0.0;
  int newton_iters = 0;
  // KKT residuals at the returned point.
  double stationarity_inf = 0.0;
  double max_violation = 0.0;  // max_i f_i(x)
  double complementarity_inf = 0.0;
  std::string message;
};

struct Options {
  double tol = 1e-8;          // duality-gap target (m/t)
  double newton_tol = 1e-11;  // Newton decrement^2 / 2 threshold
  int max_newton = 800;
  double barrier_scale = 40.0;  // t multiplier per centering stage
  double t0 = 1.0;
  double feas_margin = 1e-9;  // strict-feasibility slack for warm starts
};

/// Barrier interior-point solve. An optional initial point is used directly
/// when strictly feasible; otherwise a phase-1 problem (minimize the worst
/// violation) runs first, and Status::Infeasible is reported if it cannot
/// reach a strictly feasible point.
Solution solve(const Problem& problem, const Eigen::VectorXd* x0 = nullptr,
               const Options& opts = {});

}  // namespace platoon::qcqp
