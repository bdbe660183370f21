#include "platoon/qcqp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace platoon::qcqp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double Constraint::w_dot(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (const auto& t : w) v += t.coef * x[t.idx];
  return v;
}

double Constraint::value(const Eigen::VectorXd& x) const {
  double v = b;
  for (const auto& t : a) v += t.coef * x[t.idx];
  if (w_scale != 0.0) {
    const double wx = w_dot(x);
    v += 0.5 * w_scale * wx * wx;
  }
  return v;
}

double Problem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(P * x) + q.dot(x);
}

namespace {

// Sparse gradient of one constraint at x, written into scratch (zeroed on
// the support before/after use).
struct SparseGrad {
  std::vector<int> support;
  std::vector<double> vals;

  void compute(const Constraint& c, const Eigen::VectorXd& x, std::vector<double>& dense) {
    support.clear();
    vals.clear();
    for (const auto& t : c.a) {
      if (dense[t.idx] == 0.0) support.push_back(t.idx);
      dense[t.idx] += t.coef;
    }
    if (c.w_scale != 0.0) {
      const double s = c.w_scale * c.w_dot(x);
      for (const auto& t : c.w) {
        if (dense[t.idx] == 0.0) support.push_back(t.idx);
        dense[t.idx] += s * t.coef;
      }
    }
    vals.reserve(support.size());
    for (int i : support) {
      vals.push_back(dense[i]);
      dense[i] = 0.0;
    }
  }
};

double barrier_value(const Problem& prob, double t, const Eigen::VectorXd& x) {
  double val = t * prob.objective(x);
  for (const auto& c : prob.ineqs) {
    const double f = c.value(x);
    if (f >= 0.0) return kInf;
    val -= std::log(-f);
  }
  return val;
}

struct BarrierWork {
  const Problem* prob = nullptr;
  double t = 1.0;
  int* iters = nullptr;
  int max_newton = 0;
  double newton_tol = 0.0;
  const std::function<bool(const Eigen::VectorXd&)>* stop_early = nullptr;
};

bool center(BarrierWork& w, Eigen::VectorXd& x) {
  const Problem& prob = *w.prob;
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd grad(n);
  std::vector<double> scratch(static_cast<std::size_t>(n), 0.0);
  SparseGrad sg;
  while (*w.iters < w.max_newton) {
    if (w.stop_early && (*w.stop_early)(x)) return true;
    hess = w.t * prob.P;
    grad = w.t * (prob.P * x + prob.q);
    for (const auto& c : prob.ineqs) {
      const double f = c.value(x);
      if (!(f < 0.0)) return false;  // left the domain, should not happen
      sg.compute(c, x, scratch);
      const double inv_f2 = 1.0 / (f * f);
      const double inv_mf = 1.0 / (-f);
      for (std::size_t p = 0; p < sg.support.size(); ++p) {
        grad[sg.support[p]] += sg.vals[p] * inv_mf;
        for (std::size_t r = 0; r <= p; ++r) {
          const double h = sg.vals[p] * sg.vals[r] * inv_f2;
          hess(sg.support[p], sg.support[r]) += h;
          if (r != p) hess(sg.support[r], sg.support[p]) += h;
        }
      }
      if (c.w_scale != 0.0) {
        const double s = c.w_scale * inv_mf;
        for (std::size_t p = 0; p < c.w.size(); ++p)
          for (std::size_t r = 0; r <= p; ++r) {
            const double h = s * c.w[p].coef * c.w[r].coef;
            hess(c.w[p].idx, c.w[r].idx) += h;
            if (r != p) hess(c.w[r].idx, c.w[p].idx) += h;
          }
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() != Eigen::Success) {
      hess.diagonal().array() += 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
      llt.compute(hess);
      if (llt.info() != Eigen::Success) return false;
    }
    const Eigen::VectorXd dx = llt.solve(-grad);
    const double decrement2 = -grad.dot(dx);
    ++(*w.iters);
    if (decrement2 / 2.0 <= w.newton_tol) return true;

    const double base = barrier_value(prob, w.t, x);
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd cand = x + alpha * dx;
      const double val = barrier_value(prob, w.t, cand);
      if (val < base - 1e-4 * alpha * decrement2) {
        x = cand;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) return true;  // step direction exhausted, numerically converged
  }
  return false;
}

bool strictly_feasible(const Problem& prob, const Eigen::VectorXd& x, double margin) {
  for (const auto& c : prob.ineqs)
    if (!(c.value(x) <= -margin)) return false;
  return true;
}

// Phase 1: minimize s subject to f_i(x) - s <= 0 over (x, s).
bool phase_one(const Problem& prob, Eigen::VectorXd& x, const Options& opts, int* iters) {
  const int n = static_cast<int>(x.size());
  Problem aux;
  aux.P = Eigen::MatrixXd::Zero(n + 1, n + 1);
  aux.P.topLeftCorner(n, n) = 1e-8 * Eigen::MatrixXd::Identity(n, n);
  aux.q = Eigen::VectorXd::Zero(n + 1);
  aux.q(n) = 1.0;
  aux.ineqs.reserve(prob.ineqs.size());
  for (const auto& c : prob.ineqs) {
    Constraint ac = c;
    ac.a.push_back({n, -1.0});
    aux.ineqs.push_back(std::move(ac));
  }

  double worst = -kInf;
  for (const auto& c : prob.ineqs) worst = std::max(worst, c.value(x));
  Eigen::VectorXd y(n + 1);
  y.head(n) = x;
  y(n) = worst + 1.0 + 0.1 * std::abs(worst);

  const double margin = 10.0 * opts.feas_margin;
  const std::function<bool(const Eigen::VectorXd&)> stop = [&](const Eigen::VectorXd& yy) {
    return strictly_feasible(prob, yy.head(n), margin);
  };

  double t = opts.t0;
  const double m = static_cast<double>(aux.ineqs.size());
  BarrierWork w;
  w.prob = &aux;
  w.iters = iters;
  w.max_newton = opts.max_newton;
  w.newton_tol = opts.newton_tol;
  w.stop_early = &stop;
  while (*iters < opts.max_newton) {
    w.t = t;
    if (!center(w, y)) break;
    if (stop(y)) {
      x = y.head(n);
      return true;
    }
    if (m / t < opts.tol) break;
    t *= opts.barrier_scale;
  }
  if (strictly_feasible(prob, y.head(n), opts.feas_margin)) {
    x = y.head(n);
    return true;
  }
  return false;
}

}  // namespace

Solution solve(const Problem& problem, const Eigen::VectorXd* x0, const Options& opts) {
  Solution sol;
  const int n = static_cast<int>(problem.q.size());
  const int m = static_cast<int>(problem.ineqs.size());
  Eigen::VectorXd x = (x0 && x0->size() == n) ? *x0 : Eigen::VectorXd::Zero(n);

  int iters = 0;
  if (!strictly_feasible(problem, x, opts.feas_margin)) {
    if (!phase_one(problem, x, opts, &iters)) {
      sol.status = Status::Infeasible;
      sol.x = x;
      sol.newton_iters = iters;
      sol.max_violation = -kInf;
      for (const auto& c : problem.ineqs)
        sol.max_violation = std::max(sol.max_violation, c.value(x));
      sol.message = "phase-1 could not reach a strictly feasible point";
      return sol;
    }
  }

  BarrierWork w;
  w.prob = &problem;
  w.iters = &iters;
  w.max_newton = opts.max_newton;
  w.newton_tol = opts.newton_tol;
  double t = opts.t0;
  bool converged = false;
  while (iters < opts.max_newton) {
    w.t = t;
    if (!center(w, x)) break;
    if (m == 0 || static_cast<double>(m) / t < opts.tol) {
      converged = true;
      break;
    }
    t *= opts.barrier_scale;
  }
  if (converged && m > 0) {
    // Polish at the final barrier parameter; quadratic convergence drives
    // the stationarity residual toward machine precision.
    BarrierWork polish = w;
    polish.newton_tol = 1e-20;
    polish.max_newton = iters + 12;
    center(polish, x);
  }

  sol.x = x;
  sol.newton_iters = iters;
  sol.objective = problem.objective(x);
  sol.lambda.resize(m);
  sol.max_violation = m == 0 ? 0.0 : -kInf;

  const auto gradient_of = [&](int i) {
    const Constraint& c = problem.ineqs[static_cast<std::size_t>(i)];
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    for (const auto& term : c.a) g[term.idx] += term.coef;
    if (c.w_scale != 0.0) {
      const double s = c.w_scale * c.w_dot(x);
      for (const auto& term : c.w) g[term.idx] += s * term.coef;
    }
    return g;
  };

  std::vector<int> active;
  double lam_max = 0.0;
  for (int i = 0; i < m; ++i) {
    const double f = problem.ineqs[static_cast<std::size_t>(i)].value(x);
    sol.lambda(i) = f < 0.0 && t > 0.0 ? 1.0 / (-t * f) : 0.0;
    lam_max = std::max(lam_max, sol.lambda(i));
    sol.max_violation = std::max(sol.max_violation, f);
  }
  for (int i = 0; i < m; ++i)
    if (sol.lambda(i) > 1e-6 * lam_max) active.push_back(i);

  // Least-squares dual polish on the active set: the barrier multipliers sit
  // at the conditioning floor, the projected ones certify the point sharply.
  if (!active.empty()) {
    Eigen::MatrixXd g_act(n, static_cast<int>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k)
      g_act.col(static_cast<int>(k)) = gradient_of(active[k]);
    const Eigen::VectorXd r0 = problem.P * x + problem.q;
    Eigen::MatrixXd gtg = g_act.transpose() * g_act;
    gtg.diagonal().array() += 1e-12 * (1.0 + gtg.diagonal().maxCoeff());
    const Eigen::VectorXd y = gtg.ldlt().solve(-g_act.transpose() * r0);
    bool ok = true;
    for (int k = 0; k < y.size(); ++k)
      if (y(k) < -1e-9) ok = false;
    if (ok)
      for (std::size_t k = 0; k < active.size(); ++k)
        sol.lambda(active[k]) = std::max(y(static_cast<int>(k)), 0.0);
  }

  Eigen::VectorXd station = problem.P * x + problem.q;
  for (int i = 0; i < m; ++i) {
    const Constraint& c = problem.ineqs[static_cast<std::size_t>(i)];
    const double f = c.value(x);
    const double lam = sol.lambda(i);
    for (const auto& term : c.a) station[term.idx] += lam * term.coef;
    if (c.w_scale != 0.0) {
      const double s = lam * c.w_scale * c.w_dot(x);
      for (const auto& term : c.w) station[term.idx] += s * term.coef;
    }
    sol.complementarity_inf = std::max(sol.complementarity_inf, std::abs(lam * f));
  }
  sol.stationarity_inf = station.size() ? station.cwiseAbs().maxCoeff() : 0.0;
  sol.status = converged ? Status::Optimal : Status::MaxIterations;
  if (!converged) sol.message = "Newton iteration budget exhausted";
  return sol;
}

}  // namespace platoon::qcqp
