#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <random>

#include "platoon/qcqp.hpp"

using namespace platoon;

namespace {

qcqp::Constraint linear(std::vector<qcqp::LinTerm> a, double b, std::string label = "") {
  qcqp::Constraint c;
  c.a = std::move(a);
  c.b = b;
  c.label = std::move(label);
  return c;
}

}  // namespace

TEST_CASE("unconstrained quadratic reaches the analytic minimum") {
  qcqp::Problem prob;
  prob.P = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  prob.q = Eigen::VectorXd::Constant(2, -2.0);
  const qcqp::Solution sol = qcqp::solve(prob);
  CHECK(sol.status == qcqp::Status::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("active box constraint binds with a positive multiplier") {
  qcqp::Problem prob;
  prob.P = Eigen::MatrixXd::Identity(1, 1) * 2.0;
  prob.q = Eigen::VectorXd::Constant(1, -10.0);  // unconstrained min at 5
  prob.ineqs.push_back(linear({{0, 1.0}}, -2.0, "x<=2"));
  const qcqp::Solution sol = qcqp::solve(prob);
  CHECK(sol.status == qcqp::Status::Optimal);
  CHECK(sol.x[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(sol.lambda[0] > 1.0);
  CHECK(sol.stationarity_inf < 1e-5);
}

TEST_CASE("rank-one quadratic constraint binds at its boundary") {
  // minimize (x-3)^2 + (y-4)^2 subject to x^2 <= 1: optimum (1, 4).
  qcqp::Problem prob;
  prob.P = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  prob.q = Eigen::VectorXd(2);
  prob.q << -6.0, -8.0;
  qcqp::Constraint cx;
  cx.w = {{0, 1.0}};
  cx.w_scale = 2.0;
  cx.b = -1.0;
  prob.ineqs.push_back(cx);
  const qcqp::Solution sol = qcqp::solve(prob);
  CHECK(sol.status == qcqp::Status::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(sol.x[1] == doctest::Approx(4.0).epsilon(1e-4));
}

TEST_CASE("infeasible constraint set is reported") {
  qcqp::Problem prob;
  prob.P = Eigen::MatrixXd::Identity(1, 1);
  prob.q = Eigen::VectorXd::Zero(1);
  prob.ineqs.push_back(linear({{0, 1.0}}, -1.0, "x<=1"));
  prob.ineqs.push_back(linear({{0, -1.0}}, 2.0, "x>=2"));
  const qcqp::Solution sol = qcqp::solve(prob);
  CHECK(sol.status == qcqp::Status::Infeasible);
}

TEST_CASE("random feasible instances satisfy the kkt contract") {
  std::mt19937 rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + trial % 5;
    Eigen::MatrixXd root = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return gauss(rng); });
    qcqp::Problem prob;
    prob.P = root.transpose() * root + 0.2 * Eigen::MatrixXd::Identity(n, n);
    prob.q = Eigen::VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });
    // Box around the origin plus a couple of rank-1 quadratic cuts; the
    // origin is strictly feasible by construction.
    for (int i = 0; i < n; ++i) {
      prob.ineqs.push_back(linear({{i, 1.0}}, -1.5));
      prob.ineqs.push_back(linear({{i, -1.0}}, -1.5));
    }
    for (int c = 0; c < 2; ++c) {
      qcqp::Constraint qc;
      for (int i = 0; i < n; ++i) qc.w.push_back({i, gauss(rng)});
      qc.w_scale = unit(rng);
      qc.b = -unit(rng) - 0.1;
      prob.ineqs.push_back(qc);
    }
    qcqp::Options opts;
    opts.tol = 1e-8;
    opts.max_newton = 2000;
    const qcqp::Solution sol = qcqp::solve(prob, nullptr, opts);
    REQUIRE(sol.status == qcqp::Status::Optimal);
    CHECK(sol.max_violation <= 1e-8);
    // Stationarity sits at the barrier's conditioning floor, a few orders
    // above the duality gap; the objective check below is the sharp one.
    CHECK(sol.stationarity_inf <= 1e-4);
    CHECK(sol.complementarity_inf <= 1e-6);

    // Independent reference: a much tighter solve of the same instance.
    qcqp::Options tight = opts;
    tight.tol = 1e-12;
    tight.barrier_scale = 12.0;
    tight.max_newton = 4000;
    const qcqp::Solution ref = qcqp::solve(prob, nullptr, tight);
    REQUIRE(ref.status == qcqp::Status::Optimal);
    CHECK(sol.objective ==
          doctest::Approx(ref.objective).epsilon(1e-7).scale(std::abs(ref.objective) + 1.0));
  }
}

TEST_CASE("warm start from a strictly feasible point skips phase one") {
  qcqp::Problem prob;
  prob.P = Eigen::MatrixXd::Identity(2, 2);
  prob.q = Eigen::VectorXd::Constant(2, 1.0);
  prob.ineqs.push_back(linear({{0, 1.0}, {1, 1.0}}, -4.0));
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  const qcqp::Solution sol = qcqp::solve(prob, &x0);
  CHECK(sol.status == qcqp::Status::Optimal);
  CHECK(sol.x[0] == doctest::Approx(-1.0).epsilon(1e-5));
}
