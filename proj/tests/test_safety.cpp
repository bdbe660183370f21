#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "platoon/safety.hpp"
#include "platoon/verify.hpp"

using namespace platoon;

namespace {

VehicleParams nominal() { return VehicleParams{}; }

EnvelopeAssumptions box_40t() {
  EnvelopeAssumptions b;
  b.v_max_mps = 25.0;
  b.mass_lo_kg = 40e3;
  b.mass_hi_kg = 40e3;
  b.alpha_max_rad = 0.05;
  return b;
}

}  // namespace

TEST_CASE("acceleration envelope corner values") {
  const VehicleParams p = nominal();
  SUBCASE("collapsed box: braking plus rolling only") {
    EnvelopeAssumptions b;
    b.v_max_mps = 0.0;
    b.mass_lo_kg = b.mass_hi_kg = 40e3;
    b.alpha_max_rad = 0.0;
    const AccelEnvelope env = accel_envelope(p, b);
    const double expect = -0.5 * 9.81 - 3e-3 * 9.81;
    CHECK(env.a_min_lb == doctest::Approx(expect));
    CHECK(env.a_min_ub == doctest::Approx(expect));
  }
  SUBCASE("40 t box matches the hand-evaluated corners") {
    const AccelEnvelope env = accel_envelope(p, box_40t());
    // Worst braking: uphill, top speed, full drag (d = inf).
    const double lb = -(0.5 * 9.81 + 9.81 * std::sin(0.05) + 3e-3 * 9.81 +
                        0.5 * 1.225 * 10.0 * 0.6 * 625.0 / 40e3);
    CHECK(env.a_min_lb == doctest::Approx(lb).epsilon(1e-9));  // ~ -5.48
    // Weakest braking: downhill at standstill (no drag).
    const double ub = -0.5 * 9.81 + 9.81 * std::sin(0.05) - 3e-3 * 9.81;
    CHECK(env.a_min_ub == doctest::Approx(ub).epsilon(1e-9));  // ~ -4.44
  }
  SUBCASE("ordering invariants over random boxes") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> vmax(0.0, 30.0), alpha(0.0, 0.06);
    std::uniform_real_distribution<double> mlo(20e3, 40e3), span(0.0, 20e3);
    for (int trial = 0; trial < 100; ++trial) {
      EnvelopeAssumptions b;
      b.v_max_mps = vmax(rng);
      b.alpha_max_rad = alpha(rng);
      b.mass_lo_kg = mlo(rng);
      b.mass_hi_kg = b.mass_lo_kg + span(rng);
      CHECK_NOTHROW(accel_envelope(nominal(), b).validate());
    }
  }
}

TEST_CASE("safety margins follow the set definition") {
  const AccelEnvelope env = accel_envelope(nominal(), box_40t());
  SUBCASE("equal speeds and a degenerate envelope cancel stopping distances") {
    AccelEnvelope flat = env;
    flat.a_min_lb = flat.a_min_ub = -5.0;
    const SafetyMargins m =
        safety_margins({20.0, 100.0}, {20.0, 70.0}, 18.0, flat, flat);
    CHECK(m.g1_m == doctest::Approx(12.0));  // equals the gap
    CHECK(m.g2_m == doctest::Approx(12.0));
    CHECK(m.g3_mps == doctest::Approx(20.0));
    CHECK(m.g4_mps == doctest::Approx(20.0));
  }
  SUBCASE("stopped predecessor demands the follower stopping distance") {
    AccelEnvelope e = env;
    e.a_min_ub = -6.0;
    const SafetyMargins m = safety_margins({0.0, 100.0}, {20.0, 100.0 - 18.0 - 40.0},
                                           18.0, env, e);
    CHECK(m.g1_m == doctest::Approx(40.0 - 400.0 / 12.0));  // gap - 33.33
    CHECK(m.in_set());
  }
  SUBCASE("stopped follower sits on the g4 boundary, still inside") {
    const SafetyMargins m = safety_margins({10.0, 100.0}, {0.0, 50.0}, 18.0, env, env);
    CHECK(m.g4_mps == doctest::Approx(0.0));
    CHECK(m.in_set());
  }
}

TEST_CASE("min safe gap") {
  const VehicleParams p = nominal();
  const AccelEnvelope env = accel_envelope(p, box_40t());
  SUBCASE("equal speeds under a degenerate envelope need no gap") {
    AccelEnvelope tight = env;
    tight.a_min_lb = tight.a_min_ub = -5.0;
    CHECK(min_safe_gap(22.0, 22.0, tight, tight) == doctest::Approx(0.0));
  }
  SUBCASE("hand evaluation at 22 m/s") {
    AccelEnvelope ep = env, ef = env;
    ep.a_min_lb = -5.48;
    ef.a_min_ub = -4.44;
    CHECK(min_safe_gap(22.0, 22.0, ep, ef) ==
          doctest::Approx(484.0 / 8.88 - 484.0 / 10.96).epsilon(1e-3));  // ~10.35 m
  }
  SUBCASE("stationary follower is always safe") {
    CHECK(min_safe_gap(22.0, 0.0, env, env) == doctest::Approx(0.0));
  }
  SUBCASE("monotone in both speeds") {
    double prev = min_safe_gap(22.0, 0.0, env, env);
    for (double vf = 2.0; vf <= 24.0; vf += 2.0) {
      const double d = min_safe_gap(22.0, vf, env, env);
      CHECK(d >= prev);
      prev = d;
    }
    prev = min_safe_gap(0.0, 22.0, env, env);
    for (double vp = 2.0; vp <= 24.0; vp += 2.0) {
      const double d = min_safe_gap(vp, 22.0, env, env);
      CHECK(d <= prev);
      prev = d;
    }
  }
}

TEST_CASE("evasive law case split") {
  const AccelEnvelope env = accel_envelope(nominal(), box_40t());
  CHECK(evasive_law({10.0, 0.0}, env) == doctest::Approx(env.a_min_ub));
  CHECK(evasive_law({0.0, 0.0}, env) == doctest::Approx(0.0));
  CHECK(evasive_law({1e-9, 0.0}, env) == doctest::Approx(env.a_min_ub));
}

TEST_CASE("nagumo boundary conditions") {
  const VehicleParams p = nominal();
  const AccelEnvelope env = accel_envelope(p, box_40t());
  SUBCASE("g1 active: admissible predecessor inputs keep the set") {
    // Construct a state exactly on the g1 boundary.
    const double v_prev = 20.0, v_foll = 20.0;
    const double gap = min_safe_gap(v_prev, v_foll, env, env);
    const VehicleState xp{v_prev, gap + p.length_m};
    const VehicleState xf{v_foll, 0.0};
    for (double a_prev : {env.a_min_lb, 0.5 * env.a_min_lb, 0.0, 0.3})
      CHECK(nagumo_check(xp, xf, p.length_m, env, env, a_prev, 1e-9));
  }
  SUBCASE("g3 active: a stopped predecessor may only accelerate") {
    const VehicleState xp{0.0, 100.0};
    const VehicleState xf{0.0, 40.0};
    CHECK(nagumo_check(xp, xf, p.length_m, env, env, 0.0));
    CHECK(nagumo_check(xp, xf, p.length_m, env, env, 0.5));
    CHECK_THROWS_AS(nagumo_check(xp, xf, p.length_m, env, env, -1.0),
                    std::invalid_argument);
  }
  SUBCASE("g2 active with g1 satisfied: closing speed is non-negative") {
    // On the g2 boundary the ratio argument forces v_prev >= v_foll.
    const VehicleState xp{20.0, 100.0};
    const VehicleState xf{15.0, 100.0 - p.length_m};
    CHECK(nagumo_check(xp, xf, p.length_m, env, env, env.a_min_lb));
  }
  SUBCASE("state far from the boundary is a precondition error") {
    const VehicleState xp{20.0, 1000.0};
    const VehicleState xf{5.0, 0.0};
    CHECK_THROWS_AS(nagumo_check(xp, xf, p.length_m, env, env, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("randomized two-vehicle invariance (lemma embodiment)") {
  const InvarianceReport rep = verify_safety_invariance(300, 2024);
  CHECK(rep.failures == 0);
  CHECK(rep.worst_g2_m >= -1e-6);
}

TEST_CASE("randomized platoon invariance (theorem embodiment)") {
  const InvarianceReport rep = verify_platoon_invariance(100, 77);
  CHECK(rep.failures == 0);
  CHECK(rep.worst_g2_m >= -1e-6);
}
