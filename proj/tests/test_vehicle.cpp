#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "platoon/vehicle.hpp"

using namespace platoon;

namespace {
const SlopeFn kFlat = [](double) { return 0.0; };
}

TEST_CASE("drag coefficient vs gap") {
  VehicleParams p;
  CHECK(drag_coefficient(p, kInfiniteGap) == doctest::Approx(0.6));
  CHECK(drag_coefficient(p, 0.0) == doctest::Approx(0.6 * (1.0 - 4.0 / 10.0)));
  CHECK(drag_coefficient(p, p.cd2_m) == doctest::Approx(0.6 * (1.0 - 4.0 / 20.0)));
  CHECK_THROWS_AS(drag_coefficient(p, -1.0), std::domain_error);

  // Monotone non-decreasing in gap, bounded by cd0.
  double prev = drag_coefficient(p, 0.0);
  for (double d = 0.5; d < 400.0; d *= 1.7) {
    const double cd = drag_coefficient(p, d);
    CHECK(cd >= prev);
    CHECK(cd <= p.cd0);
    prev = cd;
  }
}

TEST_CASE("external forces at canonical points") {
  VehicleParams p;
  SUBCASE("standstill on the flat") {
    const ForceBreakdown f = external_forces(p, {0.0, 0.0}, kInfiniteGap, 0.0);
    CHECK(f.gravity_n == doctest::Approx(0.0));
    CHECK(f.drag_n == doctest::Approx(0.0));
    CHECK(f.rolling_n == doctest::Approx(-p.c_r * p.mass_kg * p.g_mps2));
  }
  SUBCASE("22 m/s lead vehicle") {
    const ForceBreakdown f = external_forces(p, {22.0, 0.0}, kInfiniteGap, 0.0);
    CHECK(f.rolling_n == doctest::Approx(-1177.2));
    CHECK(f.drag_n == doctest::Approx(-0.5 * 1.225 * 10.0 * 0.6 * 484.0));  // ~ -1778.9
  }
  SUBCASE("gravity on a 3% slope") {
    const ForceBreakdown f = external_forces(p, {22.0, 0.0}, kInfiniteGap, 0.03);
    CHECK(f.gravity_n == doctest::Approx(-40000.0 * 9.81 * std::sin(0.03)));  // ~ -11770.9
  }
}

TEST_CASE("input bounds") {
  VehicleParams p;
  SUBCASE("engine force from the power bound") {
    CHECK(input_bounds(p, 22.0).engine.hi_n == doctest::Approx(298e3 / 22.0));  // ~13545 N
    CHECK(input_bounds(p, 29.8).engine.hi_n == doctest::Approx(10000.0));
    CHECK(input_bounds(p, 22.0).engine.lo_n == doctest::Approx(-9e3 / 22.0));
  }
  SUBCASE("brake floor from friction") {
    const InputBounds b = input_bounds(p, 13.0);
    CHECK(b.brake.lo_n == doctest::Approx(-40000.0 * 0.5 * 9.81));  // -196200 N
    CHECK(b.brake.hi_n == doctest::Approx(0.0));
  }
  SUBCASE("standstill cap instead of a singular power bound") {
    const InputBounds b = input_bounds(p, 0.0);
    CHECK(b.engine.lo_n == doctest::Approx(0.0));
    CHECK(b.engine.hi_n == doctest::Approx(p.mass_kg * p.standstill_accel_cap_mps2));
  }
}

TEST_CASE("fuel flow") {
  VehicleParams p;
  SUBCASE("idle intercept at zero power") {
    CHECK(fuel_flow(p, 0.0, 22.0) == doctest::Approx(p.fuel_p0_g_per_s));
  }
  SUBCASE("clamped at zero near the power floor") {
    // p1*P_min + p0 = 5e-5 * -9000 + 0.3 = -0.15 < 0 -> clamp.
    CHECK(fuel_flow(p, p.p_min_w / 22.0, 22.0) == doctest::Approx(0.0));
  }
  SUBCASE("affine at 100 kW") {
    CHECK(fuel_flow(p, 100e3 / 22.0, 22.0) == doctest::Approx(5e-5 * 100e3 + 0.3));  // 5.3 g/s
  }
  SUBCASE("power outside the bounds throws") {
    CHECK_THROWS_AS(fuel_flow(p, 2.0 * p.p_max_w / 22.0, 22.0), std::domain_error);
  }
  SUBCASE("affine and non-decreasing where the clamp is inactive") {
    double prev = 0.0;
    bool first = true;
    for (double power = 10e3; power <= p.p_max_w; power += 16e3) {
      const double flow = fuel_flow(p, power / 22.0, 22.0);
      if (!first) CHECK(flow >= prev);
      prev = flow;
      first = false;
    }
  }
}

TEST_CASE("plant step") {
  VehicleParams p;
  SUBCASE("force balance holds speed and advances position") {
    const VehicleState x{22.0, 100.0};
    const ForceBreakdown ext = external_forces(p, x, kInfiniteGap, 0.0);
    const VehicleState y = step_plant(p, x, -ext.total_n(), 0.0, kInfiniteGap, kFlat, 0.05);
    CHECK(y.v_mps == doctest::Approx(22.0));
    CHECK(y.s_m == doctest::Approx(100.0 + 22.0 * 0.05));
  }
  SUBCASE("rolling-only deceleration at negligible drag") {
    const VehicleState x{0.5, 0.0};
    const VehicleState y = step_plant(p, x, 0.0, 0.0, kInfiniteGap, kFlat, 0.05);
    CHECK(y.v_mps == doctest::Approx(0.5 - p.c_r * p.g_mps2 * 0.05).epsilon(1e-3));
  }
  SUBCASE("full brake across the stop clamps at zero") {
    const VehicleState x{2.0, 0.0};
    const VehicleState y =
        step_plant(p, x, 0.0, p.brake_force_floor_n(), kInfiniteGap, kFlat, 1.0);
    CHECK(y.v_mps == 0.0);
    CHECK(y.s_m > 0.0);
    CHECK(y.s_m < 2.0);  // stopped before coasting distance
  }
  SUBCASE("no reverse from standstill under resistive forces") {
    const VehicleState y = step_plant(p, {0.0, 5.0}, 0.0, 0.0, kInfiniteGap, kFlat, 0.05);
    CHECK(y.v_mps == 0.0);
    CHECK(y.s_m == doctest::Approx(5.0));
  }
}

TEST_CASE("discrete work-energy identity is exact for the euler step") {
  VehicleParams p;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> v0(0.0, 25.0), slope(-0.05, 0.05);
  std::uniform_real_distribution<double> throttle(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    VehicleState x{v0(rng), 0.0};
    const double ke0 = 0.5 * p.mass_kg * x.v_mps * x.v_mps;
    const double a = slope(rng);
    const SlopeFn slope_fn = [a](double) { return a; };
    double work = 0.0;
    for (int k = 0; k < 40; ++k) {
      const InputBounds b = input_bounds(p, x.v_mps);
      const double fe = b.engine.lo_n + throttle(rng) * (b.engine.hi_n - b.engine.lo_n);
      const double fb = throttle(rng) < 0.2 ? 0.3 * throttle(rng) * b.brake.lo_n : 0.0;
      const StepWork w = step_plant_with_work(p, x, fe, fb, kInfiniteGap, slope_fn, 0.05);
      work += w.engine_j + w.brake_j + w.gravity_j + w.rolling_j + w.drag_j;
      x = w.next;
    }
    const double ke = 0.5 * p.mass_kg * x.v_mps * x.v_mps;
    // Work sums must match the kinetic-energy change to float precision.
    CHECK(work == doctest::Approx(ke - ke0).epsilon(1e-9).scale(1e6));
  }
}

TEST_CASE("euler step converges at first order under dt refinement") {
  VehicleParams p;
  const SlopeFn slope_fn = [](double s) { return 0.02 * std::sin(s / 200.0); };
  const auto roll = [&](double dt) {
    VehicleState x{20.0, 0.0};
    const double fe = 6000.0;
    for (double t = 0.0; t < 10.0 - 1e-12; t += dt)
      x = step_plant(p, x, fe, 0.0, kInfiniteGap, slope_fn, dt);
    return x.v_mps;
  };
  const double err1 = std::abs(roll(0.1) - roll(0.0125));
  const double err2 = std::abs(roll(0.05) - roll(0.0125));
  CHECK(err2 < err1);  // halved step shrinks the error
  CHECK(err1 < 0.05);
}

TEST_CASE("force split respects bounds and overpower flag") {
  VehicleParams p;
  SUBCASE("engine takes an in-range request") {
    const ForceSplit s = split_required_force(p, 22.0, 5000.0);
    CHECK(s.engine_n == doctest::Approx(5000.0));
    CHECK(s.brake_n == 0.0);
    CHECK(s.feasible);
  }
  SUBCASE("deficit below the engine floor goes to the brakes") {
    const ForceSplit s = split_required_force(p, 22.0, -3000.0);
    CHECK(s.engine_n == doctest::Approx(-9e3 / 22.0));
    CHECK(s.brake_n == doctest::Approx(-3000.0 - (-9e3 / 22.0)));
  }
  SUBCASE("request above max power saturates unless overpower is allowed") {
    const ForceSplit s = split_required_force(p, 22.0, 20000.0);
    CHECK_FALSE(s.feasible);
    CHECK(s.engine_n == doctest::Approx(298e3 / 22.0));
    const ForceSplit o = split_required_force(p, 22.0, 20000.0, true);
    CHECK(o.feasible);
    CHECK(o.engine_n == doctest::Approx(20000.0));
  }
}

TEST_CASE("parameter validation") {
  VehicleParams p;
  p.cd1_m = 12.0;  // would make C_D negative at small gaps
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  VehicleParams q;
  q.p_min_w = 1.0;
  CHECK_THROWS_AS(q.validate(), std::invalid_argument);
  VehicleParams ok;
  CHECK_NOTHROW(ok.validate());
}
