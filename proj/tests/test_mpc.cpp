#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "platoon/mpc.hpp"

using namespace platoon;

namespace {

SpeedProfile constant_profile(double length, double v) {
  SpeedProfile prof;
  prof.ds_m = length;
  prof.grid_m = {0.0, length};
  prof.v_mps = {v, v};
  return prof;
}

MpcConfig cfg_default() {
  MpcConfig cfg;
  return cfg;
}

EnvelopeAssumptions flat_box() {
  EnvelopeAssumptions b;
  b.v_max_mps = 25.0;
  b.mass_lo_kg = 40e3;
  b.mass_hi_kg = 40e3;
  b.alpha_max_rad = 0.02;
  return b;
}

HorizonTrajectory coast_assumed(const VehicleParams& p, const RoadProfile& road,
                                const VehicleState& x, std::int64_t tick,
                                const MpcConfig& cfg) {
  return build_assumed(std::nullopt, x, tick, cfg, [&](const VehicleState& s) {
    return coasting_accel(p, s, kInfiniteGap, road.slope_at(std::clamp(s.s_m, 0.0, road.length_m())));
  });
}

// Steady-cruise assumed trajectory: constant speed from the given state.
HorizonTrajectory cruise_assumed(const VehicleState& x, std::int64_t tick,
                                 const MpcConfig& cfg) {
  HorizonTrajectory out;
  out.kind = TrajectoryKind::Assumed;
  out.first_step = tick;
  VehicleState s = x;
  for (int j = 0; j < cfg.horizon; ++j) {
    out.states.push_back(s);
    out.accel_mps2.push_back(0.0);
    s.s_m += cfg.dt_s * s.v_mps;
  }
  return out;
}

}  // namespace

TEST_CASE("reference recursion") {
  const MpcConfig cfg = cfg_default();
  SUBCASE("constant profile gives an arithmetic position progression") {
    const SpeedProfile prof = constant_profile(5000.0, 21.0);
    const HorizonTrajectory ref = build_reference(prof, 100.0, 7, cfg);
    CHECK(ref.first_step == 7);
    CHECK_FALSE(ref.truncated);
    for (int j = 0; j < cfg.horizon; ++j) {
      CHECK(ref.states[j].v_mps == doctest::Approx(21.0));
      CHECK(ref.states[j].s_m == doctest::Approx(100.0 + 21.0 * cfg.dt_s * j));
      CHECK(ref.accel_mps2[j] == doctest::Approx(0.0));
    }
  }
  SUBCASE("linear-in-space profile follows the recursion") {
    SpeedProfile prof;
    prof.ds_m = 1000.0;
    prof.grid_m = {0.0, 1000.0};
    prof.v_mps = {20.0, 22.0};  // v(s) = 20 + 0.002 s
    const HorizonTrajectory ref = build_reference(prof, 0.0, 0, cfg);
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
      CHECK(ref.states[j].s_m == doctest::Approx(s));
      CHECK(ref.states[j].v_mps == doctest::Approx(20.0 + 0.002 * s));
      s += cfg.dt_s * (20.0 + 0.002 * s);
    }
    CHECK(ref.accel_mps2[0] ==
          doctest::Approx((ref.states[1].v_mps - ref.states[0].v_mps) / cfg.dt_s));
  }
  SUBCASE("horizon beyond the profile end extends and flags") {
    const SpeedProfile prof = constant_profile(100.0, 20.0);
    const HorizonTrajectory ref = build_reference(prof, 95.0, 0, cfg);
    CHECK(ref.truncated);
    CHECK(ref.states.back().v_mps == doctest::Approx(20.0));
  }
}

TEST_CASE("assumed trajectory policies") {
  const MpcConfig cfg = cfg_default();
  const VehicleParams p{};
  const RoadProfile road = synth_flat(4000.0);
  SUBCASE("first tick coasts from the measured state") {
    const VehicleState x{22.0, 50.0};
    const HorizonTrajectory a = coast_assumed(p, road, x, 0, cfg);
    CHECK(a.states[0].v_mps == doctest::Approx(22.0));
    // Coasting on the flat decays the speed slowly.
    CHECK(a.states.back().v_mps < 22.0);
    CHECK(a.states.back().v_mps > 21.0);
  }
  SUBCASE("shift of the previous optimal with a held last input") {
    HorizonTrajectory opt;
    opt.kind = TrajectoryKind::Optimal;
    opt.first_step = 4;
    VehicleState s{20.0, 0.0};
    for (int j = 0; j < cfg.horizon; ++j) {
      opt.states.push_back(s);
      opt.accel_mps2.push_back(0.1);
      s = {s.v_mps + cfg.dt_s * 0.1, s.s_m + cfg.dt_s * s.v_mps};
    }
    const HorizonTrajectory a = build_assumed(opt, {20.0, 0.0}, 5, cfg, nullptr);
    CHECK(a.first_step == 5);
    CHECK(a.states[0].v_mps == doctest::Approx(opt.states[1].v_mps));
    CHECK(a.accel_mps2.back() == doctest::Approx(0.1));
    // The extension step advances with the held input.
    const auto& tail = a.states[a.states.size() - 1];
    const auto& prev = a.states[a.states.size() - 2];
    CHECK(tail.v_mps == doctest::Approx(prev.v_mps + cfg.dt_s * 0.1));
  }
}

TEST_CASE("coasting acceleration") {
  const VehicleParams p{};
  SUBCASE("flat at 22 m/s") {
    // P_min/(m v) + F_ext/m = -9000/(40000*22) - (1177.2+1778.9)/40000.
    const double expect = -9e3 / (40e3 * 22.0) - (1177.2 + 1778.85) / 40e3;
    CHECK(coasting_accel(p, {22.0, 0.0}, kInfiniteGap, 0.0) ==
          doctest::Approx(expect).epsilon(1e-3));  // ~ -0.0841
  }
  SUBCASE("steep downhill accelerates while coasting") {
    CHECK(coasting_accel(p, {22.0, 0.0}, kInfiniteGap, -0.05) > 0.0);
  }
  SUBCASE("standstill convention") {
    CHECK(coasting_accel(p, {0.0, 0.0}, kInfiniteGap, 0.0) == 0.0);
  }
}

TEST_CASE("leader on an exactly feasible reference tracks it") {
  const VehicleParams p{};
  const RoadProfile road = synth_flat(4000.0);
  const SpeedProfile prof = constant_profile(4000.0, 22.0);
  const MpcConfig cfg = cfg_default();
  const VehicleState x{22.0, 200.0};
  const HorizonTrajectory ref = build_reference(prof, x.s_m, 0, cfg);
  const HorizonTrajectory assumed = cruise_assumed(x, 0, cfg);
  MpcInputs in;
  in.vehicle = &p;
  in.measured = x;
  in.reference = &ref;
  in.own_assumed = &assumed;
  in.road = &road;
  in.env_self = accel_envelope(p, flat_box());
  const MpcOutput out = solve_step(in, cfg);
  REQUIRE_FALSE(out.hard_infeasible);
  // Constant cruise: the optimum is the equilibrium input (~0 acceleration).
  CHECK(std::abs(out.a_star_mps2) < 5e-3);
  CHECK_FALSE(out.brake_flag);
  CHECK(out.slack_max < 1e-6);
  CHECK(out.optimal.states.size() == static_cast<std::size_t>(cfg.horizon));
}

TEST_CASE("far-ahead predecessor leaves the safety constraint inactive") {
  const VehicleParams p{};
  const RoadProfile road = synth_flat(4000.0);
  const SpeedProfile prof = constant_profile(4000.0, 22.0);
  const MpcConfig cfg = cfg_default();
  const AccelEnvelope env = accel_envelope(p, flat_box());
  const VehicleState xf{22.0, 200.0};
  const VehicleState xp{22.0, 200.0 + 18.0 + 400.0};  // 400 m gap
  const HorizonTrajectory ref = build_reference(prof, xf.s_m, 0, cfg);
  const HorizonTrajectory own = cruise_assumed(xf, 0, cfg);
  HorizonTrajectory pred = cruise_assumed(xp, -16, cfg);
  pred.states.resize(cfg.horizon + 32);
  pred.accel_mps2.resize(cfg.horizon + 32, 0.0);
  {
    VehicleState s = xp;
    s.s_m -= 16 * cfg.dt_s * s.v_mps;
    for (std::size_t j = 0; j < pred.states.size(); ++j) {
      pred.states[j] = s;
      s.s_m += cfg.dt_s * s.v_mps;
    }
  }
  MpcInputs in;
  in.vehicle = &p;
  in.measured = xf;
  in.reference = &ref;
  in.own_assumed = &own;
  in.pred_assumed = &pred;
  in.time_gap_steps = 14;
  in.env_self = env;
  in.env_pred = env;
  in.pred_length_m = 18.0;
  in.road = &road;
  const MpcOutput out = solve_step(in, cfg);
  REQUIRE_FALSE(out.hard_infeasible);
  CHECK(out.min_safety_slack_m > 100.0);
  CHECK_FALSE(out.brake_flag);
  CHECK(out.slack_max < 1e-6);
}

TEST_CASE("closing on a braking predecessor activates safety and the brake flag") {
  const VehicleParams p{};
  const RoadProfile road = synth_flat(4000.0);
  const SpeedProfile prof = constant_profile(4000.0, 22.0);
  MpcConfig cfg = cfg_default();
  const AccelEnvelope env = accel_envelope(p, flat_box());
  const VehicleState xf{22.0, 200.0};
  // Near the minimum safe gap, padded by the two-tick information delay the
  // delayed-predecessor constraint charges (2*v*dt), and braking hard.
  const double gap = min_safe_gap(22.0, 22.0, env, env) + 2.0 * 22.0 * cfg.dt_s + 1.0;
  const VehicleState xp{22.0, xf.s_m + 18.0 + gap};
  const HorizonTrajectory ref = build_reference(prof, xf.s_m, 0, cfg);
  const HorizonTrajectory own = cruise_assumed(xf, 0, cfg);
  HorizonTrajectory pred;
  pred.kind = TrajectoryKind::Assumed;
  pred.first_step = -16;
  {
    VehicleState s = xp;
    s.s_m -= 16 * cfg.dt_s * s.v_mps;
    for (int j = 0; j < cfg.horizon + 32; ++j) {
      pred.states.push_back(s);
      const double a = j >= 15 ? -4.0 : 0.0;  // brakes from "now"
      s = {std::max(s.v_mps + cfg.dt_s * a, 0.0), s.s_m + cfg.dt_s * s.v_mps};
    }
  }
  MpcInputs in;
  in.vehicle = &p;
  in.measured = xf;
  in.reference = &ref;
  in.own_assumed = &own;
  in.pred_assumed = &pred;
  in.time_gap_steps = 14;
  in.env_self = env;
  in.env_pred = env;
  in.pred_length_m = 18.0;
  in.road = &road;
  const MpcOutput out = solve_step(in, cfg);
  REQUIRE_FALSE(out.hard_infeasible);
  CHECK(out.min_safety_slack_m < 0.05);
  CHECK(out.a_star_mps2 < out.coasting_accel_now);
  CHECK(out.brake_flag);
}

TEST_CASE("brake flag matches the case split exactly") {
  const VehicleParams p{};
  const RoadProfile road = synth_flat(4000.0);
  const SpeedProfile prof = constant_profile(4000.0, 20.0);
  const MpcConfig cfg = cfg_default();
  const AccelEnvelope env = accel_envelope(p, flat_box());
  for (double v0 : {18.0, 20.0, 22.5}) {
    const VehicleState x{v0, 300.0};
    const HorizonTrajectory ref = build_reference(prof, x.s_m, 0, cfg);
    const HorizonTrajectory own = cruise_assumed(x, 0, cfg);
    MpcInputs in;
    in.vehicle = &p;
    in.measured = x;
    in.reference = &ref;
    in.own_assumed = &own;
    in.road = &road;
    in.env_self = env;
    const MpcOutput out = solve_step(in, cfg);
    REQUIRE_FALSE(out.hard_infeasible);
    CHECK(out.brake_flag == (out.a_star_mps2 < out.coasting_accel_now));
  }
}

TEST_CASE("config validation") {
  MpcConfig cfg;
  cfg.horizon = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = MpcConfig{};
  cfg.zeta = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
