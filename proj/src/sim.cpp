#include "platoon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace platoon {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kStoppedSpeed = 0.1;  // "standstill" threshold for reporting
}  // namespace

double GapPolicy::steady_gap_m(double v_mps, double prev_length_m) const {
  switch (kind) {
    case GapPolicyKind::SpaceGap:
      return value;
    case GapPolicyKind::HeadwayGap:
      return value * v_mps;
    case GapPolicyKind::TimeGap:
      return value * v_mps - prev_length_m;
  }
  return value;
}

EnvelopeAssumptions derive_envelope_assumptions(const RoadProfile& road,
                                                const std::vector<VehicleParams>& platoon) {
  EnvelopeAssumptions box;
  double steep = 0.0;
  for (const auto& s : road.samples())
    if (s.s_m < road.length_m()) steep = std::max(steep, std::abs(road.slope_at(s.s_m)));
  box.alpha_max_rad = std::max(1.1 * steep, 0.02);
  box.v_max_mps = road.vmax_over(0.0, road.length_m()) + 1.5;
  box.mass_lo_kg = kInf;
  box.mass_hi_kg = 0.0;
  for (const auto& p : platoon) {
    box.mass_lo_kg = std::min(box.mass_lo_kg, p.mass_kg);
    box.mass_hi_kg = std::max(box.mass_hi_kg, p.mass_kg);
  }
  return box;
}

namespace {

// Window-gated accumulation of one plant substep into the vehicle totals.
struct WindowAccum {
  double w0 = -kInf;
  double w1 = kInf;
  bool entered = false;

  void add(VehicleTotals& tot, const VehicleParams& p, double s_begin, double v_begin,
           double v_end, double dt, const StepWork& w) {
    if (s_begin < w0 || s_begin >= w1) return;
    if (!entered) {
      tot.v_window_in_mps = v_begin;
      entered = true;
    }
    tot.engine_j += w.engine_j;
    if (w.engine_j < 0) tot.engine_neg_j -= w.engine_j;
    tot.brake_j += w.brake_j;
    tot.gravity_j += w.gravity_j;
    tot.rolling_j += w.rolling_j;
    tot.drag_j += w.drag_j;
    const double avg_power_w = w.engine_j / dt;
    tot.fuel_g += std::max(0.0, fuel_rate_affine(p, avg_power_w)) * dt;
    tot.distance_m += w.next.s_m - s_begin;
    tot.time_s += dt;
    tot.v_window_out_mps = v_end;
  }
};

double instant_fuel_gps(const VehicleParams& p, double engine_n, double v_mps) {
  return std::max(0.0, fuel_rate_affine(p, engine_n * v_mps));
}

SafetyMargins nan_margins() {
  return SafetyMargins{kNaN, kNaN, kNaN, kNaN};
}

SpeedProfile constant_profile(const RoadProfile& road, double v_mps) {
  SpeedProfile prof;
  prof.ds_m = road.length_m();
  prof.grid_m = {0.0, road.length_m()};
  prof.v_mps = {v_mps, v_mps};
  return prof;
}

struct ClosedLoopVehicle {
  const VehicleParams* params = nullptr;
  VehicleState state;
  std::vector<VehicleState> recorded;  // measured state per tick
  std::optional<HorizonTrajectory> prev_optimal;
  HorizonTrajectory assumed;
  AccelEnvelope env;
  double a_cmd = 0.0;
  bool brake_flag = false;
  double slack = 0.0;
  double min_safety_slack = kInf;
  VehicleState initial;
  double v0 = 0.0;

  VehicleState measured_at(std::int64_t step, double dt) const {
    if (step < 0)
      return {v0, initial.s_m + static_cast<double>(step) * dt * v0};
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(step),
                                                  recorded.size() - 1);
    return recorded[idx];
  }
};

}  // namespace

TrajectoryLog run_closed_loop(const Scenario& sc) {
  if (sc.mode != Scenario::Mode::ClosedLoop)
    throw std::invalid_argument("run_closed_loop: scenario is not closed-loop");
  if (sc.platoon.empty()) throw std::invalid_argument("run_closed_loop: empty platoon");
  for (const auto& p : sc.platoon) p.validate();
  sc.mpc.validate();
  const int n = static_cast<int>(sc.platoon.size());
  if (n > 1 && sc.gap_policy.kind != GapPolicyKind::TimeGap)
    throw std::invalid_argument(
        "run_closed_loop: the vehicle controller tracks a time-gap policy; "
        "use ideal_tracking for SG/HG comparisons");
  const double dt = sc.mpc.dt_s;
  const int n_sub = static_cast<int>(std::lround(dt / sc.plant_dt_s));
  if (n_sub < 1 || std::abs(n_sub * sc.plant_dt_s - dt) > 1e-9)
    throw std::invalid_argument("run_closed_loop: mpc dt must be an integer multiple of plant dt");
  const double dts = sc.plant_dt_s;

  const EnvelopeAssumptions box =
      sc.envelope ? *sc.envelope : derive_envelope_assumptions(sc.road, sc.platoon);

  TrajectoryLog log;
  log.tick_dt_s = dt;
  log.n_vehicles = n;
  log.totals.resize(static_cast<std::size_t>(n));

  const double v0 = sc.v_set_mps;
  std::vector<ClosedLoopVehicle> veh(static_cast<std::size_t>(n));
  {
    // Chain the platoon back from the leader at the steady time-gap spacing.
    std::vector<double> pos(static_cast<std::size_t>(n), 0.0);
    for (int i = 1; i < n; ++i) {
      const double gap0 =
          sc.gap_policy.steady_gap_m(v0, sc.platoon[static_cast<std::size_t>(i - 1)].length_m);
      if (!(gap0 > 0)) throw std::invalid_argument("run_closed_loop: non-positive initial gap");
      pos[static_cast<std::size_t>(i)] = pos[static_cast<std::size_t>(i - 1)] -
                                         sc.platoon[static_cast<std::size_t>(i - 1)].length_m -
                                         gap0;
    }
    const double shift = -pos.back() + 1.0;  // rearmost vehicle starts just inside the road
    for (int i = 0; i < n; ++i) {
      auto& v = veh[static_cast<std::size_t>(i)];
      v.params = &sc.platoon[static_cast<std::size_t>(i)];
      v.state = {v0, pos[static_cast<std::size_t>(i)] + shift};
      v.initial = v.state;
      v.v0 = v0;
      v.env = accel_envelope(*v.params, box);
    }
  }
  for (int i = 1; i < n; ++i) {
    const SafetyMargins m =
        safety_margins(veh[static_cast<std::size_t>(i - 1)].state,
                       veh[static_cast<std::size_t>(i)].state,
                       sc.platoon[static_cast<std::size_t>(i - 1)].length_m,
                       veh[static_cast<std::size_t>(i - 1)].env,
                       veh[static_cast<std::size_t>(i)].env);
    if (!m.in_set(0.0))
      throw std::invalid_argument("run_closed_loop: initial pairwise state outside the safety set");
  }

  std::vector<double> time_gaps;
  std::vector<int> gap_steps(static_cast<std::size_t>(n), 0);
  for (int i = 1; i < n; ++i) {
    time_gaps.push_back(sc.gap_policy.value);
    gap_steps[static_cast<std::size_t>(i)] =
        static_cast<int>(std::floor(sc.gap_policy.value / dt + 1e-9));
  }

  // Initial coordinator plan.
  SpeedProfile profile = constant_profile(sc.road, sc.v_set_mps);
  double last_plan_s = veh[0].state.s_m;
  const auto replan = [&](bool initial) {
    if (sc.strategy == Strategy::CC) return;
    const double s_now = veh[0].state.s_m;
    const double v_now = std::max(veh[0].state.v_mps, 0.0);
    if (v_now < 1.0) return;  // no useful plan near standstill; keep the old one
    PlanResult r;
    if (sc.strategy == Strategy::CLAC)
      r = plan_clac(sc.platoon, time_gaps, sc.road, std::max(s_now, 0.0), v_now, sc.dp);
    else
      r = plan_lac(sc.platoon[0], sc.road, std::max(s_now, 0.0), v_now, sc.dp);
    if (r.feasible) {
      profile = r.profile;
      last_plan_s = s_now;
    } else if (initial) {
      throw std::runtime_error("run_closed_loop: initial plan infeasible: " + r.message);
    } else {
      log.notes.push_back("replan infeasible at s=" + std::to_string(s_now) + ": " + r.message);
    }
  };
  replan(true);

  WindowAccum window;
  if (sc.window_start_m) window.w0 = *sc.window_start_m;
  if (sc.window_end_m) window.w1 = *sc.window_end_m;
  std::vector<WindowAccum> acc(static_cast<std::size_t>(n), window);
  for (int i = 0; i < n; ++i) {
    log.totals[static_cast<std::size_t>(i)].v_window_in_mps = v0;
    log.totals[static_cast<std::size_t>(i)].v_window_out_mps = v0;
  }

  const std::int64_t max_ticks =
      sc.duration_s > 0 ? static_cast<std::int64_t>(std::ceil(sc.duration_s / dt))
                        : 400000;

  for (std::int64_t k = 0; k < max_ticks; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (veh[0].state.s_m >= sc.road.length_m() - sc.end_margin_m) break;

    for (auto& v : veh) v.recorded.push_back(v.state);

    // Manual leader override?
    bool manual = false;
    double manual_decel = 0.0;
    for (const auto& ev : sc.leader_events) {
      const bool active = ev.until_stop ? t >= ev.t_start_s
                                        : (t >= ev.t_start_s && t < ev.t_start_s + ev.duration_s);
      if (active) {
        manual = true;
        manual_decel = ev.decel_mps2;
      }
    }

    if (!manual && (std::abs(veh[0].state.s_m - last_plan_s) >= sc.dp.refresh_distance_m ||
                    std::abs(veh[0].state.v_mps - profile.v_at(veh[0].state.s_m)) >
                        sc.dp.replan_deviation_mps))
      replan(false);

    // Everyone publishes this tick's assumed trajectory (from the previous
    // tick's optimal), then all controllers solve on the exchanged data.
    for (int i = 0; i < n; ++i) {
      auto& v = veh[static_cast<std::size_t>(i)];
      double gap_hold = kInf;
      if (i > 0)
        gap_hold = std::max(veh[static_cast<std::size_t>(i - 1)].state.s_m - v.state.s_m -
                                veh[static_cast<std::size_t>(i - 1)].params->length_m,
                            0.0);
      const VehicleParams* p = v.params;
      const RoadProfile* road = &sc.road;
      const auto coast = [p, road, gap_hold](const VehicleState& x) {
        const double s = std::clamp(x.s_m, 0.0, road->length_m());
        return coasting_accel(*p, {std::max(x.v_mps, 0.0), s}, gap_hold, road->slope_at(s));
      };
      v.assumed = build_assumed(v.prev_optimal, v.state, k, sc.mpc, coast);
    }

    bool fatal = false;
    for (int i = 0; i < n; ++i) {
      auto& v = veh[static_cast<std::size_t>(i)];
      if (i == 0 && manual) {
        v.a_cmd = v.state.v_mps > 0 ? -manual_decel : 0.0;
        v.brake_flag = true;
        v.slack = 0.0;
        v.min_safety_slack = kInf;
        v.prev_optimal.reset();
        continue;
      }
      if (i > 0) {
        // Stop-and-go convention: once the predecessor is (reportedly)
        // stationary and the gap is short, command a certified full stop and
        // hold it. The degenerate crawl toward a standing vehicle is outside
        // the tracking formulation's scope.
        const auto& pv = veh[static_cast<std::size_t>(i - 1)];
        const double pred_v_delayed = pv.measured_at(k - 1, dt).v_mps;
        if (pred_v_delayed < 2.5) {
          const double a_stop = -v.state.v_mps / dt;
          const double a_full = evasive_law(v.state, v.env);
          v.a_cmd = std::max(a_stop, a_full);
          v.brake_flag = v.state.v_mps >= 0.05;
          v.slack = 0.0;
          v.min_safety_slack = kInf;
          v.prev_optimal.reset();
          continue;
        }
      }
      HorizonTrajectory reference = build_reference(profile, v.state.s_m, k, sc.mpc);
      HorizonTrajectory pred_view;
      MpcInputs in;
      in.vehicle = v.params;
      in.measured = v.state;
      in.reference = &reference;
      in.own_assumed = &v.assumed;
      in.road = &sc.road;
      in.tick = k;
      in.env_self = v.env;
      if (i > 0) {
        const auto& pv = veh[static_cast<std::size_t>(i - 1)];
        const int t_steps = gap_steps[static_cast<std::size_t>(i)];
        pred_view.kind = TrajectoryKind::Assumed;
        pred_view.first_step = k - t_steps - 2;
        for (std::int64_t step = pred_view.first_step; step < k; ++step)
          pred_view.states.push_back(pv.measured_at(step, dt));
        pred_view.states.insert(pred_view.states.end(), pv.assumed.states.begin(),
                                pv.assumed.states.end());
        in.pred_assumed = &pred_view;
        in.time_gap_steps = t_steps;
        in.env_pred = pv.env;
        in.pred_length_m = pv.params->length_m;
      }
      const MpcOutput out = solve_step(in, sc.mpc);
      if (out.hard_infeasible) {
        std::ostringstream dump;
        dump << "tick " << k << " t=" << t << " vehicle " << i << ": " << out.message;
        for (int ii = 0; ii < n; ++ii)
          dump << "; x[" << ii << "]=(v=" << veh[static_cast<std::size_t>(ii)].state.v_mps
               << ",s=" << veh[static_cast<std::size_t>(ii)].state.s_m << ")";
        log.aborted = true;
        log.abort_reason = dump.str();
        fatal = true;
        break;
      }
      v.a_cmd = out.a_star_mps2;
      v.brake_flag = out.brake_flag;
      v.slack = out.slack_max;
      v.min_safety_slack = out.min_safety_slack_m;
      v.prev_optimal = out.optimal;
    }
    if (fatal) break;

    // Log the tick (measured states plus this tick's commands).
    for (int i = 0; i < n; ++i) {
      const auto& v = veh[static_cast<std::size_t>(i)];
      LogRow row;
      row.t_s = t;
      row.vehicle = i;
      row.s_m = v.state.s_m;
      row.v_mps = v.state.v_mps;
      row.a_mps2 = v.a_cmd;
      row.brake_flag = v.brake_flag;
      row.slack = v.slack;
      row.safety_slack_m = v.min_safety_slack;
      if (i > 0) {
        const auto& pv = veh[static_cast<std::size_t>(i - 1)];
        row.gap_m = pv.state.s_m - v.state.s_m - pv.params->length_m;
        row.margins = safety_margins(pv.state, v.state, pv.params->length_m, pv.env, v.env);
      } else {
        row.margins = nan_margins();
      }
      // Applied forces over the first substep.
      const double s_cl = std::clamp(v.state.s_m, 0.0, sc.road.length_m());
      const double gap_now = row.gap_m;
      const ForceBreakdown ext = external_forces(
          *v.params, v.state, i > 0 ? std::max(gap_now, 0.0) : kInf, sc.road.slope_at(s_cl));
      const ForceSplit split = split_required_force(
          *v.params, v.state.v_mps, v.params->mass_kg * v.a_cmd - ext.total_n(), false);
      row.engine_n = split.engine_n;
      row.brake_n = split.brake_n;
      row.fuel_gps = instant_fuel_gps(*v.params, split.engine_n, v.state.v_mps);
      log.rows.push_back(row);
    }

    // Plant substeps; per-substep force re-evaluation at the current states.
    for (int sub = 0; sub < n_sub; ++sub) {
      std::vector<VehicleState> snap(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) snap[static_cast<std::size_t>(i)] = veh[static_cast<std::size_t>(i)].state;
      for (int i = 0; i < n; ++i) {
        auto& v = veh[static_cast<std::size_t>(i)];
        const VehicleState& x = snap[static_cast<std::size_t>(i)];
        double gap = kInf;
        if (i > 0)
          gap = std::max(snap[static_cast<std::size_t>(i - 1)].s_m - x.s_m -
                             veh[static_cast<std::size_t>(i - 1)].params->length_m,
                         0.0);
        const double s_cl = std::clamp(x.s_m, 0.0, sc.road.length_m());
        const ForceBreakdown ext =
            external_forces(*v.params, x, gap, sc.road.slope_at(s_cl));
        const ForceSplit split = split_required_force(
            *v.params, x.v_mps, v.params->mass_kg * v.a_cmd - ext.total_n(), false);
        const auto slope_fn = [&](double s) {
          return sc.road.slope_at(std::clamp(s, 0.0, sc.road.length_m()));
        };
        StepWork w;
        if (sc.integrator == Integrator::Euler) {
          w = step_plant_with_work(*v.params, x, split.engine_n, split.brake_n, gap,
                                   slope_fn, dts);
        } else {
          w.next = step_plant(*v.params, x, split.engine_n, split.brake_n, gap, slope_fn,
                              dts, sc.integrator);
          const double v_mid = 0.5 * (x.v_mps + w.next.v_mps);
          w.engine_j = split.engine_n * v_mid * dts;
          w.brake_j = split.brake_n * v_mid * dts;
          w.gravity_j = ext.gravity_n * v_mid * dts;
          w.rolling_j = ext.rolling_n * v_mid * dts;
          w.drag_j = ext.drag_n * v_mid * dts;
        }
        acc[static_cast<std::size_t>(i)].add(log.totals[static_cast<std::size_t>(i)],
                                             *v.params, x.s_m, x.v_mps, w.next.v_mps, dts, w);
        v.state = w.next;
      }
      for (int i = 1; i < n; ++i) {
        const double gap = veh[static_cast<std::size_t>(i - 1)].state.s_m -
                           veh[static_cast<std::size_t>(i)].state.s_m -
                           veh[static_cast<std::size_t>(i - 1)].params->length_m;
        log.min_gap_m = std::min(log.min_gap_m, gap);
      }
    }
  }

  log.all_stopped_at_end = true;
  for (const auto& v : veh)
    if (v.state.v_mps > kStoppedSpeed) log.all_stopped_at_end = false;
  return log;
}

namespace {

// Piecewise view of a (t -> s, v) trajectory on a uniform grid, with
// constant-speed extrapolation before t=0. v is linear per step (constant
// acceleration), s its exact integral.
struct TimeTrajectory {
  double dt = 0.0;
  std::vector<double> s;
  std::vector<double> v;

  double pos(double t) const {
    if (t <= 0.0) return s.front() + v.front() * t;
    const double u = t / dt;
    std::size_t i = static_cast<std::size_t>(u);
    if (i >= s.size() - 1) {
      const std::size_t last = s.size() - 1;
      return s[last] + v[last] * (t - static_cast<double>(last) * dt);
    }
    const double th = u - static_cast<double>(i);
    const double a = (v[i + 1] - v[i]) / dt;
    const double tau = th * dt;
    return s[i] + v[i] * tau + 0.5 * a * tau * tau;
  }

  double speed(double t) const {
    if (t <= 0.0) return v.front();
    const double u = t / dt;
    std::size_t i = static_cast<std::size_t>(u);
    if (i >= v.size() - 1) return v.back();
    const double th = u - static_cast<double>(i);
    return v[i] + th * (v[i + 1] - v[i]);
  }
};

}  // namespace

TrajectoryLog run_ideal_tracking(const Scenario& sc) {
  if (sc.mode != Scenario::Mode::IdealTracking)
    throw std::invalid_argument("run_ideal_tracking: scenario is not ideal-tracking");
  if (sc.platoon.empty()) throw std::invalid_argument("run_ideal_tracking: empty platoon");
  for (const auto& p : sc.platoon) p.validate();
  if (!sc.leader_events.empty())
    throw std::invalid_argument("run_ideal_tracking: leader events need closed-loop mode");
  const int n = static_cast<int>(sc.platoon.size());
  const double dt = sc.plant_dt_s;

  const EnvelopeAssumptions box =
      sc.envelope ? *sc.envelope : derive_envelope_assumptions(sc.road, sc.platoon);
  std::vector<AccelEnvelope> env;
  env.reserve(static_cast<std::size_t>(n));
  for (const auto& p : sc.platoon) env.push_back(accel_envelope(p, box));

  // Leader kinematics.
  const double v0 = sc.v_set_mps;
  double lead_start = 1.0 + sc.start_offset_m;
  {
    double pos = 0.0;
    for (int i = 1; i < n; ++i)
      pos -= sc.platoon[static_cast<std::size_t>(i - 1)].length_m +
             sc.gap_policy.steady_gap_m(v0, sc.platoon[static_cast<std::size_t>(i - 1)].length_m);
    lead_start = 1.0 + sc.start_offset_m - pos;
  }

  SpeedProfile profile;
  if (sc.strategy != Strategy::CC) {
    // Ideal mode plays one plan back over the whole road; widen the horizon
    // to cover it (receding-horizon refresh is a closed-loop concern).
    DpConfig dp = sc.dp;
    dp.horizon_cells = std::max(
        dp.horizon_cells,
        static_cast<int>(std::floor((sc.road.length_m() - lead_start) / dp.ds_m + 1e-9)));
    PlanResult r;
    if (sc.strategy == Strategy::CLAC) {
      std::vector<double> gaps;
      for (int i = 1; i < n; ++i) {
        // The coordinator needs the TG-equivalent time gap for the drag model.
        const double g0 =
            sc.gap_policy.steady_gap_m(v0, sc.platoon[static_cast<std::size_t>(i - 1)].length_m);
        gaps.push_back((g0 + sc.platoon[static_cast<std::size_t>(i - 1)].length_m) / v0);
      }
      r = plan_clac(sc.platoon, gaps, sc.road, lead_start, v0, dp);
    } else {
      r = plan_lac(sc.platoon[0], sc.road, lead_start, v0, dp);
    }
    if (!r.feasible)
      throw std::runtime_error("run_ideal_tracking: plan infeasible: " + r.message);
    profile = r.profile;
  }

  const double stop_s = sc.road.length_m() - sc.end_margin_m;
  const std::int64_t max_steps =
      sc.duration_s > 0 ? static_cast<std::int64_t>(std::ceil(sc.duration_s / dt))
                        : 4000000;

  std::vector<TimeTrajectory> traj(static_cast<std::size_t>(n));
  // Leader rollout.
  {
    auto& T = traj[0];
    T.dt = dt;
    const VehicleParams& p = sc.platoon[0];
    if (sc.strategy == Strategy::CC) {
      VehicleState x{v0, lead_start};
      for (std::int64_t step = 0; step <= max_steps && x.s_m < stop_s; ++step) {
        T.s.push_back(x.s_m);
        T.v.push_back(x.v_mps);
        const double s_cl = std::clamp(x.s_m, 0.0, sc.road.length_m());
        const CcCommand cmd = cc_command(sc.v_set_mps, x, p, kInf, sc.road.slope_at(s_cl),
                                         sc.road.vmax_at(s_cl));
        const auto slope_fn = [&](double s) {
          return sc.road.slope_at(std::clamp(s, 0.0, sc.road.length_m()));
        };
        x = step_plant(p, x, cmd.engine_n, cmd.brake_n, kInf, slope_fn, dt);
      }
    } else {
      double s = lead_start;
      for (std::int64_t step = 0; step <= max_steps && s < stop_s; ++step) {
        const double v = profile.v_at(s);
        T.s.push_back(s);
        T.v.push_back(v);
        s += dt * v;
      }
    }
    if (T.s.size() < 2) throw std::runtime_error("run_ideal_tracking: leader run too short");
  }
  const std::size_t steps = traj[0].s.size();

  // Follower kinematics, chained.
  for (int i = 1; i < n; ++i) {
    const TimeTrajectory& prev = traj[static_cast<std::size_t>(i - 1)];
    TimeTrajectory& T = traj[static_cast<std::size_t>(i)];
    T.dt = dt;
    T.s.resize(steps);
    T.v.resize(steps);
    const double l_prev = sc.platoon[static_cast<std::size_t>(i - 1)].length_m;
    switch (sc.gap_policy.kind) {
      case GapPolicyKind::SpaceGap: {
        const double off = l_prev + sc.gap_policy.value;
        for (std::size_t k = 0; k < steps; ++k) {
          T.s[k] = prev.s[k] - off;
          T.v[k] = prev.v[k];
        }
        break;
      }
      case GapPolicyKind::HeadwayGap: {
        const double tau = sc.gap_policy.value;
        double s = prev.s[0] - l_prev - tau * prev.v[0];
        for (std::size_t k = 0; k < steps; ++k) {
          T.s[k] = s;
          T.v[k] = (prev.s[k] - s - l_prev) / tau;
          s += dt * T.v[k];
        }
        break;
      }
      case GapPolicyKind::TimeGap: {
        const double tau = sc.gap_policy.value;
        for (std::size_t k = 0; k < steps; ++k) {
          const double t = static_cast<double>(k) * dt - tau;
          T.s[k] = prev.pos(t);
          T.v[k] = prev.speed(t);
        }
        break;
      }
    }
  }

  TrajectoryLog log;
  log.tick_dt_s = dt;
  log.n_vehicles = n;
  log.totals.resize(static_cast<std::size_t>(n));
  WindowAccum window;
  if (sc.window_start_m) window.w0 = *sc.window_start_m;
  if (sc.window_end_m) window.w1 = *sc.window_end_m;

  for (int i = 0; i < n; ++i) {
    const VehicleParams& p = sc.platoon[static_cast<std::size_t>(i)];
    const TimeTrajectory& T = traj[static_cast<std::size_t>(i)];
    WindowAccum acc = window;
    auto& tot = log.totals[static_cast<std::size_t>(i)];
    tot.v_window_in_mps = T.v.front();
    tot.v_window_out_mps = T.v.back();
    for (std::size_t k = 0; k + 1 < steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      const double v_now = T.v[k];
      const double v_next = T.v[k + 1];
      const double a = (v_next - v_now) / dt;
      double gap = kInf;
      if (i > 0)
        gap = traj[static_cast<std::size_t>(i - 1)].s[k] - T.s[k] -
              sc.platoon[static_cast<std::size_t>(i - 1)].length_m;
      const double s_cl = std::clamp(T.s[k], 0.0, sc.road.length_m());
      const ForceBreakdown ext = external_forces(p, {v_now, T.s[k]},
                                                 i > 0 ? std::max(gap, 0.0) : kInf,
                                                 sc.road.slope_at(s_cl));
      const ForceSplit split =
          split_required_force(p, v_now, p.mass_kg * a - ext.total_n(), true);
      const double v_mid = 0.5 * (v_now + v_next);
      StepWork w;
      w.next = {v_next, T.s[k + 1]};
      w.engine_j = split.engine_n * v_mid * dt;
      w.brake_j = split.brake_n * v_mid * dt;
      w.gravity_j = ext.gravity_n * v_mid * dt;
      w.rolling_j = ext.rolling_n * v_mid * dt;
      w.drag_j = ext.drag_n * v_mid * dt;
      acc.add(tot, p, T.s[k], v_now, v_next, dt, w);

      LogRow row;
      row.t_s = t;
      row.vehicle = i;
      row.s_m = T.s[k];
      row.v_mps = v_now;
      row.a_mps2 = a;
      row.engine_n = split.engine_n;
      row.brake_n = split.brake_n;
      row.gap_m = gap;
      row.fuel_gps = instant_fuel_gps(p, split.engine_n, v_now);
      row.brake_flag = split.brake_n < 0.0;
      row.slack = 0.0;
      if (i > 0) {
        row.margins = safety_margins({traj[static_cast<std::size_t>(i - 1)].v[k],
                                      traj[static_cast<std::size_t>(i - 1)].s[k]},
                                     {v_now, T.s[k]},
                                     sc.platoon[static_cast<std::size_t>(i - 1)].length_m,
                                     env[static_cast<std::size_t>(i - 1)],
                                     env[static_cast<std::size_t>(i)]);
        log.min_gap_m = std::min(log.min_gap_m, gap);
      } else {
        row.margins = nan_margins();
      }
      log.rows.push_back(row);
    }
  }

  // Interleave rows tick-major for the CSV contract.
  std::stable_sort(log.rows.begin(), log.rows.end(), [](const LogRow& a, const LogRow& b) {
    if (a.t_s != b.t_s) return a.t_s < b.t_s;
    return a.vehicle < b.vehicle;
  });

  log.all_stopped_at_end = false;
  return log;
}

void write_log_csv(const TrajectoryLog& log, std::ostream& out) {
  out << "t_s,vehicle,s_m,v_mps,a_mps2,Fe_N,Fb_N,gap_m,fuel_gps,g1_m,g2_m,g3_mps,g4_mps,"
         "brake,slack,safety_slack_m\n";
  char buf[420];
  for (const auto& r : log.rows) {
    const bool lead = std::isnan(r.margins.g1_m);
    if (lead) {
      std::snprintf(buf, sizeof buf,
                    "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,inf,%.17g,,,,,%d,%.17g,\n", r.t_s,
                    r.vehicle, r.s_m, r.v_mps, r.a_mps2, r.engine_n, r.brake_n, r.fuel_gps,
                    r.brake_flag ? 1 : 0, r.slack);
    } else {
      std::snprintf(buf, sizeof buf,
                    "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                    "%.17g,%d,%.17g,%.17g\n",
                    r.t_s, r.vehicle, r.s_m, r.v_mps, r.a_mps2, r.engine_n, r.brake_n, r.gap_m,
                    r.fuel_gps, r.margins.g1_m, r.margins.g2_m, r.margins.g3_mps,
                    r.margins.g4_mps, r.brake_flag ? 1 : 0, r.slack,
                    std::isinf(r.safety_slack_m) ? -1.0 : r.safety_slack_m);
    }
    out << buf;
  }
}

}  // namespace platoon
