#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "platoon/coordinator.hpp"
#include "platoon/mpc.hpp"
#include "platoon/road.hpp"
#include "platoon/safety.hpp"
#include "platoon/vehicle.hpp"

namespace platoon {

enum class Strategy { CC, LAC, CLAC };

enum class GapPolicyKind { SpaceGap, HeadwayGap, TimeGap };

/// Inter-vehicle spacing rule. `value` is meters for the space gap and
/// seconds for headway/time gaps. The three policies are parameterized so
/// that d_SG = v*tau_HG = v*tau_TG - l at a common cruise speed.
struct GapPolicy {
  GapPolicyKind kind = GapPolicyKind::TimeGap;
  double value = 1.4;

  double steady_gap_m(double v_mps, double prev_length_m) const;
};

/// Manual leader braking: constant deceleration from t_start for duration_s,
/// or until standstill.
struct LeaderEvent {
  double t_start_s = 0.0;
  double duration_s = 0.0;
  bool until_stop = false;
  double decel_mps2 = 0.0;
};

struct Scenario {
  enum class Mode { ClosedLoop, IdealTracking };

  RoadProfile road = synth_flat(1000.0);
  std::vector<VehicleParams> platoon;
  Strategy strategy = Strategy::CLAC;
  GapPolicy gap_policy;
  Mode mode = Mode::ClosedLoop;
  double v_set_mps = 22.0;  // cruise set speed; also the initial speed
  double duration_s = 0.0;  // 0: run until the leader nears the road end
  double end_margin_m = 100.0;
  // Shift of the whole formation along the road (baseline runs use it to
  // cover the same span as one platoon slot).
  double start_offset_m = 0.0;
  std::vector<LeaderEvent> leader_events;
  double plant_dt_s = 0.05;
  Integrator integrator = Integrator::Euler;
  DpConfig dp;
  MpcConfig mpc;
  std::optional<EnvelopeAssumptions> envelope;  // default derived from road/platoon
  // Optional position window for the energy/fuel totals (comparisons).
  std::optional<double> window_start_m;
  std::optional<double> window_end_m;
  std::uint64_t seed = 1;
};

struct LogRow {
  double t_s = 0.0;
  int vehicle = 0;
  double s_m = 0.0;
  double v_mps = 0.0;
  double a_mps2 = 0.0;
  double engine_n = 0.0;
  double brake_n = 0.0;
  double gap_m = std::numeric_limits<double>::infinity();  // bumper to bumper
  double fuel_gps = 0.0;
  SafetyMargins margins;  // NaN-filled for the leader
  bool brake_flag = false;
  double slack = 0.0;
  // Tightest predicted safety-constraint slack of this tick's solve
  // (infinite for leaders and in ideal mode).
  double safety_slack_m = std::numeric_limits<double>::infinity();
};

/// Per-vehicle signed work and fuel integrals, accumulated at plant
/// resolution with midstep speeds (exact for the Euler scheme), gated by the
/// scenario's metrics window when one is set.
struct VehicleTotals {
  double engine_j = 0.0;
  double engine_neg_j = 0.0;  // magnitude of the negative engine work share
  double brake_j = 0.0;       // <= 0
  double gravity_j = 0.0;     // signed
  double rolling_j = 0.0;     // <= 0
  double drag_j = 0.0;        // <= 0
  double fuel_g = 0.0;        // clamped flow integral
  double distance_m = 0.0;
  double time_s = 0.0;
  double v_window_in_mps = 0.0;   // speed entering the metrics window
  double v_window_out_mps = 0.0;  // speed leaving it (or final)
};

struct TrajectoryLog {
  double tick_dt_s = 0.0;
  int n_vehicles = 0;
  std::vector<LogRow> rows;  // tick-major, vehicle-minor
  std::vector<VehicleTotals> totals;
  double min_gap_m = std::numeric_limits<double>::infinity();
  bool all_stopped_at_end = false;
  bool aborted = false;
  std::string abort_reason;
  std::vector<std::string> notes;
};

/// Full closed-loop run: coordinator replanning, per-vehicle MPC with
/// one-step-delayed neighbor information, manual leader events, and the
/// force-level plant integrated at plant_dt under each tick.
TrajectoryLog run_closed_loop(const Scenario& scenario);

/// Analysis mode: the leader executes its strategy exactly (CC rule or
/// profile playback) and follower kinematics are solved from the gap policy;
/// follower forces are back-computed and may exceed the engine limits.
TrajectoryLog run_ideal_tracking(const Scenario& scenario);

/// Fixed-column CSV: one row per (tick, vehicle).
void write_log_csv(const TrajectoryLog& log, std::ostream& out);

/// Envelope assumptions wide enough for road and platoon (used when the
/// scenario does not pin them).
EnvelopeAssumptions derive_envelope_assumptions(const RoadProfile& road,
                                                const std::vector<VehicleParams>& platoon);

}  // namespace platoon
