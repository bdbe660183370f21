#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "platoon/coordinator.hpp"
#include "platoon/road.hpp"
#include "platoon/safety.hpp"
#include "platoon/vehicle.hpp"

namespace platoon {

struct MpcConfig {
  double dt_s = 0.1;
  int horizon = 50;
  double rate_hz = 10.0;
  double q_speed = 1.0;   // state weight on speed error
  double q_pos = 0.5;     // state weight on position error
  double r_accel = 2.0;   // input-deviation weight
  double p_soft = 1e4;    // slack weight, >> q and r
  double zeta = 0.8;      // follower blend: predecessor vs profile tracking
  double solver_tol = 1e-6;  // duality-gap target of the QCQP solve

  void validate() const;
};

enum class TrajectoryKind { Reference, Assumed, Optimal, Predicted };

/**
 * A trajectory indexed by absolute control ticks: states[i] belongs to tick
 * first_step + i, accel[i] is the input applied over that tick. at()/accel_at()
 * clamp outside the stored range (constant extension), which is also the
 * policy for horizons that outrun the data.
 */
struct HorizonTrajectory {
  TrajectoryKind kind = TrajectoryKind::Predicted;
  std::int64_t first_step = 0;
  std::vector<VehicleState> states;
  std::vector<double> accel_mps2;
  bool truncated = false;  // reference ran off the speed profile

  std::int64_t last_step() const {
    return first_step + static_cast<std::int64_t>(states.size()) - 1;
  }
  bool covers(std::int64_t step) const {
    return step >= first_step && step <= last_step();
  }
  const VehicleState& at(std::int64_t step) const;
  double accel_at(std::int64_t step) const;
};

/// Reference trajectory from the coordinator profile: positions advance at
/// the profile speed, the input reference is the finite difference of the
/// speeds. `truncated` is set when the horizon leaves the profile span.
HorizonTrajectory build_reference(const SpeedProfile& profile, double s_now_m,
                                  std::int64_t tick, const MpcConfig& cfg);

/// Assumed trajectory for tick k: the previous tick's optimal shifted one
/// step, extended by holding the last optimal input. Without a previous
/// solution it is a coasting rollout from the measured state using
/// `coast_accel` (re-evaluated along the rollout).
HorizonTrajectory build_assumed(const std::optional<HorizonTrajectory>& prev_optimal,
                                const VehicleState& measured, std::int64_t tick,
                                const MpcConfig& cfg,
                                const std::function<double(const VehicleState&)>& coast_accel);

/// Coasting acceleration: engine at its power floor plus the external
/// forces; 0 at standstill by convention.
double coasting_accel(const VehicleParams& p, const VehicleState& state, double gap_m,
                      double slope_rad);

struct MpcInputs {
  const VehicleParams* vehicle = nullptr;
  VehicleState measured;
  const HorizonTrajectory* reference = nullptr;     // required
  const HorizonTrajectory* own_assumed = nullptr;   // required; freezes constraint sets
  const HorizonTrajectory* pred_assumed = nullptr;  // followers only; must cover tick-1
  int time_gap_steps = 0;                           // floor(tau / dt)
  AccelEnvelope env_self;                           // follower's guaranteed braking
  AccelEnvelope env_pred;                           // predecessor's worst-case braking
  double pred_length_m = 0.0;
  const RoadProfile* road = nullptr;
  std::int64_t tick = 0;
};

struct MpcOutput {
  double a_star_mps2 = 0.0;
  bool brake_flag = false;  // a* below the coasting acceleration at the
                            // measured state: track with the brakes
  HorizonTrajectory optimal;
  double slack_max = 0.0;
  double coasting_accel_now = 0.0;
  // Distance to the tightest predicted safety constraint (+inf for leaders);
  // near zero means the constraint is active.
  double min_safety_slack_m = 0.0;
  bool hard_infeasible = false;
  std::string message;
  int solver_iters = 0;
  double kkt_stationarity = 0.0;
  double objective = 0.0;
};

/**
 * One controller tick: assemble the tracking QCQP over the double-integrator
 * model and solve it. Constraint sets (input bounds, soft braking bound,
 * speed limits) are evaluated at the own assumed states; followers add the
 * convex quadratic safety constraint against the predecessor's one-step
 * delayed assumed trajectory. The upper speed limit and the safety
 * constraint are hard; v >= 0 is hard; the lower speed limit shares the
 * soft-slack treatment of the braking bound.
 */
MpcOutput solve_step(const MpcInputs& in, const MpcConfig& cfg);

}  // namespace platoon
