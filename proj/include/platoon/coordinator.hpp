#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "platoon/road.hpp"
#include "platoon/vehicle.hpp"

namespace platoon {

/// Coordinator (space-domain DP) parameters.
struct DpConfig {
  double ds_m = 50.0;       // space cell length
  int horizon_cells = 100;  // cells per plan (5 km at the default ds)
  int speed_levels = 41;    // quantized speed grid size
  double beta_g_per_s = 1.0;  // fuel-vs-travel-time trade-off weight
  // Pin the speed at the last grid point (used by comparison runs so the
  // terminal kinetic-energy credit cancels across strategies).
  std::optional<double> final_speed_mps;
  // Closed-loop replanning triggers.
  double refresh_distance_m = 250.0;
  double replan_deviation_mps = 1.0;
};

/**
 * The coordinator's product: one speed-over-space profile shared by every
 * vehicle, the per-follower time gaps, and the planned per-vehicle forces
 * (diagnostic). grid has C+1 points for C cells; engine/brake hold C values
 * per vehicle, one per cell, indexed by the cell's end grid point minus one.
 */
struct SpeedProfile {
  double ds_m = 0.0;
  std::vector<double> grid_m;
  std::vector<double> v_mps;
  std::vector<double> time_gaps_s;             // per follower, size N-1
  std::vector<std::vector<double>> engine_n;   // [vehicle][cell]
  std::vector<std::vector<double>> brake_n;    // [vehicle][cell]

  double start_m() const { return grid_m.front(); }
  double end_m() const { return grid_m.back(); }
  std::size_t cells() const { return grid_m.empty() ? 0 : grid_m.size() - 1; }

  /// Linear interpolation over the grid, clamped at the ends.
  double v_at(double s_m) const;

  /// Distance over travel time, with per-cell time ds/v(z_end) (the DP's
  /// own time model).
  double average_speed_mps() const;
};

/// One DP stage: all vehicles move one cell, arriving at z_end with speed
/// v_to having left the previous grid point at v_from.
struct DpTransition {
  bool feasible = false;
  double cost_g = 0.0;               // stage fuel + beta * stage time
  std::vector<double> engine_n;      // per vehicle
  std::vector<double> brake_n;
  int blocking_vehicle = -1;         // first vehicle that made it infeasible
};

/// Force balance of the space-discretized model, solved per vehicle: the
/// engine takes the required force clamped to its power bounds, the brake
/// absorbs any deficit. Infeasible when the request exceeds max power, the
/// brake floor, or the planned gap v_to*tau - l is not positive.
/// Stage cost: sum_i ds*(p1_i*F_e_i + p0_i/v_to) + beta*ds/v_to.
DpTransition dp_transition(const std::vector<VehicleParams>& platoon,
                           const std::vector<double>& time_gaps_s, double v_from_mps,
                           double v_to_mps, double z_end_m, const RoadProfile& road,
                           double ds_m, double beta_g_per_s);

struct PlanResult {
  bool feasible = false;
  SpeedProfile profile;
  double cost_g = 0.0;     // optimal objective, terminal credit included
  int blocking_cell = -1;  // first cell with no feasible transition
  std::string message;
};

/// Backward value iteration over (cell, speed level) minimizing platoon fuel
/// plus weighted travel time, with a terminal kinetic-energy credit. The
/// start speed enters as an off-grid node at the first grid point; equal-cost
/// transitions resolve to the higher arrival speed.
PlanResult plan_clac(const std::vector<VehicleParams>& platoon,
                     const std::vector<double>& time_gaps_s, const RoadProfile& road,
                     double start_pos_m, double start_speed_mps, const DpConfig& cfg);

/// Single-vehicle look-ahead plan: plan_clac with a platoon of one.
PlanResult plan_lac(const VehicleParams& vehicle, const RoadProfile& road,
                    double start_pos_m, double start_speed_mps, const DpConfig& cfg);

/// Rule-based cruise control: hold v_set when the equilibrium force fits the
/// engine bounds, otherwise full power below v_set and coasting above it;
/// brake only to keep the road speed limit.
struct CcCommand {
  double engine_n = 0.0;
  double brake_n = 0.0;
};
CcCommand cc_command(double v_set_mps, const VehicleState& state, const VehicleParams& p,
                     double gap_m, double slope_rad, double vmax_mps);

struct BetaTune {
  bool converged = false;
  double beta_g_per_s = 0.0;
  double achieved_avg_mps = 0.0;
  int plans = 0;
  std::string message;
};

/// Bisect beta until the planned profile's average speed is within tol of
/// the target. Average speed is non-decreasing in beta.
BetaTune tune_beta(const std::vector<VehicleParams>& platoon,
                   const std::vector<double>& time_gaps_s, const RoadProfile& road,
                   double start_pos_m, double start_speed_mps, DpConfig cfg,
                   double target_avg_mps, double tol_mps);

/// Profile export: z_m,v_mps, then one engine/brake column pair per vehicle.
void write_profile_csv(const SpeedProfile& profile, std::ostream& out);

}  // namespace platoon
