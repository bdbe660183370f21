#pragma once

#include <functional>
#include <limits>

namespace platoon {

inline constexpr double kInfiniteGap = std::numeric_limits<double>::infinity();

/**
 * Parameters of one heavy-duty vehicle: mass, geometry, resistance
 * coefficients, the gap-dependent drag model C_D(d) = cd0*(1 - cd1/(cd2+d)),
 * powertrain power limits, the affine fuel-flow model and the braking
 * capacity. Defaults describe a 40 t long-haul truck.
 */
struct VehicleParams {
  double mass_kg = 40e3;
  double length_m = 18.0;
  double c_r = 3e-3;  // rolling resistance coefficient
  double frontal_area_m2 = 10.0;
  double air_density_kg_m3 = 1.225;
  double cd0 = 0.6;    // drag coefficient at infinite gap
  double cd1_m = 4.0;  // gap-reduction numerator
  double cd2_m = 10.0; // gap-reduction denominator offset
  double p_max_w = 298e3;  // engine power ceiling
  double p_min_w = -9e3;   // engine power floor (coasting / engine brake)
  double fuel_p1_g_per_j = 5e-5;  // fuel flow per unit engine power
  double fuel_p0_g_per_s = 0.3;   // idle fuel flow
  double eta_brake = 1.0;  // braking system efficiency
  double mu = 0.5;         // road friction coefficient
  double g_mps2 = 9.81;
  // Engine force magnitude cap m*a used near standstill, where the power
  // bound P/v is singular.
  double standstill_accel_cap_mps2 = 1.0;

  double brake_force_floor_n() const { return -mass_kg * eta_brake * g_mps2 * mu; }

  // Throws std::invalid_argument on an inconsistent parameter set.
  void validate() const;
};

struct VehicleState {
  double v_mps = 0.0;  // speed, never negative
  double s_m = 0.0;    // longitudinal position
};

/// Signed forces acting on the vehicle; brake, rolling and drag are <= 0
/// whenever the vehicle moves forward.
struct ForceBreakdown {
  double engine_n = 0.0;
  double brake_n = 0.0;
  double gravity_n = 0.0;
  double rolling_n = 0.0;
  double drag_n = 0.0;

  double total_n() const { return engine_n + brake_n + gravity_n + rolling_n + drag_n; }
};

struct ForceRange {
  double lo_n = 0.0;
  double hi_n = 0.0;
};

struct InputBounds {
  ForceRange engine;
  ForceRange brake;
};

/// Drag coefficient behind a predecessor at the given bumper-to-bumper gap;
/// pass kInfiniteGap for a lead vehicle. Throws std::domain_error on a
/// negative gap.
double drag_coefficient(const VehicleParams& p, double gap_m);

/// Gravity, rolling and drag forces at the given state; engine and brake
/// entries are zero.
ForceBreakdown external_forces(const VehicleParams& p, const VehicleState& x,
                               double gap_m, double slope_rad);

/// Admissible engine and brake force ranges at speed v. The engine range is
/// the power bound P/v clamped to +-m*standstill_cap; at v = 0 it degenerates
/// to [0, m*standstill_cap].
InputBounds input_bounds(const VehicleParams& p, double v_mps);

/// Fuel flow (g/s) for an engine force at speed v; affine in the engine
/// power and clamped at zero. Throws std::domain_error if the power is
/// outside [p_min, p_max].
double fuel_flow(const VehicleParams& p, double engine_force_n, double v_mps);

/// The affine fuel model evaluated raw: p1*power + p0, no clamp, no bounds
/// check. Planner cost and extrapolated follower accounting use this.
inline double fuel_rate_affine(const VehicleParams& p, double power_w) {
  return p.fuel_p1_g_per_j * power_w + p.fuel_p0_g_per_s;
}

enum class Integrator { Euler, Rk4 };

using SlopeFn = std::function<double(double)>;  // position -> slope (rad)

/// Integrate the longitudinal dynamics m*dv/dt = F_e + F_b + F_g + F_r + F_d,
/// ds/dt = v over one step with fixed inputs. Speed is clamped at zero (the
/// Euler path resolves the stopping instant exactly; Rk4 clamps the result).
VehicleState step_plant(const VehicleParams& p, const VehicleState& x,
                        double engine_n, double brake_n, double gap_m,
                        const SlopeFn& slope_at, double dt_s,
                        Integrator integrator = Integrator::Euler);

/// Euler plant step that also returns the work done by each force over the
/// step, computed with the midstep speed so that the discrete work-energy
/// identity m*(v1^2 - v0^2)/2 = sum of works holds exactly.
struct StepWork {
  VehicleState next;
  double engine_j = 0.0;
  double brake_j = 0.0;
  double gravity_j = 0.0;
  double rolling_j = 0.0;
  double drag_j = 0.0;
};
StepWork step_plant_with_work(const VehicleParams& p, const VehicleState& x,
                              double engine_n, double brake_n, double gap_m,
                              const SlopeFn& slope_at, double dt_s);

/// Split a required total input force into engine and brake shares: the
/// engine takes what it can within its bounds, the brake absorbs any deficit
/// below the engine floor. `allow_overpower` lifts the engine ceiling (and
/// the brake floor), used by ideal-tracking followers.
struct ForceSplit {
  double engine_n = 0.0;
  double brake_n = 0.0;
  bool feasible = true;  // false when the request exceeds the lifted bounds
};
ForceSplit split_required_force(const VehicleParams& p, double v_mps,
                                double required_n, bool allow_overpower = false);

}  // namespace platoon
