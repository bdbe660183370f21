#pragma once

#include "platoon/vehicle.hpp"

namespace platoon {

/**
 * Worst-case acceleration envelope of one vehicle over a box of operating
 * conditions (speed, mass, slope, gap): lower/upper bounds on the minimum
 * (full braking) and maximum (full power) achievable accelerations.
 * Invariants: a_min_lb <= a_min_ub <= 0 and a_max_lb <= a_max_ub, so the
 * follower's guaranteed-control set is contained in the predecessor's
 * disturbance set.
 */
struct AccelEnvelope {
  double a_min_lb = 0.0;  // strongest possible braking anywhere in the box
  double a_min_ub = 0.0;  // weakest guaranteed braking
  double a_max_lb = 0.0;
  double a_max_ub = 0.0;

  void validate() const;  // throws std::logic_error on ordering violations
};

/// Operating-condition box the envelope is taken over.
struct EnvelopeAssumptions {
  double v_max_mps = 25.0;
  double mass_lo_kg = 40e3;
  double mass_hi_kg = 40e3;
  double alpha_max_rad = 0.05;
};

/// Extremize a_min(v,m,alpha,d) and a_max(v,m,alpha,d) over the box. Every
/// term is monotone in each variable separately, so evaluating the 16 box
/// corners (d in {0, inf}) is exact.
AccelEnvelope accel_envelope(const VehicleParams& p, const EnvelopeAssumptions& box);
AccelEnvelope accel_envelope(const VehicleParams& p, double v_max_mps, double mass_lo_kg,
                             double mass_hi_kg, double alpha_max_rad);

/**
 * Boundary functions of the pairwise safety set S: membership is all four
 * margins >= 0.
 *   g1: gap margin after both vehicles' worst-vs-guaranteed emergency stops
 *   g2: bumper-to-bumper gap
 *   g3: predecessor speed
 *   g4: follower speed
 */
struct SafetyMargins {
  double g1_m = 0.0;
  double g2_m = 0.0;
  double g3_mps = 0.0;
  double g4_mps = 0.0;

  bool in_set(double tol = 0.0) const {
    return g1_m >= -tol && g2_m >= -tol && g3_mps >= -tol && g4_mps >= -tol;
  }
};

SafetyMargins safety_margins(const VehicleState& x_prev, const VehicleState& x_foll,
                             double prev_length_m, const AccelEnvelope& env_prev,
                             const AccelEnvelope& env_foll);

/// Smallest bumper-to-bumper gap with g1 >= 0: the follower's guaranteed
/// stopping distance minus the predecessor's worst-case one, floored at 0.
double min_safe_gap(double v_prev_mps, double v_foll_mps, const AccelEnvelope& env_prev,
                    const AccelEnvelope& env_foll);

/// Certified evasive control: brake at the guaranteed envelope while moving,
/// hold still once stopped. Always inside the follower's admissible set.
double evasive_law(const VehicleState& x_foll, const AccelEnvelope& env_foll);

/**
 * Nagumo boundary check: for a pairwise state within `tol` of the boundary
 * of S and an admissible predecessor acceleration, verify that the inward
 * derivative of every active margin under the evasive law is >= -tol.
 * The inner products are evaluated symbolically case by case.
 * Throws std::invalid_argument if no margin is near active or a_prev is
 * outside the predecessor's admissible set.
 */
bool nagumo_check(const VehicleState& x_prev, const VehicleState& x_foll,
                  double prev_length_m, const AccelEnvelope& env_prev,
                  const AccelEnvelope& env_foll, double a_prev_mps2, double tol = 1e-9);

}  // namespace platoon
