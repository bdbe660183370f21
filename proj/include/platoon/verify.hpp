#pragma once

#include <cstdint>
#include <string>

#include "platoon/coordinator.hpp"

namespace platoon {

/**
 * Verification module: randomized property suites kept independent of the
 * implementation paths they check. The DP oracle re-derives the stage costs
 * from the force balance and enumerates every speed sequence; the invariance
 * suites integrate the two-vehicle kinematics exactly (piecewise constant
 * acceleration) under adversarial predecessor inputs.
 */

struct DpOracleReport {
  int instances = 0;
  int failures = 0;
  double seconds = 0.0;
  std::string first_failure;
};

/// Random small instances (1-6 cells, 2-5 speed levels, 1-3 vehicles, grades
/// within +-6%): plan_clac must reproduce the enumerated optimal cost
/// exactly and the same argmin profile, including infeasibility verdicts.
DpOracleReport verify_dp_oracle(int instances, std::uint64_t seed);

struct InvarianceReport {
  int runs = 0;
  int failures = 0;
  double worst_g2_m = 0.0;
  double worst_margin = 0.0;  // min over all four margins at checkpoints
  double seconds = 0.0;
  std::string first_failure;
};

/// Two-vehicle runs from random states inside S: adversarial piecewise
/// predecessor accelerations, follower under the evasive law; the gap margin
/// g2 must stay >= -1e-6 m in every run.
InvarianceReport verify_safety_invariance(int runs, std::uint64_t seed);

/// Chains of 3-5 vehicles pairwise in S: leader applies an admissible
/// braking profile, every follower the evasive law; all pairwise gaps must
/// stay >= -1e-6 m.
InvarianceReport verify_platoon_invariance(int runs, std::uint64_t seed);

}  // namespace platoon
