#pragma once

#include <string>
#include <vector>

#include "platoon/metrics.hpp"
#include "platoon/sim.hpp"

namespace platoon {

/// Strategy x gap-policy comparison over one road and platoon, run in
/// ideal-tracking mode with per-vehicle alone-under-CC baselines.
struct CompareSpec {
  Scenario base;  // strategy/gap_policy fields are ignored
  std::vector<Strategy> strategies;
  std::vector<GapPolicy> gap_policies;
  double avg_speed_tol_mps = 0.05;
  double beta_tune_tol_mps = 0.02;
  bool keep_logs = false;
};

struct CompareCellResult {
  ComparisonCell cell;
  TrajectoryLog log;  // kept only when keep_logs is set
};

struct CompareOutcome {
  std::vector<CompareCellResult> cells;
  std::vector<double> baseline_fuel_g;  // per platoon slot, alone under CC
  double target_avg_mps = 0.0;          // the CC average every cell must match
  std::vector<std::string> notes;
};

/**
 * Run the comparison matrix: measure the CC average speed first, bisect each
 * look-ahead strategy's beta until its realized average matches, then run
 * every cell and normalize fuel against the alone-CC baselines. Throws if a
 * cell's average speed cannot be brought within tolerance (the comparison
 * would be invalid).
 */
CompareOutcome run_comparison(const CompareSpec& spec);

}  // namespace platoon
