#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "platoon/sim.hpp"

namespace platoon {

/**
 * Per-vehicle energy decomposition over a run (or its metrics window).
 * Dissipations (brake, roll, drag) are reported positive, gravity work is
 * signed, engine work is signed with its negative (engine-braking) share
 * reported separately. Balance: E_e = dKE + E_b + E_r + E_d - E_g.
 */
struct EnergyLedger {
  double engine_j = 0.0;
  double engine_neg_j = 0.0;
  double brake_j = 0.0;
  double gravity_j = 0.0;
  double rolling_j = 0.0;
  double drag_j = 0.0;
  double kinetic_delta_j = 0.0;
  double fuel_g = 0.0;
  double distance_m = 0.0;
  double time_s = 0.0;

  double balance_residual_j() const {
    return engine_j - (kinetic_delta_j + brake_j + rolling_j + drag_j - gravity_j);
  }
  double avg_speed_mps() const { return time_s > 0 ? distance_m / time_s : 0.0; }
};

/// Ledger from the run's integrals (accumulated at plant resolution while
/// simulating; exact for the Euler scheme).
std::vector<EnergyLedger> energy_ledger(const TrajectoryLog& log,
                                        const std::vector<VehicleParams>& platoon);

/// Independent ledger recomputed from the logged rows by trapezoidal
/// integration of force*speed; coarser than the run integrals (tick
/// resolution, whole run, no window).
std::vector<EnergyLedger> energy_ledger_from_rows(const TrajectoryLog& log,
                                                  const std::vector<VehicleParams>& platoon);

/// Work-balance tolerance for a run of the given duration (criterion form:
/// scaled integrator tolerance times run length).
double balance_tolerance_j(const std::vector<EnergyLedger>& ledger);

/// Each vehicle's fuel as a percentage of the matching baseline entry.
/// Throws std::invalid_argument on size mismatch or a zero baseline.
std::vector<double> normalize_fuel_percent(const std::vector<double>& fuel_g,
                                           const std::vector<double>& baseline_fuel_g);

/// Largest speed-over-space difference between two vehicles of a log,
/// sampled on a uniform grid over their common position span.
double max_space_speed_gap(const TrajectoryLog& log, int vehicle_a, int vehicle_b,
                           double sample_ds_m = 5.0);

/// True if the vehicle brakes anywhere inside the position window.
bool brakes_in_window(const TrajectoryLog& log, int vehicle, double s0_m, double s1_m,
                      double threshold_n = 1.0);

struct ComparisonCell {
  std::string strategy;
  std::string gap_policy;
  std::vector<double> fuel_g;
  std::vector<double> normalized_percent;
  std::vector<EnergyLedger> ledger;
  double avg_speed_mps = 0.0;
  double beta_g_per_s = 0.0;
};

/// Aligned-text table of normalized fuel percentages (strategies as rows).
void write_comparison_text(const std::vector<ComparisonCell>& cells, std::ostream& out);
void write_comparison_csv(const std::vector<ComparisonCell>& cells, std::ostream& out);

}  // namespace platoon
