#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/vehicle.hpp"

namespace platoon {

/// Speed-limit defaults applied when a road file carries no limit columns.
struct SpeedLimits {
  double vmin_mps = 19.0;
  double vmax_mps = 23.6;
};

struct RoadSample {
  double s_m = 0.0;
  double altitude_m = 0.0;
};

/// One speed-limit segment; segments are right-open intervals keyed by their
/// start position, the last one extends to the road end.
struct LimitSegment {
  double start_m = 0.0;
  double vmin_mps = 0.0;
  double vmax_mps = 0.0;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Road topography and speed limits as functions of longitudinal position.
 *
 * Altitude is piecewise linear between samples, so the slope is the segment
 * secant (constant per segment, sin taken of atan(dh/ds)). Positions are
 * rebased to start at 0. Immutable after construction; safe for concurrent
 * reads.
 */
class RoadProfile {
 public:
  RoadProfile(std::vector<RoadSample> samples, std::vector<LimitSegment> limits);

  double length_m() const { return length_m_; }

  double altitude_at(double s_m) const;      // exact at sample positions
  double slope_at(double s_m) const;         // radians
  double sin_slope_at(double s_m) const;

  /// sin of the mean slope of the cell (s_end - ds, s_end]: the secant of
  /// the altitude difference, exact for piecewise-linear altitude no matter
  /// how the cell straddles sample breakpoints.
  double cell_sin_slope(double s_end_m, double ds_m) const;

  double vmin_at(double s_m) const;
  double vmax_at(double s_m) const;

  /// Extreme limits over a position window (clamped to the road span).
  double vmin_over(double s0_m, double s1_m) const;
  double vmax_over(double s0_m, double s1_m) const;

  const std::vector<RoadSample>& samples() const { return samples_; }
  const std::vector<LimitSegment>& limits() const { return limits_; }

 private:
  std::size_t segment_index(double s_m) const;
  std::size_t limit_index(double s_m) const;

  std::vector<RoadSample> samples_;
  std::vector<LimitSegment> limits_;
  std::vector<double> slope_rad_;  // per altitude segment
  std::vector<double> sin_slope_;
  double length_m_ = 0.0;
};

/// Parse the road CSV format: header `s_m,altitude_m[,vmin_mps,vmax_mps]`,
/// one row per sample; limit columns take effect from that row onward.
/// Throws ParseError (with line number) on malformed rows and
/// std::invalid_argument on validation failures.
RoadProfile load_road(std::istream& in, const SpeedLimits& defaults = {});
RoadProfile load_road_file(const std::string& path, const SpeedLimits& defaults = {});

/// Emit a profile in the road CSV format, resampled on a uniform grid.
void write_road_csv(const RoadProfile& road, std::ostream& out, double sample_ds_m = 25.0);

/// Flat road of the given length.
RoadProfile synth_flat(double length_m, const SpeedLimits& limits = {});

/// Constant-grade ramp.
RoadProfile synth_ramp(double length_m, double grade, const SpeedLimits& limits = {});

/// Piecewise-linear hill: flat approach, uphill, plateau, downhill, flat exit.
RoadProfile synth_hill(double approach_m, double up_m, double up_grade,
                       double plateau_m, double down_m, double down_grade,
                       double exit_m, const SpeedLimits& limits = {});

/// Seeded random hilly road whose steep fraction (per classify_steep at
/// v_ref for `vehicle`) is driven to `target_steep_fraction` by bisecting a
/// grade amplitude. Starts and ends with flat stretches.
struct RandomHillySpec {
  double length_m = 10000.0;
  double target_steep_fraction = 0.23;
  double v_ref_mps = 22.0;
  std::uint64_t seed = 1;
  double max_up_grade = 0.032;    // keep uphills climbable at v_min
  double max_down_grade = 0.030;
  double min_segment_m = 150.0;
  double max_segment_m = 350.0;
  double flat_cap_m = 500.0;      // flat approach and exit
  // Segment boundaries snap to this pitch so a space-discretized planner on
  // the same pitch sees piecewise-constant slopes (0 disables snapping).
  double snap_m = 50.0;
  SpeedLimits limits;
};
RoadProfile synth_random_hilly(const RandomHillySpec& spec, const VehicleParams& vehicle);

enum class SteepKind { UphillPowerLimited, DownhillBrakingRequired };

struct SteepSegment {
  double start_m = 0.0;
  double end_m = 0.0;
  SteepKind kind = SteepKind::UphillPowerLimited;
};

/// Mark the road sections where holding v_ref in steady state (lead vehicle,
/// infinite gap) needs engine power above p_max (uphill) or below p_min,
/// i.e. braking (downhill).
std::vector<SteepSegment> classify_steep(const RoadProfile& road,
                                         const VehicleParams& vehicle, double v_ref_mps);

/// Length-weighted share of the road covered by steep segments.
double steep_fraction(const RoadProfile& road, const VehicleParams& vehicle,
                      double v_ref_mps);

}  // namespace platoon
