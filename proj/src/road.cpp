#include "platoon/road.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace platoon {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& field, int line_no, const char* what) {
  const std::string t = trim(field);
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw ParseError("road csv line " + std::to_string(line_no) + ": bad " + what +
                     " value '" + field + "'");
  }
  if (pos != t.size())
    throw ParseError("road csv line " + std::to_string(line_no) + ": trailing junk in " +
                     std::string(what) + " value '" + field + "'");
  return value;
}

}  // namespace

RoadProfile::RoadProfile(std::vector<RoadSample> samples, std::vector<LimitSegment> limits)
    : samples_(std::move(samples)), limits_(std::move(limits)) {
  if (samples_.size() < 2)
    throw std::invalid_argument("RoadProfile: need at least 2 altitude samples");
  const double base = samples_.front().s_m;
  for (auto& s : samples_) s.s_m -= base;
  for (auto& l : limits_) l.start_m -= base;
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].s_m > samples_[i - 1].s_m))
      throw std::invalid_argument("RoadProfile: sample positions must be strictly increasing (at s=" +
                                  std::to_string(samples_[i].s_m + base) + ")");
  }
  length_m_ = samples_.back().s_m;

  if (limits_.empty()) limits_.push_back({0.0, SpeedLimits{}.vmin_mps, SpeedLimits{}.vmax_mps});
  if (limits_.front().start_m > 0.0)
    limits_.insert(limits_.begin(), {0.0, limits_.front().vmin_mps, limits_.front().vmax_mps});
  for (std::size_t i = 0; i < limits_.size(); ++i) {
    const auto& l = limits_[i];
    if (!(l.vmin_mps > 0) || !(l.vmax_mps > 0) || l.vmin_mps > l.vmax_mps)
      throw std::invalid_argument("RoadProfile: limit segment needs 0 < vmin <= vmax");
    if (i > 0 && !(l.start_m > limits_[i - 1].start_m))
      throw std::invalid_argument("RoadProfile: limit starts must be strictly increasing");
  }

  slope_rad_.resize(samples_.size() - 1);
  sin_slope_.resize(samples_.size() - 1);
  for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
    const double dh = samples_[i + 1].altitude_m - samples_[i].altitude_m;
    const double ds = samples_[i + 1].s_m - samples_[i].s_m;
    slope_rad_[i] = std::atan2(dh, ds);
    sin_slope_[i] = std::sin(slope_rad_[i]);
  }
}

std::size_t RoadProfile::segment_index(double s_m) const {
  if (s_m < 0.0 || s_m > length_m_)
    throw std::domain_error("RoadProfile: position " + std::to_string(s_m) +
                            " outside [0, " + std::to_string(length_m_) + "]");
  auto it = std::upper_bound(samples_.begin(), samples_.end(), s_m,
                             [](double v, const RoadSample& smp) { return v < smp.s_m; });
  std::size_t i = static_cast<std::size_t>(it - samples_.begin());
  if (i == 0) return 0;
  if (i >= samples_.size()) return samples_.size() - 2;
  return i - 1;
}

double RoadProfile::altitude_at(double s_m) const {
  const std::size_t i = segment_index(s_m);
  const auto& a = samples_[i];
  const auto& b = samples_[i + 1];
  const double t = (s_m - a.s_m) / (b.s_m - a.s_m);
  return a.altitude_m + t * (b.altitude_m - a.altitude_m);
}

double RoadProfile::slope_at(double s_m) const { return slope_rad_[segment_index(s_m)]; }

double RoadProfile::sin_slope_at(double s_m) const { return sin_slope_[segment_index(s_m)]; }

double RoadProfile::cell_sin_slope(double s_end_m, double ds_m) const {
  const double dh = altitude_at(s_end_m) - altitude_at(s_end_m - ds_m);
  return std::sin(std::atan2(dh, ds_m));
}

std::size_t RoadProfile::limit_index(double s_m) const {
  auto it = std::upper_bound(limits_.begin(), limits_.end(), s_m,
                             [](double v, const LimitSegment& l) { return v < l.start_m; });
  return it == limits_.begin() ? 0 : static_cast<std::size_t>(it - limits_.begin()) - 1;
}

double RoadProfile::vmin_at(double s_m) const { return limits_[limit_index(s_m)].vmin_mps; }
double RoadProfile::vmax_at(double s_m) const { return limits_[limit_index(s_m)].vmax_mps; }

double RoadProfile::vmin_over(double s0_m, double s1_m) const {
  double lo = std::max(0.0, std::min(s0_m, s1_m));
  double hi = std::min(length_m_, std::max(s0_m, s1_m));
  double out = limits_[limit_index(lo)].vmin_mps;
  for (const auto& l : limits_)
    if (l.start_m > lo && l.start_m <= hi) out = std::min(out, l.vmin_mps);
  return out;
}

double RoadProfile::vmax_over(double s0_m, double s1_m) const {
  double lo = std::max(0.0, std::min(s0_m, s1_m));
  double hi = std::min(length_m_, std::max(s0_m, s1_m));
  double out = limits_[limit_index(lo)].vmax_mps;
  for (const auto& l : limits_)
    if (l.start_m > lo && l.start_m <= hi) out = std::max(out, l.vmax_mps);
  return out;
}

RoadProfile load_road(std::istream& in, const SpeedLimits& defaults) {
  std::vector<RoadSample> samples;
  std::vector<LimitSegment> limits;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (t.rfind("s_m", 0) == 0) continue;  // header row is optional
    }
    const auto fields = split_csv(t);
    if (fields.size() != 2 && fields.size() != 4)
      throw ParseError("road csv line " + std::to_string(line_no) +
                       ": expected 2 or 4 fields, got " + std::to_string(fields.size()));
    RoadSample smp;
    smp.s_m = parse_double(fields[0], line_no, "position");
    smp.altitude_m = parse_double(fields[1], line_no, "altitude");
    samples.push_back(smp);
    if (fields.size() == 4 && !(trim(fields[2]).empty() && trim(fields[3]).empty())) {
      LimitSegment seg;
      seg.start_m = smp.s_m;
      seg.vmin_mps = parse_double(fields[2], line_no, "vmin");
      seg.vmax_mps = parse_double(fields[3], line_no, "vmax");
      if (!limits.empty() && limits.back().start_m == seg.start_m)
        limits.back() = seg;
      else
        limits.push_back(seg);
    }
  }
  if (samples.size() < 2)
    throw std::invalid_argument("road csv: need at least 2 samples");
  if (limits.empty() || limits.front().start_m > samples.front().s_m)
    limits.insert(limits.begin(),
                  {samples.front().s_m, defaults.vmin_mps, defaults.vmax_mps});
  return RoadProfile(std::move(samples), std::move(limits));
}

RoadProfile load_road_file(const std::string& path, const SpeedLimits& defaults) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open road file: " + path);
  return load_road(in, defaults);
}

void write_road_csv(const RoadProfile& road, std::ostream& out, double sample_ds_m) {
  if (sample_ds_m <= 0) throw std::invalid_argument("write_road_csv: sample spacing must be positive");
  out << "s_m,altitude_m,vmin_mps,vmax_mps\n";
  char buf[160];
  std::size_t next_limit = 0;
  const auto& limits = road.limits();
  for (double s = 0.0;; s += sample_ds_m) {
    if (s > road.length_m()) s = road.length_m();
    bool emit_limit = false;
    LimitSegment lim{};
    while (next_limit < limits.size() && limits[next_limit].start_m <= s + 1e-9) {
      lim = limits[next_limit];
      emit_limit = true;
      ++next_limit;
    }
    if (emit_limit)
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", s, road.altitude_at(s),
                    lim.vmin_mps, lim.vmax_mps);
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,,\n", s, road.altitude_at(s));
    out << buf;
    if (s >= road.length_m()) break;
  }
}

RoadProfile synth_flat(double length_m, const SpeedLimits& limits) {
  return RoadProfile({{0.0, 0.0}, {length_m, 0.0}},
                     {{0.0, limits.vmin_mps, limits.vmax_mps}});
}

RoadProfile synth_ramp(double length_m, double grade, const SpeedLimits& limits) {
  return RoadProfile({{0.0, 0.0}, {length_m, grade * length_m}},
                     {{0.0, limits.vmin_mps, limits.vmax_mps}});
}

RoadProfile synth_hill(double approach_m, double up_m, double up_grade, double plateau_m,
                       double down_m, double down_grade, double exit_m,
                       const SpeedLimits& limits) {
  std::vector<RoadSample> samples{{0.0, 0.0}};
  double s = 0.0, h = 0.0;
  const auto add = [&](double len, double grade) {
    if (len <= 0) return;
    s += len;
    h += grade * len;
    samples.push_back({s, h});
  };
  add(approach_m, 0.0);
  add(up_m, up_grade);
  add(plateau_m, 0.0);
  add(down_m, down_grade);
  add(exit_m, 0.0);
  if (samples.size() < 2)
    throw std::invalid_argument("synth_hill: all section lengths are zero");
  return RoadProfile(std::move(samples), {{0.0, limits.vmin_mps, limits.vmax_mps}});
}

RoadProfile synth_random_hilly(const RandomHillySpec& spec, const VehicleParams& vehicle) {
  if (spec.length_m < 4 * spec.flat_cap_m)
    throw std::invalid_argument("synth_random_hilly: road too short for flat caps");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> seg_len(spec.min_segment_m, spec.max_segment_m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Normalized grade pattern in [-1, 1]; the amplitude that maps it onto
  // real grades is bisected against the measured steep fraction below.
  struct Piece {
    double len;
    double norm_grade;
  };
  std::vector<Piece> pattern;
  double interior = spec.length_m - 2 * spec.flat_cap_m;
  double acc = 0.0;
  double alt_norm = 0.0;  // altitude in normalized-grade units, kept bounded
  int kind_prev = 0;
  const auto snap = [&](double len) {
    if (spec.snap_m <= 0) return len;
    return std::max(spec.snap_m, std::round(len / spec.snap_m) * spec.snap_m);
  };
  while (acc < interior) {
    const double len = std::min(snap(seg_len(rng)), interior - acc);
    const double r = unit(rng);
    int kind;  // -1 down, 0 flat, +1 up
    if (alt_norm > 900.0)
      kind = -1;
    else if (alt_norm < -900.0)
      kind = 1;
    else if (r < 0.30)
      kind = 0;
    else if (r < 0.65)
      kind = 1;
    else
      kind = -1;
    if (kind != 0 && kind == -kind_prev && unit(rng) < 0.35) kind = 0;  // fewer V-notches
    const double mag = kind == 0 ? 0.0 : 0.35 + 0.65 * unit(rng);
    pattern.push_back({len, kind * mag});
    alt_norm += kind * mag * len;
    kind_prev = kind;
    acc += len;
  }

  const auto build = [&](double amplitude) {
    std::vector<RoadSample> samples{{0.0, 0.0}};
    double s = 0.0, h = 0.0;
    const auto add = [&](double len, double grade) {
      if (len <= 0) return;
      s += len;
      h += grade * len;
      samples.push_back({s, h});
    };
    add(spec.flat_cap_m, 0.0);
    for (const auto& piece : pattern) {
      double grade = amplitude * piece.norm_grade;
      grade = std::clamp(grade, -spec.max_down_grade, spec.max_up_grade);
      add(piece.len, grade);
    }
    add(spec.flat_cap_m, 0.0);
    return RoadProfile(std::move(samples),
                       {{0.0, spec.limits.vmin_mps, spec.limits.vmax_mps}});
  };

  double lo = 0.0, hi = std::max(spec.max_up_grade, spec.max_down_grade);
  RoadProfile road = build(hi);
  double frac_hi = steep_fraction(road, vehicle, spec.v_ref_mps);
  if (frac_hi < spec.target_steep_fraction) return road;  // saturated; best we can do
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    road = build(mid);
    const double frac = steep_fraction(road, vehicle, spec.v_ref_mps);
    if (std::abs(frac - spec.target_steep_fraction) < 0.005) return road;
    if (frac < spec.target_steep_fraction)
      lo = mid;
    else
      hi = mid;
  }
  return build(0.5 * (lo + hi));
}

std::vector<SteepSegment> classify_steep(const RoadProfile& road,
                                         const VehicleParams& vehicle, double v_ref_mps) {
  if (!(v_ref_mps > 0)) throw std::invalid_argument("classify_steep: v_ref must be positive");
  std::vector<SteepSegment> out;
  const auto& samples = road.samples();
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const double slope = road.slope_at(0.5 * (samples[i].s_m + samples[i + 1].s_m));
    const ForceBreakdown ext =
        external_forces(vehicle, {v_ref_mps, samples[i].s_m}, kInfiniteGap, slope);
    const double hold_power = -ext.total_n() * v_ref_mps;  // steady-state engine power
    SteepKind kind;
    if (hold_power > vehicle.p_max_w)
      kind = SteepKind::UphillPowerLimited;
    else if (hold_power < vehicle.p_min_w)
      kind = SteepKind::DownhillBrakingRequired;
    else
      continue;
    if (!out.empty() && out.back().kind == kind && out.back().end_m == samples[i].s_m)
      out.back().end_m = samples[i + 1].s_m;
    else
      out.push_back({samples[i].s_m, samples[i + 1].s_m, kind});
  }
  return out;
}

double steep_fraction(const RoadProfile& road, const VehicleParams& vehicle,
                      double v_ref_mps) {
  double steep = 0.0;
  for (const auto& seg : classify_steep(road, vehicle, v_ref_mps))
    steep += seg.end_m - seg.start_m;
  return steep / road.length_m();
}

}  // namespace platoon
