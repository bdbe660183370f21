#include "platoon/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace platoon {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("VehicleParams: " + what);
}

}  // namespace

void VehicleParams::validate() const {
  require(mass_kg > 0, "mass must be positive");
  require(length_m > 0, "length must be positive");
  require(frontal_area_m2 > 0, "frontal area must be positive");
  require(air_density_kg_m3 > 0, "air density must be positive");
  require(cd0 > 0, "cd0 must be positive");
  require(cd2_m > 0, "cd2 must be positive");
  require(cd1_m >= 0 && cd1_m < cd2_m, "cd1 must lie in [0, cd2) so C_D(d) > 0 for d >= 0");
  require(c_r >= 0, "rolling coefficient must be non-negative");
  require(p_min_w < 0 && p_max_w > 0, "power bounds must satisfy p_min < 0 < p_max");
  require(fuel_p1_g_per_j > 0, "fuel slope p1 must be positive");
  require(fuel_p0_g_per_s >= 0, "idle fuel p0 must be non-negative");
  require(eta_brake * mu > 0, "eta_brake*mu must be positive");
  require(g_mps2 > 0, "gravity must be positive");
  require(standstill_accel_cap_mps2 > 0, "standstill accel cap must be positive");
}

double drag_coefficient(const VehicleParams& p, double gap_m) {
  if (std::isinf(gap_m)) return p.cd0;
  if (gap_m < 0) throw std::domain_error("drag_coefficient: negative gap");
  return p.cd0 * (1.0 - p.cd1_m / (p.cd2_m + gap_m));
}

ForceBreakdown external_forces(const VehicleParams& p, const VehicleState& x,
                               double gap_m, double slope_rad) {
  ForceBreakdown f;
  f.gravity_n = -p.mass_kg * p.g_mps2 * std::sin(slope_rad);
  f.rolling_n = -p.c_r * p.mass_kg * p.g_mps2;
  f.drag_n = -0.5 * p.air_density_kg_m3 * p.frontal_area_m2 *
             drag_coefficient(p, gap_m) * x.v_mps * x.v_mps;
  return f;
}

InputBounds input_bounds(const VehicleParams& p, double v_mps) {
  const double cap = p.mass_kg * p.standstill_accel_cap_mps2;
  InputBounds b;
  if (v_mps <= 0.0) {
    b.engine = {0.0, cap};
  } else {
    b.engine = {std::max(p.p_min_w / v_mps, -cap), std::min(p.p_max_w / v_mps, cap)};
  }
  b.brake = {p.brake_force_floor_n(), 0.0};
  return b;
}

double fuel_flow(const VehicleParams& p, double engine_force_n, double v_mps) {
  const double power = engine_force_n * v_mps;
  const double slack = 1e-9 * std::max({1.0, p.p_max_w, -p.p_min_w});
  if (power < p.p_min_w - slack || power > p.p_max_w + slack)
    throw std::domain_error("fuel_flow: engine power outside [p_min, p_max]");
  return std::max(0.0, fuel_rate_affine(p, power));
}

namespace {

double accel_at(const VehicleParams& p, double v, double s, double engine_n,
                double brake_n, double gap_m, const SlopeFn& slope_at) {
  VehicleState x{std::max(v, 0.0), s};
  const ForceBreakdown ext = external_forces(p, x, gap_m, slope_at(s));
  return (engine_n + brake_n + ext.total_n()) / p.mass_kg;
}

}  // namespace

VehicleState step_plant(const VehicleParams& p, const VehicleState& x,
                        double engine_n, double brake_n, double gap_m,
                        const SlopeFn& slope_at, double dt_s, Integrator integrator) {
  if (dt_s <= 0) throw std::invalid_argument("step_plant: dt must be positive");
  if (integrator == Integrator::Euler) {
    return step_plant_with_work(p, x, engine_n, brake_n, gap_m, slope_at, dt_s).next;
  }
  // Classic RK4 with speed floored at zero inside the stages.
  const auto fv = [&](double v, double s) {
    return accel_at(p, v, s, engine_n, brake_n, gap_m, slope_at);
  };
  const double v0 = x.v_mps, s0 = x.s_m;
  const double k1v = fv(v0, s0), k1s = v0;
  const double k2v = fv(std::max(v0 + 0.5 * dt_s * k1v, 0.0), s0 + 0.5 * dt_s * k1s);
  const double k2s = std::max(v0 + 0.5 * dt_s * k1v, 0.0);
  const double k3v = fv(std::max(v0 + 0.5 * dt_s * k2v, 0.0), s0 + 0.5 * dt_s * k2s);
  const double k3s = std::max(v0 + 0.5 * dt_s * k2v, 0.0);
  const double k4v = fv(std::max(v0 + dt_s * k3v, 0.0), s0 + dt_s * k3s);
  const double k4s = std::max(v0 + dt_s * k3v, 0.0);
  VehicleState out;
  out.v_mps = std::max(v0 + dt_s / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v), 0.0);
  out.s_m = s0 + dt_s / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);
  return out;
}

StepWork step_plant_with_work(const VehicleParams& p, const VehicleState& x,
                              double engine_n, double brake_n, double gap_m,
                              const SlopeFn& slope_at, double dt_s) {
  StepWork w;
  const ForceBreakdown ext = external_forces(p, x, gap_m, slope_at(x.s_m));
  const double total = engine_n + brake_n + ext.total_n();
  const double a = total / p.mass_kg;

  // Standstill: resistive forces cannot push the vehicle backwards.
  if (x.v_mps <= 0.0 && total <= 0.0) {
    w.next = {0.0, x.s_m};
    return w;
  }

  double v1 = x.v_mps + a * dt_s;
  double travel;
  double effective_dt = dt_s;
  if (v1 < 0.0) {
    // Stop partway through the step; forces act only while moving.
    effective_dt = x.v_mps / (-a);
    v1 = 0.0;
    travel = 0.5 * x.v_mps * effective_dt;
  } else {
    travel = 0.5 * (x.v_mps + v1) * dt_s;
  }
  // Work with the midstep speed: exact for constant force over the step.
  const double v_mid = 0.5 * (x.v_mps + v1);
  const double wdt = v_mid * effective_dt;
  w.engine_j = engine_n * wdt;
  w.brake_j = brake_n * wdt;
  w.gravity_j = ext.gravity_n * wdt;
  w.rolling_j = ext.rolling_n * wdt;
  w.drag_j = ext.drag_n * wdt;
  w.next = {v1, x.s_m + travel};
  return w;
}

ForceSplit split_required_force(const VehicleParams& p, double v_mps,
                                double required_n, bool allow_overpower) {
  const InputBounds b = input_bounds(p, std::max(v_mps, 0.0));
  ForceSplit out;
  const double engine_hi = allow_overpower
                               ? std::numeric_limits<double>::infinity()
                               : b.engine.hi_n;
  if (required_n >= b.engine.lo_n) {
    out.engine_n = std::min(required_n, engine_hi);
    out.feasible = required_n <= engine_hi;
  } else {
    out.engine_n = b.engine.lo_n;
    out.brake_n = required_n - b.engine.lo_n;
    if (!allow_overpower && out.brake_n < b.brake.lo_n) {
      out.brake_n = b.brake.lo_n;
      out.feasible = false;
    }
  }
  return out;
}

}  // namespace platoon
