#include "platoon/safety.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace platoon {

void AccelEnvelope::validate() const {
  if (!(a_min_lb <= a_min_ub) || !(a_min_ub <= 0.0))
    throw std::logic_error("AccelEnvelope: need a_min_lb <= a_min_ub <= 0");
  if (!(a_max_lb <= a_max_ub))
    throw std::logic_error("AccelEnvelope: need a_max_lb <= a_max_ub");
}

namespace {

double drag_accel(const VehicleParams& p, double v, double m, double gap) {
  return 0.5 * p.air_density_kg_m3 * p.frontal_area_m2 * drag_coefficient(p, gap) * v * v / m;
}

// Full-braking acceleration at one operating point.
double a_min_point(const VehicleParams& p, double v, double m, double alpha, double gap) {
  return -p.mu * p.eta_brake * p.g_mps2 - p.g_mps2 * std::sin(alpha) - p.c_r * p.g_mps2 -
         drag_accel(p, v, m, gap);
}

// Full-power acceleration; the engine term saturates at the standstill cap.
double a_max_point(const VehicleParams& p, double v, double m, double alpha, double gap) {
  const double engine =
      v > 0.0 ? std::min(p.p_max_w / (m * v), p.standstill_accel_cap_mps2)
              : p.standstill_accel_cap_mps2;
  return engine - p.g_mps2 * std::sin(alpha) - p.c_r * p.g_mps2 - drag_accel(p, v, m, gap);
}

}  // namespace

AccelEnvelope accel_envelope(const VehicleParams& p, const EnvelopeAssumptions& box) {
  if (!(box.mass_lo_kg > 0) || !(box.mass_lo_kg <= box.mass_hi_kg))
    throw std::invalid_argument("accel_envelope: empty mass range");
  if (!(box.v_max_mps >= 0) || !(box.alpha_max_rad >= 0) ||
      !(box.alpha_max_rad < 1.5707963267948966))
    throw std::invalid_argument("accel_envelope: bad speed or slope bound");

  const double vs[2] = {0.0, box.v_max_mps};
  const double ms[2] = {box.mass_lo_kg, box.mass_hi_kg};
  const double as[2] = {-box.alpha_max_rad, box.alpha_max_rad};
  const double ds[2] = {0.0, kInfiniteGap};

  AccelEnvelope env;
  env.a_min_lb = env.a_max_lb = std::numeric_limits<double>::infinity();
  env.a_min_ub = env.a_max_ub = -std::numeric_limits<double>::infinity();
  for (double v : vs)
    for (double m : ms)
      for (double a : as)
        for (double d : ds) {
          const double lo = a_min_point(p, v, m, a, d);
          const double hi = a_max_point(p, v, m, a, d);
          env.a_min_lb = std::min(env.a_min_lb, lo);
          env.a_min_ub = std::max(env.a_min_ub, lo);
          env.a_max_lb = std::min(env.a_max_lb, hi);
          env.a_max_ub = std::max(env.a_max_ub, hi);
        }
  env.validate();
  return env;
}

AccelEnvelope accel_envelope(const VehicleParams& p, double v_max_mps, double mass_lo_kg,
                             double mass_hi_kg, double alpha_max_rad) {
  return accel_envelope(p, EnvelopeAssumptions{v_max_mps, mass_lo_kg, mass_hi_kg, alpha_max_rad});
}

SafetyMargins safety_margins(const VehicleState& x_prev, const VehicleState& x_foll,
                             double prev_length_m, const AccelEnvelope& env_prev,
                             const AccelEnvelope& env_foll) {
  SafetyMargins m;
  m.g2_m = x_prev.s_m - x_foll.s_m - prev_length_m;
  m.g1_m = m.g2_m - x_prev.v_mps * x_prev.v_mps / (2.0 * env_prev.a_min_lb) +
           x_foll.v_mps * x_foll.v_mps / (2.0 * env_foll.a_min_ub);
  m.g3_mps = x_prev.v_mps;
  m.g4_mps = x_foll.v_mps;
  return m;
}

double min_safe_gap(double v_prev_mps, double v_foll_mps, const AccelEnvelope& env_prev,
                    const AccelEnvelope& env_foll) {
  const double gap = v_prev_mps * v_prev_mps / (2.0 * env_prev.a_min_lb) -
                     v_foll_mps * v_foll_mps / (2.0 * env_foll.a_min_ub);
  return std::max(0.0, gap);
}

double evasive_law(const VehicleState& x_foll, const AccelEnvelope& env_foll) {
  return x_foll.v_mps > 0.0 ? env_foll.a_min_ub : 0.0;
}

bool nagumo_check(const VehicleState& x_prev, const VehicleState& x_foll,
                  double prev_length_m, const AccelEnvelope& env_prev,
                  const AccelEnvelope& env_foll, double a_prev_mps2, double tol) {
  const SafetyMargins m =
      safety_margins(x_prev, x_foll, prev_length_m, env_prev, env_foll);
  if (!m.in_set(tol))
    throw std::invalid_argument("nagumo_check: state outside the safety set");

  const bool g1_active = m.g1_m <= tol;
  const bool g2_active = m.g2_m <= tol;
  const bool g3_active = m.g3_mps <= tol;
  const bool g4_active = m.g4_mps <= tol;
  if (!(g1_active || g2_active || g3_active || g4_active))
    throw std::invalid_argument("nagumo_check: state not near the set boundary");

  // Predecessor input admissibility (its disturbance set).
  const double a_prev_lo = m.g3_mps > 0.0 ? env_prev.a_min_lb : 0.0;
  if (a_prev_mps2 < a_prev_lo - tol || a_prev_mps2 > env_prev.a_max_ub + tol)
    throw std::invalid_argument("nagumo_check: predecessor acceleration not admissible");

  bool ok = true;
  if (g1_active) {
    // Boundary-projected follower input: at g4 active the case split gives 0.
    const double a_foll = g4_active ? 0.0 : evasive_law(x_foll, env_foll);
    const double v_foll = g4_active ? 0.0 : x_foll.v_mps;
    const double d = (1.0 - a_prev_mps2 / env_prev.a_min_lb) * x_prev.v_mps -
                     (1.0 - a_foll / env_foll.a_min_ub) * v_foll;
    ok = ok && d >= -tol;
  }
  if (g2_active) {
    ok = ok && (x_prev.v_mps - x_foll.v_mps) >= -tol;
  }
  if (g3_active) {
    ok = ok && a_prev_mps2 >= -tol;
  }
  if (g4_active) {
    // Follower stopped: the evasive law holds it still.
    ok = ok && 0.0 >= -tol;
  }
  return ok;
}

}  // namespace platoon
