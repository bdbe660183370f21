#include "platoon/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace platoon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Stage cost and feasibility of one (v_from -> v_to) cell transition,
// without materializing the per-vehicle force vectors. Kept in lockstep with
// dp_transition below.
double transition_cost(const std::vector<VehicleParams>& platoon,
                       const std::vector<double>& time_gaps_s, double v_from, double v_to,
                       double z_end, const RoadProfile& road, double ds, double beta) {
  const double sin_a = road.cell_sin_slope(z_end, ds);
  double cost = 0.0;
  for (std::size_t i = 0; i < platoon.size(); ++i) {
    const VehicleParams& p = platoon[i];
    double gap = kInfiniteGap;
    if (i > 0) {
      gap = v_to * time_gaps_s[i - 1] - platoon[i - 1].length_m;
      if (!(gap > 0.0)) return kInf;
    }
    const double f_g = -p.mass_kg * p.g_mps2 * sin_a;
    const double f_r = -p.c_r * p.mass_kg * p.g_mps2;
    const double f_d = -0.5 * p.air_density_kg_m3 * p.frontal_area_m2 *
                       drag_coefficient(p, gap) * v_to * v_to;
    const double f_req = p.mass_kg * v_to * (v_to - v_from) / ds - (f_g + f_r + f_d);
    const double cap = p.mass_kg * p.standstill_accel_cap_mps2;
    const double lo = std::max(p.p_min_w / v_to, -cap);
    const double hi = std::min(p.p_max_w / v_to, cap);
    if (f_req > hi) return kInf;
    double f_e = f_req;
    if (f_req < lo) {
      f_e = lo;
      const double f_b = f_req - lo;
      if (f_b < p.brake_force_floor_n()) return kInf;
    }
    cost += ds * (p.fuel_p1_g_per_j * f_e + p.fuel_p0_g_per_s / v_to);
  }
  return cost + beta * ds / v_to;
}

}  // namespace

DpTransition dp_transition(const std::vector<VehicleParams>& platoon,
                           const std::vector<double>& time_gaps_s, double v_from_mps,
                           double v_to_mps, double z_end_m, const RoadProfile& road,
                           double ds_m, double beta_g_per_s) {
  if (!(v_from_mps > 0) || !(v_to_mps > 0))
    throw std::invalid_argument("dp_transition: speeds must be positive");
  if (platoon.empty() || time_gaps_s.size() + 1 != platoon.size())
    throw std::invalid_argument("dp_transition: need one time gap per follower");
  DpTransition out;
  out.engine_n.resize(platoon.size(), 0.0);
  out.brake_n.resize(platoon.size(), 0.0);
  const double sin_a = road.cell_sin_slope(z_end_m, ds_m);
  double cost = 0.0;
  for (std::size_t i = 0; i < platoon.size(); ++i) {
    const VehicleParams& p = platoon[i];
    double gap = kInfiniteGap;
    if (i > 0) {
      gap = v_to_mps * time_gaps_s[i - 1] - platoon[i - 1].length_m;
      if (!(gap > 0.0)) {
        out.blocking_vehicle = static_cast<int>(i);
        return out;
      }
    }
    const double f_g = -p.mass_kg * p.g_mps2 * sin_a;
    const double f_r = -p.c_r * p.mass_kg * p.g_mps2;
    const double f_d = -0.5 * p.air_density_kg_m3 * p.frontal_area_m2 *
                       drag_coefficient(p, gap) * v_to_mps * v_to_mps;
    const double f_req =
        p.mass_kg * v_to_mps * (v_to_mps - v_from_mps) / ds_m - (f_g + f_r + f_d);
    const double cap = p.mass_kg * p.standstill_accel_cap_mps2;
    const double lo = std::max(p.p_min_w / v_to_mps, -cap);
    const double hi = std::min(p.p_max_w / v_to_mps, cap);
    if (f_req > hi) {
      out.blocking_vehicle = static_cast<int>(i);
      return out;
    }
    double f_e = f_req, f_b = 0.0;
    if (f_req < lo) {
      f_e = lo;
      f_b = f_req - lo;
      if (f_b < p.brake_force_floor_n()) {
        out.blocking_vehicle = static_cast<int>(i);
        return out;
      }
    }
    out.engine_n[i] = f_e;
    out.brake_n[i] = f_b;
    cost += ds_m * (p.fuel_p1_g_per_j * f_e + p.fuel_p0_g_per_s / v_to_mps);
  }
  out.cost_g = cost + beta_g_per_s * ds_m / v_to_mps;
  out.feasible = true;
  return out;
}

double SpeedProfile::v_at(double s_m) const {
  if (grid_m.empty()) throw std::logic_error("SpeedProfile: empty");
  if (s_m <= grid_m.front()) return v_mps.front();
  if (s_m >= grid_m.back()) return v_mps.back();
  const auto it = std::upper_bound(grid_m.begin(), grid_m.end(), s_m);
  const std::size_t i = static_cast<std::size_t>(it - grid_m.begin()) - 1;
  const double t = (s_m - grid_m[i]) / (grid_m[i + 1] - grid_m[i]);
  return v_mps[i] + t * (v_mps[i + 1] - v_mps[i]);
}

double SpeedProfile::average_speed_mps() const {
  double time_s = 0.0;
  for (std::size_t c = 1; c < grid_m.size(); ++c)
    time_s += (grid_m[c] - grid_m[c - 1]) / v_mps[c];
  return (grid_m.back() - grid_m.front()) / time_s;
}

PlanResult plan_clac(const std::vector<VehicleParams>& platoon,
                     const std::vector<double>& time_gaps_s, const RoadProfile& road,
                     double start_pos_m, double start_speed_mps, const DpConfig& cfg) {
  if (platoon.empty()) throw std::invalid_argument("plan_clac: empty platoon");
  if (time_gaps_s.size() + 1 != platoon.size())
    throw std::invalid_argument("plan_clac: need one time gap per follower");
  if (!(start_speed_mps > 0)) throw std::invalid_argument("plan_clac: start speed must be positive");
  if (cfg.speed_levels < 2) throw std::invalid_argument("plan_clac: need >= 2 speed levels");
  if (!(cfg.ds_m > 0)) throw std::invalid_argument("plan_clac: ds must be positive");

  PlanResult res;
  const int cells = std::min<int>(
      cfg.horizon_cells,
      static_cast<int>(std::floor((road.length_m() - start_pos_m) / cfg.ds_m + 1e-9)));
  if (cells < 1) {
    res.message = "horizon does not fit the road";
    return res;
  }
  const int n_grid = cells + 1;
  std::vector<double> grid(n_grid);
  for (int c = 0; c < n_grid; ++c) grid[c] = start_pos_m + c * cfg.ds_m;

  const double v_lo = road.vmin_over(grid.front(), grid.back());
  const double v_hi = road.vmax_over(grid.front(), grid.back());
  std::vector<double> levels(cfg.speed_levels);
  for (int q = 0; q < cfg.speed_levels; ++q)
    levels[q] = v_lo + (v_hi - v_lo) * q / static_cast<double>(cfg.speed_levels - 1);

  // Node speeds per grid point: admissible levels, except the pinned start
  // node (the measured speed, exempt from the limit band) and an optional
  // pinned final node.
  std::vector<std::vector<double>> nodes(n_grid);
  nodes[0] = {start_speed_mps};
  for (int c = 1; c < n_grid; ++c) {
    if (c == cells && cfg.final_speed_mps) {
      nodes[c] = {*cfg.final_speed_mps};
      continue;
    }
    const double lim_lo = road.vmin_at(grid[c]);
    const double lim_hi = road.vmax_at(grid[c]);
    for (double v : levels)
      if (v >= lim_lo - 1e-12 && v <= lim_hi + 1e-12) nodes[c].push_back(v);
    if (nodes[c].empty()) {
      res.blocking_cell = c;
      res.message = "no admissible speed level at cell " + std::to_string(c);
      return res;
    }
  }

  // Backward value iteration; ties resolve to the higher arrival speed by
  // iterating arrival nodes in descending order and keeping strict improvements.
  std::vector<std::vector<double>> value(n_grid);
  std::vector<std::vector<int>> choice(n_grid);
  value[cells].resize(nodes[cells].size());
  for (std::size_t q = 0; q < nodes[cells].size(); ++q) {
    double credit = 0.0;
    for (const auto& p : platoon)
      credit -= p.fuel_p1_g_per_j * p.mass_kg * nodes[cells][q] * nodes[cells][q] / 2.0;
    value[cells][q] = credit;
  }
  for (int c = cells - 1; c >= 0; --c) {
    value[c].assign(nodes[c].size(), kInf);
    choice[c].assign(nodes[c].size(), -1);
    for (std::size_t qf = 0; qf < nodes[c].size(); ++qf) {
      double best = kInf;
      int best_to = -1;
      for (int qt = static_cast<int>(nodes[c + 1].size()) - 1; qt >= 0; --qt) {
        const double stage = transition_cost(platoon, time_gaps_s, nodes[c][qf],
                                             nodes[c + 1][qt], grid[c + 1], road,
                                             cfg.ds_m, cfg.beta_g_per_s);
        if (stage == kInf) continue;
        const double total = stage + value[c + 1][qt];
        if (total < best) {
          best = total;
          best_to = qt;
        }
      }
      value[c][qf] = best;
      choice[c][qf] = best_to;
    }
  }

  if (value[0][0] == kInf) {
    // Forward reachability to name the first blocking cell.
    std::vector<char> reach(nodes[0].size(), 1);
    for (int c = 0; c < cells; ++c) {
      std::vector<char> next(nodes[c + 1].size(), 0);
      bool any = false;
      for (std::size_t qf = 0; qf < nodes[c].size(); ++qf) {
        if (!reach[qf]) continue;
        for (std::size_t qt = 0; qt < nodes[c + 1].size(); ++qt) {
          if (next[qt]) continue;
          const double stage = transition_cost(platoon, time_gaps_s, nodes[c][qf],
                                               nodes[c + 1][qt], grid[c + 1], road,
                                               cfg.ds_m, cfg.beta_g_per_s);
          if (stage != kInf) {
            next[qt] = 1;
            any = true;
          }
        }
      }
      if (!any) {
        res.blocking_cell = c + 1;
        res.message = "no feasible transition into cell " + std::to_string(c + 1);
        return res;
      }
      reach = std::move(next);
    }
    res.message = "no profile reaches the horizon end";
    return res;
  }

  res.feasible = true;
  res.cost_g = value[0][0];
  SpeedProfile& prof = res.profile;
  prof.ds_m = cfg.ds_m;
  prof.grid_m = grid;
  prof.time_gaps_s = time_gaps_s;
  prof.v_mps.resize(n_grid);
  prof.engine_n.assign(platoon.size(), std::vector<double>(cells, 0.0));
  prof.brake_n.assign(platoon.size(), std::vector<double>(cells, 0.0));
  int q = 0;
  prof.v_mps[0] = nodes[0][0];
  for (int c = 0; c < cells; ++c) {
    const int qt = choice[c][q];
    prof.v_mps[c + 1] = nodes[c + 1][qt];
    const DpTransition tr =
        dp_transition(platoon, time_gaps_s, prof.v_mps[c], prof.v_mps[c + 1], grid[c + 1],
                      road, cfg.ds_m, cfg.beta_g_per_s);
    for (std::size_t i = 0; i < platoon.size(); ++i) {
      prof.engine_n[i][c] = tr.engine_n[i];
      prof.brake_n[i][c] = tr.brake_n[i];
    }
    q = qt;
  }
  return res;
}

PlanResult plan_lac(const VehicleParams& vehicle, const RoadProfile& road,
                    double start_pos_m, double start_speed_mps, const DpConfig& cfg) {
  return plan_clac({vehicle}, {}, road, start_pos_m, start_speed_mps, cfg);
}

CcCommand cc_command(double v_set_mps, const VehicleState& state, const VehicleParams& p,
                     double gap_m, double slope_rad, double vmax_mps) {
  constexpr double kHoldTime = 2.0;  // governor time constant
  const ForceBreakdown ext = external_forces(p, state, gap_m, slope_rad);
  const InputBounds b = input_bounds(p, state.v_mps);
  CcCommand cmd;
  const double f_des =
      -ext.total_n() + p.mass_kg * (v_set_mps - state.v_mps) / kHoldTime;
  cmd.engine_n = std::clamp(f_des, b.engine.lo_n, b.engine.hi_n);
  if (state.v_mps >= vmax_mps) {
    // Brake only to keep the legal limit.
    const double f_hold = -ext.total_n() + p.mass_kg * (vmax_mps - state.v_mps) / kHoldTime;
    if (f_hold < b.engine.lo_n) {
      cmd.engine_n = b.engine.lo_n;
      cmd.brake_n = std::max(f_hold - b.engine.lo_n, b.brake.lo_n);
    } else {
      cmd.engine_n = std::min(cmd.engine_n, f_hold);
    }
  }
  return cmd;
}

BetaTune tune_beta(const std::vector<VehicleParams>& platoon,
                   const std::vector<double>& time_gaps_s, const RoadProfile& road,
                   double start_pos_m, double start_speed_mps, DpConfig cfg,
                   double target_avg_mps, double tol_mps) {
  BetaTune out;
  const auto avg_at = [&](double beta) {
    cfg.beta_g_per_s = beta;
    const PlanResult r =
        plan_clac(platoon, time_gaps_s, road, start_pos_m, start_speed_mps, cfg);
    ++out.plans;
    if (!r.feasible) throw std::runtime_error("tune_beta: infeasible plan: " + r.message);
    return r.profile.average_speed_mps();
  };

  double lo = 0.0;
  double avg_lo = avg_at(lo);
  if (std::abs(avg_lo - target_avg_mps) <= tol_mps) {
    out.converged = true;
    out.beta_g_per_s = lo;
    out.achieved_avg_mps = avg_lo;
    return out;
  }
  if (avg_lo > target_avg_mps) {
    out.message = "target average below the fuel-optimal (beta=0) average of " +
                  std::to_string(avg_lo);
    out.achieved_avg_mps = avg_lo;
    return out;
  }
  double hi = 1.0, avg_hi = avg_at(hi);
  int expand = 0;
  while (avg_hi < target_avg_mps - tol_mps && expand++ < 40) {
    hi *= 4.0;
    avg_hi = avg_at(hi);
  }
  if (avg_hi < target_avg_mps - tol_mps) {
    out.message = "target average above the beta->inf average of " + std::to_string(avg_hi);
    out.beta_g_per_s = hi;
    out.achieved_avg_mps = avg_hi;
    return out;
  }
  double beta = hi, achieved = avg_hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double avg = avg_at(mid);
    if (avg >= target_avg_mps) {
      hi = mid;
      beta = mid;
      achieved = avg;
    } else {
      lo = mid;
    }
    if (std::abs(avg - target_avg_mps) <= tol_mps) {
      out.converged = true;
      out.beta_g_per_s = mid;
      out.achieved_avg_mps = avg;
      return out;
    }
    if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
  }
  // The speed quantization makes the average piecewise constant in beta;
  // settle for the closest admissible side if it is within tolerance.
  out.beta_g_per_s = beta;
  out.achieved_avg_mps = achieved;
  out.converged = std::abs(achieved - target_avg_mps) <= tol_mps;
  if (!out.converged)
    out.message = "bisection exhausted; nearest achievable average " + std::to_string(achieved);
  return out;
}

void write_profile_csv(const SpeedProfile& profile, std::ostream& out) {
  out << "z_m,v_mps";
  for (std::size_t i = 0; i < profile.engine_n.size(); ++i)
    out << ",Fe_" << i + 1 << "_N,Fb_" << i + 1 << "_N";
  out << "\n";
  char buf[64];
  for (std::size_t c = 0; c < profile.grid_m.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", profile.grid_m[c], profile.v_mps[c]);
    out << buf;
    for (std::size_t i = 0; i < profile.engine_n.size(); ++i) {
      if (c == 0) {
        out << ",,";
      } else {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", profile.engine_n[i][c - 1],
                      profile.brake_n[i][c - 1]);
        out << buf;
      }
    }
    out << "\n";
  }
}

}  // namespace platoon
