#include "platoon/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

#include "platoon/safety.hpp"

namespace platoon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// ---------------------------------------------------------------------------
// DP oracle: independent stage cost and exhaustive enumeration.
// ---------------------------------------------------------------------------

// Force balance of one space cell, re-derived from the longitudinal model;
// returns the stage fuel-plus-time cost or infinity when any vehicle cannot
// realize the transition.
double oracle_stage(const std::vector<VehicleParams>& platoon,
                    const std::vector<double>& gaps_s, double v_from, double v_to,
                    double z_end, const RoadProfile& road, double ds, double beta) {
  const double sin_a =
      std::sin(std::atan2(road.altitude_at(z_end) - road.altitude_at(z_end - ds), ds));
  double cost = 0.0;
  for (std::size_t i = 0; i < platoon.size(); ++i) {
    const VehicleParams& p = platoon[i];
    double gap = kInf;
    if (i > 0) {
      gap = v_to * gaps_s[i - 1] - platoon[i - 1].length_m;
      if (!(gap > 0.0)) return kInf;
    }
    const double cd = std::isinf(gap) ? p.cd0 : p.cd0 * (1.0 - p.cd1_m / (p.cd2_m + gap));
    const double f_g = -p.mass_kg * p.g_mps2 * sin_a;
    const double f_r = -p.c_r * p.mass_kg * p.g_mps2;
    const double f_d = -0.5 * p.air_density_kg_m3 * p.frontal_area_m2 * cd * v_to * v_to;
    const double f_req = p.mass_kg * v_to * (v_to - v_from) / ds - (f_g + f_r + f_d);
    const double cap = p.mass_kg * p.standstill_accel_cap_mps2;
    const double lo = std::max(p.p_min_w / v_to, -cap);
    const double hi = std::min(p.p_max_w / v_to, cap);
    if (f_req > hi) return kInf;
    double f_e = f_req;
    if (f_req < lo) {
      f_e = lo;
      const double f_b = f_req - lo;
      if (f_b < -p.mass_kg * p.eta_brake * p.g_mps2 * p.mu) return kInf;
    }
    cost += ds * (p.fuel_p1_g_per_j * f_e + p.fuel_p0_g_per_s / v_to);
  }
  return cost + beta * ds / v_to;
}

double oracle_terminal(const std::vector<VehicleParams>& platoon, double v_end) {
  double credit = 0.0;
  for (const auto& p : platoon)
    credit -= p.fuel_p1_g_per_j * p.mass_kg * v_end * v_end / 2.0;
  return credit;
}

struct OracleResult {
  double cost = kInf;
  std::vector<double> v_seq;  // speeds at grid points 1..C
};

// Depth-first enumeration; arrival speeds iterate descending so equal-cost
// sequences resolve to the higher speed, like the planner's tie-break.
OracleResult oracle_enumerate(const std::vector<VehicleParams>& platoon,
                              const std::vector<double>& gaps_s, const RoadProfile& road,
                              const std::vector<double>& grid,
                              const std::vector<std::vector<double>>& nodes,
                              double start_speed, double ds, double beta) {
  const int cells = static_cast<int>(grid.size()) - 1;
  std::function<OracleResult(int, double)> dfs = [&](int c, double v_from) -> OracleResult {
    OracleResult best;
    if (c == cells) {
      best.cost = oracle_terminal(platoon, v_from);
      return best;
    }
    const auto& next = nodes[static_cast<std::size_t>(c) + 1];
    for (int qt = static_cast<int>(next.size()) - 1; qt >= 0; --qt) {
      const double stage = oracle_stage(platoon, gaps_s, v_from, next[static_cast<std::size_t>(qt)],
                                        grid[static_cast<std::size_t>(c) + 1], road, ds, beta);
      if (stage == kInf) continue;
      OracleResult sub = dfs(c + 1, next[static_cast<std::size_t>(qt)]);
      if (sub.cost == kInf) continue;
      const double total = stage + sub.cost;
      if (total < best.cost) {
        best.cost = total;
        best.v_seq.clear();
        best.v_seq.push_back(next[static_cast<std::size_t>(qt)]);
        best.v_seq.insert(best.v_seq.end(), sub.v_seq.begin(), sub.v_seq.end());
      }
    }
    return best;
  };
  return dfs(0, start_speed);
}

}  // namespace

DpOracleReport verify_dp_oracle(int instances, std::uint64_t seed) {
  DpOracleReport rep;
  const double t0 = now_s();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int inst = 0; inst < instances; ++inst) {
    const int cells = 1 + static_cast<int>(unit(rng) * 6.0) % 6;
    const int levels = 2 + static_cast<int>(unit(rng) * 4.0) % 4;
    const int n_veh = 1 + static_cast<int>(unit(rng) * 3.0) % 3;
    const double ds = 30.0 + 50.0 * unit(rng);

    std::vector<RoadSample> samples{{0.0, 0.0}};
    double alt = 0.0;
    for (int c = 0; c < cells + 2; ++c) {
      const double grade = -0.06 + 0.12 * unit(rng);
      alt += grade * ds;
      samples.push_back({(c + 1) * ds, alt});
    }
    const double vmin = 15.0 + 4.0 * unit(rng);
    const double vmax = vmin + 3.0 + 5.0 * unit(rng);
    RoadProfile road(std::move(samples), {{0.0, vmin, vmax}});

    std::vector<VehicleParams> platoon;
    std::vector<double> gaps;
    for (int i = 0; i < n_veh; ++i) {
      VehicleParams p;
      p.mass_kg = 30e3 + 15e3 * unit(rng);
      platoon.push_back(p);
      if (i > 0) gaps.push_back(1.0 + 1.5 * unit(rng));
    }

    DpConfig cfg;
    cfg.ds_m = ds;
    cfg.horizon_cells = cells;
    cfg.speed_levels = levels;
    cfg.beta_g_per_s = 3.0 * unit(rng);
    const double start_speed = vmin + (vmax - vmin) * unit(rng);

    const PlanResult plan = plan_clac(platoon, gaps, road, 0.0, start_speed, cfg);

    // Rebuild the node sets exactly as the planner quantizes them.
    std::vector<double> grid(static_cast<std::size_t>(cells) + 1);
    for (int c = 0; c <= cells; ++c) grid[static_cast<std::size_t>(c)] = c * ds;
    const double v_lo = road.vmin_over(grid.front(), grid.back());
    const double v_hi = road.vmax_over(grid.front(), grid.back());
    std::vector<std::vector<double>> nodes(static_cast<std::size_t>(cells) + 1);
    nodes[0] = {start_speed};
    for (int c = 1; c <= cells; ++c) {
      for (int q = 0; q < levels; ++q) {
        const double v = v_lo + (v_hi - v_lo) * q / static_cast<double>(levels - 1);
        if (v >= road.vmin_at(grid[static_cast<std::size_t>(c)]) - 1e-12 &&
            v <= road.vmax_at(grid[static_cast<std::size_t>(c)]) + 1e-12)
          nodes[static_cast<std::size_t>(c)].push_back(v);
      }
    }
    const OracleResult oracle = oracle_enumerate(platoon, gaps, road, grid, nodes,
                                                 start_speed, ds, cfg.beta_g_per_s);

    std::ostringstream fail;
    if (plan.feasible != (oracle.cost != kInf)) {
      fail << "instance " << inst << ": feasibility mismatch (plan="
           << plan.feasible << ", oracle=" << (oracle.cost != kInf) << ")";
    } else if (plan.feasible) {
      if (plan.cost_g != oracle.cost) {
        fail << "instance " << inst << ": cost mismatch plan=" << plan.cost_g
             << " oracle=" << oracle.cost << " diff=" << plan.cost_g - oracle.cost;
      } else {
        for (int c = 1; c <= cells; ++c)
          if (plan.profile.v_mps[static_cast<std::size_t>(c)] !=
              oracle.v_seq[static_cast<std::size_t>(c) - 1]) {
            fail << "instance " << inst << ": argmin mismatch at cell " << c;
            break;
          }
      }
    }
    if (!fail.str().empty()) {
      ++rep.failures;
      if (rep.first_failure.empty()) rep.first_failure = fail.str();
    }
    ++rep.instances;
  }
  rep.seconds = now_s() - t0;
  return rep;
}

// ---------------------------------------------------------------------------
// Safety invariance: exact piecewise-constant-acceleration integration.
// ---------------------------------------------------------------------------

namespace {

struct KinState {
  double v = 0.0;
  double s = 0.0;
};

// Advance one vehicle by dt under constant acceleration, stopping at v=0.
KinState advance(const KinState& x, double a, double dt) {
  if (x.v <= 0.0 && a <= 0.0) return x;
  double t_stop = dt;
  if (a < 0.0) t_stop = std::min(dt, x.v / (-a));
  KinState out;
  out.v = std::max(x.v + a * t_stop, 0.0);
  out.s = x.s + x.v * t_stop + 0.5 * a * t_stop * t_stop;
  return out;
}

// Minimum bumper gap over one segment where both accelerations are constant
// (the gap is piecewise quadratic in time; check endpoints and the vertex,
// splitting at either vehicle's stopping instant).
double min_gap_over(const KinState& xp, double ap, const KinState& xf, double af,
                    double dt, double prev_len) {
  std::vector<double> cuts{0.0, dt};
  if (ap < 0.0 && xp.v > 0.0 && xp.v / (-ap) < dt) cuts.push_back(xp.v / (-ap));
  if (af < 0.0 && xf.v > 0.0 && xf.v / (-af) < dt) cuts.push_back(xf.v / (-af));
  std::sort(cuts.begin(), cuts.end());
  double worst = kInf;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double ta = cuts[k], tb = cuts[k + 1];
    if (tb - ta <= 0.0) continue;
    const KinState pa = advance(xp, ap, ta);
    const KinState fa = advance(xf, af, ta);
    const double ap_eff = pa.v > 0.0 || ap > 0.0 ? ap : 0.0;
    const double af_eff = fa.v > 0.0 || af > 0.0 ? af : 0.0;
    const double dv = pa.v - fa.v;
    const double da = ap_eff - af_eff;
    const double span = tb - ta;
    const auto gap_at = [&](double t) {
      const KinState pp = advance(pa, ap_eff, t);
      const KinState ff = advance(fa, af_eff, t);
      return pp.s - ff.s - prev_len;
    };
    worst = std::min(worst, std::min(gap_at(0.0), gap_at(span)));
    if (da > 0.0) {
      const double t_vertex = -dv / da;
      if (t_vertex > 0.0 && t_vertex < span) worst = std::min(worst, gap_at(t_vertex));
    }
  }
  return worst;
}

}  // namespace

InvarianceReport verify_safety_invariance(int runs, std::uint64_t seed) {
  InvarianceReport rep;
  const double t0 = now_s();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  rep.worst_g2_m = kInf;
  rep.worst_margin = kInf;
  for (int run = 0; run < runs; ++run) {
    VehicleParams pp, pf;
    pp.mass_kg = 30e3 + 15e3 * unit(rng);
    pf.mass_kg = 30e3 + 15e3 * unit(rng);
    EnvelopeAssumptions box;
    box.v_max_mps = 25.0;
    box.mass_lo_kg = 30e3;
    box.mass_hi_kg = 45e3;
    box.alpha_max_rad = 0.05;
    const AccelEnvelope ep = accel_envelope(pp, box);
    const AccelEnvelope ef = accel_envelope(pf, box);

    KinState xp, xf;
    xp.v = box.v_max_mps * unit(rng);
    xf.v = box.v_max_mps * unit(rng);
    const double gap0 = min_safe_gap(xp.v, xf.v, ep, ef) + 30.0 * unit(rng);
    xp.s = gap0 + pp.length_m;
    xf.s = 0.0;

    double run_min_gap = kInf;
    double t = 0.0;
    const double t_end = 45.0;
    while (t < t_end) {
      const double seg = 0.1 + 0.9 * unit(rng);
      // Admissible disturbance; braking-biased, braking-only past mid-run.
      double ap;
      if (xp.v <= 0.0) {
        ap = (t < 20.0 && unit(rng) < 0.3) ? unit(rng) * ep.a_max_lb : 0.0;
        if (ap < 0.0) ap = 0.0;
      } else if (t >= 20.0 || unit(rng) < 0.7) {
        ap = ep.a_min_lb * unit(rng);
      } else {
        ap = unit(rng) * std::max(ep.a_max_lb, 0.0);
      }
      if (xp.v >= box.v_max_mps && ap > 0.0) ap = 0.0;
      const double af = xf.v > 0.0 ? ef.a_min_ub : 0.0;

      run_min_gap = std::min(run_min_gap, min_gap_over(xp, ap, xf, af, seg, pp.length_m));
      xp = advance(xp, ap, seg);
      xf = advance(xf, af, seg);
      const SafetyMargins mm = safety_margins({xp.v, xp.s}, {xf.v, xf.s}, pp.length_m, ep, ef);
      rep.worst_margin = std::min({rep.worst_margin, mm.g1_m, mm.g2_m,
                                   static_cast<double>(mm.g3_mps), static_cast<double>(mm.g4_mps)});
      t += seg;
      if (xp.v <= 0.0 && xf.v <= 0.0 && t >= 20.0) break;
    }
    rep.worst_g2_m = std::min(rep.worst_g2_m, run_min_gap);
    if (run_min_gap < -1e-6) {
      ++rep.failures;
      if (rep.first_failure.empty()) {
        std::ostringstream os;
        os << "run " << run << ": min gap " << run_min_gap;
        rep.first_failure = os.str();
      }
    }
    ++rep.runs;
  }
  rep.seconds = now_s() - t0;
  return rep;
}

InvarianceReport verify_platoon_invariance(int runs, std::uint64_t seed) {
  InvarianceReport rep;
  const double t0 = now_s();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  rep.worst_g2_m = kInf;
  rep.worst_margin = kInf;

  for (int run = 0; run < runs; ++run) {
    const int n = 3 + static_cast<int>(unit(rng) * 3.0) % 3;
    EnvelopeAssumptions box;
    box.v_max_mps = 25.0;
    box.mass_lo_kg = 30e3;
    box.mass_hi_kg = 45e3;
    box.alpha_max_rad = 0.05;
    std::vector<VehicleParams> params(static_cast<std::size_t>(n));
    std::vector<AccelEnvelope> env;
    for (auto& p : params) {
      p.mass_kg = 30e3 + 15e3 * unit(rng);
      env.push_back(accel_envelope(p, box));
    }
    const double v0 = 5.0 + 20.0 * unit(rng);
    std::vector<KinState> x(static_cast<std::size_t>(n));
    x[0] = {v0, 0.0};
    for (int i = 1; i < n; ++i) {
      const double gap =
          min_safe_gap(v0, v0, env[static_cast<std::size_t>(i - 1)],
                       env[static_cast<std::size_t>(i)]) +
          2.0 + 20.0 * unit(rng);
      x[static_cast<std::size_t>(i)].v = v0;
      x[static_cast<std::size_t>(i)].s = x[static_cast<std::size_t>(i - 1)].s -
                                         params[static_cast<std::size_t>(i - 1)].length_m - gap;
    }

    double run_min_gap = kInf;
    double t = 0.0;
    while (t < 40.0) {
      const double seg = 0.1 + 0.9 * unit(rng);
      double a0;
      if (x[0].v <= 0.0)
        a0 = 0.0;
      else if (t >= 15.0 || unit(rng) < 0.8)
        a0 = env[0].a_min_lb * unit(rng);
      else
        a0 = unit(rng) * std::max(env[0].a_max_lb, 0.0);
      std::vector<double> acc(static_cast<std::size_t>(n));
      acc[0] = a0;
      for (int i = 1; i < n; ++i)
        acc[static_cast<std::size_t>(i)] =
            x[static_cast<std::size_t>(i)].v > 0.0 ? env[static_cast<std::size_t>(i)].a_min_ub
                                                   : 0.0;
      for (int i = 1; i < n; ++i)
        run_min_gap = std::min(
            run_min_gap,
            min_gap_over(x[static_cast<std::size_t>(i - 1)], acc[static_cast<std::size_t>(i - 1)],
                         x[static_cast<std::size_t>(i)], acc[static_cast<std::size_t>(i)], seg,
                         params[static_cast<std::size_t>(i - 1)].length_m));
      for (int i = 0; i < n; ++i)
        x[static_cast<std::size_t>(i)] =
            advance(x[static_cast<std::size_t>(i)], acc[static_cast<std::size_t>(i)], seg);
      t += seg;
      bool all_stopped = true;
      for (const auto& xi : x)
        if (xi.v > 0.0) all_stopped = false;
      if (all_stopped && t >= 15.0) break;
    }
    rep.worst_g2_m = std::min(rep.worst_g2_m, run_min_gap);
    if (run_min_gap < -1e-6) {
      ++rep.failures;
      if (rep.first_failure.empty()) {
        std::ostringstream os;
        os << "run " << run << ": min pairwise gap " << run_min_gap;
        rep.first_failure = os.str();
      }
    }
    ++rep.runs;
  }
  rep.seconds = now_s() - t0;
  return rep;
}

}  // namespace platoon
