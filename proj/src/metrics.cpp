#include "platoon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

namespace platoon {

std::vector<EnergyLedger> energy_ledger(const TrajectoryLog& log,
                                        const std::vector<VehicleParams>& platoon) {
  if (static_cast<int>(platoon.size()) != log.n_vehicles)
    throw std::invalid_argument("energy_ledger: platoon size does not match log");
  std::vector<EnergyLedger> out(platoon.size());
  for (std::size_t i = 0; i < platoon.size(); ++i) {
    const VehicleTotals& t = log.totals[i];
    EnergyLedger& e = out[i];
    e.engine_j = t.engine_j;
    e.engine_neg_j = t.engine_neg_j;
    e.brake_j = -t.brake_j;
    e.rolling_j = -t.rolling_j;
    e.drag_j = -t.drag_j;
    e.gravity_j = t.gravity_j;
    e.fuel_g = t.fuel_g;
    e.distance_m = t.distance_m;
    e.time_s = t.time_s;
    e.kinetic_delta_j = 0.5 * platoon[i].mass_kg *
                        (t.v_window_out_mps * t.v_window_out_mps -
                         t.v_window_in_mps * t.v_window_in_mps);
  }
  return out;
}

std::vector<EnergyLedger> energy_ledger_from_rows(const TrajectoryLog& log,
                                                  const std::vector<VehicleParams>& platoon) {
  if (static_cast<int>(platoon.size()) != log.n_vehicles)
    throw std::invalid_argument("energy_ledger_from_rows: platoon size does not match log");
  std::vector<EnergyLedger> out(platoon.size());
  std::vector<const LogRow*> prev(platoon.size(), nullptr);
  std::vector<double> v_first(platoon.size(), 0.0), v_last(platoon.size(), 0.0);
  std::vector<bool> seen(platoon.size(), false);
  for (const auto& row : log.rows) {
    const std::size_t i = static_cast<std::size_t>(row.vehicle);
    const VehicleParams& p = platoon[i];
    if (!seen[i]) {
      v_first[i] = row.v_mps;
      seen[i] = true;
    }
    v_last[i] = row.v_mps;
    if (prev[i]) {
      const LogRow& a = *prev[i];
      const double dt = row.t_s - a.t_s;
      if (dt > 0) {
        EnergyLedger& e = out[i];
        const auto trap = [&](double fa, double fb) {
          return 0.5 * (fa * a.v_mps + fb * row.v_mps) * dt;
        };
        const ForceBreakdown ext_a = external_forces(
            p, {a.v_mps, a.s_m}, std::isinf(a.gap_m) ? kInfiniteGap : std::max(a.gap_m, 0.0),
            0.0);
        const ForceBreakdown ext_b = external_forces(
            p, {row.v_mps, row.s_m},
            std::isinf(row.gap_m) ? kInfiniteGap : std::max(row.gap_m, 0.0), 0.0);
        e.engine_j += trap(a.engine_n, row.engine_n);
        if (0.5 * (a.engine_n * a.v_mps + row.engine_n * row.v_mps) < 0)
          e.engine_neg_j += -trap(a.engine_n, row.engine_n);
        e.brake_j += -trap(a.brake_n, row.brake_n);
        e.rolling_j += -trap(ext_a.rolling_n, ext_b.rolling_n);
        e.drag_j += -trap(ext_a.drag_n, ext_b.drag_n);
        e.fuel_g += 0.5 * (a.fuel_gps + row.fuel_gps) * dt;
        e.distance_m += row.s_m - a.s_m;
        e.time_s += dt;
      }
    }
    prev[i] = &row;
  }
  // Gravity from the altitude drop is not recoverable from rows alone (no
  // slope column); report it as the balance closure so callers can compare
  // the dissipative components against the run integrals.
  for (std::size_t i = 0; i < platoon.size(); ++i) {
    out[i].kinetic_delta_j =
        0.5 * platoon[i].mass_kg * (v_last[i] * v_last[i] - v_first[i] * v_first[i]);
    out[i].gravity_j =
        out[i].kinetic_delta_j + out[i].brake_j + out[i].rolling_j + out[i].drag_j -
        out[i].engine_j;
  }
  return out;
}

double balance_tolerance_j(const std::vector<EnergyLedger>& ledger) {
  double tol = 1e3;
  for (const auto& e : ledger) {
    const double scale = std::abs(e.engine_j) + e.brake_j + e.rolling_j + e.drag_j +
                         std::abs(e.gravity_j) + std::abs(e.kinetic_delta_j);
    tol = std::max(tol, 1e-3 * scale);
  }
  return tol;
}

std::vector<double> normalize_fuel_percent(const std::vector<double>& fuel_g,
                                           const std::vector<double>& baseline_fuel_g) {
  if (fuel_g.size() != baseline_fuel_g.size())
    throw std::invalid_argument("normalize_fuel_percent: size mismatch");
  std::vector<double> out(fuel_g.size());
  for (std::size_t i = 0; i < fuel_g.size(); ++i) {
    if (!(baseline_fuel_g[i] > 0))
      throw std::invalid_argument("normalize_fuel_percent: baseline fuel must be positive");
    out[i] = 100.0 * fuel_g[i] / baseline_fuel_g[i];
  }
  return out;
}

namespace {

// Per-vehicle (s, v) samples in position order.
std::vector<std::pair<double, double>> speed_over_space(const TrajectoryLog& log,
                                                        int vehicle) {
  std::vector<std::pair<double, double>> sv;
  for (const auto& row : log.rows)
    if (row.vehicle == vehicle) sv.push_back({row.s_m, row.v_mps});
  std::sort(sv.begin(), sv.end());
  return sv;
}

double interp_sv(const std::vector<std::pair<double, double>>& sv, double s) {
  auto it = std::lower_bound(sv.begin(), sv.end(), std::make_pair(s, -1e300));
  if (it == sv.begin()) return it->second;
  if (it == sv.end()) return sv.back().second;
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (b.first == a.first) return a.second;
  const double t = (s - a.first) / (b.first - a.first);
  return a.second + t * (b.second - a.second);
}

}  // namespace

double max_space_speed_gap(const TrajectoryLog& log, int vehicle_a, int vehicle_b,
                           double sample_ds_m) {
  const auto sa = speed_over_space(log, vehicle_a);
  const auto sb = speed_over_space(log, vehicle_b);
  if (sa.size() < 2 || sb.size() < 2)
    throw std::invalid_argument("max_space_speed_gap: not enough samples");
  const double lo = std::max(sa.front().first, sb.front().first);
  const double hi = std::min(sa.back().first, sb.back().first);
  if (hi <= lo) throw std::invalid_argument("max_space_speed_gap: no common span");
  double worst = 0.0;
  for (double s = lo; s <= hi; s += sample_ds_m)
    worst = std::max(worst, std::abs(interp_sv(sa, s) - interp_sv(sb, s)));
  return worst;
}

bool brakes_in_window(const TrajectoryLog& log, int vehicle, double s0_m, double s1_m,
                      double threshold_n) {
  for (const auto& row : log.rows)
    if (row.vehicle == vehicle && row.s_m >= s0_m && row.s_m <= s1_m &&
        row.brake_n < -threshold_n)
      return true;
  return false;
}

void write_comparison_text(const std::vector<ComparisonCell>& cells, std::ostream& out) {
  // strategy rows x gap-policy columns, follower percentages; leader in its
  // own column per policy.
  std::vector<std::string> strategies, policies;
  for (const auto& c : cells) {
    if (std::find(strategies.begin(), strategies.end(), c.strategy) == strategies.end())
      strategies.push_back(c.strategy);
    if (std::find(policies.begin(), policies.end(), c.gap_policy) == policies.end())
      policies.push_back(c.gap_policy);
  }
  char buf[64];
  out << "normalized fuel [% of the same vehicle alone under CC]\n";
  out << "        ";
  for (const auto& p : policies) {
    std::snprintf(buf, sizeof buf, " | %-6s", p.c_str());
    out << buf;
    for (std::size_t v = 1; v < cells.front().normalized_percent.size(); ++v) out << "        ";
  }
  out << "\n";
  for (const auto& s : strategies) {
    std::snprintf(buf, sizeof buf, "%-8s", s.c_str());
    out << buf;
    for (const auto& p : policies) {
      const ComparisonCell* cell = nullptr;
      for (const auto& c : cells)
        if (c.strategy == s && c.gap_policy == p) cell = &c;
      if (!cell) {
        out << " |   -  ";
        continue;
      }
      out << " |";
      for (double pc : cell->normalized_percent) {
        std::snprintf(buf, sizeof buf, " %6.1f", pc);
        out << buf;
      }
    }
    out << "\n";
  }
}

void write_comparison_csv(const std::vector<ComparisonCell>& cells, std::ostream& out) {
  out << "strategy,gap_policy,vehicle,fuel_g,normalized_percent,avg_speed_mps,beta,"
         "E_engine_j,E_brake_j,E_gravity_j,E_roll_j,E_drag_j\n";
  char buf[320];
  for (const auto& c : cells) {
    for (std::size_t v = 0; v < c.fuel_g.size(); ++v) {
      std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    c.strategy.c_str(), c.gap_policy.c_str(), v + 1, c.fuel_g[v],
                    c.normalized_percent[v], c.avg_speed_mps, c.beta_g_per_s,
                    c.ledger[v].engine_j, c.ledger[v].brake_j, c.ledger[v].gravity_j,
                    c.ledger[v].rolling_j, c.ledger[v].drag_j);
      out << buf;
    }
  }
}

}  // namespace platoon
