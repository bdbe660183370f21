#include "platoon/harness.hpp"

#include <cmath>
#include <stdexcept>

#include "platoon/scenario.hpp"

namespace platoon {

namespace {

double leader_windowed_avg(const TrajectoryLog& log) {
  const EnergyLedger e{0, 0, 0, 0, 0, 0, 0, 0, log.totals[0].distance_m, log.totals[0].time_s};
  return e.avg_speed_mps();
}

Scenario cell_scenario(const Scenario& base, Strategy strategy, const GapPolicy& policy,
                       double beta) {
  Scenario sc = base;
  sc.mode = Scenario::Mode::IdealTracking;
  sc.strategy = strategy;
  sc.gap_policy = policy;
  sc.dp.beta_g_per_s = beta;
  return sc;
}

}  // namespace

CompareOutcome run_comparison(const CompareSpec& spec) {
  CompareOutcome out;
  Scenario base = spec.base;
  base.mode = Scenario::Mode::IdealTracking;
  if (!base.dp.final_speed_mps) base.dp.final_speed_mps = base.v_set_mps;

  // Per-vehicle baseline: the same vehicle alone under CC, covering the same
  // road span as its platoon slot (slot offsets from the steady spacing).
  std::vector<double> slot_offset(base.platoon.size(), 0.0);
  for (std::size_t i = base.platoon.size(); i-- > 1;) {
    slot_offset[i - 1] =
        slot_offset[i] + base.platoon[i - 1].length_m +
        base.gap_policy.steady_gap_m(base.v_set_mps, base.platoon[i - 1].length_m);
  }
  for (std::size_t i = 0; i < base.platoon.size(); ++i) {
    Scenario alone = base;
    alone.platoon = {base.platoon[i]};
    alone.strategy = Strategy::CC;
    alone.start_offset_m = slot_offset[i];
    const TrajectoryLog log = run_ideal_tracking(alone);
    out.baseline_fuel_g.push_back(log.totals[0].fuel_g);
    if (out.target_avg_mps == 0.0) out.target_avg_mps = leader_windowed_avg(log);
  }

  // Tune beta per look-ahead strategy against the realized average speed.
  const GapPolicy tune_policy =
      spec.gap_policies.empty() ? GapPolicy{} : spec.gap_policies.front();
  std::vector<double> betas(spec.strategies.size(), 0.0);
  for (std::size_t si = 0; si < spec.strategies.size(); ++si) {
    const Strategy st = spec.strategies[si];
    if (st == Strategy::CC) continue;
    const auto avg_at = [&](double beta) {
      const TrajectoryLog log = run_ideal_tracking(cell_scenario(base, st, tune_policy, beta));
      return leader_windowed_avg(log);
    };
    double lo = 0.0, hi = 1.0;
    double a_lo = avg_at(lo);
    if (std::abs(a_lo - out.target_avg_mps) <= spec.beta_tune_tol_mps) {
      betas[si] = lo;
      continue;
    }
    if (a_lo > out.target_avg_mps)
      throw std::runtime_error(std::string("run_comparison: fuel-optimal average for ") +
                               strategy_name(st) + " already exceeds the CC average");
    double a_hi = avg_at(hi);
    int expand = 0;
    while (a_hi < out.target_avg_mps && expand++ < 30) {
      hi *= 4.0;
      a_hi = avg_at(hi);
    }
    if (a_hi < out.target_avg_mps)
      throw std::runtime_error(std::string("run_comparison: cannot reach the CC average for ") +
                               strategy_name(st));
    double best = hi, best_err = std::abs(a_hi - out.target_avg_mps);
    for (int it = 0; it < 60 && best_err > spec.beta_tune_tol_mps; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double avg = avg_at(mid);
      const double err = std::abs(avg - out.target_avg_mps);
      if (err < best_err) {
        best = mid;
        best_err = err;
      }
      if (avg < out.target_avg_mps)
        lo = mid;
      else
        hi = mid;
    }
    betas[si] = best;
  }

  for (std::size_t si = 0; si < spec.strategies.size(); ++si) {
    for (const auto& policy : spec.gap_policies) {
      const Strategy st = spec.strategies[si];
      Scenario sc = cell_scenario(base, st, policy, betas[si]);
      TrajectoryLog log = run_ideal_tracking(sc);
      CompareCellResult res;
      ComparisonCell& cell = res.cell;
      cell.strategy = strategy_name(st);
      cell.gap_policy = gap_policy_name(policy.kind);
      cell.beta_g_per_s = betas[si];
      cell.avg_speed_mps = leader_windowed_avg(log);
      if (std::abs(cell.avg_speed_mps - out.target_avg_mps) > spec.avg_speed_tol_mps)
        throw std::runtime_error(
            std::string("run_comparison: cell ") + cell.strategy + "/" + cell.gap_policy +
            " average speed " + std::to_string(cell.avg_speed_mps) +
            " deviates from the CC average " + std::to_string(out.target_avg_mps) +
            " beyond tolerance; comparison invalid");
      cell.ledger = energy_ledger(log, sc.platoon);
      for (const auto& e : cell.ledger) cell.fuel_g.push_back(e.fuel_g);
      cell.normalized_percent = normalize_fuel_percent(cell.fuel_g, out.baseline_fuel_g);
      if (spec.keep_logs) res.log = std::move(log);
      out.cells.push_back(std::move(res));
    }
  }
  return out;
}

}  // namespace platoon
