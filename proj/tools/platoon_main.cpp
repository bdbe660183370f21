#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "platoon/harness.hpp"
#include "platoon/metrics.hpp"
#include "platoon/scenario.hpp"
#include "platoon/sim.hpp"
#include "platoon/verify.hpp"

namespace fs = std::filesystem;
using namespace platoon;

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

nlohmann::json summary_json(const TrajectoryLog& log, const std::vector<VehicleParams>& platoon) {
  const auto ledger = energy_ledger(log, platoon);
  nlohmann::json vehicles = nlohmann::json::array();
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    const EnergyLedger& e = ledger[i];
    vehicles.push_back({{"vehicle", i + 1},
                        {"fuel_g", e.fuel_g},
                        {"E_engine_j", e.engine_j},
                        {"E_engine_negative_j", e.engine_neg_j},
                        {"E_brake_j", e.brake_j},
                        {"E_gravity_j", e.gravity_j},
                        {"E_roll_j", e.rolling_j},
                        {"E_drag_j", e.drag_j},
                        {"dKE_j", e.kinetic_delta_j},
                        {"balance_residual_j", e.balance_residual_j()},
                        {"distance_m", e.distance_m},
                        {"time_s", e.time_s},
                        {"avg_speed_mps", e.avg_speed_mps()}});
  }
  return nlohmann::json{{"vehicles", vehicles},
                        {"min_gap_m", std::isfinite(log.min_gap_m) ? log.min_gap_m : -1.0},
                        {"all_stopped_at_end", log.all_stopped_at_end},
                        {"aborted", log.aborted},
                        {"abort_reason", log.abort_reason},
                        {"notes", log.notes}};
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_dir_flag) {
  nlohmann::json j = read_json_file(config_path);
  for (const auto& ov : overrides) apply_override(j, ov);
  ScenarioConfig cfg =
      ScenarioConfig::from_json(j, fs::path(config_path).parent_path().string());
  const fs::path out_dir = out_dir_flag.empty() ? fs::path(cfg.output_dir)
                                                : fs::path(out_dir_flag);
  fs::create_directories(out_dir);

  const TrajectoryLog log = cfg.scenario.mode == Scenario::Mode::ClosedLoop
                                ? run_closed_loop(cfg.scenario)
                                : run_ideal_tracking(cfg.scenario);

  {
    std::ofstream csv(out_dir / "trajectory.csv", std::ios::binary);
    write_log_csv(log, csv);
  }
  write_file(out_dir / "summary.json", summary_json(log, cfg.scenario.platoon).dump(2) + "\n");
  write_file(out_dir / "manifest.json", cfg.resolved.dump(2) + "\n");
  std::cout << "wrote " << (out_dir / "trajectory.csv").string() << "\n";
  if (log.aborted) {
    std::cerr << "run aborted: " << log.abort_reason << "\n";
    return 2;
  }
  return 0;
}

int cmd_compare(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& out_dir_flag) {
  nlohmann::json j = read_json_file(config_path);
  for (const auto& ov : overrides) apply_override(j, ov);
  CompareConfig cfg = CompareConfig::from_json(j, fs::path(config_path).parent_path().string());
  const fs::path out_dir =
      out_dir_flag.empty() ? fs::path(cfg.base.output_dir) : fs::path(out_dir_flag);
  fs::create_directories(out_dir);

  CompareSpec spec;
  spec.base = cfg.base.scenario;
  spec.strategies = cfg.strategies;
  spec.gap_policies = cfg.gap_policies;
  spec.avg_speed_tol_mps = cfg.avg_speed_tol_mps;
  spec.beta_tune_tol_mps = cfg.beta_tune_tol_mps;
  const CompareOutcome outcome = run_comparison(spec);

  std::vector<ComparisonCell> cells;
  for (const auto& c : outcome.cells) cells.push_back(c.cell);
  {
    std::ofstream csv(out_dir / "comparison.csv", std::ios::binary);
    write_comparison_csv(cells, csv);
  }
  {
    std::ofstream txt(out_dir / "comparison.txt", std::ios::binary);
    write_comparison_text(cells, txt);
    write_comparison_text(cells, std::cout);
  }
  nlohmann::json manifest = cfg.base.resolved;
  manifest["strategies"] = nlohmann::json::array();
  for (const auto& s : cfg.strategies) manifest["strategies"].push_back(strategy_name(s));
  manifest["gap_policies"] = nlohmann::json::array();
  for (const auto& g : cfg.gap_policies)
    manifest["gap_policies"].push_back(
        {{"kind", gap_policy_name(g.kind)}, {"value", g.value}});
  manifest["avg_speed_tol_mps"] = cfg.avg_speed_tol_mps;
  manifest["beta_tune_tol_mps"] = cfg.beta_tune_tol_mps;
  manifest["target_avg_mps"] = outcome.target_avg_mps;
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << (out_dir / "comparison.csv").string() << "\n";
  return 0;
}

int cmd_verify(int dp_instances, int safety_runs, std::uint64_t seed) {
  const DpOracleReport dp = verify_dp_oracle(dp_instances, seed);
  std::printf("dp-oracle      : %d instances, %d failures, %.2f s%s%s\n", dp.instances,
              dp.failures, dp.seconds, dp.failures ? " | " : "",
              dp.failures ? dp.first_failure.c_str() : "");
  const InvarianceReport inv = verify_safety_invariance(safety_runs, seed);
  std::printf("safety-invar   : %d runs, %d failures, min gap %.3g m, %.2f s%s%s\n", inv.runs,
              inv.failures, inv.worst_g2_m, inv.seconds, inv.failures ? " | " : "",
              inv.failures ? inv.first_failure.c_str() : "");
  const InvarianceReport chain = verify_platoon_invariance(std::max(safety_runs / 5, 1), seed);
  std::printf("platoon-invar  : %d runs, %d failures, min gap %.3g m, %.2f s%s%s\n",
              chain.runs, chain.failures, chain.worst_g2_m, chain.seconds,
              chain.failures ? " | " : "", chain.failures ? chain.first_failure.c_str() : "");
  return (dp.failures || inv.failures || chain.failures) ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-layer look-ahead platooning toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "run one scenario from a JSON config");
  run->add_option("config", config_path, "scenario config")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--set", overrides, "override config values, dotted.path=value");

  auto* compare = app.add_subcommand("compare", "strategy x gap-policy comparison matrix");
  compare->add_option("config", config_path, "comparison config")->required();
  compare->add_option("--out", out_dir, "output directory (overrides config)");
  compare->add_option("--set", overrides, "override config values, dotted.path=value");

  std::string road_kind = "flat", road_out = "road.csv";
  double length = 10000, grade = 0.02, steep_frac = 0.23, vref = 22.0;
  double approach = 500, up = 1000, upg = 0.03, plateau = 500, down = 1000, downg = -0.03,
         exit_len = 500;
  double vmin = 19.0, vmax = 23.6;
  std::uint64_t seed = 1;
  auto* roadgen = app.add_subcommand("roadgen", "emit a synthetic road CSV");
  roadgen->add_option("--kind", road_kind, "flat | ramp | hill | random_hilly");
  roadgen->add_option("--out", road_out, "output CSV path");
  roadgen->add_option("--length", length, "road length [m]");
  roadgen->add_option("--grade", grade, "ramp grade");
  roadgen->add_option("--steep-fraction", steep_frac, "random_hilly steep-length target");
  roadgen->add_option("--v-ref", vref, "steepness reference speed [m/s]");
  roadgen->add_option("--approach", approach, "hill approach length [m]");
  roadgen->add_option("--up", up, "hill climb length [m]");
  roadgen->add_option("--up-grade", upg, "hill climb grade");
  roadgen->add_option("--plateau", plateau, "hill plateau length [m]");
  roadgen->add_option("--down", down, "hill descent length [m]");
  roadgen->add_option("--down-grade", downg, "hill descent grade");
  roadgen->add_option("--exit", exit_len, "hill exit length [m]");
  roadgen->add_option("--vmin", vmin, "speed floor [m/s]");
  roadgen->add_option("--vmax", vmax, "speed limit [m/s]");
  roadgen->add_option("--seed", seed, "random_hilly seed");

  int dp_instances = 200, safety_runs = 1000;
  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "run the DP and safety property suites");
  verify->add_option("--dp-instances", dp_instances, "random DP oracle instances");
  verify->add_option("--safety-runs", safety_runs, "randomized invariance runs");
  verify->add_option("--seed", verify_seed, "suite seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, overrides, out_dir);
    if (*compare) return cmd_compare(config_path, overrides, out_dir);
    if (*roadgen) {
      SpeedLimits limits{vmin, vmax};
      RoadProfile road = synth_flat(length, limits);
      if (road_kind == "flat") {
      } else if (road_kind == "ramp") {
        road = synth_ramp(length, grade, limits);
      } else if (road_kind == "hill") {
        road = synth_hill(approach, up, upg, plateau, down, downg, exit_len, limits);
      } else if (road_kind == "random_hilly") {
        RandomHillySpec spec;
        spec.length_m = length;
        spec.target_steep_fraction = steep_frac;
        spec.v_ref_mps = vref;
        spec.seed = seed;
        spec.limits = limits;
        road = synth_random_hilly(spec, VehicleParams{});
      } else {
        std::cerr << "unknown road kind: " << road_kind << "\n";
        return 1;
      }
      std::ofstream out(road_out, std::ios::binary);
      write_road_csv(road, out);
      std::cout << "wrote " << road_out << " (" << road.length_m() << " m, steep fraction "
                << steep_fraction(road, VehicleParams{}, vref) << ")\n";
      return 0;
    }
    if (*verify) return cmd_verify(dp_instances, safety_runs, verify_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
