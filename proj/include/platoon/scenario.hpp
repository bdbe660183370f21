#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "platoon/sim.hpp"

namespace platoon {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * JSON scenario description. Parsing is strict: unknown keys, unknown enum
 * names and malformed values are reported with their field path. resolved()
 * returns the config with every default materialized; feeding it back
 * through parse is the identity (that file doubles as the run manifest).
 */
struct ScenarioConfig {
  Scenario scenario;
  std::string output_dir = "out";
  nlohmann::json resolved;

  static ScenarioConfig from_json(const nlohmann::json& j, const std::string& base_dir);
  static ScenarioConfig from_file(const std::string& path);
};

/// Comparison-harness config: one road/platoon, a strategy x gap-policy
/// matrix, and the equal-average-speed tolerance.
struct CompareConfig {
  ScenarioConfig base;  // shared scenario fields (strategy/policy ignored)
  std::vector<Strategy> strategies;
  std::vector<GapPolicy> gap_policies;
  double avg_speed_tol_mps = 0.05;
  double beta_tune_tol_mps = 0.02;

  static CompareConfig from_json(const nlohmann::json& j, const std::string& base_dir);
  static CompareConfig from_file(const std::string& path);
};

/// Apply `dotted.path=value` onto a config json (values parsed as json
/// scalars, falling back to string).
void apply_override(nlohmann::json& j, const std::string& assignment);

const char* strategy_name(Strategy s);
const char* gap_policy_name(GapPolicyKind k);

}  // namespace platoon
