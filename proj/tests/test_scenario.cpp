#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "platoon/scenario.hpp"

using namespace platoon;
using nlohmann::json;

namespace {

json minimal_config() {
  return json{{"mode", "closed_loop"},
              {"strategy", "CC"},
              {"road", {{"synthetic", {{"kind", "flat"}, {"length_m", 2000.0}}}}},
              {"platoon", json::array({json::object()})}};
}

}  // namespace

TEST_CASE("minimal config resolves with defaults") {
  const ScenarioConfig cfg = ScenarioConfig::from_json(minimal_config(), ".");
  CHECK(cfg.scenario.strategy == Strategy::CC);
  CHECK(cfg.scenario.platoon.size() == 1);
  CHECK(cfg.scenario.platoon[0].mass_kg == doctest::Approx(40e3));
  CHECK(cfg.scenario.road.length_m() == doctest::Approx(2000.0));
  CHECK(cfg.scenario.mpc.horizon == 50);
  CHECK(cfg.scenario.dp.speed_levels == 41);
  CHECK(cfg.resolved.contains("mpc"));
}

TEST_CASE("unknown strategy is a schema error naming the field") {
  json j = minimal_config();
  j["strategy"] = "PID";
  try {
    ScenarioConfig::from_json(j, ".");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("strategy") != std::string::npos);
    CHECK(what.find("PID") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected with their path") {
  json j = minimal_config();
  j["mpc"] = {{"horizont", 50}};
  try {
    ScenarioConfig::from_json(j, ".");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("horizont") != std::string::npos);
  }
}

TEST_CASE("resolved config round-trips to the same resolved config") {
  json j = minimal_config();
  j["gap_policy"] = {{"kind", "TG"}, {"value", 1.2}};
  j["leader_events"] = json::array({{{"t_start_s", 5.0}, {"duration_s", 1.0},
                                     {"decel_mps2", 2.0}}});
  j["dp"] = {{"beta_g_per_s", 3.5}};
  const ScenarioConfig a = ScenarioConfig::from_json(j, ".");
  const ScenarioConfig b = ScenarioConfig::from_json(a.resolved, ".");
  CHECK(a.resolved == b.resolved);
}

TEST_CASE("dotted-path overrides") {
  json j = minimal_config();
  apply_override(j, "dp.speed_levels=61");
  apply_override(j, "v_set_mps=21.5");
  apply_override(j, "platoon[0].mass_kg=35000");
  const ScenarioConfig cfg = ScenarioConfig::from_json(j, ".");
  CHECK(cfg.scenario.dp.speed_levels == 61);
  CHECK(cfg.scenario.v_set_mps == doctest::Approx(21.5));
  CHECK(cfg.scenario.platoon[0].mass_kg == doctest::Approx(35000.0));
  CHECK_THROWS_AS(apply_override(j, "no-equals-sign"), ConfigError);
}

TEST_CASE("missing road file is reported with its path") {
  json j = minimal_config();
  j["road"] = {{"file", "does_not_exist.csv"}};
  try {
    ScenarioConfig::from_json(j, "/tmp");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("does_not_exist.csv") != std::string::npos);
  }
}

TEST_CASE("compare config splits the matrix from shared fields") {
  json j = minimal_config();
  j["strategies"] = json::array({"CC", "LAC", "CLAC"});
  j["gap_policies"] = json::array({{{"kind", "TG"}, {"value", 1.4}}});
  j.erase("mode");
  const CompareConfig cfg = CompareConfig::from_json(j, ".");
  CHECK(cfg.strategies.size() == 3);
  CHECK(cfg.gap_policies.size() == 1);
  CHECK(cfg.base.scenario.mode == Scenario::Mode::IdealTracking);
}

TEST_CASE("bad vehicle parameters fail with the vehicle path") {
  json j = minimal_config();
  j["platoon"][0]["mass_kg"] = -1.0;
  try {
    ScenarioConfig::from_json(j, ".");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("platoon[0]") != std::string::npos);
  }
}
