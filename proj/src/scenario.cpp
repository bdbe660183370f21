#include "platoon/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace platoon {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  expect_object(j, path);
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(path + "." + key, "unknown field");
}

double get_num(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) fail(path + "." + key, "expected a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& path, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) fail(path + "." + key, "expected an integer");
  return j[key].get<int>();
}

std::string get_str(const json& j, const std::string& path, const char* key,
                    const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) fail(path + "." + key, "expected a string");
  return j[key].get<std::string>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) fail(path + "." + key, "expected a boolean");
  return j[key].get<bool>();
}

VehicleParams parse_vehicle(const json& j, const std::string& path) {
  check_keys(j, path,
             {"mass_kg", "length_m", "c_r", "frontal_area_m2", "air_density_kg_m3", "cd0",
              "cd1_m", "cd2_m", "p_max_w", "p_min_w", "fuel_p1_g_per_j", "fuel_p0_g_per_s",
              "eta_brake", "mu", "g_mps2", "standstill_accel_cap_mps2"});
  VehicleParams p;
  p.mass_kg = get_num(j, path, "mass_kg", p.mass_kg);
  p.length_m = get_num(j, path, "length_m", p.length_m);
  p.c_r = get_num(j, path, "c_r", p.c_r);
  p.frontal_area_m2 = get_num(j, path, "frontal_area_m2", p.frontal_area_m2);
  p.air_density_kg_m3 = get_num(j, path, "air_density_kg_m3", p.air_density_kg_m3);
  p.cd0 = get_num(j, path, "cd0", p.cd0);
  p.cd1_m = get_num(j, path, "cd1_m", p.cd1_m);
  p.cd2_m = get_num(j, path, "cd2_m", p.cd2_m);
  p.p_max_w = get_num(j, path, "p_max_w", p.p_max_w);
  p.p_min_w = get_num(j, path, "p_min_w", p.p_min_w);
  p.fuel_p1_g_per_j = get_num(j, path, "fuel_p1_g_per_j", p.fuel_p1_g_per_j);
  p.fuel_p0_g_per_s = get_num(j, path, "fuel_p0_g_per_s", p.fuel_p0_g_per_s);
  p.eta_brake = get_num(j, path, "eta_brake", p.eta_brake);
  p.mu = get_num(j, path, "mu", p.mu);
  p.g_mps2 = get_num(j, path, "g_mps2", p.g_mps2);
  p.standstill_accel_cap_mps2 =
      get_num(j, path, "standstill_accel_cap_mps2", p.standstill_accel_cap_mps2);
  try {
    p.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return p;
}

json vehicle_json(const VehicleParams& p) {
  return json{{"mass_kg", p.mass_kg},
              {"length_m", p.length_m},
              {"c_r", p.c_r},
              {"frontal_area_m2", p.frontal_area_m2},
              {"air_density_kg_m3", p.air_density_kg_m3},
              {"cd0", p.cd0},
              {"cd1_m", p.cd1_m},
              {"cd2_m", p.cd2_m},
              {"p_max_w", p.p_max_w},
              {"p_min_w", p.p_min_w},
              {"fuel_p1_g_per_j", p.fuel_p1_g_per_j},
              {"fuel_p0_g_per_s", p.fuel_p0_g_per_s},
              {"eta_brake", p.eta_brake},
              {"mu", p.mu},
              {"g_mps2", p.g_mps2},
              {"standstill_accel_cap_mps2", p.standstill_accel_cap_mps2}};
}

RoadProfile parse_road(const json& j, const std::string& path, const std::string& base_dir,
                       const std::vector<VehicleParams>& platoon, json* resolved) {
  check_keys(j, path, {"file", "synthetic"});
  if (j.contains("file") == j.contains("synthetic"))
    fail(path, "exactly one of 'file' or 'synthetic' required");
  *resolved = j;
  if (j.contains("file")) {
    std::string file = get_str(j, path, "file", "");
    std::filesystem::path fp(file);
    if (fp.is_relative()) fp = std::filesystem::path(base_dir) / fp;
    if (!std::filesystem::exists(fp)) fail(path + ".file", "file not found: " + fp.string());
    return load_road_file(fp.string());
  }
  const json& s = j["synthetic"];
  const std::string spath = path + ".synthetic";
  const std::string kind = get_str(s, spath, "kind", "");
  SpeedLimits limits;
  limits.vmin_mps = get_num(s, spath, "vmin_mps", limits.vmin_mps);
  limits.vmax_mps = get_num(s, spath, "vmax_mps", limits.vmax_mps);
  if (kind == "flat") {
    check_keys(s, spath, {"kind", "length_m", "vmin_mps", "vmax_mps"});
    return synth_flat(get_num(s, spath, "length_m", 1000.0), limits);
  }
  if (kind == "ramp") {
    check_keys(s, spath, {"kind", "length_m", "grade", "vmin_mps", "vmax_mps"});
    return synth_ramp(get_num(s, spath, "length_m", 1000.0), get_num(s, spath, "grade", 0.0),
                      limits);
  }
  if (kind == "hill") {
    check_keys(s, spath,
               {"kind", "approach_m", "up_m", "up_grade", "plateau_m", "down_m", "down_grade",
                "exit_m", "vmin_mps", "vmax_mps"});
    return synth_hill(get_num(s, spath, "approach_m", 500.0), get_num(s, spath, "up_m", 1000.0),
                      get_num(s, spath, "up_grade", 0.03),
                      get_num(s, spath, "plateau_m", 500.0),
                      get_num(s, spath, "down_m", 1000.0),
                      get_num(s, spath, "down_grade", -0.03),
                      get_num(s, spath, "exit_m", 500.0), limits);
  }
  if (kind == "random_hilly") {
    check_keys(s, spath,
               {"kind", "length_m", "target_steep_fraction", "v_ref_mps", "seed",
                "max_up_grade", "max_down_grade", "min_segment_m", "max_segment_m",
                "flat_cap_m", "snap_m", "vmin_mps", "vmax_mps"});
    RandomHillySpec spec;
    spec.length_m = get_num(s, spath, "length_m", spec.length_m);
    spec.target_steep_fraction =
        get_num(s, spath, "target_steep_fraction", spec.target_steep_fraction);
    spec.v_ref_mps = get_num(s, spath, "v_ref_mps", spec.v_ref_mps);
    spec.seed = static_cast<std::uint64_t>(get_num(s, spath, "seed", 1.0));
    spec.max_up_grade = get_num(s, spath, "max_up_grade", spec.max_up_grade);
    spec.max_down_grade = get_num(s, spath, "max_down_grade", spec.max_down_grade);
    spec.min_segment_m = get_num(s, spath, "min_segment_m", spec.min_segment_m);
    spec.max_segment_m = get_num(s, spath, "max_segment_m", spec.max_segment_m);
    spec.flat_cap_m = get_num(s, spath, "flat_cap_m", spec.flat_cap_m);
    spec.snap_m = get_num(s, spath, "snap_m", spec.snap_m);
    spec.limits = limits;
    return synth_random_hilly(spec, platoon.empty() ? VehicleParams{} : platoon[0]);
  }
  fail(spath + ".kind", "unknown road kind '" + kind + "'");
}

Strategy parse_strategy(const std::string& name, const std::string& path) {
  if (name == "CC") return Strategy::CC;
  if (name == "LAC") return Strategy::LAC;
  if (name == "CLAC") return Strategy::CLAC;
  fail(path, "unknown strategy '" + name + "' (expected CC, LAC or CLAC)");
}

GapPolicy parse_gap_policy(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "value"});
  GapPolicy g;
  const std::string kind = get_str(j, path, "kind", "TG");
  if (kind == "SG")
    g.kind = GapPolicyKind::SpaceGap;
  else if (kind == "HG")
    g.kind = GapPolicyKind::HeadwayGap;
  else if (kind == "TG")
    g.kind = GapPolicyKind::TimeGap;
  else
    fail(path + ".kind", "unknown gap policy '" + kind + "' (expected SG, HG or TG)");
  g.value = get_num(j, path, "value", g.kind == GapPolicyKind::SpaceGap ? 12.8 : 1.4);
  if (!(g.value > 0)) fail(path + ".value", "must be positive");
  return g;
}

}  // namespace

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::CC: return "CC";
    case Strategy::LAC: return "LAC";
    case Strategy::CLAC: return "CLAC";
  }
  return "?";
}

const char* gap_policy_name(GapPolicyKind k) {
  switch (k) {
    case GapPolicyKind::SpaceGap: return "SG";
    case GapPolicyKind::HeadwayGap: return "HG";
    case GapPolicyKind::TimeGap: return "TG";
  }
  return "?";
}

ScenarioConfig ScenarioConfig::from_json(const json& j, const std::string& base_dir) {
  check_keys(j, "$",
             {"seed", "mode", "strategy", "gap_policy", "v_set_mps", "duration_s",
              "end_margin_m", "plant_dt_s", "integrator", "road", "platoon", "dp", "mpc",
              "envelope", "leader_events", "window", "output_dir", "version"});
  ScenarioConfig out;
  Scenario& sc = out.scenario;

  sc.seed = static_cast<std::uint64_t>(get_num(j, "$", "seed", 1.0));
  const std::string mode = get_str(j, "$", "mode", "closed_loop");
  if (mode == "closed_loop")
    sc.mode = Scenario::Mode::ClosedLoop;
  else if (mode == "ideal_tracking")
    sc.mode = Scenario::Mode::IdealTracking;
  else
    fail("$.mode", "unknown mode '" + mode + "'");
  sc.strategy = parse_strategy(get_str(j, "$", "strategy", "CLAC"), "$.strategy");
  if (j.contains("gap_policy")) sc.gap_policy = parse_gap_policy(j["gap_policy"], "$.gap_policy");
  sc.v_set_mps = get_num(j, "$", "v_set_mps", sc.v_set_mps);
  sc.duration_s = get_num(j, "$", "duration_s", sc.duration_s);
  sc.end_margin_m = get_num(j, "$", "end_margin_m", sc.end_margin_m);
  sc.plant_dt_s = get_num(j, "$", "plant_dt_s", sc.plant_dt_s);
  const std::string integ = get_str(j, "$", "integrator", "euler");
  if (integ == "euler")
    sc.integrator = Integrator::Euler;
  else if (integ == "rk4")
    sc.integrator = Integrator::Rk4;
  else
    fail("$.integrator", "unknown integrator '" + integ + "'");

  if (!j.contains("platoon") || !j["platoon"].is_array() || j["platoon"].empty())
    fail("$.platoon", "need a non-empty vehicle array");
  for (std::size_t i = 0; i < j["platoon"].size(); ++i)
    sc.platoon.push_back(parse_vehicle(j["platoon"][i], "$.platoon[" + std::to_string(i) + "]"));

  json road_resolved;
  if (!j.contains("road")) fail("$.road", "required");
  sc.road = parse_road(j["road"], "$.road", base_dir, sc.platoon, &road_resolved);

  if (j.contains("dp")) {
    const json& d = j["dp"];
    check_keys(d, "$.dp",
               {"ds_m", "horizon_cells", "speed_levels", "beta_g_per_s", "final_speed_mps",
                "refresh_distance_m", "replan_deviation_mps"});
    sc.dp.ds_m = get_num(d, "$.dp", "ds_m", sc.dp.ds_m);
    sc.dp.horizon_cells = get_int(d, "$.dp", "horizon_cells", sc.dp.horizon_cells);
    sc.dp.speed_levels = get_int(d, "$.dp", "speed_levels", sc.dp.speed_levels);
    sc.dp.beta_g_per_s = get_num(d, "$.dp", "beta_g_per_s", sc.dp.beta_g_per_s);
    if (d.contains("final_speed_mps") && !d["final_speed_mps"].is_null())
      sc.dp.final_speed_mps = get_num(d, "$.dp", "final_speed_mps", 0.0);
    sc.dp.refresh_distance_m = get_num(d, "$.dp", "refresh_distance_m", sc.dp.refresh_distance_m);
    sc.dp.replan_deviation_mps =
        get_num(d, "$.dp", "replan_deviation_mps", sc.dp.replan_deviation_mps);
  }
  if (j.contains("mpc")) {
    const json& m = j["mpc"];
    check_keys(m, "$.mpc",
               {"dt_s", "horizon", "rate_hz", "q_speed", "q_pos", "r_accel", "p_soft", "zeta",
                "solver_tol"});
    sc.mpc.dt_s = get_num(m, "$.mpc", "dt_s", sc.mpc.dt_s);
    sc.mpc.horizon = get_int(m, "$.mpc", "horizon", sc.mpc.horizon);
    sc.mpc.rate_hz = get_num(m, "$.mpc", "rate_hz", sc.mpc.rate_hz);
    sc.mpc.q_speed = get_num(m, "$.mpc", "q_speed", sc.mpc.q_speed);
    sc.mpc.q_pos = get_num(m, "$.mpc", "q_pos", sc.mpc.q_pos);
    sc.mpc.r_accel = get_num(m, "$.mpc", "r_accel", sc.mpc.r_accel);
    sc.mpc.p_soft = get_num(m, "$.mpc", "p_soft", sc.mpc.p_soft);
    sc.mpc.zeta = get_num(m, "$.mpc", "zeta", sc.mpc.zeta);
    sc.mpc.solver_tol = get_num(m, "$.mpc", "solver_tol", sc.mpc.solver_tol);
    sc.mpc.validate();
  }
  if (j.contains("envelope") && !j["envelope"].is_null()) {
    const json& e = j["envelope"];
    check_keys(e, "$.envelope", {"v_max_mps", "mass_lo_kg", "mass_hi_kg", "alpha_max_rad"});
    EnvelopeAssumptions box;
    box.v_max_mps = get_num(e, "$.envelope", "v_max_mps", box.v_max_mps);
    box.mass_lo_kg = get_num(e, "$.envelope", "mass_lo_kg", box.mass_lo_kg);
    box.mass_hi_kg = get_num(e, "$.envelope", "mass_hi_kg", box.mass_hi_kg);
    box.alpha_max_rad = get_num(e, "$.envelope", "alpha_max_rad", box.alpha_max_rad);
    sc.envelope = box;
  }
  if (j.contains("leader_events")) {
    if (!j["leader_events"].is_array()) fail("$.leader_events", "expected an array");
    for (std::size_t i = 0; i < j["leader_events"].size(); ++i) {
      const json& e = j["leader_events"][i];
      const std::string p = "$.leader_events[" + std::to_string(i) + "]";
      check_keys(e, p, {"t_start_s", "duration_s", "until_stop", "decel_mps2"});
      LeaderEvent ev;
      ev.t_start_s = get_num(e, p, "t_start_s", 0.0);
      ev.duration_s = get_num(e, p, "duration_s", 0.0);
      ev.until_stop = get_bool(e, p, "until_stop", false);
      ev.decel_mps2 = get_num(e, p, "decel_mps2", 0.0);
      if (!ev.until_stop && !(ev.duration_s > 0)) fail(p + ".duration_s", "must be positive");
      if (!(ev.decel_mps2 > 0)) fail(p + ".decel_mps2", "must be positive");
      sc.leader_events.push_back(ev);
    }
  }
  if (j.contains("window") && !j["window"].is_null()) {
    const json& w = j["window"];
    check_keys(w, "$.window", {"start_m", "end_m"});
    if (w.contains("start_m")) sc.window_start_m = get_num(w, "$.window", "start_m", 0.0);
    if (w.contains("end_m")) sc.window_end_m = get_num(w, "$.window", "end_m", 0.0);
  }
  out.output_dir = get_str(j, "$", "output_dir", out.output_dir);

  // Fully-resolved config: parsing it again reproduces this scenario.
  json r;
  r["version"] = kVersion;
  r["seed"] = sc.seed;
  r["mode"] = mode;
  r["strategy"] = strategy_name(sc.strategy);
  r["gap_policy"] = {{"kind", gap_policy_name(sc.gap_policy.kind)}, {"value", sc.gap_policy.value}};
  r["v_set_mps"] = sc.v_set_mps;
  r["duration_s"] = sc.duration_s;
  r["end_margin_m"] = sc.end_margin_m;
  r["plant_dt_s"] = sc.plant_dt_s;
  r["integrator"] = integ;
  r["road"] = road_resolved;
  r["platoon"] = json::array();
  for (const auto& p : sc.platoon) r["platoon"].push_back(vehicle_json(p));
  r["dp"] = {{"ds_m", sc.dp.ds_m},
             {"horizon_cells", sc.dp.horizon_cells},
             {"speed_levels", sc.dp.speed_levels},
             {"beta_g_per_s", sc.dp.beta_g_per_s},
             {"refresh_distance_m", sc.dp.refresh_distance_m},
             {"replan_deviation_mps", sc.dp.replan_deviation_mps}};
  if (sc.dp.final_speed_mps) r["dp"]["final_speed_mps"] = *sc.dp.final_speed_mps;
  r["mpc"] = {{"dt_s", sc.mpc.dt_s},     {"horizon", sc.mpc.horizon},
              {"rate_hz", sc.mpc.rate_hz}, {"q_speed", sc.mpc.q_speed},
              {"q_pos", sc.mpc.q_pos},   {"r_accel", sc.mpc.r_accel},
              {"p_soft", sc.mpc.p_soft}, {"zeta", sc.mpc.zeta},
              {"solver_tol", sc.mpc.solver_tol}};
  if (sc.envelope)
    r["envelope"] = {{"v_max_mps", sc.envelope->v_max_mps},
                     {"mass_lo_kg", sc.envelope->mass_lo_kg},
                     {"mass_hi_kg", sc.envelope->mass_hi_kg},
                     {"alpha_max_rad", sc.envelope->alpha_max_rad}};
  if (!sc.leader_events.empty()) {
    r["leader_events"] = json::array();
    for (const auto& ev : sc.leader_events)
      r["leader_events"].push_back({{"t_start_s", ev.t_start_s},
                                    {"duration_s", ev.duration_s},
                                    {"until_stop", ev.until_stop},
                                    {"decel_mps2", ev.decel_mps2}});
  }
  if (sc.window_start_m || sc.window_end_m) {
    r["window"] = json::object();
    if (sc.window_start_m) r["window"]["start_m"] = *sc.window_start_m;
    if (sc.window_end_m) r["window"]["end_m"] = *sc.window_end_m;
  }
  r["output_dir"] = out.output_dir;
  out.resolved = std::move(r);
  return out;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

CompareConfig CompareConfig::from_json(const json& j, const std::string& base_dir) {
  CompareConfig out;
  json base = j;
  base.erase("strategies");
  base.erase("gap_policies");
  base.erase("avg_speed_tol_mps");
  base.erase("beta_tune_tol_mps");
  base["mode"] = "ideal_tracking";
  out.base = ScenarioConfig::from_json(base, base_dir);
  if (!j.contains("strategies") || !j["strategies"].is_array() || j["strategies"].empty())
    fail("$.strategies", "need a non-empty array");
  for (const auto& s : j["strategies"])
    out.strategies.push_back(parse_strategy(s.get<std::string>(), "$.strategies"));
  if (!j.contains("gap_policies") || !j["gap_policies"].is_array() || j["gap_policies"].empty())
    fail("$.gap_policies", "need a non-empty array");
  for (std::size_t i = 0; i < j["gap_policies"].size(); ++i)
    out.gap_policies.push_back(
        parse_gap_policy(j["gap_policies"][i], "$.gap_policies[" + std::to_string(i) + "]"));
  out.avg_speed_tol_mps = get_num(j, "$", "avg_speed_tol_mps", out.avg_speed_tol_mps);
  out.beta_tune_tol_mps = get_num(j, "$", "beta_tune_tol_mps", out.beta_tune_tol_mps);
  return out;
}

CompareConfig CompareConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' is not of the form path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("override '" + assignment + "': empty path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    const std::string& key = parts[i];
    // Array elements addressed as name[idx].
    const auto br = key.find('[');
    if (br != std::string::npos) {
      const std::string name = key.substr(0, br);
      const std::size_t idx = std::stoul(key.substr(br + 1));
      node = &(*node)[name][idx];
    } else {
      node = &(*node)[key];
    }
  }
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // plain string
  const std::string& leaf = parts.back();
  const auto br = leaf.find('[');
  if (br != std::string::npos) {
    (*node)[leaf.substr(0, br)][std::stoul(leaf.substr(br + 1))] = parsed;
  } else {
    (*node)[leaf] = parsed;
  }
}

}  // namespace platoon
