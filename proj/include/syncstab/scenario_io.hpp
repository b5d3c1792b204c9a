#pragma once

// Scenario files: a strict JSON reader (unknown keys are errors, units live in
// key names), a canonical writer and sweep expansion.

#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "syncstab/errors.hpp"
#include "syncstab/scenario.hpp"

namespace syncstab {

using json = nlohmann::json;

struct SegmentPu {
  double r_pu = 0.0;
  double x_pu = 0.0;
};
struct SegmentOhm {
  double length_km = 0.0;
  double r_ohm_per_km = 0.0;
  double x_ohm_per_km = 0.0;
};
using SegmentSpec = std::variant<SegmentPu, SegmentOhm>;

struct BranchSpec {
  std::vector<SegmentSpec> segments;
  std::optional<TapPoint> attach;
};

/// "random" draws the initial angle from the run seed.
using InitialAngle = std::variant<std::monostate, double, std::string>;

struct ConverterFileSpec {
  ConverterSpec net;
  ConverterSetup setup;
  InitialAngle initial_delta;
};

struct OutputSpec {
  bool timeseries = true;
  bool summary = true;
};

/// In-memory image of a scenario file. Every optional section is filled with
/// its default, so writing it back gives the canonical form.
struct ScenarioFile {
  std::string name = "scenario";
  double s_base_va = 0.0;
  double v_base_v = 0.0;
  double frequency_hz = 50.0;
  GridSource grid;
  std::vector<BranchSpec> branches;
  std::vector<ConverterFileSpec> converters;
  std::vector<Event> events;
  ProtectionConfig protection;
  FfcConfig ffc;
  SyncCriteria sync;
  SolverConfig solver;
  double t_end_s = 1.0;
  std::optional<Sweep> sweep;
  OutputSpec outputs;
};

namespace detail {

/// Checks that `j` is an object whose keys are all in `allowed`.
inline void require_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ValidationError(where + ": unknown key '" + it.key() + "'");
  }
}

inline double number(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline double number_or(const json& j, const std::string& where, const char* key, double fallback) {
  return j.contains(key) ? number(j, where, key) : fallback;
}

inline std::size_t count_or(const json& j, const std::string& where, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ValidationError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline std::string text_or(const json& j, const std::string& where, const char* key, std::string fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ValidationError(where + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

inline bool flag_or(const json& j, const std::string& where, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ValidationError(where + "." + key + ": expected a boolean");
  return j.at(key).get<bool>();
}

inline const json& array(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw ValidationError(where + ": '" + key + "' must be an array");
  return j.at(key);
}

inline TapPoint tap_point(const json& j, const std::string& where) {
  require_keys(j, where, {"branch", "tap"});
  if (!j.contains("branch") || !j.contains("tap")) throw ValidationError(where + ": needs 'branch' and 'tap'");
  return {count_or(j, where, "branch", 0), count_or(j, where, "tap", 0)};
}

inline Impedance impedance(const json& j, const std::string& where) {
  require_keys(j, where, {"r_pu", "x_pu"});
  return Impedance(number(j, where, "r_pu"), number(j, where, "x_pu"));
}

inline CurrentReference current_ref(const json& j, const std::string& where, CurrentReference fallback) {
  require_keys(j, where, {"i_d_pu", "i_q_pu"});
  return {number_or(j, where, "i_d_pu", fallback.i_d), number_or(j, where, "i_q_pu", fallback.i_q)};
}

template <typename E, std::size_t N>
E enum_from(const std::string& s, const std::string& where, const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [e, name] : table) {
    if (s == name) return e;
  }
  throw ValidationError(where + ": unknown value '" + s + "'");
}

template <typename E, std::size_t N>
const char* enum_name(E e, const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [v, name] : table) {
    if (v == e) return name;
  }
  return "?";
}

inline constexpr std::pair<EventKind, const char*> kEventNames[] = {
    {EventKind::GridDip, "grid_dip"}, {EventKind::GridRecover, "grid_recover"}, {EventKind::EnterFrt, "enter_frt"}};
inline constexpr std::pair<StrategyKind, const char*> kStrategyNames[] = {
    {StrategyKind::ConstantRefs, "constant_refs"}, {StrategyKind::Aci, "aci"},
    {StrategyKind::FreqRegulated, "freq_regulated"}};
inline constexpr std::pair<ProtectionCurrent, const char*> kProtectionCurrentNames[] = {
    {ProtectionCurrent::Zero, "zero"}, {ProtectionCurrent::Normal, "normal"}};
inline constexpr std::pair<ProtectionPll, const char*> kProtectionPllNames[] = {
    {ProtectionPll::Track, "track"}, {ProtectionPll::Hold, "hold"}};
inline constexpr std::pair<FfcEngage, const char*> kEngageNames[] = {
    {FfcEngage::Immediate, "immediate"}, {FfcEngage::ZeroCrossing, "zero_crossing"}};
inline constexpr std::pair<IntegrationMethod, const char*> kIntegratorNames[] = {
    {IntegrationMethod::Rk4, "rk4"}, {IntegrationMethod::ForwardEuler, "euler"}};

inline ConverterFileSpec converter(const json& j, const std::string& where) {
  require_keys(j, where, {"name", "s_rated_va", "transformer", "location", "pll", "method", "strategy", "initial"});
  ConverterFileSpec c;
  c.net.name = text_or(j, where, "name", "");
  c.net.s_rated_va = number(j, where, "s_rated_va");
  if (!j.contains("transformer")) throw ValidationError(where + ": missing 'transformer'");
  c.net.transformer = impedance(j.at("transformer"), where + ".transformer");
  if (j.contains("location") && !j.at("location").is_null()) {
    c.net.location = tap_point(j.at("location"), where + ".location");
  }
  if (j.contains("pll")) {
    const auto& p = j.at("pll");
    require_keys(p, where + ".pll", {"kp_rad_per_s_per_pu", "ki_rad_per_s2_per_pu"});
    c.net.gains.kp = number_or(p, where + ".pll", "kp_rad_per_s_per_pu", c.net.gains.kp);
    c.net.gains.ki = number_or(p, where + ".pll", "ki_rad_per_s2_per_pu", c.net.gains.ki);
  }
  c.setup.method = method_from_string(text_or(j, where, "method", "original"));
  c.setup.strategy.kind = strategy_for(c.setup.method);
  if (j.contains("strategy")) {
    const auto& s = j.at("strategy");
    const std::string w = where + ".strategy";
    require_keys(s, w, {"kind", "normal_ref", "fault_ref", "current_limit_pu", "aci_impedance_angle_rad",
                        "freq_gain_pu_per_rad"});
    auto& st = c.setup.strategy;
    if (s.contains("kind")) st.kind = enum_from(text_or(s, w, "kind", ""), w + ".kind", kStrategyNames);
    if (s.contains("normal_ref")) st.normal_ref = current_ref(s.at("normal_ref"), w + ".normal_ref", st.normal_ref);
    if (s.contains("fault_ref")) st.fault_ref = current_ref(s.at("fault_ref"), w + ".fault_ref", st.fault_ref);
    st.current_limit_pu = number_or(s, w, "current_limit_pu", st.current_limit_pu);
    if (s.contains("aci_impedance_angle_rad")) st.aci_impedance_angle_rad = number(s, w, "aci_impedance_angle_rad");
    st.freq_gain_pu_per_rad = number_or(s, w, "freq_gain_pu_per_rad", st.freq_gain_pu_per_rad);
  }
  if (j.contains("initial")) {
    const auto& i = j.at("initial");
    const std::string w = where + ".initial";
    require_keys(i, w, {"delta_rad", "integ_rad_per_s"});
    if (i.contains("delta_rad")) {
      const auto& d = i.at("delta_rad");
      if (d.is_number()) {
        c.initial_delta = d.get<double>();
      } else if (d.is_string() && d.get<std::string>() == "random") {
        c.initial_delta = std::string("random");
      } else if (!d.is_null()) {
        throw ValidationError(w + ".delta_rad: expected a number, \"random\" or null");
      }
    }
    c.setup.initial_integ_rad_s = number_or(i, w, "integ_rad_per_s", 0.0);
  }
  return c;
}

}  // namespace detail

inline ScenarioFile scenario_from_json(const json& j) {
  using namespace detail;
  require_keys(j, "scenario", {"name", "bases", "grid", "branches", "converters", "events", "protection", "ffc",
                               "sync", "solver", "t_end_s", "sweep", "outputs"});
  ScenarioFile f;
  f.name = text_or(j, "scenario", "name", f.name);

  if (!j.contains("bases")) throw ValidationError("scenario: missing 'bases'");
  const auto& b = j.at("bases");
  require_keys(b, "bases", {"s_base_va", "v_base_v", "frequency_hz"});
  f.s_base_va = number(b, "bases", "s_base_va");
  f.v_base_v = number(b, "bases", "v_base_v");
  f.frequency_hz = number_or(b, "bases", "frequency_hz", f.frequency_hz);

  if (!j.contains("grid")) throw ValidationError("scenario: missing 'grid'");
  const auto& g = j.at("grid");
  require_keys(g, "grid", {"u_pu", "theta_rad", "r_pu", "x_pu"});
  f.grid.u_pu = number_or(g, "grid", "u_pu", 1.0);
  f.grid.theta_rad = number_or(g, "grid", "theta_rad", 0.0);
  f.grid.z = Impedance(number(g, "grid", "r_pu"), number(g, "grid", "x_pu"));

  if (j.contains("branches")) {
    const auto& arr = array(j, "scenario", "branches");
    for (std::size_t bi = 0; bi < arr.size(); ++bi) {
      const std::string w = "branches[" + std::to_string(bi) + "]";
      require_keys(arr[bi], w, {"segments", "attach"});
      BranchSpec br;
      const auto& segs = array(arr[bi], w, "segments");
      for (std::size_t si = 0; si < segs.size(); ++si) {
        const std::string ws = w + ".segments[" + std::to_string(si) + "]";
        const auto& s = segs[si];
        if (s.is_object() && s.contains("length_km")) {
          require_keys(s, ws, {"length_km", "r_ohm_per_km", "x_ohm_per_km"});
          br.segments.push_back(SegmentOhm{number(s, ws, "length_km"), number(s, ws, "r_ohm_per_km"),
                                           number(s, ws, "x_ohm_per_km")});
        } else {
          require_keys(s, ws, {"r_pu", "x_pu"});
          br.segments.push_back(SegmentPu{number(s, ws, "r_pu"), number(s, ws, "x_pu")});
        }
      }
      if (arr[bi].contains("attach") && !arr[bi].at("attach").is_null()) {
        br.attach = tap_point(arr[bi].at("attach"), w + ".attach");
      }
      f.branches.push_back(std::move(br));
    }
  }

  const auto& convs = array(j, "scenario", "converters");
  for (std::size_t k = 0; k < convs.size(); ++k) {
    f.converters.push_back(converter(convs[k], "converters[" + std::to_string(k) + "]"));
  }

  if (j.contains("events")) {
    const auto& evs = array(j, "scenario", "events");
    for (std::size_t ei = 0; ei < evs.size(); ++ei) {
      const std::string w = "events[" + std::to_string(ei) + "]";
      require_keys(evs[ei], w, {"time_s", "kind", "u_pu", "phase_jump_rad"});
      Event e;
      e.time_s = number(evs[ei], w, "time_s");
      e.kind = enum_from(text_or(evs[ei], w, "kind", ""), w + ".kind", kEventNames);
      e.u_pu = e.kind == EventKind::EnterFrt ? number_or(evs[ei], w, "u_pu", 0.0) : number(evs[ei], w, "u_pu");
      e.phase_jump_rad = number_or(evs[ei], w, "phase_jump_rad", 0.0);
      f.events.push_back(e);
    }
  }

  if (j.contains("protection")) {
    const auto& p = j.at("protection");
    require_keys(p, "protection", {"delay_s", "current", "pll"});
    f.protection.delay_s = number_or(p, "protection", "delay_s", f.protection.delay_s);
    if (p.contains("current")) {
      f.protection.current = enum_from(text_or(p, "protection", "current", ""), "protection.current",
                                       kProtectionCurrentNames);
    }
    if (p.contains("pll")) {
      f.protection.pll = enum_from(text_or(p, "protection", "pll", ""), "protection.pll", kProtectionPllNames);
    }
  }

  if (j.contains("ffc")) {
    const auto& p = j.at("ffc");
    require_keys(p, "ffc", {"deadzone_rad_per_s", "t_hold_s", "epsilon_pu", "engage"});
    f.ffc.deadzone_rad_s = number_or(p, "ffc", "deadzone_rad_per_s", f.ffc.deadzone_rad_s);
    f.ffc.t_hold_s = number_or(p, "ffc", "t_hold_s", f.ffc.t_hold_s);
    f.ffc.epsilon_pu = number_or(p, "ffc", "epsilon_pu", f.ffc.epsilon_pu);
    if (p.contains("engage")) f.ffc.engage = enum_from(text_or(p, "ffc", "engage", ""), "ffc.engage", kEngageNames);
  }

  if (j.contains("sync")) {
    const auto& p = j.at("sync");
    require_keys(p, "sync", {"tol_rad_per_s", "min_hold_s"});
    f.sync.tol_rad_s = number_or(p, "sync", "tol_rad_per_s", f.sync.tol_rad_s);
    f.sync.min_hold_s = number_or(p, "sync", "min_hold_s", f.sync.min_hold_s);
  }

  if (j.contains("solver")) {
    const auto& p = j.at("solver");
    require_keys(p, "solver", {"dt_s", "method", "record_stride"});
    f.solver.dt_s = number_or(p, "solver", "dt_s", f.solver.dt_s);
    if (p.contains("method")) {
      f.solver.method = enum_from(text_or(p, "solver", "method", ""), "solver.method", kIntegratorNames);
    }
    f.solver.record_stride = count_or(p, "solver", "record_stride", f.solver.record_stride);
  }

  f.t_end_s = number(j, "scenario", "t_end_s");

  if (j.contains("sweep") && !j.at("sweep").is_null()) {
    const auto& s = j.at("sweep");
    require_keys(s, "sweep", {"path", "values"});
    Sweep sw;
    sw.path = text_or(s, "sweep", "path", "");
    try {
      (void)json::json_pointer(sw.path);
    } catch (const json::exception& e) {
      throw ValidationError("sweep.path: " + std::string(e.what()));
    }
    for (const auto& v : array(s, "sweep", "values")) {
      if (!v.is_number()) throw ValidationError("sweep.values: expected numbers");
      sw.values.push_back(v.get<double>());
    }
    if (sw.values.empty()) throw ValidationError("sweep.values must not be empty");
    f.sweep = std::move(sw);
  }

  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    require_keys(o, "outputs", {"timeseries", "summary"});
    f.outputs.timeseries = flag_or(o, "outputs", "timeseries", true);
    f.outputs.summary = flag_or(o, "outputs", "summary", true);
  }
  return f;
}

inline json to_json(const ScenarioFile& f) {
  using namespace detail;
  auto imp = [](const Impedance& z) { return json{{"r_pu", z.r()}, {"x_pu", z.l()}}; };
  auto tap = [](const TapPoint& t) { return json{{"branch", t.branch}, {"tap", t.tap}}; };
  auto ref = [](const CurrentReference& r) { return json{{"i_d_pu", r.i_d}, {"i_q_pu", r.i_q}}; };

  json j;
  j["name"] = f.name;
  j["bases"] = {{"s_base_va", f.s_base_va}, {"v_base_v", f.v_base_v}, {"frequency_hz", f.frequency_hz}};
  j["grid"] = {{"u_pu", f.grid.u_pu}, {"theta_rad", f.grid.theta_rad}, {"r_pu", f.grid.z.r()}, {"x_pu", f.grid.z.l()}};
  j["branches"] = json::array();
  for (const auto& b : f.branches) {
    json jb;
    jb["segments"] = json::array();
    for (const auto& s : b.segments) {
      if (const auto* p = std::get_if<SegmentPu>(&s)) {
        jb["segments"].push_back({{"r_pu", p->r_pu}, {"x_pu", p->x_pu}});
      } else {
        const auto& o = std::get<SegmentOhm>(s);
        jb["segments"].push_back(
            {{"length_km", o.length_km}, {"r_ohm_per_km", o.r_ohm_per_km}, {"x_ohm_per_km", o.x_ohm_per_km}});
      }
    }
    jb["attach"] = b.attach ? tap(*b.attach) : json(nullptr);
    j["branches"].push_back(std::move(jb));
  }
  j["converters"] = json::array();
  for (const auto& c : f.converters) {
    json jc;
    jc["name"] = c.net.name;
    jc["s_rated_va"] = c.net.s_rated_va;
    jc["transformer"] = imp(c.net.transformer);
    jc["location"] = c.net.location ? tap(*c.net.location) : json(nullptr);
    jc["pll"] = {{"kp_rad_per_s_per_pu", c.net.gains.kp}, {"ki_rad_per_s2_per_pu", c.net.gains.ki}};
    jc["method"] = to_string(c.setup.method);
    const auto& st = c.setup.strategy;
    jc["strategy"] = {{"kind", enum_name(st.kind, kStrategyNames)},
                      {"normal_ref", ref(st.normal_ref)},
                      {"fault_ref", ref(st.fault_ref)},
                      {"current_limit_pu", st.current_limit_pu},
                      {"freq_gain_pu_per_rad", st.freq_gain_pu_per_rad}};
    if (st.aci_impedance_angle_rad) jc["strategy"]["aci_impedance_angle_rad"] = *st.aci_impedance_angle_rad;
    json init;
    if (const auto* d = std::get_if<double>(&c.initial_delta)) {
      init["delta_rad"] = *d;
    } else if (const auto* s = std::get_if<std::string>(&c.initial_delta)) {
      init["delta_rad"] = *s;
    } else {
      init["delta_rad"] = nullptr;
    }
    init["integ_rad_per_s"] = c.setup.initial_integ_rad_s;
    jc["initial"] = std::move(init);
    j["converters"].push_back(std::move(jc));
  }
  j["events"] = json::array();
  for (const auto& e : f.events) {
    j["events"].push_back({{"time_s", e.time_s},
                           {"kind", enum_name(e.kind, kEventNames)},
                           {"u_pu", e.u_pu},
                           {"phase_jump_rad", e.phase_jump_rad}});
  }
  j["protection"] = {{"delay_s", f.protection.delay_s},
                     {"current", enum_name(f.protection.current, kProtectionCurrentNames)},
                     {"pll", enum_name(f.protection.pll, kProtectionPllNames)}};
  j["ffc"] = {{"deadzone_rad_per_s", f.ffc.deadzone_rad_s},
              {"t_hold_s", f.ffc.t_hold_s},
              {"epsilon_pu", f.ffc.epsilon_pu},
              {"engage", enum_name(f.ffc.engage, kEngageNames)}};
  j["sync"] = {{"tol_rad_per_s", f.sync.tol_rad_s}, {"min_hold_s", f.sync.min_hold_s}};
  j["solver"] = {{"dt_s", f.solver.dt_s},
                 {"method", enum_name(f.solver.method, kIntegratorNames)},
                 {"record_stride", f.solver.record_stride}};
  j["t_end_s"] = f.t_end_s;
  j["sweep"] = f.sweep ? json{{"path", f.sweep->path}, {"values", f.sweep->values}} : json(nullptr);
  j["outputs"] = {{"timeseries", f.outputs.timeseries}, {"summary", f.outputs.summary}};
  return j;
}

inline std::string canonical_text(const ScenarioFile& f) { return to_json(f).dump(2) + "\n"; }

inline ScenarioFile parse_scenario_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed scenario: ") + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid scenario: ") + e.what());
  }
}

inline ScenarioFile load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

/// Assembles the runnable scenario and validates it. `seed` only affects
/// converters whose initial angle is "random".
inline Scenario build_scenario(const ScenarioFile& f, std::uint64_t seed = 0) {
  const BaseSet base = BaseSet::from_frequency(f.s_base_va, f.v_base_v, f.frequency_hz);
  std::vector<Branch> branches;
  for (const auto& b : f.branches) {
    Branch br;
    br.attach = b.attach;
    for (const auto& s : b.segments) {
      if (const auto* p = std::get_if<SegmentPu>(&s)) {
        br.segments.emplace_back(p->r_pu, p->x_pu);
      } else {
        const auto& o = std::get<SegmentOhm>(s);
        if (!(o.length_km >= 0.0)) throw ValidationError("segment length must be >= 0");
        br.segments.push_back(ohms_to_pu(o.length_km * o.r_ohm_per_km, o.length_km * o.x_ohm_per_km, base.z_base()));
      }
    }
    branches.push_back(std::move(br));
  }
  std::vector<ConverterSpec> specs;
  std::vector<ConverterSetup> setups;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (const auto& c : f.converters) {
    if (!(c.net.s_rated_va > 0.0)) throw ValidationError("converter s_rated_va must be positive");
    specs.push_back(c.net);
    ConverterSetup s = c.setup;
    if (const auto* d = std::get_if<double>(&c.initial_delta)) s.initial_delta_rad = *d;
    if (std::holds_alternative<std::string>(c.initial_delta)) s.initial_delta_rad = angle(rng);
    setups.push_back(s);
  }
  Scenario sc{f.name, NetworkTopology(base, f.grid, std::move(branches), std::move(specs)), std::move(setups),
              f.events, f.protection, f.ffc, f.sync, f.solver, f.t_end_s};
  sc = resolve_defaults(std::move(sc));
  validate(sc);
  return sc;
}

/// One scenario file per sweep value (the sweep section removed), or the file
/// itself when there is no sweep.
inline std::vector<ScenarioFile> expand_sweep(const ScenarioFile& f) {
  if (!f.sweep) return {f};
  std::vector<ScenarioFile> out;
  for (std::size_t i = 0; i < f.sweep->values.size(); ++i) {
    json j = to_json(f);
    j["sweep"] = nullptr;
    const json::json_pointer ptr(f.sweep->path);
    if (!j.contains(ptr)) throw ValidationError("sweep.path '" + f.sweep->path + "' does not exist");
    if (!j.at(ptr).is_number()) throw ValidationError("sweep.path '" + f.sweep->path + "' is not numeric");
    j[ptr] = f.sweep->values[i];
    ScenarioFile g = scenario_from_json(j);
    g.name = f.name + "_" + std::to_string(i);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace syncstab
