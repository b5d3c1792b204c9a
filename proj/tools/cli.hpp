#pragma once

// Command-line front end. Everything except main() lives here so the tests
// can drive the commands in-process.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "syncstab/syncstab.hpp"

namespace syncstab::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kNumerical = 3 };

struct GlobalOptions {
  std::string out_dir = ".";
  unsigned threads = 0;  // 0: hardware concurrency
  std::uint64_t seed = 0;

  unsigned worker_count() const {
    if (threads) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

struct PortraitOptions {
  double dmin = -kPi, dmax = kPi;
  double wmin = 0.0, wmax = 0.0;
  std::size_t nx = 33, ny = 1;
  double tend = 1.0;
};

inline fs::path prepare_out(const GlobalOptions& g) {
  fs::path p(g.out_dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw ValidationError("cannot create output directory '" + g.out_dir + "'");
  return p;
}

/// Suffix for sweep member i ("" without a sweep).
inline std::string indexed(const std::string& stem, const std::string& ext, bool sweep, std::size_t i) {
  return sweep ? stem + "_" + std::to_string(i) + ext : stem + ext;
}

inline int cmd_run(const std::string& path, const GlobalOptions& g, std::ostream& out) {
  const ScenarioFile file = load_scenario_file(path);
  const auto members = expand_sweep(file);
  std::vector<Scenario> scenarios;
  for (const auto& m : members) scenarios.push_back(build_scenario(m, g.seed));
  const fs::path dir = prepare_out(g);
  const bool sweep = file.sweep.has_value();
  std::vector<json> summaries(scenarios.size());
  parallel_for(scenarios.size(), g.worker_count(), [&](std::size_t i) {
    const TimeSeries ts = run(scenarios[i]);
    if (members[i].outputs.timeseries) {
      std::ofstream csv(dir / indexed("timeseries", ".csv", sweep, i));
      if (!csv) throw ValidationError("cannot write time series");
      write_timeseries_csv(csv, ts);
    }
    summaries[i] = summary_json(ts, scenarios[i]);
    if (members[i].outputs.summary) write_json_file((dir / indexed("summary", ".json", sweep, i)).string(), summaries[i]);
  });
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    out << scenarios[i].name << ": los=" << summaries[i]["los"] << " resynchronized=" << summaries[i]["resynchronized"]
        << " synchronized=" << summaries[i]["synchronized"] << '\n';
  }
  return kOk;
}

inline json stage_report(const Scenario& sc, Stage stage, GridVoltage grid) {
  const auto currents = stage_currents(sc, stage);
  const auto raw = raw_values(currents);
  const auto eqs = find_equilibria(sc.topology, grid, raw);
  json j;
  j["grid"] = {{"u_pu", num(grid.u_pu)}, {"theta_rad", num(grid.theta_rad)}};
  j["equilibria"] = json::array();
  for (const auto& e : eqs) j["equilibria"].push_back(equilibrium_json(e));
  json margins = json::array();
  for (double m : existence_margin(sc.topology, grid, currents)) margins.push_back(num(m));
  j["existence_margin_pu"] = margins;
  j["aligned_frame_approximation"] = sc.topology.size() > 1;
  j["interaction"] = interaction_json(interaction_report(sc.topology, currents), sc.topology);
  return j;
}

inline int cmd_analyze(const std::string& path, const GlobalOptions& g, std::ostream& out) {
  const Scenario sc = build_scenario(load_scenario_file(path), g.seed);
  json j;
  j["scenario"] = sc.name;
  const json fault = stage_report(sc, Stage::Fault, fault_grid(sc));
  for (auto it = fault.begin(); it != fault.end(); ++it) j[it.key()] = it.value();
  j["stage"] = "fault";
  j["pre_fault"] = stage_report(sc, Stage::Normal, sc.topology.nominal_voltage());
  const fs::path dir = prepare_out(g);
  write_json_file((dir / "equilibria.json").string(), j);
  out << sc.name << ": " << j["equilibria"].size() << " fault-stage equilibria, margins "
      << j["existence_margin_pu"].dump() << '\n';
  return kOk;
}

/// Brackets every class change along each constant-frequency row.
inline json separatrix_brackets(const Scenario& sc, const PortraitGrid& grid) {
  json arr = json::array();
  for (std::size_t j = 0; j < grid.n_w; ++j) {
    for (std::size_t i = 0; i + 1 < grid.n_delta; ++i) {
      const auto& a = grid.points[j * grid.n_delta + i];
      const auto& b = grid.points[j * grid.n_delta + i + 1];
      if (a.terminal == b.terminal) continue;
      const bool a_conv = a.terminal == TerminalClass::Converged;
      const auto br = find_separatrix(sc, a_conv ? a.delta0 : b.delta0, a_conv ? b.delta0 : a.delta0, a.w0,
                                      grid.t_end_s);
      arr.push_back({{"w0_rad_per_s", num(a.w0)},
                     {"converging_delta_rad", br.converging},
                     {"diverging_delta_rad", br.diverging},
                     {"width_rad", br.width()}});
    }
  }
  return arr;
}

inline int cmd_portrait(const std::string& path, const PortraitOptions& p, const GlobalOptions& g, std::ostream& out) {
  const Scenario sc = build_scenario(load_scenario_file(path), g.seed);
  if (sc.topology.size() != 1) throw ValidationError("portraits are only defined for single-converter scenarios");
  if (p.nx < 1 || p.ny < 1) throw ValidationError("--nx and --ny must be >= 1");
  if (!(p.tend > 0.0)) throw ValidationError("--tend must be positive");
  if (!(p.dmin <= p.dmax) || !(p.wmin <= p.wmax)) throw ValidationError("empty portrait range");
  PortraitGrid grid;
  grid.delta_min = p.dmin;
  grid.delta_max = p.dmax;
  grid.w_min = p.wmin;
  grid.w_max = p.wmax;
  grid.n_delta = p.nx;
  grid.n_w = p.ny;
  grid.t_end_s = p.tend;
  grid.threads = g.worker_count();
  grid = phase_portrait(sc, std::move(grid));
  const fs::path dir = prepare_out(g);
  {
    std::ofstream csv(dir / "portrait.csv");
    if (!csv) throw ValidationError("cannot write portrait.csv");
    write_portrait_csv(csv, grid);
  }
  json j;
  j["scenario"] = sc.name;
  j["points"] = grid.points.size();
  j["converged"] = grid.converged();
  j["equilibria"] = json::array();
  for (const auto& e : grid.equilibria) j["equilibria"].push_back(equilibrium_json(e));
  j["separatrix"] = separatrix_brackets(sc, grid);
  write_json_file((dir / "portrait.json").string(), j);
  out << sc.name << ": " << grid.converged() << "/" << grid.points.size() << " converged, "
      << j["separatrix"].size() << " separatrix bracket(s)\n";
  return kOk;
}

inline int cmd_compare(const std::string& path, const GlobalOptions& g, std::ostream& out) {
  const Scenario base = build_scenario(load_scenario_file(path), g.seed);
  const std::vector<Method> methods{Method::Original, Method::Frozen, Method::Vspll,
                                    Method::Aci,      Method::FreqRegulated, Method::Ffc};
  std::vector<json> rows(methods.size());
  parallel_for(methods.size(), g.worker_count(), [&](std::size_t i) {
    const Scenario sc = base.with_method(methods[i]);
    const TimeSeries ts = run(sc);
    const auto outs = summarize(ts, sc);
    json conv = json::array();
    bool los = false, all_sync = true;
    for (const auto& o : outs) {
      los = los || o.los;
      all_sync = all_sync && o.synchronized;
      conv.push_back({{"name", o.name},
                      {"los", o.los},
                      {"synchronized", o.synchronized},
                      {"resynchronized", o.resynchronized},
                      {"steady_uq_pu", num(o.mean_uq_tail)},
                      {"settle_time_s", num(o.settle_time_s)},
                      {"max_abs_dw_tail_rad_per_s", num(o.max_abs_dw_tail)}});
    }
    rows[i] = {{"method", to_string(methods[i])},
               {"los", los},
               {"synchronized", all_sync},
               {"resynchronized", los && all_sync},
               {"converters", conv}};
  });
  json j;
  j["scenario"] = base.name;
  j["methods"] = rows;
  const fs::path dir = prepare_out(g);
  write_json_file((dir / "compare.json").string(), j);
  for (const auto& r : rows) {
    out << r["method"].get<std::string>() << ": los=" << r["los"] << " synchronized=" << r["synchronized"] << '\n';
  }
  return kOk;
}

/// Parses and dispatches; argv[0] is the program name.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Converter PLL synchronization stability simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads (0: all cores)");
  app.add_option("--seed", g.seed, "Seed for random initial angles");

  std::string scenario;
  PortraitOptions po;
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario; writes timeseries.csv and summary.json");
  auto* analyze_cmd = app.add_subcommand("analyze", "Equilibria, existence margins and interaction report");
  auto* portrait_cmd = app.add_subcommand("portrait", "Phase portrait of a single-converter fault stage");
  auto* compare_cmd = app.add_subcommand("compare", "Run the scenario's fault with every method");
  for (auto* c : {run_cmd, analyze_cmd, portrait_cmd, compare_cmd}) {
    c->add_option("scenario", scenario, "Scenario file")->required();
  }
  portrait_cmd->add_option("--dmin", po.dmin, "Lowest initial angle (rad)");
  portrait_cmd->add_option("--dmax", po.dmax, "Highest initial angle (rad)");
  portrait_cmd->add_option("--wmin", po.wmin, "Lowest initial frequency deviation (rad/s)");
  portrait_cmd->add_option("--wmax", po.wmax, "Highest initial frequency deviation (rad/s)");
  portrait_cmd->add_option("--nx", po.nx, "Angle grid points");
  portrait_cmd->add_option("--ny", po.ny, "Frequency grid points");
  portrait_cmd->add_option("--tend", po.tend, "Trajectory length (s)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }

  try {
    if (*run_cmd) return cmd_run(scenario, g, out);
    if (*analyze_cmd) return cmd_analyze(scenario, g, out);
    if (*portrait_cmd) return cmd_portrait(scenario, po, g, out);
    if (*compare_cmd) return cmd_compare(scenario, g, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const FrameMismatch& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace syncstab::cli
