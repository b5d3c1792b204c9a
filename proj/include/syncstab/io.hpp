#pragma once

// Result files: full-precision CSV time series, JSON reports rounded to six
// significant digits, and blank-line separated portrait polylines.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncstab/analysis.hpp"
#include "syncstab/metrics.hpp"
#include "syncstab/simulator.hpp"

namespace syncstab {

using json = nlohmann::json;

inline double round6(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

/// Rounded number, or null for NaN / infinity (JSON has neither).
inline json num(double v) { return std::isfinite(v) ? json(round6(v)) : json(nullptr); }
inline json num(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

inline std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_timeseries_csv(std::ostream& os, const TimeSeries& ts) {
  static const char* cols[] = {"delta_rad", "delta_unwrapped_rad", "dw_rad_per_s", "integ_rad_per_s", "uq_pu",
                               "uq_comp_pu", "a_pu", "a_hat_pu", "i_d_pu", "i_q_pu", "delta_id_pu", "los",
                               "ffc_active", "clamped"};
  os << "t_s";
  for (const auto& n : ts.names) {
    for (const char* c : cols) os << ',' << n << '.' << c;
  }
  os << '\n';
  for (std::size_t i = 0; i < ts.size(); ++i) {
    os << full(ts.t[i]);
    for (std::size_t k = 0; k < ts.converters(); ++k) {
      const auto& s = ts.at(i, k);
      for (double v : {s.delta, s.unwrapped, s.dw, s.integ, s.uq, s.uq_comp, s.a}) os << ',' << full(v);
      os << ',';
      if (std::isfinite(s.a_hat)) os << full(s.a_hat);
      for (double v : {s.i_d, s.i_q, s.delta_id}) os << ',' << full(v);
      os << ',' << int(s.los) << ',' << int(s.ffc_active) << ',' << int(s.clamped);
    }
    os << '\n';
  }
}

inline json outcome_json(const ConverterOutcome& o) {
  return {{"name", o.name},
          {"los", o.los},
          {"los_onset_s", num(o.los_onset_s)},
          {"synchronized", o.synchronized},
          {"resynchronized", o.resynchronized},
          {"settle_time_s", num(o.settle_time_s)},
          {"ffc_activation_s", num(o.ffc_activation_s)},
          {"a_hat_pu", num(o.a_hat)},
          {"steady_uq_pu", num(o.mean_uq_tail)},
          {"min_abs_uq_tail_pu", num(o.min_abs_uq_tail)},
          {"max_abs_uq_comp_tail_pu", num(o.max_abs_uq_comp_tail)},
          {"max_abs_dw_tail_rad_per_s", num(o.max_abs_dw_tail)},
          {"final_delta_rad", num(o.last.delta)},
          {"final_dw_rad_per_s", num(o.last.dw)}};
}

inline json summary_json(const TimeSeries& ts, const Scenario& sc) {
  json j;
  j["scenario"] = sc.name;
  j["samples"] = ts.size();
  j["t_end_s"] = num(ts.t.empty() ? 0.0 : ts.t.back());
  const auto w = fault_window(ts);
  j["fault_window_s"] = w ? json{num(w->begin), num(w->end)} : json(nullptr);
  j["events"] = json::array();
  for (const auto& e : ts.events) j["events"].push_back({{"time_s", num(e.time_s)}, {"kind", to_string(e.kind)}});
  const auto outs = summarize(ts, sc);
  j["converters"] = json::array();
  bool any_los = false, all_sync = true;
  for (const auto& o : outs) {
    j["converters"].push_back(outcome_json(o));
    any_los = any_los || o.los;
    all_sync = all_sync && o.synchronized;
  }
  j["los"] = any_los;
  j["resynchronized"] = any_los && all_sync;
  j["synchronized"] = all_sync;
  return j;
}

inline json equilibrium_json(const Equilibrium& e) {
  json ev = json::array();
  for (const auto& l : e.eigenvalues) ev.push_back({num(l.real()), num(l.imag())});
  json d = json::array();
  for (double x : e.deltas) d.push_back(num(x));
  return {{"deltas_rad", d},
          {"kind", to_string(e.kind)},
          {"eigenvalues", ev},
          {"residual_pu", num(e.residual)},
          {"singular_jacobian", e.singular_jacobian}};
}

inline json interaction_json(const std::vector<InteractionEntry>& rep, const NetworkTopology& topo) {
  json arr = json::array();
  for (const auto& r : rep) {
    json per = json::array();
    for (const auto& [j, c] : r.decomposition.per_contributor) {
      per.push_back({{"source", topo.converters()[j].name}, {"a_pu", num(c)}});
    }
    arr.push_back({{"name", topo.converters()[r.converter].name},
                   {"a_pu", num(r.a)},
                   {"a_self_pu", num(r.a_self)},
                   {"mutual_pu", num(r.mutual)},
                   {"per_contributor_pu", per}});
  }
  return arr;
}

inline void write_portrait_csv(std::ostream& os, const PortraitGrid& g) {
  os << "# delta0_rad,w0_rad_per_s,terminal,sep_index\n# t_s,delta_unwrapped_rad,dw_rad_per_s\n";
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    const auto& p = g.points[i];
    if (i) os << '\n';
    os << "# " << full(p.delta0) << ',' << full(p.w0) << ','
       << (p.terminal == TerminalClass::Converged ? "converged" : "diverged") << ',' << p.sep_index << '\n';
    for (const auto& v : p.polyline) os << full(v[0]) << ',' << full(v[1]) << ',' << full(v[2]) << '\n';
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace syncstab
