#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <optional>
#include <vector>

#include "syncstab/scenario.hpp"
#include "syncstab/simulator.hpp"

namespace syncstab {

struct LosEvent {
  std::size_t converter = 0;
  double onset_s = 0.0;
};

/// Every maximal run of samples with |w_b*dw| > deadzone lasting at least
/// t_hold (measured from its first to its last sample).
inline std::vector<LosEvent> detect_los(const TimeSeries& ts, double deadzone_rad_s, double t_hold_s) {
  std::vector<LosEvent> out;
  for (std::size_t k = 0; k < ts.converters(); ++k) {
    std::optional<std::size_t> start;
    bool reported = false;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (std::abs(ts.at(i, k).dw) > deadzone_rad_s) {
        if (!start) {
          start = i;
          reported = false;
        }
        if (!reported && ts.t[i] - ts.t[*start] >= t_hold_s - 1e-12) {
          out.push_back({k, ts.t[*start]});
          reported = true;
        }
      } else {
        start.reset();
      }
    }
  }
  return out;
}

/// [first fault-ride-through entry, following recovery or end of record).
struct Window {
  double begin = 0.0;
  double end = 0.0;
};

inline std::optional<Window> fault_window(const TimeSeries& ts) {
  if (ts.t.empty()) return std::nullopt;
  std::optional<double> begin;
  for (const auto& e : ts.events) {
    if (!begin && e.kind == EventKind::EnterFrt) begin = e.time_s;
    if (begin && e.kind == EventKind::GridRecover && e.time_s >= *begin) return Window{*begin, e.time_s};
  }
  if (!begin) return std::nullopt;
  return Window{*begin, ts.t.back() + 1e-12};
}

/// Earliest sample time in [w.begin, w.end) after which |dw| stays below tol up
/// to the end of the window.
inline std::optional<double> settle_time(const TimeSeries& ts, std::size_t k, Window w, double tol) {
  std::optional<double> settle;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts.t[i];
    if (t < w.begin || t >= w.end) continue;
    if (std::abs(ts.at(i, k).dw) < tol) {
      if (!settle) settle = t;
    } else {
      settle.reset();
    }
  }
  return settle;
}

/// Samples with time in [from, to).
template <typename F>
void for_each_in(const TimeSeries& ts, double from, double to, F&& f) {
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.t[i] >= from && ts.t[i] < to) f(i);
  }
}

struct ConverterOutcome {
  std::string name;
  bool los = false;
  std::optional<double> los_onset_s;
  bool synchronized = false;   // settled within the fault window (or the run when no fault)
  bool resynchronized = false; // los && synchronized
  std::optional<double> settle_time_s;
  std::optional<double> ffc_activation_s;
  std::optional<double> a_hat;
  double final_uq_window = 0.0;     // last sample of the window
  double mean_uq_tail = 0.0;        // over the final `tail_s` of the window
  double min_abs_uq_tail = 0.0;
  double max_abs_uq_comp_tail = 0.0;
  double max_abs_dw_tail = 0.0;
  ConverterSample last;
};

inline std::vector<ConverterOutcome> summarize(const TimeSeries& ts, const Scenario& sc,
                                               double tail_s = 0.05) {
  std::vector<ConverterOutcome> out(ts.converters());
  const auto los = detect_los(ts, sc.ffc.deadzone_rad_s, sc.ffc.t_hold_s);
  const Window w = fault_window(ts).value_or(Window{0.0, ts.t.empty() ? 0.0 : ts.t.back() + 1e-12});
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& o = out[k];
    o.name = ts.names[k];
    for (const auto& e : los) {
      const bool inside = e.onset_s >= w.begin - 1e-12 && e.onset_s < w.end;
      if (e.converter == k && inside && !o.los_onset_s) o.los_onset_s = e.onset_s;
    }
    o.los = o.los_onset_s.has_value();
    o.settle_time_s = settle_time(ts, k, w, sc.sync.tol_rad_s);
    if (o.settle_time_s && o.los_onset_s && *o.settle_time_s < *o.los_onset_s) o.settle_time_s.reset();
    o.synchronized = o.settle_time_s && (w.end - *o.settle_time_s) >= sc.sync.min_hold_s - 1e-12;
    o.resynchronized = o.los && o.synchronized;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (ts.at(i, k).ffc_active) {
        o.ffc_activation_s = ts.t[i];
        o.a_hat = ts.at(i, k).a_hat;
        break;
      }
    }
    double sum = 0.0;
    std::size_t count = 0;
    o.min_abs_uq_tail = std::numeric_limits<double>::infinity();
    for_each_in(ts, w.end - tail_s, w.end, [&](std::size_t i) {
      const auto& s = ts.at(i, k);
      sum += s.uq;
      ++count;
      o.min_abs_uq_tail = std::min(o.min_abs_uq_tail, std::abs(s.uq));
      o.max_abs_uq_comp_tail = std::max(o.max_abs_uq_comp_tail, std::abs(s.uq_comp));
      o.max_abs_dw_tail = std::max(o.max_abs_dw_tail, std::abs(s.dw));
      o.final_uq_window = s.uq;
    });
    o.mean_uq_tail = count ? sum / static_cast<double>(count) : 0.0;
    if (!count) o.min_abs_uq_tail = 0.0;
    if (ts.size()) o.last = ts.at(ts.size() - 1, k);
  }
  return out;
}

}  // namespace syncstab
