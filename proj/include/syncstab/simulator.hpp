#pragma once

// Fixed-step time-domain simulation of the coupled PLL + network model.
//
// Per converter the continuous state is (delta, x, xi): PLL angle, PI
// integrator and the angle drift accumulated since fault-ride-through entry.
// Currents follow their references instantly, so u_kq is algebraic. Its only
// dependence on the unknowns of the same instant is through omega_kpll, which
// is linear in u_kq; solve_uq_all closes that loop in closed form.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "syncstab/equilibrium.hpp"
#include "syncstab/errors.hpp"
#include "syncstab/network.hpp"
#include "syncstab/pll.hpp"
#include "syncstab/scenario.hpp"
#include "syncstab/strategies.hpp"

namespace syncstab {

/// Per-step record of one converter.
struct ConverterSample {
  double delta = 0.0;
  double unwrapped = 0.0;
  double dw = 0.0;       // w_b*dw, rad/s
  double integ = 0.0;
  double uq = 0.0;       // raw
  double uq_comp = 0.0;  // PLL input after feedforward compensation
  double a = 0.0;        // live offset term
  double a_hat = std::numeric_limits<double>::quiet_NaN();
  double i_d = 0.0;      // own base
  double i_q = 0.0;
  double delta_id = 0.0;
  bool los = false;
  bool ffc_active = false;
  bool clamped = false;
};

struct AppliedEvent {
  double time_s = 0.0;
  EventKind kind = EventKind::GridDip;
};

struct TimeSeries {
  std::vector<std::string> names;
  std::vector<double> t;
  std::vector<ConverterSample> samples;  // row-major: sample, converter
  std::vector<AppliedEvent> events;

  std::size_t converters() const { return names.size(); }
  std::size_t size() const { return t.size(); }
  const ConverterSample& at(std::size_t i, std::size_t k) const { return samples[i * names.size() + k]; }
};

/// Solves the scalar loop  u = r + (1 + (slope*u + offset)/w_b) * l.
inline double close_q_axis_loop(const QAxisSplit& split, const LoopForm& loop, double omega_b,
                                std::size_t converter) {
  const double factor = 1.0 - loop.slope * split.inductive / omega_b;
  if (!(std::abs(factor) > 1e-9)) {
    throw NumericalError("singular PLL/network loop for converter " + std::to_string(converter) +
                         " (factor " + std::to_string(factor) + ")");
  }
  return (split.resistive + (1.0 + loop.offset / omega_b) * split.inductive) / factor;
}

/// u_kq for every converter at the given states and own-frame system-base
/// currents.
inline std::vector<double> solve_uq_all(const NetworkTopology& topo, GridVoltage grid,
                                        const std::vector<PllState>& states,
                                        std::span<const Complex> currents) {
  std::vector<double> angles(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) angles[k] = states[k].delta;
  std::vector<double> out(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto split = q_axis_split(topo, grid, angles, currents, k);
    out[k] = close_q_axis_loop(split, loop_form(states[k], topo.converters()[k].gains),
                               topo.base().omega_b(), k);
  }
  return out;
}

enum class GridPhase { Normal, Protection, Fault };

class Simulator {
 public:
  explicit Simulator(Scenario scenario)
      : sc_(resolve_defaults(std::move(scenario))), grid_(sc_.topology.nominal_voltage()) {
    validate(sc_);
    const std::size_t n = sc_.converters.size();
    states_.resize(n);
    hold_freq_.assign(n, 0.0);
    above_.assign(n, -1.0);
    initialise_states();
    pending_ = sc_.events;
    evaluate(states_, out_);
  }

  const Scenario& scenario() const { return sc_; }
  const std::vector<PllState>& states() const { return states_; }
  double time() const { return t_; }
  GridPhase phase() const { return phase_; }
  GridVoltage grid() const { return grid_; }

  /// Integrates up to t_stop, applying every event due at or before t_stop.
  void run_until(double t_stop, TimeSeries* series = nullptr) {
    const double dt = sc_.solver.dt_s;
    const double eps = 1e-9 * dt;
    if (series && series->names.empty()) init_series(*series);
    for (;;) {
      while (apply_next_due_event(eps)) {}
      if (series && on_grid_ && step_ % sc_.solver.record_stride == 0 && step_ != last_recorded_) {
        record(*series);
      }
      if (t_ >= t_stop - eps) break;

      const double next_grid = static_cast<double>(step_ + 1) * dt;
      double target = t_stop < next_grid - eps ? t_stop : next_grid;
      if (auto te = next_event_time(); te && *te < target - eps) target = *te;
      const double h = target - t_;
      integrate(h);
      if (target >= next_grid - eps) {
        ++step_;
        t_ = static_cast<double>(step_) * dt;
        on_grid_ = true;
      } else {
        t_ = target;
        on_grid_ = false;
      }
      evaluate(states_, out_);
      monitor(h);
    }
    if (series) series->events = applied_;
  }

  TimeSeries run() {
    TimeSeries ts;
    run_until(sc_.t_end_s, &ts);
    return ts;
  }

 private:
  struct Outputs {
    std::vector<double> uq, ddelta, dinteg, dxi;
    std::vector<ReferenceOutput> refs;
  };

  void initialise_states() {
    const auto& topo = sc_.topology;
    const std::size_t n = states_.size();
    const bool need_sep = std::any_of(sc_.converters.begin(), sc_.converters.end(),
                                      [](const auto& c) { return !c.initial_delta_rad; });
    std::vector<double> sep(n, 0.0);
    if (need_sep) {
      std::vector<Complex> currents(n);
      for (std::size_t k = 0; k < n; ++k) {
        currents[k] = topo.current_scale(k) *
                      reference(sc_.converters[k].strategy, Stage::Normal, 0.0).ref.value();
      }
      const std::vector<double> guess(n, grid_.theta_rad);
      auto eq = nearest_sep(topo, grid_, currents, guess);
      if (!eq) throw ValidationError("no pre-fault stable equilibrium for scenario '" + sc_.name + "'");
      sep = eq->deltas;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const auto& c = sc_.converters[k];
      states_[k].delta = wrap_angle(c.initial_delta_rad.value_or(sep[k]));
      states_[k].integ = c.initial_integ_rad_s;
    }
  }

  ReferenceOutput current_reference(std::size_t k, const PllState& s) const {
    const auto& cfg = sc_.converters[k].strategy;
    switch (phase_) {
      case GridPhase::Normal: return reference(cfg, Stage::Normal, 0.0);
      case GridPhase::Protection:
        if (sc_.protection.current == ProtectionCurrent::Zero) return {};
        return reference(cfg, Stage::Normal, 0.0);
      case GridPhase::Fault: break;
    }
    return reference(cfg, Stage::Fault, s.freq_integral);
  }

  void evaluate(const std::vector<PllState>& s, Outputs& o) const {
    const auto& topo = sc_.topology;
    const std::size_t n = s.size();
    o.uq.resize(n);
    o.ddelta.resize(n);
    o.dinteg.resize(n);
    o.dxi.resize(n);
    o.refs.resize(n);
    angles_.resize(n);
    currents_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      angles_[k] = s[k].delta;
      o.refs[k] = current_reference(k, s[k]);
      currents_[k] = topo.current_scale(k) * o.refs[k].ref.value();
    }
    const bool hold = phase_ == GridPhase::Protection && sc_.protection.pll == ProtectionPll::Hold;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& gains = topo.converters()[k].gains;
      const auto split = q_axis_split(topo, grid_, angles_, currents_, k);
      const LoopForm loop = hold ? LoopForm{0.0, hold_freq_[k]} : loop_form(s[k], gains);
      const double u = close_q_axis_loop(split, loop, topo.base().omega_b(), k);
      o.uq[k] = u;
      o.ddelta[k] = loop.slope * u + loop.offset;
      o.dinteg[k] = hold ? 0.0 : pll_derivatives(s[k], gains, u).dinteg;
      o.dxi[k] = phase_ == GridPhase::Fault ? o.ddelta[k] : 0.0;
    }
  }

  void integrate(double h) {
    const std::size_t n = states_.size();
    if (sc_.solver.method == IntegrationMethod::ForwardEuler) {
      for (std::size_t k = 0; k < n; ++k) {
        states_[k].delta += h * out_.ddelta[k];
        states_[k].integ += h * out_.dinteg[k];
        states_[k].freq_integral += h * out_.dxi[k];
      }
    } else {
      const Outputs& k1 = out_;
      auto shifted = [&](const Outputs& d, double c) {
        std::vector<PllState> s = states_;
        for (std::size_t k = 0; k < n; ++k) {
          s[k].delta += c * d.ddelta[k];
          s[k].integ += c * d.dinteg[k];
          s[k].freq_integral += c * d.dxi[k];
        }
        return s;
      };
      Outputs k2, k3, k4;
      evaluate(shifted(k1, 0.5 * h), k2);
      evaluate(shifted(k2, 0.5 * h), k3);
      evaluate(shifted(k3, h), k4);
      for (std::size_t k = 0; k < n; ++k) {
        states_[k].delta += h / 6.0 * (k1.ddelta[k] + 2.0 * k2.ddelta[k] + 2.0 * k3.ddelta[k] + k4.ddelta[k]);
        states_[k].integ += h / 6.0 * (k1.dinteg[k] + 2.0 * k2.dinteg[k] + 2.0 * k3.dinteg[k] + k4.dinteg[k]);
        states_[k].freq_integral += h / 6.0 * (k1.dxi[k] + 2.0 * k2.dxi[k] + 2.0 * k3.dxi[k] + k4.dxi[k]);
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      auto& s = states_[k];
      if (!std::isfinite(s.delta) || !std::isfinite(s.integ) || !std::isfinite(s.freq_integral)) {
        throw NumericalError("non-finite state for converter " + std::to_string(k) + " at t=" +
                             std::to_string(t_ + h));
      }
      const double w = wrap_angle(s.delta);
      s.wraps += std::lround((s.delta - w) / kTwoPi);
      s.delta = w;
    }
  }

  void monitor(double h) {
    bool reset = false;
    for (std::size_t k = 0; k < states_.size(); ++k) {
      above_[k] = std::abs(out_.ddelta[k]) > sc_.ffc.deadzone_rad_s
                      ? (above_[k] < 0.0 ? 0.0 : above_[k] + h)
                      : -1.0;
      auto& s = states_[k];
      if (s.mode == PllMode::Ffc && phase_ == GridPhase::Fault && s.ffc.armed && !s.ffc.active) {
        auto upd = ffc_observe(s.ffc, sc_.ffc, out_.uq[k], out_.ddelta[k], h);
        s.ffc = upd.est;
        if (upd.reset_pi) {
          s.integ = 0.0;
          reset = true;
        }
      }
    }
    if (reset) evaluate(states_, out_);
  }

  std::optional<double> next_event_time() const {
    if (pending_.empty()) return std::nullopt;
    double t = pending_.front().time_s;
    for (const auto& e : pending_) t = std::min(t, e.time_s);
    return t;
  }

  bool apply_next_due_event(double eps) {
    auto it = std::min_element(pending_.begin(), pending_.end(),
                               [](const Event& a, const Event& b) { return a.time_s < b.time_s; });
    if (it == pending_.end() || it->time_s > t_ + eps) return false;
    const Event e = *it;
    pending_.erase(it);
    apply(e);
    evaluate(states_, out_);
    return true;
  }

  void apply(const Event& e) {
    applied_.push_back({t_, e.kind});
    switch (e.kind) {
      case EventKind::GridDip:
        grid_.u_pu = e.u_pu;
        grid_.theta_rad += e.phase_jump_rad;
        if (phase_ == GridPhase::Normal) {
          phase_ = GridPhase::Protection;
          hold_freq_ = out_.ddelta;
          pending_.push_back({t_ + sc_.protection.delay_s, EventKind::EnterFrt, 0.0, 0.0});
          generated_frt_ = true;
        }
        break;
      case EventKind::EnterFrt:
        if (phase_ == GridPhase::Fault) break;
        phase_ = GridPhase::Fault;
        for (std::size_t k = 0; k < states_.size(); ++k) {
          states_[k] = enter_fault_mode(states_[k], sc_.converters[k].method, out_.ddelta[k]);
        }
        break;
      case EventKind::GridRecover:
        grid_.u_pu = e.u_pu;
        grid_.theta_rad += e.phase_jump_rad;
        if (generated_frt_) {
          std::erase_if(pending_, [](const Event& p) { return p.kind == EventKind::EnterFrt; });
          generated_frt_ = false;
        }
        if (phase_ == GridPhase::Fault) {
          for (auto& s : states_) s = leave_fault_mode(s);
        }
        phase_ = GridPhase::Normal;
        break;
    }
  }

  void init_series(TimeSeries& ts) const {
    for (std::size_t k = 0; k < sc_.topology.size(); ++k) {
      const auto& name = sc_.topology.converters()[k].name;
      ts.names.push_back(name.empty() ? "vsc" + std::to_string(k + 1) : name);
    }
  }

  void record(TimeSeries& ts) {
    last_recorded_ = step_;
    ts.t.push_back(t_);
    for (std::size_t k = 0; k < states_.size(); ++k) {
      const auto& s = states_[k];
      ConverterSample c;
      c.delta = s.delta;
      c.unwrapped = s.unwrapped();
      c.dw = out_.ddelta[k];
      c.integ = s.integ;
      c.uq = out_.uq[k];
      c.uq_comp = s.mode == PllMode::Ffc ? ffc_compensated_uq(s.ffc, out_.uq[k]) : out_.uq[k];
      c.a = out_.uq[k] - grid_.u_pu * std::sin(grid_.theta_rad - s.delta);
      if (s.ffc.active) {
        c.a_hat = s.ffc.a_hat;
      } else if (s.ffc.armed && s.ffc.estimate_valid()) {
        c.a_hat = s.ffc.candidate();
      }
      c.i_d = out_.refs[k].ref.i_d;
      c.i_q = out_.refs[k].ref.i_q;
      c.delta_id = out_.refs[k].delta_id;
      c.clamped = out_.refs[k].clamped;
      c.los = above_[k] >= sc_.ffc.t_hold_s - 1e-12;
      c.ffc_active = s.ffc.active;
      ts.samples.push_back(c);
    }
  }

  Scenario sc_;
  GridVoltage grid_;
  std::vector<PllState> states_;
  std::vector<double> hold_freq_;
  std::vector<double> above_;
  std::vector<Event> pending_;
  std::vector<AppliedEvent> applied_;
  Outputs out_;
  GridPhase phase_ = GridPhase::Normal;
  bool generated_frt_ = false;
  double t_ = 0.0;
  std::size_t step_ = 0;
  std::size_t last_recorded_ = std::numeric_limits<std::size_t>::max();
  bool on_grid_ = true;
  mutable std::vector<double> angles_;
  mutable std::vector<Complex> currents_;
};

inline TimeSeries run(const Scenario& scenario) { return Simulator(scenario).run(); }

}  // namespace syncstab
