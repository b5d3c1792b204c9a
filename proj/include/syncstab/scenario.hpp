#pragma once

#include <optional>
#include <string>
#include <vector>

#include "syncstab/network.hpp"
#include "syncstab/pll.hpp"
#include "syncstab/strategies.hpp"

namespace syncstab {

enum class EventKind { GridDip, GridRecover, EnterFrt };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::GridDip: return "grid_dip";
    case EventKind::GridRecover: return "grid_recover";
    case EventKind::EnterFrt: return "enter_frt";
  }
  return "?";
}

struct Event {
  double time_s = 0.0;
  EventKind kind = EventKind::GridDip;
  double u_pu = 0.0;            // GridDip / GridRecover
  double phase_jump_rad = 0.0;  // added to the infinite-bus phase
};

enum class IntegrationMethod { Rk4, ForwardEuler };

struct SolverConfig {
  double dt_s = 50e-6;
  IntegrationMethod method = IntegrationMethod::Rk4;
  std::size_t record_stride = 1;
};

/// Behaviour between a grid dip and fault-ride-through entry.
enum class ProtectionCurrent { Zero, Normal };
enum class ProtectionPll { Track, Hold };

struct ProtectionConfig {
  double delay_s = 0.02;
  ProtectionCurrent current = ProtectionCurrent::Zero;
  ProtectionPll pll = ProtectionPll::Track;
};

/// A converter counts as synchronized once |w_b*dw| stays below `tol_rad_s`
/// for at least `min_hold_s` before the fault window closes.
struct SyncCriteria {
  double tol_rad_s = kTwoPi * 0.5;
  double min_hold_s = 0.05;
};

struct ConverterSetup {
  Method method = Method::Original;
  StrategyConfig strategy;
  std::optional<double> initial_delta_rad;  // empty: pre-fault stable equilibrium
  double initial_integ_rad_s = 0.0;
};

struct Sweep {
  std::string path;  // JSON pointer into the scenario document
  std::vector<double> values;
};

struct Scenario {
  std::string name;
  NetworkTopology topology;
  std::vector<ConverterSetup> converters;
  std::vector<Event> events;
  ProtectionConfig protection;
  FfcConfig ffc;  // dead zone and hold time double as the LOS detector settings
  SyncCriteria sync;
  SolverConfig solver;
  double t_end_s = 1.0;

  /// Overrides every converter's method (and the matching current strategy).
  Scenario with_method(Method m) const {
    Scenario s = *this;
    for (auto& c : s.converters) {
      c.method = m;
      c.strategy.kind = strategy_for(m);
    }
    return s;
  }
};

}  // namespace syncstab

namespace syncstab {

/// Fills the ACI angle from each converter's lumped path impedance when unset.
inline Scenario resolve_defaults(Scenario s) {
  for (std::size_t k = 0; k < s.converters.size() && k < s.topology.size(); ++k) {
    auto& st = s.converters[k].strategy;
    if (!st.aci_impedance_angle_rad) st.aci_impedance_angle_rad = s.topology.lumped_impedance(k).angle();
  }
  return s;
}

inline void validate(const Scenario& s) {
  if (s.converters.size() != s.topology.size()) {
    throw ValidationError("scenario needs one converter setup per network converter");
  }
  if (s.converters.empty()) throw ValidationError("scenario has no converters");
  if (!(s.solver.dt_s > 0.0)) throw ValidationError("solver.dt_s must be positive");
  if (s.solver.record_stride < 1) throw ValidationError("solver.record_stride must be >= 1");
  if (!(s.t_end_s > 0.0)) throw ValidationError("t_end_s must be positive");
  if (!(s.protection.delay_s >= 0.0)) throw ValidationError("protection delay must be >= 0");
  double last = 0.0;
  for (const auto& e : s.events) {
    if (!(e.time_s >= last)) throw ValidationError("events must be time-sorted and non-negative");
    last = e.time_s;
    if (e.kind != EventKind::EnterFrt && !(e.u_pu >= 0.0)) {
      throw ValidationError("grid event voltage must be >= 0");
    }
  }
  if (!s.events.empty() && !(s.t_end_s > last)) {
    throw ValidationError("t_end_s must be later than the last event");
  }
  for (std::size_t k = 0; k < s.converters.size(); ++k) {
    const auto& c = s.converters[k];
    if (c.initial_delta_rad && !(*c.initial_delta_rad >= -kPi && *c.initial_delta_rad < kPi)) {
      throw ValidationError("initial delta of converter " + std::to_string(k) +
                            " must lie in [-pi, pi)");
    }
    if (!(c.strategy.current_limit_pu > 0.0)) throw ValidationError("current limit must be positive");
    if (!(c.strategy.freq_gain_pu_per_rad >= 0.0)) {
      throw ValidationError("freq_gain_pu_per_rad must be >= 0");
    }
  }
  if (!(s.ffc.deadzone_rad_s > 0.0) || !(s.ffc.t_hold_s >= 0.0) || !(s.ffc.epsilon_pu >= 0.0)) {
    throw ValidationError("invalid LOS / estimator settings");
  }
}

}  // namespace syncstab
