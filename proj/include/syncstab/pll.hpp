#pragma once

// SRF-PLL state and the fault-time synchronization variants.
//
// The PI regulator is realised as  w_b*dw = kp*u_q + x,  dx/dt = ki*u_q, so
// d(delta)/dt is that same quantity in rad/s and u_q never has to be
// differentiated.

#include <cmath>
#include <string>

#include "syncstab/errors.hpp"
#include "syncstab/network.hpp"

namespace syncstab {

enum class PllMode { Original, Frozen, Vspll, Ffc };

/// Fault-ride-through method of one converter. Aci and FreqRegulated keep the
/// original PLL and act through the current references instead.
enum class Method { Original, Frozen, Vspll, Aci, FreqRegulated, Ffc };

inline PllMode fault_pll_mode(Method m) {
  switch (m) {
    case Method::Frozen: return PllMode::Frozen;
    case Method::Vspll: return PllMode::Vspll;
    case Method::Ffc: return PllMode::Ffc;
    default: return PllMode::Original;
  }
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Original: return "original";
    case Method::Frozen: return "frozen";
    case Method::Vspll: return "vspll";
    case Method::Aci: return "aci";
    case Method::FreqRegulated: return "freq_regulated";
    case Method::Ffc: return "ffc";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::Original, Method::Frozen, Method::Vspll, Method::Aci,
                   Method::FreqRegulated, Method::Ffc}) {
    if (s == to_string(m)) return m;
  }
  throw ValidationError("unknown method '" + s + "'");
}

enum class FfcEngage {
  Immediate,     // compensate as soon as the estimate exists
  ZeroCrossing,  // wait for the compensated input to cross zero towards the stable side
};

struct FfcConfig {
  double deadzone_rad_s = kTwoPi * 5.0;
  double t_hold_s = 0.01;
  double epsilon_pu = 1e-3;
  FfcEngage engage = FfcEngage::ZeroCrossing;
};

struct FfcEstimator {
  bool armed = false;
  bool active = false;
  bool los_declared = false;
  bool seen_max = false;
  bool seen_min = false;
  double u_max = 0.0;
  double u_min = 0.0;
  double a_hat = 0.0;
  double pivot = 0.0;       // last accepted extremum (or the value at arming)
  bool has_last = false;
  double last_uq = 0.0;
  int last_slope_sign = 0;
  double time_above = -1.0; // time |omega_dev| has stayed above the dead zone; < 0 while below
  bool has_last_comp = false;
  double last_comp = 0.0;   // candidate compensated input at the previous sample

  bool estimate_valid() const { return seen_max && seen_min; }
  double candidate() const { return 0.5 * (u_max + u_min); }
};

struct PllState {
  double delta = 0.0;       // rad, wrapped to (-pi, pi]
  long wraps = 0;           // unwrapped angle = delta + 2*pi*wraps
  double integ = 0.0;       // rad/s
  double freq_integral = 0.0; // rad, integral of w_b*dw since fault-ride-through entry
  PllMode mode = PllMode::Original;
  double frozen_freq = 0.0; // rad/s, valid in Frozen mode
  FfcEstimator ffc;

  double unwrapped() const { return delta + kTwoPi * static_cast<double>(wraps); }
};

struct PllDerivatives {
  double ddelta = 0.0;  // rad/s
  double dinteg = 0.0;  // rad/s^2
};

/// `u_q` is the raw measured q-axis voltage; FFC compensation is applied here.
inline PllDerivatives pll_derivatives(const PllState& s, const PllGains& g, double u_q) {
  switch (s.mode) {
    case PllMode::Frozen: return {s.frozen_freq, 0.0};
    case PllMode::Vspll: return {g.kp * u_q + s.integ, 0.0};
    case PllMode::Ffc: {
      const double u = s.ffc.active ? u_q - s.ffc.a_hat : u_q;
      return {g.kp * u + s.integ, g.ki * u};
    }
    case PllMode::Original: break;
  }
  return {g.kp * u_q + s.integ, g.ki * u_q};
}

/// d(delta)/dt written as  slope * u_q + offset ; used to close the
/// algebraic loop between u_q and the PLL frequency.
struct LoopForm {
  double slope = 0.0;
  double offset = 0.0;
};

inline LoopForm loop_form(const PllState& s, const PllGains& g) {
  switch (s.mode) {
    case PllMode::Frozen: return {0.0, s.frozen_freq};
    case PllMode::Vspll: return {g.kp, s.integ};
    case PllMode::Ffc: return {g.kp, s.integ - (s.ffc.active ? g.kp * s.ffc.a_hat : 0.0)};
    case PllMode::Original: break;
  }
  return {g.kp, s.integ};
}

inline FfcEstimator ffc_arm(FfcEstimator) {
  FfcEstimator e;
  e.armed = true;
  return e;
}

inline FfcEstimator ffc_deactivate(const FfcEstimator&) { return FfcEstimator{}; }

/// Switches the PLL into its fault-ride-through behaviour. `ddelta_now` is
/// w_b*dw at the switching instant.
inline PllState enter_fault_mode(PllState s, Method method, double ddelta_now) {
  s.mode = fault_pll_mode(method);
  s.freq_integral = 0.0;
  switch (s.mode) {
    case PllMode::Frozen:
      s.frozen_freq = ddelta_now;
      break;
    case PllMode::Vspll:
      // integral channel removed: frequency falls back to nominal plus kp*u_q
      s.integ = 0.0;
      break;
    case PllMode::Ffc:
      s.ffc = ffc_arm(s.ffc);
      break;
    case PllMode::Original:
      break;
  }
  return s;
}

/// Back to normal tracking after the grid recovers.
inline PllState leave_fault_mode(PllState s) {
  s.mode = PllMode::Original;
  s.ffc = ffc_deactivate(s.ffc);
  s.freq_integral = 0.0;
  return s;
}

struct FfcUpdate {
  FfcEstimator est;
  bool reset_pi = false;  // rising edge of `active`
};

inline FfcUpdate ffc_observe(FfcEstimator est, const FfcConfig& cfg, double u_q, double omega_dev,
                             double dt) {
  if (!est.armed || est.active) return {est, false};

  if (!est.has_last) {
    est.has_last = true;
    est.last_uq = u_q;
    est.pivot = u_q;
  } else {
    const double du = u_q - est.last_uq;
    const int sign = du > 0.0 ? 1 : (du < 0.0 ? -1 : 0);
    if (sign != 0) {
      const bool flipped = est.last_slope_sign != 0 && sign != est.last_slope_sign;
      if (flipped && std::abs(est.last_uq - est.pivot) > cfg.epsilon_pu) {
        if (est.last_slope_sign > 0) {
          est.u_max = est.last_uq;
          est.seen_max = true;
        } else {
          est.u_min = est.last_uq;
          est.seen_min = true;
        }
        est.pivot = est.last_uq;
      }
      est.last_slope_sign = sign;
    }
    est.last_uq = u_q;
  }

  if (std::abs(omega_dev) > cfg.deadzone_rad_s) {
    est.time_above = est.time_above < 0.0 ? 0.0 : est.time_above + dt;
    if (est.time_above >= cfg.t_hold_s - 1e-12) est.los_declared = true;
  } else {
    est.time_above = -1.0;
  }

  if (!(est.los_declared && est.estimate_valid())) return {est, false};

  const double comp = u_q - est.candidate();
  bool engage = cfg.engage == FfcEngage::Immediate;
  if (!engage && est.has_last_comp) {
    const bool crossed = (comp >= 0.0) != (est.last_comp >= 0.0);
    // stable crossing: u' moves opposite to the angle drift
    engage = crossed && (comp - est.last_comp) * omega_dev < 0.0;
  }
  est.has_last_comp = true;
  est.last_comp = comp;
  if (!engage) return {est, false};

  est.active = true;
  est.a_hat = est.candidate();
  return {est, true};
}

inline double ffc_compensated_uq(const FfcEstimator& est, double u_q) {
  return est.active ? u_q - est.a_hat : u_q;
}

}  // namespace syncstab
