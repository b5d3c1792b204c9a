#pragma once

// Current-reference generation for the normal and fault-ride-through stages.

#include <cmath>
#include <optional>

#include "syncstab/frames.hpp"
#include "syncstab/pll.hpp"

namespace syncstab {

/// Own-base current reference in the converter's PLL frame.
struct CurrentReference {
  double i_d = 0.0;
  double i_q = 0.0;

  double magnitude() const { return std::hypot(i_d, i_q); }
  Complex value() const { return {i_d, i_q}; }
  friend bool operator==(const CurrentReference&, const CurrentReference&) = default;
};

enum class StrategyKind { ConstantRefs, Aci, FreqRegulated };

inline StrategyKind strategy_for(Method m) {
  switch (m) {
    case Method::Aci: return StrategyKind::Aci;
    case Method::FreqRegulated: return StrategyKind::FreqRegulated;
    default: return StrategyKind::ConstantRefs;
  }
}

enum class Stage { Normal, Fault };

struct StrategyConfig {
  StrategyKind kind = StrategyKind::ConstantRefs;
  CurrentReference normal_ref{1.0, 0.0};
  CurrentReference fault_ref{0.0, -1.0};
  std::optional<double> aci_impedance_angle_rad;  // empty: lumped impedance angle
  // Active-current adjustment per radian of accumulated PLL angle drift since
  // fault-ride-through entry: delta_i_d = -freq_gain * integral(w_b*dw) dt.
  double freq_gain_pu_per_rad = 0.2;
  double current_limit_pu = 1.0;
};

struct ReferenceOutput {
  CurrentReference ref;
  double delta_id = 0.0;  // active-current adjustment before clamping
  bool clamped = false;
};

/// Radial scaling onto the limit circle; keeps the reference angle.
inline ReferenceOutput clamp_to_limit(CurrentReference ref, double limit) {
  const double mag = ref.magnitude();
  if (mag <= limit || mag == 0.0) return {ref, 0.0, false};
  const double s = limit / mag;
  return {{ref.i_d * s, ref.i_q * s}, 0.0, true};
}

/// `freq_integral` is the integral of w_b*dw (rad) since fault-ride-through
/// entry; only FreqRegulated uses it.
inline ReferenceOutput reference(const StrategyConfig& cfg, Stage stage, double freq_integral) {
  if (stage == Stage::Normal) return clamp_to_limit(cfg.normal_ref, cfg.current_limit_pu);
  switch (cfg.kind) {
    case StrategyKind::Aci: {
      const double mag = cfg.fault_ref.magnitude();
      const double angle = cfg.aci_impedance_angle_rad.value_or(0.0);
      const CurrentReference r{mag * std::cos(angle),
                               -mag * std::sin(angle)};
      return clamp_to_limit(r, cfg.current_limit_pu);
    }
    case StrategyKind::FreqRegulated: {
      const double did = -cfg.freq_gain_pu_per_rad * freq_integral;
      auto out = clamp_to_limit({cfg.fault_ref.i_d + did, cfg.fault_ref.i_q}, cfg.current_limit_pu);
      out.delta_id = did;
      return out;
    }
    case StrategyKind::ConstantRefs: break;
  }
  return clamp_to_limit(cfg.fault_ref, cfg.current_limit_pu);
}

/// Steady-state q-axis balance of the single-converter system with an
/// active-current adjustment; zero on the curve of candidate equilibria.
inline double eq15_residual(const CurrentReference& refs, double delta, double omega_pll,
                            const Impedance& z_total, double u_g, double delta_id) {
  return z_total.r() * refs.i_q + omega_pll * z_total.l() * (refs.i_d + delta_id) -
         u_g * std::sin(delta);
}

}  // namespace syncstab
