#pragma once

// Stability analysis on top of the network model and the simulator:
// existence margins, self/mutual offset reports, phase portraits, separatrix
// bracketing and offset-estimator accuracy.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "syncstab/equilibrium.hpp"
#include "syncstab/metrics.hpp"
#include "syncstab/network.hpp"
#include "syncstab/parallel.hpp"
#include "syncstab/scenario.hpp"
#include "syncstab/simulator.hpp"

namespace syncstab {

/// Infinite-bus voltage after the first dip (nominal if the scenario has none).
inline GridVoltage fault_grid(const Scenario& sc) {
  GridVoltage g = sc.topology.nominal_voltage();
  for (const auto& e : sc.events) {
    if (e.kind == EventKind::GridDip) {
      g.u_pu = e.u_pu;
      g.theta_rad += e.phase_jump_rad;
      break;
    }
  }
  return g;
}

/// System-base fault-stage currents, each in its own PLL frame, with no
/// frequency-driven adjustment.
inline std::vector<Phasor> stage_currents(const Scenario& scenario, Stage stage) {
  const Scenario sc = resolve_defaults(scenario);
  std::vector<Phasor> out;
  for (std::size_t k = 0; k < sc.converters.size(); ++k) {
    const auto ref = reference(sc.converters[k].strategy, stage, 0.0).ref;
    out.emplace_back(sc.topology.current_scale(k) * ref.value(), FrameTag::pll(k));
  }
  return out;
}

inline std::vector<Complex> raw_values(const std::vector<Phasor>& p) {
  std::vector<Complex> out;
  for (const auto& x : p) out.push_back(x.value());
  return out;
}

/// Offset terms with all PLL frames aligned and omega = 1 p.u.
inline std::vector<double> aligned_offsets(const NetworkTopology& topo,
                                           const std::vector<Phasor>& currents) {
  const auto state = NetworkState::aligned(currents);
  std::vector<double> out;
  for (std::size_t k = 0; k < topo.size(); ++k) out.push_back(decompose_offset(topo, state, k).total);
  return out;
}

/// U_g - |a_k|; exact existence test for one converter, aligned-frame
/// approximation otherwise.
inline std::vector<double> existence_margin(const NetworkTopology& topo, GridVoltage grid,
                                            const std::vector<Phasor>& currents) {
  std::vector<double> out;
  for (double a : aligned_offsets(topo, currents)) out.push_back(grid.u_pu - std::abs(a));
  return out;
}

struct InteractionEntry {
  std::size_t converter = 0;
  double a = 0.0;       // full offset
  double a_self = 0.0;  // self-only offset a'
  double mutual = 0.0;  // a - a'
  OffsetDecomposition decomposition;
};

struct InteractionOptions {
  bool zero_lines = false;  // isolate grid-impedance interaction
  bool zero_grid = false;   // isolate collector-line interaction
};

inline std::vector<InteractionEntry> interaction_report(const NetworkTopology& topo,
                                                        const std::vector<Phasor>& currents,
                                                        InteractionOptions opt = {},
                                                        const std::vector<double>* angles = nullptr) {
  const NetworkTopology t = topo.scaled(opt.zero_grid ? 0.0 : 1.0, opt.zero_lines ? 0.0 : 1.0);
  NetworkState state = NetworkState::aligned(currents);
  if (angles) state.angles = *angles;
  std::vector<InteractionEntry> out;
  for (std::size_t k = 0; k < t.size(); ++k) {
    auto d = decompose_offset(t, state, k);
    out.push_back({k, d.total, d.self_effect, d.mutual_effect, std::move(d)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phase portraits (single converter)

enum class TerminalClass { Converged, Diverged };

struct PortraitPoint {
  double delta0 = 0.0;
  double w0 = 0.0;  // rad/s
  TerminalClass terminal = TerminalClass::Diverged;
  int sep_index = -1;  // index into PortraitGrid::equilibria when converged
  double final_delta = 0.0;
  double final_dw = 0.0;
  std::vector<std::array<double, 3>> polyline;  // (t, unwrapped delta, dw)
};

struct PortraitGrid {
  double delta_min = -kPi, delta_max = kPi;
  double w_min = 0.0, w_max = 0.0;
  std::size_t n_delta = 1, n_w = 1;
  double t_end_s = 1.0;
  std::size_t polyline_stride = 20;
  unsigned threads = 1;

  std::vector<Equilibrium> equilibria;
  std::vector<PortraitPoint> points;

  std::size_t converged() const {
    std::size_t c = 0;
    for (const auto& p : points) c += p.terminal == TerminalClass::Converged;
    return c;
  }
};

/// The fault stage of a single-converter scenario as a constant system
/// starting at (delta0, w0): grid at its faulted value, fault-ride-through
/// already entered at t = 0.
inline Scenario fault_stage_scenario(const Scenario& sc, double delta0, double w0, double t_end) {
  if (sc.topology.size() != 1) throw ValidationError("phase portraits need a single-converter scenario");
  const GridVoltage g = fault_grid(sc);
  GridSource src = sc.topology.grid();
  src.u_pu = g.u_pu;
  src.theta_rad = g.theta_rad;
  Scenario out{sc.name, NetworkTopology(sc.topology.base(), src, sc.topology.branches(),
                                        sc.topology.converters()),
               sc.converters, {}, sc.protection, sc.ffc, sc.sync, sc.solver, t_end};
  out.events = {{0.0, EventKind::EnterFrt, 0.0, 0.0}};
  // integrator value that realises w0 at the start
  out = resolve_defaults(std::move(out));
  const auto& conv = out.converters[0];
  const Complex i0 = out.topology.current_scale(0) * reference(conv.strategy, Stage::Fault, 0.0).ref.value();
  const std::array<double, 1> ang{wrap_angle(delta0)};
  const auto split = q_axis_split(out.topology, g, ang, std::span<const Complex>(&i0, 1), 0);
  const double wb = out.topology.base().omega_b();
  const double u0 = split.resistive + (1.0 + w0 / wb) * split.inductive;
  out.converters[0].initial_delta_rad = wrap_angle(delta0) == kPi ? -kPi : wrap_angle(delta0);
  out.converters[0].initial_integ_rad_s = w0 - out.topology.converters()[0].gains.kp * u0;
  return out;
}

struct TrajectoryResult {
  TerminalClass terminal = TerminalClass::Diverged;
  double final_delta = 0.0;
  double final_unwrapped = 0.0;
  double final_dw = 0.0;
  TimeSeries series;
};

/// Diverged when the angle slipped a full turn or the frequency is still
/// outside the dead zone at the end.
inline TrajectoryResult classify_trajectory(const Scenario& fault_sc, double delta0) {
  TrajectoryResult r;
  r.series = run(fault_sc);
  const auto& last = r.series.at(r.series.size() - 1, 0);
  r.final_delta = last.delta;
  r.final_unwrapped = last.unwrapped;
  r.final_dw = last.dw;
  double max_excursion = 0.0;
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    max_excursion = std::max(max_excursion, std::abs(r.series.at(i, 0).unwrapped - wrap_angle(delta0)));
  }
  // A net crossing of any unstable equilibrium image also counts as a slip,
  // even when the trajectory settles on the next image of the SEP.
  bool crossed = false;
  const double lo = std::min(wrap_angle(delta0), last.unwrapped), hi = std::max(wrap_angle(delta0), last.unwrapped);
  const auto eqs = find_equilibria(fault_sc.topology, fault_grid(fault_sc),
                                   raw_values(stage_currents(fault_sc, Stage::Fault)));
  for (const auto& e : eqs) {
    if (e.kind == EquilibriumKind::Sep) continue;
    for (double u = e.deltas[0] + kTwoPi * std::ceil((lo - e.deltas[0]) / kTwoPi); u < hi; u += kTwoPi) crossed = true;
  }
  const bool slipped = max_excursion >= kTwoPi || crossed;
  const bool fast = std::abs(last.dw) > fault_sc.ffc.deadzone_rad_s;
  r.terminal = slipped || fast ? TerminalClass::Diverged : TerminalClass::Converged;
  return r;
}

inline PortraitGrid phase_portrait(const Scenario& sc, PortraitGrid grid) {
  const GridVoltage g = fault_grid(sc);
  const auto currents = raw_values(stage_currents(sc, Stage::Fault));
  grid.equilibria = find_equilibria(sc.topology, g, currents);
  const std::size_t total = grid.n_delta * grid.n_w;
  grid.points.assign(total, {});
  parallel_for(total, grid.threads, [&](std::size_t idx) {
    const std::size_t i = idx % grid.n_delta;
    const std::size_t j = idx / grid.n_delta;
    auto lerp = [](double lo, double hi, std::size_t m, std::size_t n) {
      return n <= 1 ? lo : lo + (hi - lo) * static_cast<double>(m) / static_cast<double>(n - 1);
    };
    PortraitPoint p;
    p.delta0 = lerp(grid.delta_min, grid.delta_max, i, grid.n_delta);
    p.w0 = lerp(grid.w_min, grid.w_max, j, grid.n_w);
    const auto fs = fault_stage_scenario(sc, p.delta0, p.w0, grid.t_end_s);
    auto r = classify_trajectory(fs, p.delta0);
    p.terminal = r.terminal;
    p.final_delta = r.final_delta;
    p.final_dw = r.final_dw;
    if (p.terminal == TerminalClass::Converged) {
      double best = 1e300;
      for (std::size_t e = 0; e < grid.equilibria.size(); ++e) {
        if (grid.equilibria[e].kind != EquilibriumKind::Sep) continue;
        const double d = std::abs(wrap_angle(grid.equilibria[e].deltas[0] - r.final_delta));
        if (d < best) {
          best = d;
          p.sep_index = static_cast<int>(e);
        }
      }
    }
    for (std::size_t s = 0; s < r.series.size(); s += std::max<std::size_t>(grid.polyline_stride, 1)) {
      p.polyline.push_back({r.series.t[s], r.series.at(s, 0).unwrapped, r.series.at(s, 0).dw});
    }
    grid.points[idx] = std::move(p);
  });
  return grid;
}

struct SeparatrixBracket {
  double converging = 0.0;
  double diverging = 0.0;
  int iterations = 0;
  double width() const { return std::abs(diverging - converging); }
};

/// Bisects the initial angle (at fixed initial frequency) between a
/// converging and a diverging start until the bracket is narrower than tol.
inline SeparatrixBracket find_separatrix(const Scenario& sc, double delta_converging,
                                         double delta_diverging, double w0, double t_end,
                                         double tol = 1e-3) {
  auto cls = [&](double d) {
    return classify_trajectory(fault_stage_scenario(sc, d, w0, t_end), d).terminal;
  };
  if (cls(delta_converging) != TerminalClass::Converged || cls(delta_diverging) != TerminalClass::Diverged) {
    throw ValidationError("separatrix search needs a converging and a diverging endpoint");
  }
  SeparatrixBracket b{delta_converging, delta_diverging, 0};
  while (b.width() >= tol && b.iterations < 60) {
    const double mid = 0.5 * (b.converging + b.diverging);
    (cls(mid) == TerminalClass::Converged ? b.converging : b.diverging) = mid;
    ++b.iterations;
  }
  return b;
}

// ---------------------------------------------------------------------------

struct EstimatorReport {
  std::size_t converter = 0;
  std::string name;
  double a_true = 0.0;  // aligned-frame fault-stage offset
  double a_hat = 0.0;
  double activation_s = 0.0;
  double relative_error = 0.0;
};

inline std::vector<EstimatorReport> estimator_accuracy(const TimeSeries& ts, const Scenario& sc) {
  const auto truth = aligned_offsets(sc.topology, stage_currents(sc, Stage::Fault));
  std::vector<EstimatorReport> out;
  for (std::size_t k = 0; k < ts.converters(); ++k) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto& s = ts.at(i, k);
      if (!s.ffc_active) continue;
      EstimatorReport r{k, ts.names[k], truth[k], s.a_hat, ts.t[i], 0.0};
      r.relative_error = std::abs(r.a_hat - r.a_true) / std::abs(r.a_true);
      out.push_back(r);
      break;
    }
  }
  if (out.empty()) throw ValidationError("run contains no feedforward activation");
  return out;
}

}  // namespace syncstab
