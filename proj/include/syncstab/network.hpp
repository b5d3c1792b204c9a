#pragma once

// Radial collector network and the algebraic q-axis voltage solver.
//
// The network is an infinite bus behind Z_g feeding the grid-connection point
// (GCP). Branches are chains of line segments that start at the GCP or at a tap
// of an earlier branch; converters hang off taps through their transformer.
// Every impedance on the path from the infinite bus to converter k carries the
// currents of exactly the converters downstream of it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "syncstab/errors.hpp"
#include "syncstab/frames.hpp"

namespace syncstab {

struct PllGains {
  double kp = 150.0;  // rad/s per p.u.
  double ki = 2500.0; // rad/s^2 per p.u.
};

/// Tap `tap` of branch `branch`; tap 0 is the branch origin, tap m sits after
/// segment m.
struct TapPoint {
  std::size_t branch = 0;
  std::size_t tap = 0;
  friend bool operator==(const TapPoint&, const TapPoint&) = default;
};

struct Branch {
  std::vector<Impedance> segments;  // system base
  std::optional<TapPoint> attach;   // empty: starts at the GCP
};

struct GridSource {
  double u_pu = 1.0;
  double theta_rad = 0.0;
  Impedance z;  // system base
};

/// Live infinite-bus voltage; events change it during a run.
struct GridVoltage {
  double u_pu = 1.0;
  double theta_rad = 0.0;
};

struct ConverterSpec {
  std::string name;
  double s_rated_va = 0.0;
  Impedance transformer;            // converter base
  PllGains gains;
  std::optional<TapPoint> location; // empty: at the GCP
};

enum class ElementRole { Grid, Line, Transformer };

struct PathElement {
  ElementRole role = ElementRole::Line;
  Impedance z;                        // system base
  std::vector<std::size_t> carriers;  // converters whose current flows through z
};

class NetworkTopology {
 public:
  NetworkTopology(BaseSet base, GridSource grid, std::vector<Branch> branches,
                  std::vector<ConverterSpec> converters)
      : base_(base), grid_(grid), branches_(std::move(branches)), converters_(std::move(converters)) {
    build();
  }

  const BaseSet& base() const { return base_; }
  const GridSource& grid() const { return grid_; }
  GridVoltage nominal_voltage() const { return {grid_.u_pu, grid_.theta_rad}; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<ConverterSpec>& converters() const { return converters_; }
  std::size_t size() const { return converters_.size(); }

  const std::vector<PathElement>& path(std::size_t k) const { return paths_.at(k); }

  /// Multiplies a current on converter k's own base into system base.
  double current_scale(std::size_t k) const { return converters_.at(k).s_rated_va / base_.s_base(); }

  /// Transformer impedance of converter k on the system base.
  Impedance transformer_system(std::size_t k) const {
    const auto& c = converters_.at(k);
    return rebase_impedance(c.transformer, BaseSet(c.s_rated_va, base_.v_base(), base_.omega_b()),
                            base_);
  }

  /// Sum of every impedance on converter k's path (the lumped impedance of the
  /// single-converter model).
  Impedance lumped_impedance(std::size_t k) const {
    Impedance total;
    for (const auto& e : path(k)) total = total + e.z;
    return total;
  }

  NetworkTopology scaled(double grid_factor, double line_factor) const {
    GridSource g = grid_;
    g.z = grid_.z.scaled(grid_factor);
    std::vector<Branch> b = branches_;
    for (auto& br : b)
      for (auto& s : br.segments) s = s.scaled(line_factor);
    return NetworkTopology(base_, g, std::move(b), converters_);
  }

 private:
  void build() {
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      if (const auto& at = branches_[b].attach) {
        if (at->branch >= b) {
          throw ValidationError("branch " + std::to_string(b) +
                                " must attach to an earlier branch (radial network)");
        }
        if (at->tap > branches_[at->branch].segments.size()) {
          throw ValidationError("branch " + std::to_string(b) + " attaches to a missing tap");
        }
      }
    }
    const std::size_t n = converters_.size();
    // segments_on_path[k]: (branch, segment) pairs from GCP outwards
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> segs(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& c = converters_[k];
      if (!(c.s_rated_va > 0.0)) {
        throw ValidationError("converter " + std::to_string(k) + " needs a positive rating");
      }
      std::optional<TapPoint> at = c.location;
      while (at) {
        if (at->branch >= branches_.size() || at->tap > branches_[at->branch].segments.size()) {
          throw ValidationError("converter " + std::to_string(k) + " sits on a missing tap");
        }
        for (std::size_t s = at->tap; s-- > 0;) segs[k].emplace_back(at->branch, s);
        at = branches_[at->branch].attach;
      }
      std::reverse(segs[k].begin(), segs[k].end());
    }
    paths_.assign(n, {});
    std::vector<std::size_t> everyone(n);
    for (std::size_t j = 0; j < n; ++j) everyone[j] = j;
    for (std::size_t k = 0; k < n; ++k) {
      paths_[k].push_back({ElementRole::Grid, grid_.z, everyone});
      for (const auto& seg : segs[k]) {
        PathElement e{ElementRole::Line, branches_[seg.first].segments[seg.second], {}};
        for (std::size_t j = 0; j < n; ++j) {
          if (std::find(segs[j].begin(), segs[j].end(), seg) != segs[j].end()) e.carriers.push_back(j);
        }
        paths_[k].push_back(std::move(e));
      }
      paths_[k].push_back({ElementRole::Transformer, transformer_system(k), {k}});
    }
  }

  BaseSet base_;
  GridSource grid_;
  std::vector<Branch> branches_;
  std::vector<ConverterSpec> converters_;
  std::vector<std::vector<PathElement>> paths_;
};

/// Angles, per-unit PLL frequencies and injected currents (system base, each
/// in its own converter's PLL frame).
struct NetworkState {
  std::vector<double> angles;
  std::vector<double> freqs;
  std::vector<Phasor> currents;

  static NetworkState aligned(std::vector<Phasor> currents) {
    const std::size_t n = currents.size();
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), std::move(currents)};
  }
};

/// u_q of converter k written as resistive + omega * inductive, where both
/// parts depend only on angles and currents. `resistive` includes the
/// infinite-bus term.
struct QAxisSplit {
  double resistive = 0.0;
  double inductive = 0.0;
};

namespace detail {

inline void check_state(const NetworkTopology& topo, std::span<const double> angles,
                        std::size_t n_currents, std::size_t k) {
  if (k >= topo.size()) throw std::out_of_range("unknown converter id " + std::to_string(k));
  if (angles.size() != topo.size() || n_currents != topo.size()) {
    throw ValidationError("network state must hold one angle and current per converter");
  }
}

/// Sum over carriers of e of converter j's current rotated into frame k.
inline Complex carried_current(const PathElement& e, std::span<const double> angles,
                               std::span<const Complex> currents, std::size_t k) {
  Complex sum(0.0, 0.0);
  for (std::size_t j : e.carriers) {
    sum += j == k ? currents[j] : std::polar(1.0, angles[j] - angles[k]) * currents[j];
  }
  return sum;
}

}  // namespace detail

/// Hot-path split of u_kq; currents are raw complex values in own frames.
inline QAxisSplit q_axis_split(const NetworkTopology& topo, GridVoltage grid,
                               std::span<const double> angles, std::span<const Complex> currents,
                               std::size_t k) {
  QAxisSplit out;
  out.resistive = grid.u_pu * std::sin(grid.theta_rad - angles[k]);
  for (const auto& e : topo.path(k)) {
    const Complex i = detail::carried_current(e, angles, currents, k);
    out.resistive += e.z.r() * i.imag();
    out.inductive += e.z.l() * i.real();
  }
  return out;
}

namespace detail {

inline std::vector<Complex> raw_currents(const NetworkState& s) {
  std::vector<Complex> out(s.currents.size());
  for (std::size_t j = 0; j < s.currents.size(); ++j) {
    if (!(s.currents[j].frame() == FrameTag::pll(j))) {
      throw FrameMismatch("current of converter " + std::to_string(j) + " must be in PLL(" +
                          std::to_string(j) + "), got " + s.currents[j].frame().str());
    }
    out[j] = s.currents[j].value();
  }
  return out;
}

}  // namespace detail

inline Phasor terminal_voltage(const NetworkTopology& topo, GridVoltage grid,
                               const NetworkState& state, std::size_t k) {
  detail::check_state(topo, state.angles, state.currents.size(), k);
  const auto frame = FrameTag::pll(k);
  const double omega = state.freqs.at(k);
  Phasor u(std::polar(grid.u_pu, grid.theta_rad - state.angles[k]), frame);
  for (const auto& e : topo.path(k)) {
    Phasor carried(0.0, 0.0, frame);
    for (std::size_t j : e.carriers) {
      const Phasor& i = state.currents[j];
      if (!(i.frame() == FrameTag::pll(j))) {
        throw FrameMismatch("current of converter " + std::to_string(j) + " tagged " +
                            i.frame().str());
      }
      carried += j == k ? i : rotate_frame(i, state.angles[j] - state.angles[k], frame);
    }
    u += impedance_drop(e.z, carried, omega);
  }
  return u;
}

inline Phasor terminal_voltage(const NetworkTopology& topo, const NetworkState& state,
                               std::size_t k) {
  return terminal_voltage(topo, topo.nominal_voltage(), state, k);
}

struct QAxisOffset {
  double u_q = 0.0;
  double a = 0.0;
};

inline QAxisOffset q_axis_offset(const NetworkTopology& topo, GridVoltage grid,
                                 const NetworkState& state, std::size_t k) {
  const double u_q = terminal_voltage(topo, grid, state, k).im();
  return {u_q, u_q - grid.u_pu * std::sin(grid.theta_rad - state.angles[k])};
}

inline QAxisOffset q_axis_offset(const NetworkTopology& topo, const NetworkState& state,
                                 std::size_t k) {
  return q_axis_offset(topo, topo.nominal_voltage(), state, k);
}

struct OffsetDecomposition {
  double total = 0.0;
  double self_effect = 0.0;
  double mutual_effect = 0.0;
  std::vector<std::pair<std::size_t, double>> per_contributor;
};

/// Splits a_k into the part driven by converter k's own current and the part
/// driven by every other converter through shared impedances.
inline OffsetDecomposition decompose_offset(const NetworkTopology& topo, const NetworkState& state,
                                            std::size_t k) {
  detail::check_state(topo, state.angles, state.currents.size(), k);
  const auto currents = detail::raw_currents(state);
  const double omega = state.freqs.at(k);
  std::vector<double> by_source(topo.size(), 0.0);
  for (const auto& e : topo.path(k)) {
    const Complex z = e.z.at(omega);
    for (std::size_t j : e.carriers) {
      const Complex i = j == k ? currents[j] : std::polar(1.0, state.angles[j] - state.angles[k]) * currents[j];
      by_source[j] += (z * i).imag();
    }
  }
  OffsetDecomposition out;
  for (std::size_t j = 0; j < by_source.size(); ++j) {
    out.per_contributor.emplace_back(j, by_source[j]);
    (j == k ? out.self_effect : out.mutual_effect) += by_source[j];
  }
  out.total = out.self_effect + out.mutual_effect;
  return out;
}

}  // namespace syncstab
