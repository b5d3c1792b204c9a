#pragma once

// Shared systems for the tests: the single-converter Case A and the
// two-converter feeder of Case B, built in code rather than from files.

#include <string>

#include "syncstab/syncstab.hpp"

namespace fixtures {

using namespace syncstab;

inline std::string scenario_path(const std::string& file) { return std::string(SYNCSTAB_SCENARIO_DIR) + "/" + file; }

inline NetworkTopology case_a_topology() {
  const BaseSet base = BaseSet::from_frequency(2e6, 35e3, 50.0);
  ConverterSpec vsc{"vsc1", 2e6, Impedance(0.002, 0.05), {}, std::nullopt};
  return NetworkTopology(base, GridSource{1.0, 0.0, Impedance(0.1, 0.3)}, {}, {vsc});
}

inline NetworkTopology case_b_topology() {
  const BaseSet base = BaseSet::from_frequency(4e6, 35e3, 50.0);
  const double zb = base.z_base();
  Branch feeder;
  feeder.segments = {ohms_to_pu(5 * 0.1153, 5 * 0.3299, zb), ohms_to_pu(50 * 0.1153, 50 * 0.3299, zb)};
  ConverterSpec v1{"vsc1", 2e6, Impedance(0.002, 0.05), {}, TapPoint{0, 1}};
  ConverterSpec v2{"vsc2", 2e6, Impedance(0.002, 0.05), {}, TapPoint{0, 2}};
  return NetworkTopology(base, GridSource{1.0, 0.0, Impedance(0.1, 0.3)}, {feeder}, {v1, v2});
}

inline Scenario make_scenario(NetworkTopology topo, Method m, double dip_pu = 0.05) {
  std::vector<ConverterSetup> setups(topo.size());
  for (auto& s : setups) {
    s.method = m;
    s.strategy.kind = strategy_for(m);
  }
  Scenario sc{"test", std::move(topo), setups, {}, {}, {}, {}, {}, 1.0};
  sc.events = {{0.2, EventKind::GridDip, dip_pu, 0.0}, {0.7, EventKind::GridRecover, 1.0, 0.0}};
  return sc;
}

/// System-base currents, each tagged with its own converter's frame.
inline std::vector<Phasor> currents(const NetworkTopology& topo, Complex own_base_current) {
  std::vector<Phasor> out;
  for (std::size_t k = 0; k < topo.size(); ++k) out.emplace_back(topo.current_scale(k) * own_base_current, FrameTag::pll(k));
  return out;
}

}  // namespace fixtures
