// Single converter through the deep Case-A dip, once with the plain PLL and
// once with feedforward compensation; prints a few samples of each.

#include <cstdio>

#include "syncstab/syncstab.hpp"

using namespace syncstab;

static Scenario case_a(Method m) {
  const BaseSet base = BaseSet::from_frequency(2e6, 35e3, 50.0);
  ConverterSpec vsc{"vsc1", 2e6, Impedance(0.002, 0.05), {}, std::nullopt};
  NetworkTopology topo(base, GridSource{1.0, 0.0, Impedance(0.1, 0.3)}, {}, {vsc});
  ConverterSetup setup;
  setup.method = m;
  setup.strategy.kind = strategy_for(m);
  Scenario sc{"case_a", topo, {setup}, {}, {}, {}, {}, {}, 1.0};
  sc.events = {{0.2, EventKind::GridDip, 0.05, 0.0}, {0.7, EventKind::GridRecover, 1.0, 0.0}};
  sc.solver.record_stride = 1000;
  return sc;
}

int main() {
  for (Method m : {Method::Original, Method::Ffc}) {
    const Scenario sc = case_a(m);
    const TimeSeries ts = run(sc);
    std::printf("%s\n  t_s     delta    dw_rad_s   uq_pu\n", to_string(m));
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto& s = ts.at(i, 0);
      std::printf("  %.3f  %+.4f  %+9.3f  %+.5f\n", ts.t[i], s.delta, s.dw, s.uq);
    }
    const auto o = summarize(ts, sc).front();
    std::printf("  los=%d resynchronized=%d\n\n", o.los, o.resynchronized);
  }
}
