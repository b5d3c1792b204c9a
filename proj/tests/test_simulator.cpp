#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace syncstab;
using fixtures::case_a_topology;
using fixtures::case_b_topology;
using fixtures::make_scenario;

namespace {

double sep_angle_case_a_normal() {
  const auto topo = case_a_topology();
  const std::vector<Complex> i{{1.0, 0.0}};
  const std::vector<double> g{0.0};
  return nearest_sep(topo, topo.nominal_voltage(), i, g)->deltas[0];
}

Scenario quiet(Method m, double delta0, double t_end, double dt) {
  Scenario sc = make_scenario(case_a_topology(), m);
  sc.events.clear();
  sc.converters[0].initial_delta_rad = delta0;
  sc.t_end_s = t_end;
  sc.solver.dt_s = dt;
  return sc;
}

}  // namespace

// Damped fixed-point iteration on the tagged evaluator, with the PLL
// frequency fed back into the impedances.
TEST(Simulator, AlgebraicLoopMatchesPicardIteration) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ang(-kPi, kPi), cur(-1.0, 1.0), integ(-60.0, 60.0), ug(0.0, 1.0);
  const auto topo = case_b_topology();
  const double wb = topo.base().omega_b();
  for (int n = 0; n < 500; ++n) {
    std::vector<PllState> st(2);
    std::vector<Complex> raw;
    std::vector<Phasor> tagged;
    for (std::size_t k = 0; k < 2; ++k) {
      st[k].delta = ang(rng);
      st[k].integ = integ(rng);
      st[k].mode = n % 3 == 0 ? PllMode::Vspll : PllMode::Original;
      raw.emplace_back(0.5 * cur(rng), 0.5 * cur(rng));
      tagged.emplace_back(raw.back(), FrameTag::pll(k));
    }
    const GridVoltage grid{ug(rng), ang(rng)};
    const auto u = solve_uq_all(topo, grid, st, raw);
    std::vector<double> p(2, 0.0);
    for (int it = 0; it < 400; ++it) {
      NetworkState ns{{st[0].delta, st[1].delta}, {}, tagged};
      for (std::size_t k = 0; k < 2; ++k) {
        ns.freqs.push_back(1.0 + pll_derivatives(st[k], topo.converters()[k].gains, p[k]).ddelta / wb);
      }
      for (std::size_t k = 0; k < 2; ++k) p[k] = 0.5 * p[k] + 0.5 * terminal_voltage(topo, grid, ns, k).im();
    }
    EXPECT_NEAR(u[0], p[0], 1e-10);
    EXPECT_NEAR(u[1], p[1], 1e-10);
  }
}

TEST(Simulator, SingularLoopRaises) {
  QAxisSplit s{0.1, 0.5};
  EXPECT_THROW(close_q_axis_loop(s, LoopForm{100.0 * kPi / 0.5, 0.0}, 100.0 * kPi, 0), NumericalError);
}

TEST(Simulator, Rk4ConvergenceOrder) {
  const double d0 = sep_angle_case_a_normal() + 0.4;
  auto final_delta = [&](double dt) {
    Simulator sim(quiet(Method::Original, d0, 0.05, dt));
    sim.run_until(0.05);
    return sim.states()[0].delta;
  };
  const double y1 = final_delta(4e-3), y2 = final_delta(2e-3), y3 = final_delta(1e-3);
  const double order = std::log2(std::abs(y1 - y2) / std::abs(y2 - y3));
  EXPECT_GE(order, 3.5) << "observed order " << order;
}

TEST(Simulator, EulerIsFirstOrder) {
  const double d0 = sep_angle_case_a_normal() + 0.4;
  auto final_delta = [&](double dt) {
    Scenario sc = quiet(Method::Original, d0, 0.05, dt);
    sc.solver.method = IntegrationMethod::ForwardEuler;
    Simulator sim(sc);
    sim.run_until(0.05);
    return sim.states()[0].delta;
  };
  const double y1 = final_delta(2e-4), y2 = final_delta(1e-4), y3 = final_delta(5e-5);
  EXPECT_NEAR(std::log2(std::abs(y1 - y2) / std::abs(y2 - y3)), 1.0, 0.1);
}

TEST(Simulator, StableEquilibriumIsFixedPoint) {
  const double sep = sep_angle_case_a_normal();
  Scenario sc = quiet(Method::Original, sep, 0.5, 50e-6);
  Simulator sim(sc);
  sim.run_until(10000 * 50e-6);
  EXPECT_LT(std::abs(sim.states()[0].delta - sep), 1e-10);
  EXPECT_LT(std::abs(sim.states()[0].integ), 1e-10);
}

TEST(Simulator, DefaultStartIsPreFaultSep) {
  Scenario sc = make_scenario(case_b_topology(), Method::Original);
  Simulator sim(sc);
  sim.run_until(0.1);
  const std::vector<Complex> i{{0.5, 0.0}, {0.5, 0.0}};
  const auto u = solve_uq_all(sc.topology, sc.topology.nominal_voltage(), sim.states(), i);
  EXPECT_LT(std::abs(u[0]), 1e-10);
  EXPECT_LT(std::abs(u[1]), 1e-10);
}

TEST(Simulator, DeterministicAndRestartable) {
  const Scenario sc = make_scenario(case_a_topology(), Method::Ffc);
  const TimeSeries a = run(sc);
  const TimeSeries b = run(sc);
  TimeSeries c;
  Simulator sim(sc);
  sim.run_until(0.4537, &c);
  sim.run_until(sc.t_end_s, &c);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.t[i], c.t[i]);
    EXPECT_EQ(a.at(i, 0).delta, b.at(i, 0).delta);
    EXPECT_EQ(a.at(i, 0).integ, b.at(i, 0).integ);
    EXPECT_EQ(a.at(i, 0).delta, c.at(i, 0).delta) << "t=" << a.t[i];
    EXPECT_EQ(a.at(i, 0).uq, c.at(i, 0).uq);
  }
}

TEST(Simulator, EventsLandOnTheirTimestamps) {
  Scenario sc = make_scenario(case_a_topology(), Method::Original, 0.5);
  sc.events = {{0.2000137, EventKind::GridDip, 0.5, 0.0}, {0.3000071, EventKind::GridRecover, 1.0, 0.0}};
  sc.protection.delay_s = 0.0133;
  sc.t_end_s = 0.4;
  const auto ts = run(sc);
  ASSERT_EQ(ts.events.size(), 3u);
  EXPECT_EQ(ts.events[0].kind, EventKind::GridDip);
  EXPECT_NEAR(ts.events[0].time_s, 0.2000137, 1e-12);
  EXPECT_EQ(ts.events[1].kind, EventKind::EnterFrt);
  EXPECT_NEAR(ts.events[1].time_s, 0.2000137 + 0.0133, 1e-12);
  EXPECT_EQ(ts.events[2].kind, EventKind::GridRecover);
  EXPECT_NEAR(ts.events[2].time_s, 0.3000071, 1e-12);
  // samples stay on the fixed grid
  for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_NEAR(ts.t[i], i * sc.solver.dt_s, 1e-12);
}

TEST(Simulator, RecoveryBeforeDelayCancelsFaultStage) {
  Scenario sc = make_scenario(case_a_topology(), Method::Original, 0.5);
  sc.events = {{0.2, EventKind::GridDip, 0.5, 0.0}, {0.21, EventKind::GridRecover, 1.0, 0.0}};
  sc.t_end_s = 0.3;
  const auto ts = run(sc);
  for (const auto& e : ts.events) EXPECT_NE(e.kind, EventKind::EnterFrt);
}

TEST(Simulator, CurrentsFollowTheStages) {
  const Scenario sc = make_scenario(case_a_topology(), Method::Original);
  const auto ts = run(sc);
  auto sample_at = [&](double t) { return ts.at(static_cast<std::size_t>(std::lround(t / sc.solver.dt_s)), 0); };
  EXPECT_DOUBLE_EQ(sample_at(0.1).i_d, 1.0);
  EXPECT_DOUBLE_EQ(sample_at(0.21).i_d, 0.0);  // protection: blocked
  EXPECT_DOUBLE_EQ(sample_at(0.21).i_q, 0.0);
  EXPECT_DOUBLE_EQ(sample_at(0.3).i_q, -1.0);
  EXPECT_DOUBLE_EQ(sample_at(0.8).i_d, 1.0);
}

TEST(Simulator, ProtectionHoldKeepsFrequency) {
  Scenario sc = make_scenario(case_a_topology(), Method::Original);
  sc.protection.pll = ProtectionPll::Hold;
  const auto ts = run(sc);
  const std::size_t i0 = static_cast<std::size_t>(std::lround(0.2 / sc.solver.dt_s));
  for (std::size_t i = i0 + 1; i < i0 + 350; ++i) EXPECT_NEAR(ts.at(i, 0).dw, ts.at(i0 - 1, 0).dw, 1e-9);
}

TEST(Simulator, VspllFollowsFirstOrderLaw) {
  const Scenario sc = make_scenario(case_a_topology(), Method::Vspll);
  const auto ts = run(sc);
  const double kp = sc.topology.converters()[0].gains.kp;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.t[i] < 0.221 || ts.t[i] > 0.699) continue;
    EXPECT_NEAR(ts.at(i, 0).dw, kp * ts.at(i, 0).uq, 1e-9);
    EXPECT_EQ(ts.at(i, 0).integ, 0.0);
  }
}

TEST(Simulator, NonFiniteStateRaises) {
  const BaseSet base = BaseSet::from_frequency(2e6, 35e3, 50.0);
  ConverterSpec vsc{"vsc1", 2e6, Impedance(0.002, 0.05), PllGains{150.0, 1.7e308}, std::nullopt};
  NetworkTopology topo(base, GridSource{1.0, 0.0, Impedance(0.1, 0.3)}, {}, {vsc});
  Scenario sc = make_scenario(std::move(topo), Method::Original);
  sc.events.clear();
  sc.converters[0].initial_delta_rad = 1.0;
  sc.solver.dt_s = 1e-2;
  EXPECT_THROW(run(sc), NumericalError);
}

TEST(Simulator, RecordStride) {
  Scenario sc = make_scenario(case_a_topology(), Method::Original);
  sc.solver.record_stride = 100;
  const auto ts = run(sc);
  EXPECT_EQ(ts.size(), 201u);
  EXPECT_NEAR(ts.t[1], 100 * sc.solver.dt_s, 1e-15);
}

TEST(Simulator, ValidationErrors) {
  Scenario sc = make_scenario(case_a_topology(), Method::Original);
  sc.converters[0].initial_delta_rad = 4.0;
  EXPECT_THROW(Simulator{sc}, ValidationError);
  sc = make_scenario(case_a_topology(), Method::Original);
  std::swap(sc.events[0], sc.events[1]);
  EXPECT_THROW(Simulator{sc}, ValidationError);
  sc = make_scenario(case_a_topology(), Method::Original);
  sc.t_end_s = 0.5;
  EXPECT_THROW(Simulator{sc}, ValidationError);
  sc = make_scenario(case_a_topology(), Method::Original);
  sc.converters.pop_back();
  EXPECT_THROW(Simulator{sc}, ValidationError);
}

TEST(Metrics, DetectLosOnConstructedRamp) {
  TimeSeries ts;
  ts.names = {"c"};
  const double dt = 1e-3;
  for (int i = 0; i <= 1000; ++i) {
    ts.t.push_back(i * dt);
    ConverterSample s;
    const double t = i * dt;
    s.dw = t < 0.3 ? 0.0 : (t < 0.305 ? 100.0 : (t < 0.5 ? 0.0 : (t < 0.6 ? 400.0 * (t - 0.5) : 0.0)));
    ts.samples.push_back(s);
  }
  // 0.300..0.304 is too short; the ramp crosses 2*pi*5 at t = 0.5785
  const auto los = detect_los(ts, kTwoPi * 5.0, 0.01);
  ASSERT_EQ(los.size(), 1u);
  EXPECT_NEAR(los[0].onset_s, 0.579, 1e-9);
}

TEST(Metrics, SettleTimeAndWindow) {
  TimeSeries ts;
  ts.names = {"c"};
  ts.events = {{0.1, EventKind::EnterFrt}, {0.9, EventKind::GridRecover}};
  for (int i = 0; i <= 100; ++i) {
    ts.t.push_back(i * 0.01);
    ConverterSample s;
    s.dw = i < 40 ? 50.0 : 0.1;
    ts.samples.push_back(s);
  }
  const auto w = fault_window(ts);
  ASSERT_TRUE(w);
  EXPECT_DOUBLE_EQ(w->begin, 0.1);
  EXPECT_DOUBLE_EQ(w->end, 0.9);
  const auto st = settle_time(ts, 0, *w, kPi);
  ASSERT_TRUE(st);
  EXPECT_NEAR(*st, 0.4, 1e-12);
}
