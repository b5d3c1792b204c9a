#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace syncstab;

TEST(Pll, OriginalIsPi) {
  PllState s;
  s.integ = 3.0;
  const PllGains g{150.0, 2500.0};
  const auto d = pll_derivatives(s, g, 0.01);
  EXPECT_DOUBLE_EQ(d.ddelta, 150.0 * 0.01 + 3.0);
  EXPECT_DOUBLE_EQ(d.dinteg, 25.0);
}

TEST(Pll, LoopFormReproducesDerivative) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const PllGains g{150.0, 2500.0};
  for (PllMode m : {PllMode::Original, PllMode::Frozen, PllMode::Vspll, PllMode::Ffc}) {
    for (int n = 0; n < 200; ++n) {
      PllState s;
      s.mode = m;
      s.integ = 50 * u(rng);
      s.frozen_freq = 10 * u(rng);
      s.ffc.active = n % 2;
      s.ffc.a_hat = 0.2 * u(rng);
      const double uq = u(rng);
      const auto lf = loop_form(s, g);
      EXPECT_NEAR(lf.slope * uq + lf.offset, pll_derivatives(s, g, uq).ddelta, 1e-12);
    }
  }
}

TEST(Pll, FaultModes) {
  PllState s;
  s.integ = 12.0;
  s.freq_integral = 4.0;
  const auto frozen = enter_fault_mode(s, Method::Frozen, 7.5);
  EXPECT_EQ(frozen.mode, PllMode::Frozen);
  EXPECT_DOUBLE_EQ(pll_derivatives(frozen, {}, 0.3).ddelta, 7.5);
  EXPECT_DOUBLE_EQ(pll_derivatives(frozen, {}, 0.3).dinteg, 0.0);
  EXPECT_DOUBLE_EQ(frozen.freq_integral, 0.0);

  const auto vs = enter_fault_mode(s, Method::Vspll, 7.5);
  EXPECT_EQ(vs.mode, PllMode::Vspll);
  EXPECT_DOUBLE_EQ(vs.integ, 0.0);
  EXPECT_DOUBLE_EQ(pll_derivatives(vs, {150.0, 2500.0}, 0.1).ddelta, 15.0);
  EXPECT_DOUBLE_EQ(pll_derivatives(vs, {150.0, 2500.0}, 0.1).dinteg, 0.0);

  const auto f = enter_fault_mode(s, Method::Ffc, 0.0);
  EXPECT_TRUE(f.ffc.armed);
  EXPECT_FALSE(f.ffc.active);
  for (Method m : {Method::Original, Method::Aci, Method::FreqRegulated}) {
    EXPECT_EQ(enter_fault_mode(s, m, 0.0).mode, PllMode::Original);
  }
  const auto back = leave_fault_mode(f);
  EXPECT_EQ(back.mode, PllMode::Original);
  EXPECT_FALSE(back.ffc.armed);
}

TEST(Pll, MethodNames) {
  for (Method m : {Method::Original, Method::Frozen, Method::Vspll, Method::Aci, Method::FreqRegulated, Method::Ffc}) {
    EXPECT_EQ(method_from_string(to_string(m)), m);
  }
  EXPECT_THROW(method_from_string("bogus"), ValidationError);
}

namespace {

// u_q = a + A sin(2 pi f t) while the PLL runs away at a constant omega_dev
FfcEstimator feed_sine(FfcConfig cfg, double a, double amp, double f_hz, double omega_dev, double t_end,
                       double* activation = nullptr) {
  FfcEstimator est = ffc_arm({});
  const double dt = 5e-5;
  for (double t = 0.0; t <= t_end; t += dt) {
    const auto up = ffc_observe(est, cfg, a + amp * std::sin(kTwoPi * f_hz * t), omega_dev, dt);
    est = up.est;
    if (up.reset_pi && activation) *activation = t;
  }
  return est;
}

}  // namespace

TEST(FfcEstimator, PureOscillationAccuracy) {
  for (double a : {-0.102, -0.1133, 0.05}) {
    for (FfcEngage e : {FfcEngage::Immediate, FfcEngage::ZeroCrossing}) {
      FfcConfig cfg;
      cfg.engage = e;
      double t_on = -1.0;
      const auto est = feed_sine(cfg, a, 0.05, 7.0, 80.0, 0.5, &t_on);
      ASSERT_TRUE(est.active);
      EXPECT_GT(t_on, 0.0);
      EXPECT_LT(std::abs(est.a_hat - a) / std::abs(a), 1e-3);
      EXPECT_NEAR(ffc_compensated_uq(est, a), a - est.a_hat, 0.0);
    }
  }
}

TEST(FfcEstimator, ZeroCrossingEngagesOnStableSide) {
  FfcConfig cfg;
  double t_on = -1.0;
  const auto est = feed_sine(cfg, -0.1, 0.05, 5.0, 80.0, 0.5, &t_on);
  ASSERT_TRUE(est.active);
  // with positive drift the compensated input must be falling through zero
  const double phase = std::fmod(kTwoPi * 5.0 * t_on, kTwoPi);
  EXPECT_NEAR(std::cos(phase), -1.0, 2e-2);
}

TEST(FfcEstimator, NoActivationWithoutLossOfSynchronism) {
  const auto est = feed_sine({}, -0.1, 0.05, 5.0, 10.0, 1.0);
  EXPECT_FALSE(est.los_declared);
  EXPECT_FALSE(est.active);
  EXPECT_TRUE(est.estimate_valid());
}

TEST(FfcEstimator, NoActivationBeforeBothExtrema) {
  FfcEstimator est = ffc_arm({});
  FfcConfig cfg;
  cfg.engage = FfcEngage::Immediate;
  for (int i = 0; i < 4000; ++i) est = ffc_observe(est, cfg, 1e-4 * i, 100.0, 5e-5).est;
  EXPECT_TRUE(est.los_declared);
  EXPECT_FALSE(est.estimate_valid());
  EXPECT_FALSE(est.active);
}

TEST(FfcEstimator, SmallRipplesIgnored) {
  FfcConfig cfg;
  const auto est = feed_sine(cfg, -0.1, 2e-4, 50.0, 100.0, 0.3);
  EXPECT_FALSE(est.estimate_valid());
}

TEST(FfcEstimator, CompensatedShape) {
  FfcEstimator est;
  est.active = true;
  est.a_hat = -0.102;
  for (double d = -kPi; d < kPi; d += 0.1) {
    EXPECT_NEAR(ffc_compensated_uq(est, -0.102 + 0.05 * std::sin(d)), 0.05 * std::sin(d), 1e-15);
  }
}
