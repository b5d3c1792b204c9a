#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace syncstab;

TEST(Frames, RotationMatchesEulerFormula) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0), ang(-10.0, 10.0);
  for (int n = 0; n < 1000; ++n) {
    const double re = u(rng), im = u(rng), th = ang(rng);
    const Phasor p(re, im, FrameTag::pll(0));
    const Phasor r = rotate_frame(p, th, FrameTag::pll(1));
    // (re + j im)(cos th + j sin th)
    EXPECT_NEAR(r.re(), re * std::cos(th) - im * std::sin(th), 1e-12);
    EXPECT_NEAR(r.im(), re * std::sin(th) + im * std::cos(th), 1e-12);
    EXPECT_TRUE(r.frame() == FrameTag::pll(1));
    EXPECT_NEAR(r.magnitude(), p.magnitude(), 1e-13 * (1.0 + p.magnitude()));
  }
}

TEST(Frames, RotationByZeroIsIdentity) {
  const Phasor p(0.3, -0.7, FrameTag::xy());
  const Phasor r = rotate_frame(p, 0.0, FrameTag::xy());
  EXPECT_EQ(r.re(), 0.3);
  EXPECT_EQ(r.im(), -0.7);
}

TEST(Frames, MixingFramesThrows) {
  Phasor a(1.0, 0.0, FrameTag::pll(0));
  const Phasor b(1.0, 0.0, FrameTag::pll(1));
  EXPECT_THROW(a += b, FrameMismatch);
  EXPECT_THROW((void)(a - Phasor(0.0, 1.0, FrameTag::xy())), FrameMismatch);
  EXPECT_NO_THROW(a += Phasor(0.0, 1.0, FrameTag::pll(0)));
  EXPECT_DOUBLE_EQ(a.im(), 1.0);
}

TEST(Frames, ImpedanceDropIsComplexProduct) {
  const Impedance z(0.1, 0.3);
  const Phasor i(0.0, -1.0, FrameTag::pll(0));
  const Phasor d = impedance_drop(z, i, 1.0);
  EXPECT_NEAR(d.re(), 0.3, 1e-15);
  EXPECT_NEAR(d.im(), -0.1, 1e-15);
  const Phasor d2 = impedance_drop(z, i, 1.1);
  EXPECT_NEAR(d2.re(), 0.33, 1e-15);
  EXPECT_TRUE(d2.frame() == FrameTag::pll(0));
}

TEST(Frames, ImpedanceRejectsNegativeParts) {
  EXPECT_THROW(Impedance(-0.1, 0.2), ValidationError);
  EXPECT_THROW(Impedance(0.1, -0.2), ValidationError);
  EXPECT_NO_THROW(Impedance(0.0, 0.0));
}

TEST(Frames, BaseSetValidation) {
  EXPECT_THROW(BaseSet::from_frequency(0.0, 35e3, 50.0), ValidationError);
  EXPECT_THROW(BaseSet::from_frequency(4e6, -1.0, 50.0), ValidationError);
  const auto b = BaseSet::from_frequency(4e6, 35e3, 50.0);
  EXPECT_DOUBLE_EQ(b.z_base(), 306.25);
  EXPECT_NEAR(b.omega_b(), 100.0 * kPi, 1e-12);
}

TEST(Frames, TransformerRebasedFromConverterToSystemBase) {
  const auto conv = BaseSet::from_frequency(2e6, 35e3, 50.0);
  const auto sys = BaseSet::from_frequency(4e6, 35e3, 50.0);
  const Impedance z = rebase_impedance(Impedance(0.002, 0.05), conv, sys);
  EXPECT_NEAR(z.r(), 0.004, 1e-15);
  EXPECT_NEAR(z.l(), 0.1, 1e-15);
}

TEST(Frames, CollectorLineInPerUnit) {
  const Impedance z1 = ohms_to_pu(5 * 0.1153, 5 * 0.3299, 306.25);
  const Impedance z2 = ohms_to_pu(50 * 0.1153, 50 * 0.3299, 306.25);
  EXPECT_NEAR(z1.r(), 0.001882, 1e-6);
  EXPECT_NEAR(z1.l(), 0.005386, 1e-6);
  EXPECT_NEAR(z2.r(), 0.01882, 1e-5);
  EXPECT_NEAR(z2.l(), 0.05386, 1e-5);
}

TEST(Frames, WrapAngleRange) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int n = 0; n < 1000; ++n) {
    const double a = u(rng);
    const double w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    EXPECT_NEAR(std::remainder(a - w, kTwoPi), 0.0, 1e-9);
  }
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
}
