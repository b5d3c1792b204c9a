#pragma once

// Per-unit phasor arithmetic with explicit reference-frame tags.
//
// Every phasor is either expressed in the infinite-bus (XY) frame, which
// rotates at grid frequency, or in the dq frame of one converter's PLL.
// Mixing frames is a programming error and throws FrameMismatch.

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>

#include "syncstab/errors.hpp"

namespace syncstab {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

class FrameTag {
 public:
  enum class Kind { Xy, Pll };

  static constexpr FrameTag xy() { return FrameTag(Kind::Xy, 0); }
  static constexpr FrameTag pll(std::size_t converter) { return FrameTag(Kind::Pll, converter); }

  constexpr Kind kind() const { return kind_; }
  constexpr std::size_t converter() const { return index_; }

  friend constexpr bool operator==(FrameTag, FrameTag) = default;

  std::string str() const {
    return kind_ == Kind::Xy ? std::string("XY") : "PLL(" + std::to_string(index_) + ")";
  }

 private:
  constexpr FrameTag(Kind kind, std::size_t index) : kind_(kind), index_(index) {}
  Kind kind_;
  std::size_t index_;
};

class Phasor {
 public:
  constexpr Phasor() : value_(0.0, 0.0), frame_(FrameTag::xy()) {}
  constexpr Phasor(Complex value, FrameTag frame) : value_(value), frame_(frame) {}
  constexpr Phasor(double re, double im, FrameTag frame) : value_(re, im), frame_(frame) {}

  constexpr Complex value() const { return value_; }
  constexpr double re() const { return value_.real(); }
  constexpr double im() const { return value_.imag(); }
  constexpr FrameTag frame() const { return frame_; }
  double magnitude() const { return std::abs(value_); }

  Phasor& operator+=(const Phasor& other) {
    require_same_frame(other, "+");
    value_ += other.value_;
    return *this;
  }
  Phasor& operator-=(const Phasor& other) {
    require_same_frame(other, "-");
    value_ -= other.value_;
    return *this;
  }
  friend Phasor operator+(Phasor lhs, const Phasor& rhs) { return lhs += rhs; }
  friend Phasor operator-(Phasor lhs, const Phasor& rhs) { return lhs -= rhs; }
  friend Phasor operator*(double s, const Phasor& p) { return Phasor(s * p.value_, p.frame_); }
  friend Phasor operator*(Complex s, const Phasor& p) { return Phasor(s * p.value_, p.frame_); }

 private:
  void require_same_frame(const Phasor& other, const char* op) const {
    if (!(frame_ == other.frame_)) {
      throw FrameMismatch(std::string("phasor '") + op + "' between " + frame_.str() + " and " +
                          other.frame_.str());
    }
  }

  Complex value_;
  FrameTag frame_;
};

/// Series impedance in per unit. `l` is the reactance at nominal frequency, so
/// the reactance seen at per-unit frequency w is w * l.
class Impedance {
 public:
  constexpr Impedance() = default;
  Impedance(double r, double l) : r_(r), l_(l) {
    if (!(r >= 0.0) || !(l >= 0.0)) {
      throw ValidationError("impedance components must be non-negative (r=" + std::to_string(r) +
                            ", l=" + std::to_string(l) + ")");
    }
  }

  constexpr double r() const { return r_; }
  constexpr double l() const { return l_; }
  Complex at(double omega) const { return {r_, omega * l_}; }
  double angle() const { return std::atan2(l_, r_); }

  friend Impedance operator+(const Impedance& a, const Impedance& b) {
    return Impedance(a.r_ + b.r_, a.l_ + b.l_);
  }
  Impedance scaled(double factor) const { return Impedance(factor * r_, factor * l_); }
  friend bool operator==(const Impedance&, const Impedance&) = default;

 private:
  double r_ = 0.0;
  double l_ = 0.0;
};

class BaseSet {
 public:
  BaseSet(double s_base_va, double v_base_v, double omega_b_rad_s)
      : s_base_(s_base_va), v_base_(v_base_v), omega_b_(omega_b_rad_s) {
    if (!(s_base_va > 0.0) || !(v_base_v > 0.0) || !(omega_b_rad_s > 0.0)) {
      throw ValidationError("base values must be positive");
    }
  }

  static BaseSet from_frequency(double s_base_va, double v_base_v, double f_hz) {
    return BaseSet(s_base_va, v_base_v, kTwoPi * f_hz);
  }

  double s_base() const { return s_base_; }
  double v_base() const { return v_base_; }
  double z_base() const { return v_base_ * v_base_ / s_base_; }
  double omega_b() const { return omega_b_; }

 private:
  double s_base_;
  double v_base_;
  double omega_b_;
};

/// Re-expresses `p` in `target` given angle_diff = delta_target - delta_source.
inline Phasor rotate_frame(const Phasor& p, double angle_diff, FrameTag target) {
  return Phasor(std::polar(1.0, angle_diff) * p.value(), target);
}

inline Phasor impedance_drop(const Impedance& z, const Phasor& i, double omega) {
  return Phasor(z.at(omega) * i.value(), i.frame());
}

inline Impedance rebase_impedance(const Impedance& z, const BaseSet& from, const BaseSet& to) {
  return z.scaled(from.z_base() / to.z_base());
}

inline Impedance ohms_to_pu(double r_ohm, double x_ohm, double z_base_ohm) {
  if (!(z_base_ohm > 0.0)) throw ValidationError("impedance base must be positive");
  return Impedance(r_ohm / z_base_ohm, x_ohm / z_base_ohm);
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

}  // namespace syncstab
