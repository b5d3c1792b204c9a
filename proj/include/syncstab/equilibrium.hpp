#pragma once

// Equilibria of the PLL angle dynamics at fixed currents.
//
// At an equilibrium every u_kq is zero, hence every PLL runs at grid frequency
// and every integrator sits at zero. The roots are found by multi-start Newton
// on F(delta) = (u_1q, ..., u_Nq) and classified by the eigenvalues of the
// linearised 2N-state (delta_k, x_k) system with the algebraic loop closed.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "syncstab/frames.hpp"
#include "syncstab/network.hpp"

namespace syncstab {

enum class EquilibriumKind { Sep, Uep, Saddle };

inline const char* to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::Sep: return "SEP";
    case EquilibriumKind::Uep: return "UEP";
    case EquilibriumKind::Saddle: return "Saddle";
  }
  return "?";
}

struct Equilibrium {
  std::vector<double> deltas;
  EquilibriumKind kind = EquilibriumKind::Saddle;
  std::vector<Complex> eigenvalues;
  double residual = 0.0;
  bool singular_jacobian = false;
};

struct EquilibriumOptions {
  int starts_per_dim = 16;
  double dedup_tol_rad = 1e-6;
  int max_iterations = 100;
  double accept_residual = 1e-10;
  std::uint64_t seed = 1;  // start sampling for N > 3
};

/// u_kq at grid frequency (omega = 1 p.u.) for all k.
inline Eigen::VectorXd q_axis_residuals(const NetworkTopology& topo, GridVoltage grid,
                                        std::span<const Complex> currents,
                                        std::span<const double> deltas) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(topo.size()));
  for (std::size_t k = 0; k < topo.size(); ++k) {
    const auto s = q_axis_split(topo, grid, deltas, currents, k);
    f[static_cast<Eigen::Index>(k)] = s.resistive + s.inductive;
  }
  return f;
}

/// d u_kq / d delta_m at omega = 1.
inline Eigen::MatrixXd q_axis_jacobian(const NetworkTopology& topo, GridVoltage grid,
                                       std::span<const Complex> currents,
                                       std::span<const double> deltas) {
  const auto n = static_cast<Eigen::Index>(topo.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  const Complex j_unit(0.0, 1.0);
  for (std::size_t k = 0; k < topo.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    jac(kk, kk) -= grid.u_pu * std::cos(grid.theta_rad - deltas[k]);
    for (const auto& e : topo.path(k)) {
      const Complex z = e.z.at(1.0);
      for (std::size_t m : e.carriers) {
        if (m == k) continue;
        const Complex term = z * j_unit * std::polar(1.0, deltas[m] - deltas[k]) * currents[m];
        jac(kk, kk) -= term.imag();
        jac(kk, static_cast<Eigen::Index>(m)) += term.imag();
      }
    }
  }
  return jac;
}

/// State matrix of the linearised (delta, x) dynamics at an equilibrium
/// (u = 0, x = 0), all PLLs in original PI mode.
inline Eigen::MatrixXd linearized_state_matrix(const NetworkTopology& topo, GridVoltage grid,
                                               std::span<const Complex> currents,
                                               std::span<const double> deltas) {
  const auto n = static_cast<Eigen::Index>(topo.size());
  const double wb = topo.base().omega_b();
  const Eigen::MatrixXd jac = q_axis_jacobian(topo, grid, currents, deltas);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& g = topo.converters()[static_cast<std::size_t>(k)].gains;
    const double ind = q_axis_split(topo, grid, deltas, currents, static_cast<std::size_t>(k)).inductive;
    const double den = 1.0 - g.kp * ind / wb;
    const double du_dx = ind / wb / den;
    for (Eigen::Index m = 0; m < n; ++m) {
      const double du_dd = jac(k, m) / den;
      a(k, m) = g.kp * du_dd;
      a(n + k, m) = g.ki * du_dd;
    }
    a(k, n + k) = g.kp * du_dx + 1.0;
    a(n + k, n + k) = g.ki * du_dx;
  }
  return a;
}

inline Equilibrium classify_equilibrium(const NetworkTopology& topo, GridVoltage grid,
                                        std::span<const Complex> currents,
                                        std::vector<double> deltas) {
  Equilibrium eq;
  const Eigen::MatrixXd jac = q_axis_jacobian(topo, grid, currents, deltas);
  const Eigen::MatrixXd a = linearized_state_matrix(topo, grid, currents, deltas);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
  double scale = 1.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) scale = std::max(scale, a.row(i).cwiseAbs().sum());
  bool all_negative = true;
  bool marginal = false;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const Complex ev = solver.eigenvalues()[i];
    eq.eigenvalues.push_back(ev);
    if (std::abs(ev.real()) <= 1e-9 * scale) marginal = true;
    if (!(ev.real() < 0.0)) all_negative = false;
  }
  std::sort(eq.eigenvalues.begin(), eq.eigenvalues.end(), [](Complex x, Complex y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  const double jac_scale = std::max(1e-300, jac.cwiseAbs().maxCoeff());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  const double smin = svd.singularValues().minCoeff();
  eq.singular_jacobian = smin <= 1e-10 * jac_scale;

  if (eq.singular_jacobian || marginal) {
    eq.kind = EquilibriumKind::Saddle;
  } else {
    eq.kind = all_negative ? EquilibriumKind::Sep : EquilibriumKind::Uep;
  }
  eq.residual = q_axis_residuals(topo, grid, currents, deltas).cwiseAbs().maxCoeff();
  eq.deltas = std::move(deltas);
  return eq;
}

/// Damped Newton from one start; returns wrapped angles if it converged.
inline std::optional<std::vector<double>> newton_root(const NetworkTopology& topo, GridVoltage grid,
                                                      std::span<const Complex> currents,
                                                      std::vector<double> x,
                                                      const EquilibriumOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd f = q_axis_residuals(topo, grid, currents, x);
  double norm = f.norm();
  for (int it = 0; it < opt.max_iterations && norm > 1e-15; ++it) {
    const Eigen::MatrixXd jac = q_axis_jacobian(topo, grid, currents, x);
    Eigen::VectorXd step = jac.fullPivLu().solve(-f);
    if (!step.allFinite()) return std::nullopt;
    const double max_step = step.cwiseAbs().maxCoeff();
    if (max_step > 1.0) step *= 1.0 / max_step;
    double lambda = 1.0;
    bool improved = false;
    std::vector<double> trial(x.size());
    for (int ls = 0; ls < 30; ++ls) {
      for (Eigen::Index i = 0; i < n; ++i) trial[i] = x[i] + lambda * step[i];
      const Eigen::VectorXd ft = q_axis_residuals(topo, grid, currents, trial);
      if (ft.norm() < norm || ft.norm() < 1e-14) {
        x = trial;
        f = ft;
        norm = ft.norm();
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;
    if (lambda * max_step < 1e-15) break;
  }
  if (!(f.cwiseAbs().maxCoeff() < opt.accept_residual)) return std::nullopt;
  for (auto& d : x) d = wrap_angle(d);
  return x;
}

inline std::vector<std::vector<double>> newton_starts(std::size_t n, const EquilibriumOptions& opt) {
  std::vector<std::vector<double>> starts;
  const std::size_t dims = std::min<std::size_t>(n, 3);
  std::size_t total = 1;
  for (std::size_t i = 0; i < dims; ++i) total *= static_cast<std::size_t>(opt.starts_per_dim);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  const double step = kTwoPi / opt.starts_per_dim;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::vector<double> s(n);
    std::size_t rem = idx;
    for (std::size_t d = 0; d < dims; ++d) {
      s[d] = -kPi + (static_cast<double>(rem % opt.starts_per_dim) + 0.5) * step;
      rem /= static_cast<std::size_t>(opt.starts_per_dim);
    }
    for (std::size_t d = dims; d < n; ++d) s[d] = uni(rng);
    starts.push_back(std::move(s));
  }
  return starts;
}

/// All equilibria reachable from the start grid, deduplicated and sorted by
/// their first angle.
inline std::vector<Equilibrium> find_equilibria(const NetworkTopology& topo, GridVoltage grid,
                                                std::span<const Complex> currents,
                                                const EquilibriumOptions& opt = {}) {
  std::vector<std::vector<double>> roots;
  for (auto& start : newton_starts(topo.size(), opt)) {
    auto root = newton_root(topo, grid, currents, std::move(start), opt);
    if (!root) continue;
    const bool duplicate = std::any_of(roots.begin(), roots.end(), [&](const auto& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (std::abs(wrap_angle(r[i] - (*root)[i])) > opt.dedup_tol_rad) return false;
      }
      return true;
    });
    if (!duplicate) roots.push_back(std::move(*root));
  }
  std::sort(roots.begin(), roots.end());
  std::vector<Equilibrium> out;
  for (auto& r : roots) out.push_back(classify_equilibrium(topo, grid, currents, std::move(r)));
  return out;
}

/// The stable equilibrium closest (circular distance) to `guess`.
inline std::optional<Equilibrium> nearest_sep(const NetworkTopology& topo, GridVoltage grid,
                                              std::span<const Complex> currents,
                                              std::span<const double> guess,
                                              const EquilibriumOptions& opt = {}) {
  std::optional<Equilibrium> best;
  double best_dist = 0.0;
  for (auto& eq : find_equilibria(topo, grid, currents, opt)) {
    if (eq.kind != EquilibriumKind::Sep) continue;
    double dist = 0.0;
    for (std::size_t i = 0; i < guess.size(); ++i) dist += std::abs(wrap_angle(eq.deltas[i] - guess[i]));
    if (!best || dist < best_dist) {
      best_dist = dist;
      best = std::move(eq);
    }
  }
  return best;
}

/// Single-converter closed form: roots of a - U_g sin(delta - theta_g).
/// Returns {stable, unstable} when |a| <= U_g, nothing otherwise.
inline std::vector<double> scib_closed_form(double a, double u_g, double theta_g = 0.0) {
  if (!(std::abs(a) <= u_g) || u_g <= 0.0) return {};
  const double s = std::asin(a / u_g);
  return {wrap_angle(theta_g + s), wrap_angle(theta_g + kPi - s)};
}

/// Zero-crossing slope rule of the single-converter curve a - U_g sin(delta):
/// stable where the curve falls through zero.
inline EquilibriumKind scib_slope_rule(double delta, double u_g, double theta_g = 0.0) {
  const double slope = -u_g * std::cos(delta - theta_g);
  if (slope == 0.0) return EquilibriumKind::Saddle;
  return slope < 0.0 ? EquilibriumKind::Sep : EquilibriumKind::Uep;
}

}  // namespace syncstab
