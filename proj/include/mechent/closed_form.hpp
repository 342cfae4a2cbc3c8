#ifndef MECHENT_CLOSED_FORM_HPP
#define MECHENT_CLOSED_FORM_HPP

// Dissipationless dynamics (kappa = gamma = 0) of the RWA Hamiltonian:
// normal modes, Heisenberg maps, stroboscopic entanglement, and the
// equal-coupling quadrature solution.

#include <cmath>
#include <optional>

#include "mechent/core.hpp"
#include "mechent/gaussian.hpp"

namespace mechent {

struct NormalModeData {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double theta = 0.0;
  double Delta_tilde = 0.0;
};

/// Eigenfrequencies of the (a, beta2) block; beta1 is the zero mode.
/// theta = atan2(-2 calG, Delta)/2, so theta -> 0 as calG -> 0 and
/// theta = -pi/4 at Delta = 0.
inline NormalModeData normal_modes(double calG, double delta) {
  if (calG == 0.0 && delta == 0.0)
    throw std::invalid_argument("normal modes undefined for calG = Delta = 0");
  NormalModeData nm;
  nm.Delta_tilde = std::sqrt(delta * delta + 4.0 * calG * calG);
  nm.lambda1 = 0.5 * (delta - nm.Delta_tilde);
  nm.lambda2 = 0.5 * (delta + nm.Delta_tilde);
  nm.theta = 0.5 * std::atan2(-2.0 * calG, delta);
  return nm;
}

struct SymplecticMap {
  Mat matrix;
  double time = 0.0;

  CovarianceMatrix apply(const CovarianceMatrix& cm) const { return cm.transformed(matrix); }
};

/// 6x6 Bogoliubov transform acting on (cavity, b1, b2), identity on the cavity.
inline Mat bogoliubov_matrix_3mode(double r) {
  Mat b = Mat::Identity(6, 6);
  b.bottomRightCorner(4, 4) = bogoliubov_matrix(r);
  return b;
}

/// Heisenberg map R(t) = S R(0) for the lossless RWA dynamics with
/// G1 = calG sinh r, G2 = calG cosh r.
inline SymplecticMap hamiltonian_map(double t, double r, double calG, double delta) {
  if (r < 0.0 || calG < 0.0) throw std::invalid_argument("hamiltonian_map needs r, calG >= 0");
  const cplx i(0.0, 1.0);
  CMat m = CMat::Zero(3, 3);
  m(1, 1) = 1.0;
  if (calG == 0.0 && delta == 0.0) {
    m(0, 0) = m(2, 2) = 1.0;
  } else {
    const auto nm = normal_modes(calG, delta);
    const double half = 0.5 * nm.Delta_tilde * t;
    const cplx ph = std::exp(-0.5 * i * delta * t);
    const double c2 = std::cos(2.0 * nm.theta), s2 = std::sin(2.0 * nm.theta);
    const double cs = std::cos(half), sn = std::sin(half);
    m(0, 0) = ph * (cs - i * c2 * sn);
    m(0, 2) = ph * (i * s2 * sn);
    m(2, 0) = ph * (i * s2 * sn);
    m(2, 2) = ph * (cs + i * c2 * sn);
  }
  const Mat u = complex_to_quadrature(m, CMat::Zero(3, 3));
  return {bogoliubov_matrix_3mode(-r) * u * bogoliubov_matrix_3mode(r), t};
}

struct StroboscopicResult {
  double t_p = 0.0;
  double phi_p = 0.0;
  /// |phi_p mod 2pi - pi|
  double phase_residual = 0.0;
  bool decoupled_minus_one = false;
  /// closed-form E_N(t_p); set only when exp(i phi_p) = -1
  std::optional<double> EN;
  double EN_approx = 0.0;
};

inline constexpr double kPhaseTol = 1e-8;

/// Closed-form E_N at a stroboscopic time with exp(i phi_p) = -1, starting from
/// a cavity vacuum and thermal mechanics.
inline double stroboscopic_en_formula(double r, double nbar1, double nbar2) {
  const double nm = nbar1 - nbar2;
  const double big = nbar1 + nbar2 + 1.0;
  const double c8 = std::cosh(8.0 * r), s8 = std::sinh(8.0 * r), c4 = std::cosh(4.0 * r);
  const double sum = nm * nm + big * big * c8;
  const double root = std::sqrt(std::pow(big, 4) * s8 * s8 + 4.0 * nm * nm * big * big * c4 * c4);
  // sum - root, written without cancellation
  const double d = big * big - nm * nm;
  const double arg = d * d / (sum + root);
  return std::max(0.0, -0.5 * std::log(arg));
}

inline StroboscopicResult stroboscopic_entanglement(int p, double r, double calG, double delta,
                                                    double nbar1, double nbar2) {
  if (p < 1) throw std::invalid_argument("stroboscopic index p must be >= 1");
  const auto nm = normal_modes(calG, delta);
  StroboscopicResult res;
  res.t_p = 2.0 * kPi * p / nm.Delta_tilde;
  res.phi_p = kPi * p * (1.0 + delta / nm.Delta_tilde);
  res.phase_residual = std::abs(std::remainder(res.phi_p - kPi, 2.0 * kPi));
  res.decoupled_minus_one = res.phase_residual < kPhaseTol;
  if (res.decoupled_minus_one) res.EN = stroboscopic_en_formula(r, nbar1, nbar2);
  res.EN_approx = 4.0 * r - std::log(nbar1 + nbar2 + 1.0);
  return res;
}

/// calG_p = |Delta| sqrt(d (2p - d)) / (2 |p - d|); makes exp(i phi_p) = -1.
inline double optimal_coupling_gp(double delta, int p, int d) {
  if (p < 1 || d <= 0 || d >= 2 * p || d == p || d % 2 == 0)
    throw std::invalid_argument("optimal_coupling_gp needs odd d with 0 < d < 2p, d != p");
  return std::abs(delta) * std::sqrt(double(d) * (2.0 * p - d)) / (2.0 * std::abs(p - d));
}

// ---------------------------------------------------------------------------
// equal couplings G1 = G2 = G

namespace detail {

// trigonometric ratios in x = Delta t, with series near x = 0
inline double shear_s(double delta, double t) {
  const double x = delta * t;
  if (std::abs(x) < 1e-3) return -t * t * t * delta * (1.0 / 6.0 - x * x / 120.0);
  return (std::sin(x) - x) / (delta * delta);
}
inline double shear_k(double delta, double t) {
  const double x = delta * t;
  if (std::abs(x) < 1e-3) return t * t * (0.5 - x * x / 24.0);
  return (1.0 - std::cos(x)) / (delta * delta);
}
inline double sin_over(double delta, double t) {
  const double x = delta * t;
  if (std::abs(x) < 1e-3) return t * (1.0 - x * x / 6.0);
  return std::sin(x) / delta;
}
inline double cos_over(double delta, double t) {
  const double x = delta * t;
  if (std::abs(x) < 1e-3) return t * x * (0.5 - x * x / 24.0);
  return (1.0 - std::cos(x)) / delta;
}

}  // namespace detail

/// Heisenberg map for G1 = G2 = G in the (X, Y, x1, p1, x2, p2) basis. The
/// combinations x+ = (x1 + x2)/sqrt2 and p- = (p1 - p2)/sqrt2 are conserved.
inline SymplecticMap equal_coupling_map(double t, double G, double delta) {
  const double x = delta * t;
  const double co = std::cos(x), si = std::sin(x);
  const double a = std::sqrt(2.0) * G;
  const double so = detail::sin_over(delta, t);   // sin(Dt)/D
  const double ko = detail::cos_over(delta, t);   // (1 - cos(Dt))/D
  const double ss = detail::shear_s(delta, t);    // (sin(Dt) - Dt)/D^2
  const double kk = detail::shear_k(delta, t);    // (1 - cos(Dt))/D^2
  const double g2 = 2.0 * G * G;

  // basis (X, Y, x+, p+, x-, p-)
  Mat m = Mat::Zero(6, 6);
  m(0, 0) = co;  m(0, 1) = si;  m(0, 2) = -a * ko;  m(0, 5) = -a * so;
  m(1, 0) = -si; m(1, 1) = co;  m(1, 2) = -a * so;  m(1, 5) = a * ko;
  m(2, 2) = 1.0;
  m(3, 0) = -a * so; m(3, 1) = -a * ko; m(3, 2) = -g2 * ss; m(3, 3) = 1.0; m(3, 5) = g2 * kk;
  m(4, 0) = a * ko;  m(4, 1) = -a * so; m(4, 2) = g2 * kk;  m(4, 4) = 1.0; m(4, 5) = g2 * ss;
  m(5, 5) = 1.0;

  // rotation (x1, p1, x2, p2) -> (x+, p+, x-, p-)
  const double h = 1.0 / std::sqrt(2.0);
  Mat rot = Mat::Identity(6, 6);
  rot.bottomRightCorner(4, 4) << h, 0, h, 0,
                                 0, h, 0, h,
                                 h, 0, -h, 0,
                                 0, h, 0, -h;
  return {rot.transpose() * m * rot, t};
}

/// Mechanical shear 4 pi m G^2 / Delta^2 at t_m = 2 pi m / Delta.
inline double equal_coupling_shear(int m, double G, double delta) {
  return 4.0 * kPi * m * G * G / (delta * delta);
}

inline double decoupling_time(int m, double delta) {
  if (delta == 0.0) throw std::invalid_argument("decoupling times need Delta != 0");
  return 2.0 * kPi * m / delta;
}

}  // namespace mechent

#endif  // MECHENT_CLOSED_FORM_HPP
