#ifndef MECHENT_TEST_SUPPORT_HPP
#define MECHENT_TEST_SUPPORT_HPP

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "mechent/rwa_model.hpp"

namespace mechent::testkit {

inline SystemParams random_params(std::mt19937_64& rng, bool stable_only) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    SystemParams p;
    p.kappa = 1e5 * (0.5 + u(rng));
    p.gamma1 = p.gamma2 = p.kappa * std::pow(10.0, -4.0 + 3.0 * u(rng));
    p.G2 = p.kappa * (0.2 + 1.5 * u(rng));
    p.G1 = p.G2 * 1.2 * u(rng);
    p.Delta = p.kappa * (u(rng) - 0.5);
    p.nbar1 = 100.0 * u(rng);
    p.nbar2 = 100.0 * u(rng);
    if (!stable_only || stability_check(p).stable) return p;
  }
}

/// Long-time solution of dC/dt = A C + C A^T + D from C(0) = 0 by time
/// doubling of the exact one-step map (block exponential); no Lyapunov solve.
inline Mat ode_stationary(const Mat& a, const Mat& d, double rel_tol = 1e-13) {
  const Eigen::Index n = a.rows();
  const double h = 0.1 / a.cwiseAbs().rowwise().sum().maxCoeff();
  Mat big = Mat::Zero(2 * n, 2 * n);
  big.topLeftCorner(n, n) = -a;
  big.topRightCorner(n, n) = d;
  big.bottomRightCorner(n, n) = a.transpose();
  const Mat f = (big * h).exp();
  Mat phi = f.bottomRightCorner(n, n).transpose();
  Mat c = phi * f.topRightCorner(n, n);
  for (int k = 0; k < 200; ++k) {
    const Mat next = phi * c * phi.transpose() + c;
    const double change = (next - c).norm();
    c = 0.5 * (next + next.transpose());
    phi = (phi * phi).eval();
    if (change <= rel_tol * c.norm() && phi.norm() < rel_tol) break;
  }
  return c;
}

}  // namespace mechent::testkit

#endif  // MECHENT_TEST_SUPPORT_HPP
