#ifndef MECHENT_CORE_HPP
#define MECHENT_CORE_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mechent {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a steady state is requested for a drift with a non-negative eigenvalue.
class UnstableError : public Error {
public:
  UnstableError(const std::string& what, double max_re_eig)
      : Error(what), max_re_eig_(max_re_eig) {}
  double max_re_eig() const { return max_re_eig_; }

private:
  double max_re_eig_;
};

/// Non-finite or otherwise failed numerical step; carries the simulation time.
class NumericError : public Error {
public:
  NumericError(const std::string& what, double time = 0.0)
      : Error(what), time_(time) {}
  double time() const { return time_; }

private:
  double time_;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

// Quadrature convention: b = (x + i p)/sqrt(2), ordered (x1, p1, ..., xn, pn).
//
// A complex-linear relation  out_j = sum_k M_jk z_k + N_jk conj(z_k)  maps to the
// real quadrature matrix returned here. Used both for drift matrices
// (z' = M z + N z*) and for Heisenberg maps (z(t) = M z(0) + N z(0)*).
inline Mat complex_to_quadrature(const CMat& M, const CMat& N) {
  const Eigen::Index n = M.rows();
  Mat out(2 * n, 2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const cplx plus = M(j, k) + N(j, k);
      const cplx minus = M(j, k) - N(j, k);
      out(2 * j, 2 * k) = plus.real();
      out(2 * j, 2 * k + 1) = -minus.imag();
      out(2 * j + 1, 2 * k) = plus.imag();
      out(2 * j + 1, 2 * k + 1) = minus.real();
    }
  }
  return out;
}

/// Standard symplectic form for n modes, blocks [[0,1],[-1,0]].
inline Mat symplectic_form(int n_modes) {
  Mat omega = Mat::Zero(2 * n_modes, 2 * n_modes);
  for (int k = 0; k < n_modes; ++k) {
    omega(2 * k, 2 * k + 1) = 1.0;
    omega(2 * k + 1, 2 * k) = -1.0;
  }
  return omega;
}

inline double symplectic_defect(const Mat& S) {
  const Mat omega = symplectic_form(static_cast<int>(S.rows() / 2));
  return (S * omega * S.transpose() - omega).cwiseAbs().maxCoeff();
}

}  // namespace mechent

#endif  // MECHENT_CORE_HPP
