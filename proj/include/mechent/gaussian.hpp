#ifndef MECHENT_GAUSSIAN_HPP
#define MECHENT_GAUSSIAN_HPP

// Gaussian-state algebra over real quadrature covariance matrices.
//
// Convention: x = (b + b^dag)/sqrt(2), p = (b - b^dag)/(i sqrt(2)), vacuum
// variance 1/2, C_ij = <{R_i, R_j}>/2 for zero-mean states. Logarithms are
// natural, so a two-mode squeezed vacuum with parameter r has E_N = 2r.

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mechent/core.hpp"

namespace mechent {

inline constexpr double kPhysicalityTol = 1e-9;
inline constexpr double kSymmetryTol = 1e-12;

/// Smallest eigenvalue of the Hermitian matrix C + (i/2) Omega.
inline double uncertainty_margin(const Mat& c) {
  const int n = static_cast<int>(c.rows() / 2);
  CMat h = c.cast<cplx>() + cplx(0.0, 0.5) * symplectic_form(n).cast<cplx>();
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

class CovarianceMatrix {
public:
  CovarianceMatrix() = default;

  // Rejects asymmetric or unphysical input. Violations of the uncertainty
  // relation smaller than the tolerance are clamped by a diagonal shift.
  explicit CovarianceMatrix(Mat m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() < 2 || m_.rows() % 2 != 0)
      throw std::invalid_argument("covariance matrix must be square with even dimension");
    if (!m_.allFinite())
      throw NumericError("covariance matrix has non-finite entries");
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
      throw std::invalid_argument("covariance matrix is not symmetric");
    m_ = 0.5 * (m_ + m_.transpose()).eval();
    const double margin = uncertainty_margin(m_);
    const double tol = kPhysicalityTol * scale;
    if (margin < -tol) {
      std::ostringstream os;
      os << "covariance matrix violates the uncertainty relation (min eigenvalue "
         << margin << ")";
      throw std::invalid_argument(os.str());
    }
    if (margin < 0.0) m_.diagonal().array() += -margin;
  }

  int n_modes() const { return static_cast<int>(m_.rows() / 2); }
  const Mat& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  /// Mean excitation number <b^dag b> of one mode.
  double occupancy(int mode) const {
    return 0.5 * (m_(2 * mode, 2 * mode) + m_(2 * mode + 1, 2 * mode + 1) - 1.0);
  }

  /// Reduced state on the listed modes (in the given order).
  CovarianceMatrix reduced(std::span<const int> modes) const {
    const Eigen::Index k = static_cast<Eigen::Index>(modes.size());
    Mat out(2 * k, 2 * k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        out.block<2, 2>(2 * a, 2 * b) = m_.block<2, 2>(2 * modes[a], 2 * modes[b]);
    return CovarianceMatrix(std::move(out));
  }
  CovarianceMatrix reduced(std::initializer_list<int> modes) const {
    return reduced(std::span<const int>(modes.begin(), modes.size()));
  }

  /// C -> S C S^T.
  CovarianceMatrix transformed(const Mat& s) const {
    return CovarianceMatrix(s * m_ * s.transpose());
  }

private:
  Mat m_;
};

/// n_bj = <b_j^dag b_j>, m_b = <b_1 b_2>; all other second moments zero.
struct ModeCorrelations {
  double n_b1 = 0.0;
  double n_b2 = 0.0;
  cplx m_b = 0.0;
};

struct SqueezeParams {
  double r = 0.0;
  double calG = 0.0;

  static SqueezeParams from_couplings(double g1, double g2) {
    if (!(g2 > g1) || g1 < 0.0)
      throw std::invalid_argument("Bogoliubov modes need G2 > G1 >= 0");
    return {std::atanh(g1 / g2), std::sqrt(g2 * g2 - g1 * g1)};
  }
};

inline CovarianceMatrix vacuum_state(int n_modes) {
  if (n_modes < 1) throw std::invalid_argument("vacuum_state needs at least one mode");
  return CovarianceMatrix(Mat::Identity(2 * n_modes, 2 * n_modes) * 0.5);
}

inline CovarianceMatrix thermal_state(std::span<const double> occupancies) {
  if (occupancies.empty()) throw std::invalid_argument("thermal_state needs at least one mode");
  const Eigen::Index n = static_cast<Eigen::Index>(occupancies.size());
  Mat m = Mat::Zero(2 * n, 2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double nb = occupancies[k];
    if (!std::isfinite(nb)) throw std::invalid_argument("thermal occupancy must be finite");
    if (nb < 0.0) throw std::invalid_argument("thermal occupancy must be non-negative");
    m(2 * k, 2 * k) = m(2 * k + 1, 2 * k + 1) = nb + 0.5;
  }
  return CovarianceMatrix(std::move(m));
}
inline CovarianceMatrix thermal_state(std::initializer_list<double> occupancies) {
  return thermal_state(std::span<const double>(occupancies.begin(), occupancies.size()));
}

/// Quadrature matrix of the Heisenberg map b1 -> cosh r b1 + sinh r b2^dag,
/// b2 -> cosh r b2 + sinh r b1^dag (the forward Bogoliubov transform).
inline Mat bogoliubov_matrix(double r) {
  const double c = std::cosh(r), s = std::sinh(r);
  Mat S = Mat::Zero(4, 4);
  S(0, 0) = c;  S(0, 2) = s;
  S(1, 1) = c;  S(1, 3) = -s;
  S(2, 2) = c;  S(2, 0) = s;
  S(3, 3) = c;  S(3, 1) = -s;
  return S;
}

/// Symplectic matrix applied to the state by the two-mode squeezing operator.
/// It is the inverse Bogoliubov map, so bogoliubov_frame(forward, r) undoes it.
inline Mat two_mode_squeeze_matrix(double r) { return bogoliubov_matrix(-r); }

inline CovarianceMatrix two_mode_squeeze(const CovarianceMatrix& cm, double r) {
  if (cm.n_modes() != 2) throw std::invalid_argument("two_mode_squeeze needs a 2-mode state");
  return cm.transformed(two_mode_squeeze_matrix(r));
}

enum class Direction { forward, inverse };

inline CovarianceMatrix bogoliubov_frame(const CovarianceMatrix& cm, double r, Direction dir) {
  if (cm.n_modes() != 2) throw std::invalid_argument("bogoliubov_frame needs a 2-mode state");
  return cm.transformed(bogoliubov_matrix(dir == Direction::forward ? r : -r));
}

/// Local rotation of one mode, b -> exp(-i phi) b.
inline CovarianceMatrix phase_rotate(const CovarianceMatrix& cm, int mode, double phi) {
  Mat R = Mat::Identity(cm.matrix().rows(), cm.matrix().cols());
  const double c = std::cos(phi), s = std::sin(phi);
  R(2 * mode, 2 * mode) = c;      R(2 * mode, 2 * mode + 1) = s;
  R(2 * mode + 1, 2 * mode) = -s; R(2 * mode + 1, 2 * mode + 1) = c;
  return cm.transformed(R);
}

/// Smallest symplectic eigenvalue of the partial transpose (vacuum = 1/2).
inline double min_pt_symplectic_eigenvalue(const CovarianceMatrix& cm) {
  if (cm.n_modes() != 2) throw std::invalid_argument("partial transpose needs a 2-mode state");
  Mat s = cm.matrix();
  s.row(3) *= -1.0;
  s.col(3) *= -1.0;
  // i L^T Omega L is Hermitian with eigenvalues +-nu_k for s = L L^T
  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError("partially transposed state is not positive definite");
  const Mat l = llt.matrixL();
  const CMat h = cplx(0.0, 1.0) * (l.transpose() * symplectic_form(2) * l).cast<cplx>();
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().minCoeff();
}

inline double log_negativity(const CovarianceMatrix& cm) {
  const double nu = min_pt_symplectic_eigenvalue(cm);
  if (nu <= 0.0) throw NumericError("degenerate partially transposed state");
  return std::max(0.0, -std::log(2.0 * nu));
}

inline double nu_from_correlations(const ModeCorrelations& c) {
  const double dn = c.n_b1 - c.n_b2;
  const double num = (1.0 + 2.0 * c.n_b1) * (1.0 + 2.0 * c.n_b2) - 4.0 * std::norm(c.m_b);
  return num / (1.0 + c.n_b1 + c.n_b2 + std::sqrt(4.0 * std::norm(c.m_b) + dn * dn));
}

inline double logneg_from_occupancies(const ModeCorrelations& c) {
  return std::max(0.0, -std::log(nu_from_correlations(c)));
}

inline CovarianceMatrix covariance_from_correlations(const ModeCorrelations& c) {
  const double re = c.m_b.real(), im = c.m_b.imag();
  Mat m(4, 4);
  m << c.n_b1 + 0.5, 0.0, re, im,
       0.0, c.n_b1 + 0.5, im, -re,
       re, im, c.n_b2 + 0.5, 0.0,
       im, -re, 0.0, c.n_b2 + 0.5;
  return CovarianceMatrix(std::move(m));
}

// Projection of a 2-mode state onto the occupancy/anomalous-correlation shape;
// exact when <b_j b_j> = <b_1 b_2^dag> = 0.
inline ModeCorrelations correlations_from_covariance(const CovarianceMatrix& cm) {
  const Mat& m = cm.matrix();
  ModeCorrelations c;
  c.n_b1 = cm.occupancy(0);
  c.n_b2 = cm.occupancy(1);
  c.m_b = cplx(0.5 * (m(0, 2) - m(1, 3)), 0.5 * (m(0, 3) + m(1, 2)));
  return c;
}

}  // namespace mechent

#endif  // MECHENT_GAUSSIAN_HPP
