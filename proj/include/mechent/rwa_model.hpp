#ifndef MECHENT_RWA_MODEL_HPP
#define MECHENT_RWA_MODEL_HPP

// Linearized rotating-wave dynamics of one cavity mode coupled to two
// mechanical modes: drift/diffusion, stability, propagation of the moment
// equation dC/dt = A C + C A^T + D, Lyapunov steady states and the analytic
// Bogoliubov-frame expressions for the stationary mechanical state.
//
// Mode order in every 3-mode object: (cavity, mechanics 1, mechanics 2).
// All rates are in s^-1.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "mechent/core.hpp"
#include "mechent/gaussian.hpp"

namespace mechent {

struct SystemParams {
  double omega1 = 0.0;
  double omega2 = 0.0;
  double kappa = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double G1 = 0.0;
  double G2 = 0.0;
  double Delta = 0.0;
  double nbar1 = 0.0;
  double nbar2 = 0.0;
  double g = 0.0;
  double E1 = 0.0;
  double E2 = 0.0;
  double Delta0 = 0.0;

  double omega_plus() const { return 0.5 * (omega2 + omega1); }
  double omega_minus() const { return 0.5 * (omega2 - omega1); }

  void validate() const {
    auto require = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(msg);
    };
    require(kappa >= 0.0, "kappa must be non-negative");
    require(gamma1 >= 0.0 && gamma2 >= 0.0, "mechanical damping must be non-negative");
    require(nbar1 >= 0.0 && nbar2 >= 0.0, "thermal occupancies must be non-negative");
    require(G1 >= 0.0 && G2 >= 0.0, "couplings must be non-negative after the phase choice");
    require(omega1 >= 0.0 && omega2 >= 0.0, "mechanical frequencies must be non-negative");
    require(g >= 0.0 && E1 >= 0.0 && E2 >= 0.0, "g and drive amplitudes must be non-negative");
  }
};

struct DriftDiffusion {
  Mat6 A = Mat6::Zero();
  Mat6 D = Mat6::Zero();
};

struct EntanglementTrajectory {
  std::vector<double> times;
  std::vector<double> EN;
  std::vector<double> photon_number;
  std::vector<double> occupancy1;
  std::vector<double> occupancy2;
  std::vector<Mat6> covariances;
  /// set when propagation stopped early on divergence
  std::optional<double> aborted_at;

  std::size_t size() const { return times.size(); }

  void record(double t, const CovarianceMatrix& cm) {
    times.push_back(t);
    EN.push_back(log_negativity(cm.reduced({1, 2})));
    photon_number.push_back(cm.occupancy(0));
    occupancy1.push_back(cm.occupancy(1));
    occupancy2.push_back(cm.occupancy(2));
    covariances.push_back(cm.matrix());
  }
};

// ---------------------------------------------------------------------------
// couplings and detuning

struct Couplings {
  cplx G1;
  cplx G2;
  double abs1() const { return std::abs(G1); }
  double abs2() const { return std::abs(G2); }
};

inline Couplings effective_couplings(const SystemParams& p) {
  const cplx i(0.0, 1.0);
  return {p.g * p.E1 / (p.omega1 - p.Delta + i * p.kappa),
          -p.g * p.E2 / (p.omega2 + p.Delta - i * p.kappa)};
}

inline double detuning_shift(double delta0, const SystemParams& p,
                             const std::array<cplx, 2>& beta_dc) {
  return delta0 + 2.0 * p.g * (beta_dc[0].real() + beta_dc[1].real());
}

// ---------------------------------------------------------------------------
// drift and diffusion

// Quadrature drift for
//   a'  = -(kappa + i Delta) a - i G1 b1^dag - i G2 b2
//   b1' = -gamma1/2 b1 - i G1 a^dag
//   b2' = -gamma2/2 b2 - i conj(G2) a
// D is fixed so that the uncoupled stationary state is vacuum x thermal.
inline DriftDiffusion drift_diffusion(double kappa, double delta, double gamma1, double gamma2,
                                      double nbar1, double nbar2, cplx g1, cplx g2) {
  const cplx i(0.0, 1.0);
  CMat M = CMat::Zero(3, 3), N = CMat::Zero(3, 3);
  M(0, 0) = -(kappa + i * delta);
  N(0, 1) = -i * g1;
  M(0, 2) = -i * g2;
  M(1, 1) = -0.5 * gamma1;
  N(1, 0) = -i * g1;
  M(2, 2) = -0.5 * gamma2;
  M(2, 0) = -i * std::conj(g2);
  DriftDiffusion dd;
  dd.A = complex_to_quadrature(M, N);
  Eigen::Matrix<double, 6, 1> d;
  d << kappa, kappa, gamma1 * (nbar1 + 0.5), gamma1 * (nbar1 + 0.5),
       gamma2 * (nbar2 + 0.5), gamma2 * (nbar2 + 0.5);
  dd.D = d.asDiagonal();
  return dd;
}

inline DriftDiffusion build_drift_diffusion(const SystemParams& p) {
  p.validate();
  return drift_diffusion(p.kappa, p.Delta, p.gamma1, p.gamma2, p.nbar1, p.nbar2, p.G1, p.G2);
}

inline double max_real_eigenvalue(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

struct StabilityReport {
  bool stable = false;
  double max_re_eig = 0.0;
  std::optional<bool> closed_form;     // only for gamma1 == gamma2
  std::optional<double> closed_form_margin;
  bool agree() const { return !closed_form || *closed_form == stable; }
};

/// |G2|^2 - |G1|^2 + (kappa gamma / 2)[1 + 4 Delta^2 / (gamma + 2 kappa)^2];
/// positive iff stable when gamma1 == gamma2.
inline double stability_margin_closed_form(const SystemParams& p) {
  const double gamma = p.gamma1;
  const double q = gamma + 2.0 * p.kappa;
  return p.G2 * p.G2 - p.G1 * p.G1 +
         0.5 * p.kappa * gamma * (1.0 + 4.0 * p.Delta * p.Delta / (q * q));
}

inline StabilityReport stability_check(const SystemParams& p) {
  StabilityReport rep;
  rep.max_re_eig = max_real_eigenvalue(build_drift_diffusion(p).A);
  rep.stable = rep.max_re_eig < 0.0;
  if (p.gamma1 == p.gamma2) {
    rep.closed_form_margin = stability_margin_closed_form(p);
    rep.closed_form = *rep.closed_form_margin > 0.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lyapunov steady state

/// Solves A X + X A^T + Q = 0 through the Kronecker-sum linear system.
inline Mat lyapunov_solve(const Mat& a, const Mat& q) {
  const Eigen::Index n = a.rows();
  const Mat id = Mat::Identity(n, n);
  const Mat k = Eigen::kroneckerProduct(id, a).eval() + Eigen::kroneckerProduct(a, id).eval();
  Eigen::PartialPivLU<Mat> lu(k);
  Vec rhs = -Eigen::Map<const Vec>(q.data(), n * n);
  Vec x = lu.solve(rhs);
  // one step of iterative refinement
  x += lu.solve(rhs - k * x);
  Mat out = Eigen::Map<Mat>(x.data(), n, n);
  out = 0.5 * (out + out.transpose()).eval();
  const double resid = (a * out + out * a.transpose() + q).norm();
  const double scale = 2.0 * a.norm() * out.norm() + q.norm();
  if (!out.allFinite() || resid > 1e-12 * std::max(scale, 1e-300))
    throw NumericError("Lyapunov solve did not reach the residual tolerance");
  return out;
}

inline CovarianceMatrix steady_state(const SystemParams& p) {
  const auto dd = build_drift_diffusion(p);
  const double mr = max_real_eigenvalue(dd.A);
  if (!(mr < 0.0)) {
    std::ostringstream os;
    os << "no steady state: drift has max Re eig = " << mr;
    throw UnstableError(os.str(), mr);
  }
  return CovarianceMatrix(lyapunov_solve(dd.A, dd.D));
}

// ---------------------------------------------------------------------------
// propagation

/// Exact propagation of dC/dt = A C + C A^T + D for constant A, D.
class LinearPropagator {
public:
  LinearPropagator(const Mat& a, const Mat& d) : a_(a), d_(d) {
    max_re_ = max_real_eigenvalue(a_);
    // affine form around the stationary point is used only away from marginality
    if (max_re_ < -1e-9 * std::max(1.0, a_.cwiseAbs().maxCoeff())) {
      c_ss_ = lyapunov_solve(a_, d_);
    }
  }

  Mat step(const Mat& c, double h) const {
    if (h == 0.0) return c;
    if (c_ss_) {
      const Mat e = (a_ * h).exp();
      const Mat out = e * (c - *c_ss_) * e.transpose() + *c_ss_;
      return 0.5 * (out + out.transpose());
    }
    // Van Loan: exp([[-A, D], [0, A^T]] h) yields the noise integral.
    const Eigen::Index n = a_.rows();
    const double norm = a_.cwiseAbs().rowwise().sum().maxCoeff();
    const int sub = std::max(1, static_cast<int>(std::ceil(norm * h / 2.0)));
    const double hs = h / sub;
    Mat big = Mat::Zero(2 * n, 2 * n);
    big.topLeftCorner(n, n) = -a_;
    big.topRightCorner(n, n) = d_;
    big.bottomRightCorner(n, n) = a_.transpose();
    const Mat f = (big * hs).exp();
    const Mat phi = f.bottomRightCorner(n, n).transpose();
    const Mat q = phi * f.topRightCorner(n, n);
    Mat out = c;
    for (int k = 0; k < sub; ++k) out = phi * out * phi.transpose() + q;
    return 0.5 * (out + out.transpose());
  }

  double max_re_eig() const { return max_re_; }

private:
  Mat a_, d_;
  double max_re_ = 0.0;
  std::optional<Mat> c_ss_;
};

inline EntanglementTrajectory propagate_constant(const Mat6& a, const Mat6& d,
                                                 const CovarianceMatrix& cm0,
                                                 std::span<const double> t_grid) {
  if (cm0.n_modes() != 3) throw std::invalid_argument("propagation needs a 3-mode state");
  for (std::size_t k = 1; k < t_grid.size(); ++k)
    if (!(t_grid[k] > t_grid[k - 1])) throw std::invalid_argument("time grid must be increasing");
  EntanglementTrajectory traj;
  if (t_grid.empty()) return traj;
  LinearPropagator prop(a, d);
  Mat c = cm0.matrix();
  if (t_grid.front() != 0.0) c = prop.step(c, t_grid.front());
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (k > 0) c = prop.step(c, t_grid[k] - t_grid[k - 1]);
    if (!c.allFinite()) throw NumericError("non-finite covariance", t_grid[k]);
    traj.record(t_grid[k], CovarianceMatrix(c));
  }
  return traj;
}

/// Cavity vacuum times mechanical thermal states.
inline CovarianceMatrix initial_state(const SystemParams& p) {
  return thermal_state({0.0, p.nbar1, p.nbar2});
}

inline EntanglementTrajectory evolve(const CovarianceMatrix& cm0, const SystemParams& p,
                                     std::span<const double> t_grid) {
  const auto dd = build_drift_diffusion(p);
  return propagate_constant(dd.A, dd.D, cm0, t_grid);
}

inline std::vector<double> linear_grid(double t0, double t1, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) t[k] = n == 1 ? t0 : t0 + (t1 - t0) * k / (n - 1);
  return t;
}

inline std::vector<double> log_grid(double tmin, double tmax, int n, bool include_zero) {
  std::vector<double> t;
  if (include_zero) t.push_back(0.0);
  const double a = std::log10(tmin), b = std::log10(tmax);
  for (int k = 0; k < n; ++k) t.push_back(std::pow(10.0, n == 1 ? a : a + (b - a) * k / (n - 1)));
  return t;
}

/// Estimated time to reach the steady state, (kappa^2 + Delta^2)/(calG^2 kappa).
inline double settling_time(const SystemParams& p) {
  const double cg2 = p.G2 * p.G2 - p.G1 * p.G1;
  return (p.kappa * p.kappa + p.Delta * p.Delta) / (cg2 * p.kappa);
}

// ---------------------------------------------------------------------------
// analytic Bogoliubov-frame results (equal mechanical damping)

struct EffectiveBath {
  double n1_eff;
  double n2_eff;
  double m_bar;
};

inline EffectiveBath effective_bath(double r, double nbar1, double nbar2) {
  if (r < 0.0) throw std::invalid_argument("squeezing parameter must be non-negative");
  const double c2 = std::cosh(r) * std::cosh(r), s2 = std::sinh(r) * std::sinh(r);
  return {nbar1 * c2 + (nbar2 + 1.0) * s2, nbar2 * c2 + (nbar1 + 1.0) * s2,
          std::cosh(r) * std::sinh(r) * (nbar1 + nbar2 + 1.0)};
}

struct BogoliubovSteady {
  double r = 0.0;
  double calG = 0.0;
  double n1_eff = 0.0;
  double n2_eff = 0.0;
  double m_bar = 0.0;
  double n2_cool = 0.0;
  cplx m_beta = 0.0;
  double C_minus = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  ModeCorrelations corr_b;
};

inline void require_equal_damping(const SystemParams& p) {
  if (std::abs(p.gamma1 - p.gamma2) > 1e-12 * std::max(p.gamma1, p.gamma2))
    throw std::invalid_argument("analytic expressions require gamma1 == gamma2");
}

inline BogoliubovSteady bogoliubov_steady_analytic(const SystemParams& p) {
  require_equal_damping(p);
  if (!(p.G2 > p.G1))
    throw std::invalid_argument("Bogoliubov frame undefined for G2 <= G1");
  const double gamma = p.gamma1;
  const auto sq = SqueezeParams::from_couplings(p.G1, p.G2);
  const auto bath = effective_bath(sq.r, p.nbar1, p.nbar2);
  BogoliubovSteady out;
  out.r = sq.r;
  out.calG = sq.calG;
  out.n1_eff = bath.n1_eff;
  out.n2_eff = bath.n2_eff;
  out.m_bar = bath.m_bar;
  out.C_minus = 2.0 * sq.calG * sq.calG / (gamma * p.kappa);
  out.epsilon = gamma / (gamma + 2.0 * p.kappa);
  out.delta = 2.0 * p.Delta / (gamma + 2.0 * p.kappa);
  const double cool = (1.0 - out.epsilon) * out.C_minus;
  out.n2_cool = out.n2_eff * (1.0 - cool / (1.0 + out.delta * out.delta + out.C_minus));
  const cplx one_id(1.0, out.delta);
  out.m_beta = out.m_bar * 2.0 * one_id / (2.0 * one_id + cool);

  const double c = std::cosh(sq.r), s = std::sinh(sq.r);
  const double tot = 1.0 + out.n1_eff + out.n2_cool;
  out.corr_b.n_b1 = out.n1_eff + s * s * tot - 2.0 * c * s * out.m_beta.real();
  out.corr_b.n_b2 = out.n2_cool + s * s * tot - 2.0 * c * s * out.m_beta.real();
  out.corr_b.m_b = c * c * out.m_beta + s * s * std::conj(out.m_beta) - c * s * tot;
  return out;
}

/// Stationary Bogoliubov-mode state (occupancies n1_eff, n2_cool and m_beta) as
/// a covariance matrix of the beta modes.
inline CovarianceMatrix bogoliubov_mode_covariance(const BogoliubovSteady& s) {
  return covariance_from_correlations({s.n1_eff, s.n2_cool, s.m_beta});
}

inline double cooperativity(double G, double kappa, double gamma) {
  return 2.0 * G * G / (kappa * gamma);
}

inline double en_from_nu(double nu) { return std::max(0.0, -std::log(nu)); }

/// nu of the two-mode squeezed thermal state obtained by neglecting m_beta;
/// kappa, gamma1, Delta, nbar1, nbar2 are read from p.
inline double nu_exact_decoupled(double r, double C1, const SystemParams& p) {
  if (!(r > 0.0)) throw std::invalid_argument("nu_exact_decoupled needs r > 0");
  const double gamma = p.gamma1;
  const double eps = gamma / (gamma + 2.0 * p.kappa);
  const double del = 2.0 * p.Delta / (gamma + 2.0 * p.kappa);
  const double c2 = std::cosh(r) * std::cosh(r), s2 = std::sinh(r) * std::sinh(r);
  const double n1_eff = p.nbar1 * c2 + (p.nbar2 + 1.0) * s2;
  const double n2_cool = (p.nbar2 * c2 + (p.nbar1 + 1.0) * s2) *
                         (1.0 - (1.0 - eps) * C1 / (s2 * (1.0 + del * del) + C1));
  const double np = n1_eff + n2_cool, nm = n1_eff - n2_cool;
  const double num = (2.0 * n1_eff + 1.0) * (2.0 * n2_cool + 1.0);
  return num / ((np + 1.0) * (c2 + s2) + std::sqrt(nm * nm + 4.0 * (np + 1.0) * (np + 1.0) * s2 * c2));
}

inline double nu_approx(double r, double C1, double nbar1, double nbar2) {
  if (!(C1 > 0.0)) throw std::invalid_argument("nu_approx needs C1 > 0");
  return 2.0 * std::exp(-2.0 * r) + (1.0 + nbar1 + nbar2) * std::exp(2.0 * r) / (4.0 * C1);
}

inline double r_opt(double C1, double nbar1, double nbar2) {
  if (!(C1 > 0.0)) throw std::invalid_argument("r_opt needs C1 > 0");
  return 0.25 * std::log(8.0 * C1 / (nbar1 + nbar2 + 1.0));
}

inline double EN_opt(double C1, double nbar1, double nbar2) {
  if (!(C1 > 0.0)) throw std::invalid_argument("EN_opt needs C1 > 0");
  return 0.5 * std::log(C1 / (2.0 * (1.0 + nbar1 + nbar2)));
}

}  // namespace mechent

#endif  // MECHENT_RWA_MODEL_HPP
