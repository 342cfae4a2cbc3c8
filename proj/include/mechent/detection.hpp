#ifndef MECHENT_DETECTION_HPP
#define MECHENT_DETECTION_HPP

// Simulated homodyne readout of the two mechanical modes through weak probe
// fields and reconstruction of their covariance matrix.
//
// Each probe output carries (Gp/sqrt(kappa)) X_j(theta) plus vacuum noise;
// records are input-referred, i.e. X_j(theta) + noise with variance
// kappa/(2 Gp^2). x and p of one mode are never read out jointly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "mechent/core.hpp"
#include "mechent/gaussian.hpp"

namespace mechent {

struct ProbeConfig {
  double Gp1 = 0.0;
  double Gp2 = 0.0;
  double kappa = 0.0;
  long long n_samples = 0;
  std::vector<double> phase_grid{0.0, kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0};

  void validate() const {
    if (!(kappa > 0.0)) throw std::invalid_argument("probe kappa must be positive");
    if (Gp1 < 0.0 || Gp2 < 0.0) throw std::invalid_argument("probe couplings must be non-negative");
    if (n_samples < 2) throw std::invalid_argument("need at least two samples per phase setting");
    if (phase_grid.empty()) throw std::invalid_argument("phase grid is empty");
  }

  double shot_noise_variance(int mode) const {
    const double gp = mode == 0 ? Gp1 : Gp2;
    return kappa / (2.0 * gp * gp);
  }
};

/// (Gp_j)^2 / kappa: signal-to-shot-noise variance ratio per unit mechanical variance.
inline std::array<double, 2> probe_output_snr(const ProbeConfig& cfg) {
  if (!(cfg.kappa > 0.0)) throw std::invalid_argument("probe kappa must be positive");
  return {cfg.Gp1 * cfg.Gp1 / cfg.kappa, cfg.Gp2 * cfg.Gp2 / cfg.kappa};
}

/// True when both probe couplings are below 1% of the corresponding drive couplings.
inline bool backaction_negligible(const ProbeConfig& cfg, double G1, double G2, double ratio = 0.01) {
  return cfg.Gp1 < ratio * G1 && cfg.Gp2 < ratio * G2;
}

struct PhaseSetting {
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::vector<double> v1;
  std::vector<double> v2;
};

struct HomodyneRecords {
  ProbeConfig cfg;
  std::uint64_t seed = 0;
  std::vector<PhaseSetting> settings;

  /// CSV dump with columns mode, phase_rad, sample_index, value.
  void write_csv(std::ostream& os) const {
    os << "mode,phase_rad,sample_index,value\n";
    os.precision(17);
    long long idx = 0;
    for (const auto& s : settings)
      for (std::size_t k = 0; k < s.v1.size(); ++k, ++idx) {
        os << 1 << ',' << s.theta1 << ',' << idx << ',' << s.v1[k] << '\n';
        os << 2 << ',' << s.theta2 << ',' << idx << ',' << s.v2[k] << '\n';
      }
  }
};

inline Eigen::Vector2d quadrature_direction(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// Draws n_samples of (X1(theta1), X2(theta2)) for every pair of grid phases.
inline HomodyneRecords simulate_homodyne(const CovarianceMatrix& cm, const ProbeConfig& cfg,
                                         std::uint64_t seed) {
  cfg.validate();
  if (cm.n_modes() != 2) throw std::invalid_argument("homodyne simulation needs a 2-mode state");
  if (!(cfg.Gp1 > 0.0 && cfg.Gp2 > 0.0)) throw std::invalid_argument("probe couplings must be positive");
  const Mat& c = cm.matrix();
  const double s1 = std::sqrt(cfg.shot_noise_variance(0));
  const double s2 = std::sqrt(cfg.shot_noise_variance(1));

  HomodyneRecords rec;
  rec.cfg = cfg;
  rec.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double th1 : cfg.phase_grid) {
    for (double th2 : cfg.phase_grid) {
      const Eigen::Vector2d u1 = quadrature_direction(th1), u2 = quadrature_direction(th2);
      Eigen::Matrix2d sig;
      sig(0, 0) = u1.dot(c.block<2, 2>(0, 0) * u1);
      sig(1, 1) = u2.dot(c.block<2, 2>(2, 2) * u2);
      sig(0, 1) = sig(1, 0) = u1.dot(c.block<2, 2>(0, 2) * u2);
      const double l11 = std::sqrt(sig(0, 0));
      const double l21 = sig(1, 0) / l11;
      const double l22 = std::sqrt(std::max(0.0, sig(1, 1) - l21 * l21));
      PhaseSetting ps;
      ps.theta1 = th1;
      ps.theta2 = th2;
      ps.v1.resize(cfg.n_samples);
      ps.v2.resize(cfg.n_samples);
      for (long long k = 0; k < cfg.n_samples; ++k) {
        const double z1 = normal(rng), z2 = normal(rng);
        ps.v1[k] = l11 * z1 + s1 * normal(rng);
        ps.v2[k] = l21 * z1 + l22 * z2 + s2 * normal(rng);
      }
      rec.settings.push_back(std::move(ps));
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// reconstruction

inline const std::array<const char*, 10>& moment_names() {
  static const std::array<const char*, 10> names{"x1x1", "x1p1", "p1p1", "x2x2", "x2p2",
                                                 "p2p2", "x1x2", "x1p2", "p1x2", "p1p2"};
  return names;
}

/// Sufficient statistics of one block of samples.
struct BlockStats {
  double n = 0, s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;

  BlockStats& operator+=(const BlockStats& o) {
    n += o.n; s1 += o.s1; s2 += o.s2; s11 += o.s11; s22 += o.s22; s12 += o.s12;
    return *this;
  }
  // unbiased (n - 1) variances and covariance
  std::array<double, 3> moments() const {
    const double m1 = s1 / n, m2 = s2 / n;
    const double d = n - 1.0;
    return {(s11 - n * m1 * m1) / d, (s22 - n * m2 * m2) / d, (s12 - n * m1 * m2) / d};
  }
};

struct ReconstructionResult {
  CovarianceMatrix cm_est;
  Mat stderr_cm;
  double EN_est = 0.0;
  double EN_stderr = 0.0;
  bool clamped = false;
  std::vector<std::string> warnings;
};

/// Nearest (Frobenius) real symmetric C with C + (i/2) Omega >= margin, by
/// Dykstra alternating projections on the Hermitian embedding.
inline Mat project_physical(const Mat& c, double margin = 1e-12, int max_iter = 2000) {
  const Eigen::Index n = c.rows();
  const CMat half_omega = cplx(0.0, 0.5) * symplectic_form(static_cast<int>(n / 2)).cast<cplx>();
  CMat x = c.cast<cplx>() + half_omega;
  CMat p = CMat::Zero(n, n), q = CMat::Zero(n, n);
  for (int it = 0; it < max_iter; ++it) {
    // PSD cone (shifted by margin)
    CMat y = x + p;
    Eigen::SelfAdjointEigenSolver<CMat> es(y);
    Vec ev = es.eigenvalues().cwiseMax(margin);
    CMat yp = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    p = y - yp;
    // affine set: imaginary part fixed to Omega/2, real part symmetric
    CMat z = yp + q;
    Mat re = z.real();
    re = 0.5 * (re + re.transpose()).eval();
    CMat zp = re.cast<cplx>() + half_omega;
    q = z - zp;
    x = zp;
    if (uncertainty_margin(x.real()) >= 0.0) break;
  }
  Mat out = x.real();
  const double m = uncertainty_margin(out);
  if (m < 0.0) out.diagonal().array() += -m;
  return out;
}

namespace detail {

// design matrix rows: 3 equations per phase setting
inline Mat design_matrix(const std::vector<PhaseSetting>& settings) {
  Mat a = Mat::Zero(3 * static_cast<Eigen::Index>(settings.size()), 10);
  for (std::size_t k = 0; k < settings.size(); ++k) {
    const double c1 = std::cos(settings[k].theta1), s1 = std::sin(settings[k].theta1);
    const double c2 = std::cos(settings[k].theta2), s2 = std::sin(settings[k].theta2);
    const Eigen::Index r = 3 * static_cast<Eigen::Index>(k);
    a(r, 0) = c1 * c1; a(r, 1) = 2 * c1 * s1; a(r, 2) = s1 * s1;
    a(r + 1, 3) = c2 * c2; a(r + 1, 4) = 2 * c2 * s2; a(r + 1, 5) = s2 * s2;
    a(r + 2, 6) = c1 * c2; a(r + 2, 7) = c1 * s2; a(r + 2, 8) = s1 * c2; a(r + 2, 9) = s1 * s2;
  }
  return a;
}

inline Mat moments_to_cm(const Vec& m) {
  Mat c(4, 4);
  c << m(0), m(1), m(6), m(7),
       m(1), m(2), m(8), m(9),
       m(6), m(8), m(3), m(4),
       m(7), m(9), m(4), m(5);
  return c;
}

}  // namespace detail

struct MomentFit {
  Mat cm;
  bool clamped = false;
};

/// Generalised least squares over the per-setting moment triples
/// (s11 - N1, s22 - N2, s12). Each triple is weighted by the inverse of its
/// Gaussian sampling covariance, first from the sample moments, then from the
/// fitted state.
class MomentEstimator {
public:
  MomentEstimator(const std::vector<PhaseSetting>& settings, const ProbeConfig& cfg)
      : noise_{cfg.shot_noise_variance(0), cfg.shot_noise_variance(1)} {
    a_ = detail::design_matrix(settings);
    Eigen::JacobiSVD<Mat> svd(a_, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-10 * std::max(1.0, sv(0));
    std::vector<std::string> missing;
    for (int j = 0; j < 10; ++j) {
      double null_weight = 0.0;
      for (int k = 0; k < 10; ++k) {
        const double s = k < sv.size() ? sv(k) : 0.0;
        if (s <= tol) null_weight += svd.matrixV()(j, k) * svd.matrixV()(j, k);
      }
      if (null_weight > 1e-8) missing.push_back(moment_names()[j]);
    }
    if (!missing.empty()) {
      std::string msg = "phase coverage insufficient; unidentified moments:";
      for (const auto& m : missing) msg += " " + m;
      throw std::invalid_argument(msg);
    }
    for (const auto& s : settings) {
      dirs_.push_back({quadrature_direction(s.theta1), quadrature_direction(s.theta2)});
    }
  }

  MomentFit fit(const std::vector<BlockStats>& per_setting) const {
    const std::size_t m = per_setting.size();
    std::vector<Eigen::Vector3d> raw(m), b(m);
    for (std::size_t k = 0; k < m; ++k) {
      const auto mo = per_setting[k].moments();
      raw[k] = {mo[0], mo[1], mo[2]};
      b[k] = {mo[0] - noise_[0], mo[1] - noise_[1], mo[2]};
    }
    Mat cm;
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::Matrix<double, 10, 10> lhs = Eigen::Matrix<double, 10, 10>::Zero();
      Eigen::Matrix<double, 10, 1> rhs = Eigen::Matrix<double, 10, 1>::Zero();
      for (std::size_t k = 0; k < m; ++k) {
        Eigen::Vector3d sig = raw[k];
        if (pass > 0) {
          const auto& [u1, u2] = dirs_[k];
          sig = {u1.dot(cm.block<2, 2>(0, 0) * u1) + noise_[0], u2.dot(cm.block<2, 2>(2, 2) * u2) + noise_[1],
                 u1.dot(cm.block<2, 2>(0, 2) * u2)};
        }
        const Eigen::Matrix3d w = weight(sig, per_setting[k].n);
        const auto ak = a_.middleRows(3 * static_cast<Eigen::Index>(k), 3);
        lhs += ak.transpose() * w * ak;
        rhs += ak.transpose() * w * b[k];
      }
      cm = detail::moments_to_cm(lhs.ldlt().solve(rhs));
    }
    MomentFit f;
    f.cm = cm;
    if (!f.cm.allFinite()) throw NumericError("moment fit produced non-finite entries");
    if (uncertainty_margin(f.cm) < 0.0) {
      f.cm = project_physical(f.cm);
      f.clamped = true;
    }
    return f;
  }

private:
  // inverse sampling covariance of (s11, s22, s12) for a bivariate Gaussian
  static Eigen::Matrix3d weight(const Eigen::Vector3d& sig, double n) {
    const double a = std::max(sig(0), 1e-300), c = std::max(sig(1), 1e-300);
    const double b = std::clamp(sig(2), -std::sqrt(a * c), std::sqrt(a * c));
    Eigen::Matrix3d cov;
    cov << 2 * a * a, 2 * b * b, 2 * a * b,
           2 * b * b, 2 * c * c, 2 * c * b,
           2 * a * b, 2 * c * b, a * c + b * b;
    cov /= std::max(n - 1.0, 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d ev = es.eigenvalues().cwiseMax(1e-14 * es.eigenvalues().maxCoeff());
    return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  }

  std::array<double, 2> noise_;
  Mat a_;
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> dirs_;
};

/// Moment fit with shot-noise subtraction, and block-bootstrap standard errors.
inline ReconstructionResult reconstruct_cm(const HomodyneRecords& rec, int n_boot = 200, int n_blocks = 1000) {
  if (rec.settings.empty()) throw std::invalid_argument("no homodyne records");
  const MomentEstimator est(rec.settings, rec.cfg);

  std::vector<std::vector<BlockStats>> blocks(rec.settings.size());
  std::vector<BlockStats> totals(rec.settings.size());
  for (std::size_t k = 0; k < rec.settings.size(); ++k) {
    const auto& s = rec.settings[k];
    const std::size_t n = s.v1.size();
    const std::size_t nb = std::max<std::size_t>(1, std::min<std::size_t>(n_blocks, n / 2));
    blocks[k].resize(nb);
    for (std::size_t i = 0; i < n; ++i) {
      auto& b = blocks[k][i * nb / n];
      const double a1 = s.v1[i], a2 = s.v2[i];
      b.n += 1; b.s1 += a1; b.s2 += a2; b.s11 += a1 * a1; b.s22 += a2 * a2; b.s12 += a1 * a2;
    }
    for (const auto& b : blocks[k]) totals[k] += b;
  }

  ReconstructionResult res;
  const auto point = est.fit(totals);
  res.cm_est = CovarianceMatrix(point.cm);
  res.clamped = point.clamped;
  if (point.clamped) res.warnings.push_back("estimate violated the uncertainty relation; projected to nearest physical matrix");
  res.EN_est = log_negativity(res.cm_est);

  std::mt19937_64 rng(rec.seed ^ 0x9e3779b97f4a7c15ULL);
  Mat sum = Mat::Zero(4, 4), sum2 = Mat::Zero(4, 4);
  double en_sum = 0.0, en_sum2 = 0.0;
  std::vector<BlockStats> boot(rec.settings.size());
  for (int r = 0; r < n_boot; ++r) {
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      std::uniform_int_distribution<std::size_t> pick(0, blocks[k].size() - 1);
      BlockStats acc;
      for (std::size_t i = 0; i < blocks[k].size(); ++i) acc += blocks[k][pick(rng)];
      boot[k] = acc;
    }
    const auto f = est.fit(boot);
    const double en = log_negativity(CovarianceMatrix(f.cm));
    sum += f.cm;
    sum2 += f.cm.cwiseProduct(f.cm);
    en_sum += en;
    en_sum2 += en * en;
  }
  const double nb = n_boot;
  res.stderr_cm = ((sum2 - sum.cwiseProduct(sum) / nb) / (nb - 1.0)).cwiseMax(0.0).cwiseSqrt();
  res.EN_stderr = std::sqrt(std::max(0.0, (en_sum2 - en_sum * en_sum / nb) / (nb - 1.0)));
  return res;
}

}  // namespace mechent

#endif  // MECHENT_DETECTION_HPP
