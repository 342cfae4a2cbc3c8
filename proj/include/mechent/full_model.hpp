#ifndef MECHENT_FULL_MODEL_HPP
#define MECHENT_FULL_MODEL_HPP

// Dynamics beyond the rotating-wave approximation: perturbative mean fields
// alpha(t), beta_j(t) in powers of g, the resulting time-dependent drift of
// the fluctuations (interaction picture w.r.t. omega_- a^dag a + sum omega_j
// b_j^dag b_j), covariance propagation and Floquet analysis.

#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mechent/core.hpp"
#include "mechent/exp_series.hpp"
#include "mechent/gaussian.hpp"
#include "mechent/rwa_model.hpp"

namespace mechent {

enum class FieldMode { transient, steady };

inline constexpr int kMaxOrder = 8;

struct ExpansionOptions {
  double prune_rel = 1e-13;
  std::size_t term_cap = ExponentialSeries::kDefaultCap;
};

struct MeanFieldExpansion {
  std::vector<ExponentialSeries> alpha_orders;                // index p, odd p empty
  std::array<std::vector<ExponentialSeries>, 2> beta_orders;  // index p, even p empty
  int order_max = 0;
  FieldMode mode = FieldMode::steady;
  double g = 0.0;
  double omega_plus = 0.0;
  cplx z;
  std::array<cplx, 2> w;

  double freq_tol() const { return 1e-9 * omega_plus; }

  /// sum_p g^p alpha^(p)
  ExponentialSeries alpha() const {
    ExponentialSeries s;
    double gp = 1.0;
    for (int p = 0; p <= order_max; ++p, gp *= g)
      if (p % 2 == 0) s += alpha_orders[p].scaled(gp);
    s.merge(freq_tol());
    return s;
  }

  ExponentialSeries beta(int j) const {
    ExponentialSeries s;
    double gp = 1.0;
    for (int p = 0; p <= order_max; ++p, gp *= g)
      if (p % 2 == 1) s += beta_orders[j][p].scaled(gp);
    s.merge(freq_tol());
    return s;
  }

  cplx alpha_minus() const { return alpha().harmonic(-omega_plus, freq_tol()); }
  cplx alpha_plus() const { return alpha().harmonic(omega_plus, freq_tol()); }
  cplx beta_dc(int j) const { return beta(j).harmonic(0.0, freq_tol()); }
};

namespace detail {

inline void check_harmonics(const ExponentialSeries& s, double omega_plus, int parity,
                            const char* name, int p) {
  for (const auto& t : s.terms()) {
    const double n = t.zeta.imag() / omega_plus;
    const double nr = std::round(n);
    if (std::abs(n - nr) > 1e-6 || std::abs(std::fmod(std::abs(nr), 2.0) - parity) > 0.5)
      throw Error(std::string("steady ") + name + " harmonic at order " + std::to_string(p) +
                  " is not a multiple of omega_+ with the expected parity (n = " +
                  std::to_string(n) + ")");
  }
}

}  // namespace detail

/// Recursive expansion of the classical amplitudes with alpha(0) = beta(0) = 0.
/// In steady mode only the purely oscillating terms are kept at every order.
inline MeanFieldExpansion mean_field_expansion(const SystemParams& p, int order_max, FieldMode mode,
                                               const ExpansionOptions& opt = {}) {
  p.validate();
  if (order_max < 0 || order_max > kMaxOrder)
    throw std::invalid_argument("expansion order must lie in [0, 8]");
  if (!(p.omega_plus() > 0.0)) throw std::invalid_argument("expansion needs omega_+ > 0");

  const cplx i(0.0, 1.0);
  MeanFieldExpansion ex;
  ex.order_max = order_max;
  ex.mode = mode;
  ex.g = p.g;
  ex.omega_plus = p.omega_plus();
  ex.z = cplx(p.kappa, p.Delta0 + p.omega_minus());
  ex.w = {cplx(0.5 * p.gamma1, p.omega1), cplx(0.5 * p.gamma2, p.omega2)};
  ex.alpha_orders.assign(order_max + 1, {});
  ex.beta_orders[0].assign(order_max + 1, {});
  ex.beta_orders[1].assign(order_max + 1, {});

  const bool steady = mode == FieldMode::steady;
  const double kernel_tol = 1e-12 * ex.omega_plus;
  const double ftol = ex.freq_tol();
  auto finish = [&](ExponentialSeries s) {
    s.merge(ftol);
    if (steady) s = s.steady_part(ftol);
    return s;
  };
  auto integrate = [&](const ExponentialSeries& src, cplx decay, const char* name, int order) {
    try {
      return integrate_decay(src, decay, kernel_tol, !steady);
    } catch (const ResonanceError& e) {
      throw ResonanceError(std::string(name) + " order " + std::to_string(order) +
                               ": resonant steady term at zeta = " + std::to_string(e.zeta().imag()),
                           e.zeta());
    }
  };

  ExponentialSeries xi0;
  xi0.add({-i * p.E1, cplx(0.0, -ex.omega_plus), 0});
  xi0.add({-i * p.E2, cplx(0.0, ex.omega_plus), 0});
  ex.alpha_orders[0] = finish(integrate(xi0, ex.z, "alpha", 0));

  // pruning scale: rates g^(p+1) |field^(p)| entering the drift
  const double alpha_ref = ex.alpha_orders[0].bound();
  const double rate_ref = std::max({p.kappa, p.g * alpha_ref, 1e-300});
  auto prune = [&](ExponentialSeries& s, int order) {
    const double gp1 = std::pow(p.g, order + 1);
    if (gp1 > 0.0) s.prune(opt.prune_rel * rate_ref / gp1);
    s.check_cap(opt.term_cap);
  };

  std::vector<ExponentialSeries> alpha_conj(order_max + 1);
  std::array<std::vector<ExponentialSeries>, 2> beta_re;
  beta_re[0].assign(order_max + 1, {});
  beta_re[1].assign(order_max + 1, {});
  alpha_conj[0] = ex.alpha_orders[0].conjugate();

  for (int ord = 1; ord <= order_max; ++ord) {
    if (ord % 2 == 1) {
      ExponentialSeries xi;
      for (int q = 0; q <= ord - 1; q += 2) xi += product(ex.alpha_orders[q], alpha_conj[ord - q - 1]);
      xi.merge(ftol);
      xi = xi.scaled(-i);
      for (int j = 0; j < 2; ++j) {
        auto b = finish(integrate(xi, ex.w[j], "beta", ord));
        prune(b, ord);
        ex.beta_orders[j][ord] = b;
        beta_re[j][ord] = b.real_part();
        beta_re[j][ord].merge(ftol);
      }
    } else {
      ExponentialSeries xi;
      for (int q = 0; q <= ord - 1; q += 2) {
        auto re = beta_re[0][ord - q - 1] + beta_re[1][ord - q - 1];
        re.merge(ftol);
        xi += product(ex.alpha_orders[q], re);
      }
      xi.merge(ftol);
      xi = xi.scaled(-2.0 * i);
      auto a = finish(integrate(xi, ex.z, "alpha", ord));
      prune(a, ord);
      ex.alpha_orders[ord] = a;
      alpha_conj[ord] = a.conjugate();
    }
  }

  if (steady) {
    for (int ord = 0; ord <= order_max; ++ord) {
      if (ord % 2 == 0) detail::check_harmonics(ex.alpha_orders[ord], ex.omega_plus, 1, "alpha", ord);
      else
        for (int j = 0; j < 2; ++j)
          detail::check_harmonics(ex.beta_orders[j][ord], ex.omega_plus, 0, "beta", ord);
    }
  }
  return ex;
}

// ---------------------------------------------------------------------------
// lowest-order fields (independent closed expressions)

struct LowestOrderFields {
  cplx alpha_minus;
  cplx alpha_plus;
  std::array<cplx, 2> beta_dc;
  /// coefficients of exp(-2i omega_+ t) and exp(+2i omega_+ t) in g beta_j^(1)
  std::array<cplx, 2> beta_minus2;
  std::array<cplx, 2> beta_plus2;
};

inline LowestOrderFields lowest_order_fields(const SystemParams& p) {
  const cplx i(0.0, 1.0);
  const cplx z(p.kappa, p.Delta0 + p.omega_minus());
  const double wp = p.omega_plus();
  const std::array<cplx, 2> w{cplx(0.5 * p.gamma1, p.omega1), cplx(0.5 * p.gamma2, p.omega2)};
  LowestOrderFields f;
  f.alpha_minus = -i * p.E1 / (z - i * wp);
  f.alpha_plus = -i * p.E2 / (z + i * wp);
  const double nsum = std::norm(f.alpha_minus) + std::norm(f.alpha_plus);
  for (int j = 0; j < 2; ++j) {
    f.beta_dc[j] = -i * p.g / w[j] * nsum;
    f.beta_minus2[j] = -i * p.g * f.alpha_minus * std::conj(f.alpha_plus) / (w[j] - 2.0 * i * wp);
    f.beta_plus2[j] = -i * p.g * f.alpha_plus * std::conj(f.alpha_minus) / (w[j] + 2.0 * i * wp);
  }
  return f;
}

// ---------------------------------------------------------------------------
// drive calibration

struct DriveCalibration {
  SystemParams params;
  int iterations = 0;
  double residual = 0.0;
};

/// Chooses E1, E2 and Delta0 so that the expanded fields reproduce the target
/// |G1| = g|alpha_-|, |G2| = g|alpha_+| and the shifted detuning Delta.
inline DriveCalibration calibrate_drives(SystemParams p, int order_max) {
  if (!(p.g > 0.0)) throw std::invalid_argument("drive calibration needs g > 0");
  const cplx i(0.0, 1.0);
  p.Delta0 = p.Delta;
  p.E1 = p.G1 * std::abs(p.omega1 - p.Delta + i * p.kappa) / p.g;
  p.E2 = p.G2 * std::abs(p.omega2 + p.Delta - i * p.kappa) / p.g;
  DriveCalibration cal;
  for (int it = 1; it <= 100; ++it) {
    const auto ex = mean_field_expansion(p, order_max, FieldMode::steady);
    const double g1 = p.g * std::abs(ex.alpha_minus());
    const double g2 = p.g * std::abs(ex.alpha_plus());
    const double d_eff = detuning_shift(p.Delta0, p, {ex.beta_dc(0), ex.beta_dc(1)});
    const double scale = std::max({p.kappa, p.G1, p.G2, std::abs(p.Delta)});
    cal.residual = std::max({std::abs(g1 - p.G1), std::abs(g2 - p.G2), std::abs(d_eff - p.Delta)}) / scale;
    cal.iterations = it;
    if (cal.residual < 1e-13) break;
    if (g1 > 0.0) p.E1 *= p.G1 / g1;
    if (g2 > 0.0) p.E2 *= p.G2 / g2;
    p.Delta0 += p.Delta - d_eff;
  }
  if (cal.residual > 1e-9) throw NumericError("drive calibration did not converge");
  cal.params = p;
  return cal;
}

// ---------------------------------------------------------------------------
// fluctuation drift

struct FieldValues {
  cplx alpha;
  cplx beta1;
  cplx beta2;
};

namespace detail {

// writes the quadrature block of out = M z + N conj(z) for one (j, k) pair
template <class Derived>
inline void put_block(Eigen::MatrixBase<Derived>& a, int j, int k, cplx m, cplx n) {
  const cplx pl = m + n, mi = m - n;
  a(2 * j, 2 * k) += pl.real();
  a(2 * j, 2 * k + 1) += -mi.imag();
  a(2 * j + 1, 2 * k) += pl.imag();
  a(2 * j + 1, 2 * k + 1) += mi.real();
}

}  // namespace detail

class FluctuationDrift {
public:
  explicit FluctuationDrift(const SystemParams& p)
      : kappa_(p.kappa), delta0_(p.Delta0), g_(p.g), wm_(p.omega_minus()),
        omega_{p.omega1, p.omega2}, gamma_{p.gamma1, p.gamma2} {
    Eigen::Matrix<double, 6, 1> d;
    d << p.kappa, p.kappa, p.gamma1 * (p.nbar1 + 0.5), p.gamma1 * (p.nbar1 + 0.5),
         p.gamma2 * (p.nbar2 + 0.5), p.gamma2 * (p.nbar2 + 0.5);
    d_ = d.asDiagonal();
  }

  Mat6 operator()(double t, const FieldValues& f) const {
    const cplx i(0.0, 1.0);
    Mat6 a = Mat6::Zero();
    const cplx ig = i * g_;
    detail::put_block(a, 0, 0, -(kappa_ + i * delta0_) - 2.0 * ig * (f.beta1.real() + f.beta2.real()), 0.0);
    for (int j = 0; j < 2; ++j) {
      const double wj = omega_[j];
      const cplx e_mm = std::polar(1.0, (wm_ - wj) * t);
      const cplx e_pp = std::polar(1.0, (wm_ + wj) * t);
      detail::put_block(a, 0, j + 1, -ig * f.alpha * e_mm, -ig * f.alpha * e_pp);
      detail::put_block(a, j + 1, 0, -ig * std::conj(f.alpha) * std::conj(e_mm), -ig * f.alpha * e_pp);
      detail::put_block(a, j + 1, j + 1, -0.5 * gamma_[j], 0.0);
    }
    return a;
  }

  const Mat6& diffusion() const { return d_; }

private:
  double kappa_, delta0_, g_, wm_;
  std::array<double, 2> omega_, gamma_;
  Mat6 d_;
};

// ---------------------------------------------------------------------------
// periodic drift

struct Harmonic {
  double frequency = 0.0;
  Mat6 A_c = Mat6::Zero();
  Mat6 A_s = Mat6::Zero();
};

struct PeriodicDrift {
  Mat6 A0 = Mat6::Zero();
  Mat6 D = Mat6::Zero();
  std::vector<Harmonic> harmonics;
  /// largest frequency dividing every harmonic; empty if incommensurate
  std::optional<double> fundamental;

  Mat6 operator()(double t) const {
    Mat6 a = A0;
    for (const auto& h : harmonics) a += std::cos(h.frequency * t) * h.A_c + std::sin(h.frequency * t) * h.A_s;
    return a;
  }

  double max_frequency() const {
    double f = 0.0;
    for (const auto& h : harmonics) f = std::max(f, h.frequency);
    return f;
  }
};

/// Best rational approximation a/b of x with b <= max_den (continued fractions).
inline std::pair<long long, long long> rational_approx(double x, long long max_den) {
  long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double r = x;
  for (int it = 0; it < 64; ++it) {
    const double fl = std::floor(r);
    const long long a = static_cast<long long>(fl);
    const long long h2 = a * h1 + h0, k2 = a * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1; h1 = h2; k0 = k1; k1 = k2;
    if (std::abs(x - double(h1) / double(k1)) <= 1e-12 * std::max(1.0, std::abs(x))) break;
    const double frac = r - fl;
    if (frac < 1e-15) break;
    r = 1.0 / frac;
  }
  return {h1, k1};
}

/// Fundamental frequency of a set of harmonics built from omega1, omega2
/// combinations; empty when the ratio is not rational with denominator <= 1000.
inline std::optional<double> fundamental_frequency(const std::vector<double>& freqs, double omega1,
                                                   double omega2) {
  if (!(omega1 > 0.0 && omega2 > 0.0)) return std::nullopt;
  const auto [a, b] = rational_approx(omega1 / omega2, 1000);
  if (b == 0 || std::abs(double(a) / double(b) - omega1 / omega2) > 1e-9 * omega1 / omega2)
    return std::nullopt;
  const double unit = 0.5 * omega2 / double(b);
  long long gcd = 0;
  for (double f : freqs) {
    const double n = f / unit;
    const double nr = std::round(n);
    if (std::abs(n - nr) > 1e-6 * std::max(1.0, std::abs(n))) return std::nullopt;
    gcd = std::gcd(gcd, static_cast<long long>(std::llabs(static_cast<long long>(nr))));
  }
  if (gcd == 0) return std::nullopt;
  return unit * double(gcd);
}

namespace detail {

struct ComplexCoefficients {
  Eigen::Matrix3cd M = Eigen::Matrix3cd::Zero();
  Eigen::Matrix3cd N = Eigen::Matrix3cd::Zero();
};

inline Mat6 quad(const Eigen::Matrix3cd& m, const Eigen::Matrix3cd& n) {
  Mat6 a = Mat6::Zero();
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) put_block(a, j, k, m(j, k), n(j, k));
  return a;
}

}  // namespace detail

/// Drift of the steady (periodic) mean fields as A0 + sum [A_c cos + A_s sin].
inline PeriodicDrift build_periodic_drift(const SystemParams& p, const MeanFieldExpansion& ex) {
  const cplx i(0.0, 1.0);
  const double ftol = ex.freq_tol();
  const auto alpha = ex.alpha().steady_part(ftol);
  const std::array<ExponentialSeries, 2> beta{ex.beta(0).steady_part(ftol), ex.beta(1).steady_part(ftol)};
  const double wm = p.omega_minus();
  const std::array<double, 2> om{p.omega1, p.omega2};

  std::map<long long, std::pair<double, detail::ComplexCoefficients>> bins;
  auto bin = [&](double nu) -> detail::ComplexCoefficients& {
    const long long key = std::llround(nu / ftol);
    auto it = bins.find(key);
    if (it == bins.end()) it = bins.emplace(key, std::make_pair(nu, detail::ComplexCoefficients{})).first;
    return it->second.second;
  };

  const cplx ig = i * p.g;
  bin(0.0).M(0, 0) += -(p.kappa + i * p.Delta0);
  bin(0.0).M(1, 1) += -0.5 * p.gamma1;
  bin(0.0).M(2, 2) += -0.5 * p.gamma2;
  for (const auto& t : alpha.terms()) {
    const double nu = t.zeta.imag();
    for (int j = 0; j < 2; ++j) {
      bin(nu + wm - om[j]).M(0, j + 1) += -ig * t.chi;
      bin(nu + wm + om[j]).N(0, j + 1) += -ig * t.chi;
      bin(nu + om[j] + wm).N(j + 1, 0) += -ig * t.chi;
      bin(-nu + om[j] - wm).M(j + 1, 0) += -ig * std::conj(t.chi);
    }
  }
  for (int j = 0; j < 2; ++j)
    for (const auto& t : beta[j].terms()) {
      const double nu = t.zeta.imag();
      bin(nu).M(0, 0) += -ig * t.chi;
      bin(-nu).M(0, 0) += -ig * std::conj(t.chi);
    }

  PeriodicDrift pd;
  std::map<long long, Harmonic> harm;
  for (const auto& [key, entry] : bins) {
    const auto& [nu, cc] = entry;
    const Mat6 qc = detail::quad(cc.M, cc.N);
    if (key == 0) {
      pd.A0 += qc;
      continue;
    }
    const Mat6 qs = detail::quad(i * cc.M, i * cc.N);
    const long long akey = std::llabs(key);
    auto& h = harm[akey];
    h.frequency = std::abs(nu);
    h.A_c += qc;
    h.A_s += key > 0 ? qs : Mat6(-qs);
  }
  const double scale = pd.A0.cwiseAbs().maxCoeff();
  std::vector<double> freqs;
  for (auto& [key, h] : harm) {
    const double amp = std::max(h.A_c.cwiseAbs().maxCoeff(), h.A_s.cwiseAbs().maxCoeff());
    if (amp <= 1e-14 * scale) continue;
    freqs.push_back(h.frequency);
    pd.harmonics.push_back(h);
  }
  pd.fundamental = fundamental_frequency(freqs, p.omega1, p.omega2);
  pd.D = FluctuationDrift(p).diffusion();
  return pd;
}

// ---------------------------------------------------------------------------
// propagation

namespace detail {

inline Mat6 moment_rhs(const Mat6& a, const Mat6& c, const Mat6& d) {
  const Mat6 ac = a * c;
  return ac + ac.transpose() + d;
}

// Largest frequency of drift terms whose rate contribution exceeds rel * scale.
inline double significant_fmax(const ExponentialSeries& alpha, const std::array<ExponentialSeries, 2>& beta,
                               const SystemParams& p, double rate_scale, double rel) {
  double f = 0.0;
  const double wm = p.omega_minus();
  for (const auto& t : alpha.terms()) {
    if (p.g * ExponentialSeries::term_bound(t) < rel * rate_scale) continue;
    const double nu = t.zeta.imag();
    for (double w : {p.omega1, p.omega2})
      f = std::max({f, std::abs(nu + wm - w), std::abs(nu + wm + w), std::abs(-nu + w - wm)});
  }
  for (const auto& b : beta)
    for (const auto& t : b.terms())
      if (p.g * ExponentialSeries::term_bound(t) >= rel * rate_scale) f = std::max(f, std::abs(t.zeta.imag()));
  return f;
}

// max |s(t)| sampled on [0, t_end]
inline double sampled_max(const ExponentialSeries& s, double t_end, int n = 2000) {
  double m = std::abs(s(0.0));
  for (int k = 1; k <= n; ++k) m = std::max(m, std::abs(s(t_end * k / n)));
  for (const auto& t : s.terms())
    if (t.power == 0 && t.zeta.real() == 0.0) m = std::max(m, std::abs(t.chi));
  return m;
}

}  // namespace detail

struct FullEvolveOptions {
  /// steps per period of the fastest significant drift harmonic
  double steps_per_period = 50.0;
  /// stop and return the partial trajectory instead of throwing on divergence
  bool keep_partial = false;
  ExpansionOptions expansion;
};

/// Integrates dC/dt = A(t) C + C A(t)^T + D with classical RK4 on a grid fine
/// enough to resolve every significant harmonic; the mean fields start at
/// alpha(0) = beta(0) = 0 in transient mode.
inline EntanglementTrajectory evolve_full(const CovarianceMatrix& cm0, const SystemParams& p,
                                          std::span<const double> t_grid, int order_max, FieldMode mode,
                                          const FullEvolveOptions& opt = {}) {
  if (cm0.n_modes() != 3) throw std::invalid_argument("propagation needs a 3-mode state");
  for (std::size_t k = 1; k < t_grid.size(); ++k)
    if (!(t_grid[k] > t_grid[k - 1])) throw std::invalid_argument("time grid must be increasing");
  if (!t_grid.empty() && t_grid.front() < 0.0) throw std::invalid_argument("time grid must start at t >= 0");

  const auto ex = mean_field_expansion(p, order_max, mode, opt.expansion);
  const auto alpha = ex.alpha();
  const std::array<ExponentialSeries, 2> beta{ex.beta(0), ex.beta(1)};
  const FluctuationDrift drift(p);
  const Mat6& d = drift.diffusion();

  const double t_last = t_grid.empty() ? 0.0 : t_grid.back();
  const double alpha_max = detail::sampled_max(alpha, t_last);
  const double beta_max = std::max(detail::sampled_max(beta[0], t_last), detail::sampled_max(beta[1], t_last));
  const double rate_scale = std::max({p.kappa, p.g * alpha_max, std::abs(p.Delta0), 1e-300});
  double fmax = detail::significant_fmax(alpha, beta, p, rate_scale, 1e-10);
  const double a0 = drift(0.0, {0.0, 0.0, 0.0}).cwiseAbs().rowwise().sum().maxCoeff() +
                    4.0 * p.g * (alpha_max + beta_max);
  double h_max = 0.02 / std::max(a0, 1e-300);
  if (fmax > 0.0) h_max = std::min(h_max, 2.0 * kPi / (opt.steps_per_period * fmax));

  SeriesStepper sa(alpha), sb1(beta[0]), sb2(beta[1]);
  const double drop_a = 1e-16 * std::max(alpha_max, 1e-300);
  const double drop_b = 1e-16 * std::max(beta_max, 1e-300);
  auto field_now = [&]() { return FieldValues{sa.value(), sb1.value(), sb2.value()}; };

  EntanglementTrajectory traj;
  Mat6 c = cm0.matrix();
  double t = 0.0;
  auto integrate_to = [&](double t_end) {
    const double span = t_end - t;
    if (span <= 0.0) return;
    const long long n = std::max<long long>(1, static_cast<long long>(std::ceil(span / h_max)));
    const double h = span / double(n);
    sa.reset(t, 0.5 * h);
    sb1.reset(t, 0.5 * h);
    sb2.reset(t, 0.5 * h);
    sa.drop_decayed(drop_a);
    sb1.drop_decayed(drop_b);
    sb2.drop_decayed(drop_b);
    Mat6 a_start = drift(t, field_now());
    for (long long s = 0; s < n; ++s) {
      const double t0 = t + double(s) * h;
      sa.advance(); sb1.advance(); sb2.advance();
      const Mat6 a_mid = drift(t0 + 0.5 * h, field_now());
      sa.advance(); sb1.advance(); sb2.advance();
      const double t1 = (s + 1 == n) ? t_end : t0 + h;
      const Mat6 a_end = drift(t1, field_now());
      const Mat6 k1 = detail::moment_rhs(a_start, c, d);
      const Mat6 k2 = detail::moment_rhs(a_mid, c + 0.5 * h * k1, d);
      const Mat6 k3 = detail::moment_rhs(a_mid, c + 0.5 * h * k2, d);
      const Mat6 k4 = detail::moment_rhs(a_end, c + h * k3, d);
      c += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      c = 0.5 * (c + c.transpose()).eval();
      a_start = a_end;
      if ((s & 1023) == 1023 && !c.allFinite()) throw NumericError("non-finite covariance", t1);
    }
    t = t_end;
    if (!c.allFinite()) throw NumericError("non-finite covariance", t);
  };

  for (double tk : t_grid) {
    try {
      integrate_to(tk);
      traj.record(tk, CovarianceMatrix(c));
    } catch (const std::exception& e) {
      if (!opt.keep_partial) {
        if (auto* ne = dynamic_cast<const NumericError*>(&e)) throw *ne;
        throw NumericError(std::string("covariance became invalid: ") + e.what(), tk);
      }
      traj.aborted_at = tk;
      break;
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Floquet analysis

struct FloquetResult {
  std::vector<cplx> exponents;
  double period = 0.0;
  double max_real() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& e : exponents) m = std::max(m, e.real());
    return m;
  }
};

inline FloquetResult floquet_exponents(const PeriodicDrift& pd, double period) {
  const double fmax = std::max(pd.max_frequency(), 2.0 * kPi / period);
  const double rate = pd.A0.cwiseAbs().rowwise().sum().maxCoeff();
  double h = 2.0 * kPi / (100.0 * fmax);
  if (rate > 0.0) h = std::min(h, 0.02 / rate);
  const long long n = std::max<long long>(200, static_cast<long long>(std::ceil(period / h)));
  h = period / double(n);
  Mat6 phi = Mat6::Identity();
  for (long long s = 0; s < n; ++s) {
    const double t0 = s * h;
    const Mat6 a0 = pd(t0), am = pd(t0 + 0.5 * h), a1 = pd(t0 + h);
    const Mat6 k1 = a0 * phi;
    const Mat6 k2 = am * (phi + 0.5 * h * k1);
    const Mat6 k3 = am * (phi + 0.5 * h * k2);
    const Mat6 k4 = a1 * (phi + h * k3);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!phi.allFinite()) throw NumericError("non-finite monodromy matrix", period);
  Eigen::EigenSolver<Mat6> es(phi, false);
  FloquetResult res;
  res.period = period;
  for (int k = 0; k < 6; ++k) res.exponents.push_back(std::log(cplx(es.eigenvalues()(k))) / period);
  return res;
}

/// Floquet exponents of the fluctuation drift built from steady mean fields.
inline FloquetResult floquet_exponents(const SystemParams& p, int order_max) {
  const auto ex = mean_field_expansion(p, order_max, FieldMode::steady);
  const auto pd = build_periodic_drift(p, ex);
  double period;
  if (pd.harmonics.empty()) {
    period = 2.0 * kPi / p.omega_plus();
  } else {
    if (!pd.fundamental) throw Error("incommensurate mechanical frequencies: no common period");
    period = 2.0 * kPi / *pd.fundamental;
  }
  return floquet_exponents(pd, period);
}

// ---------------------------------------------------------------------------
// diagnostics

struct RwaValidity {
  std::map<std::string, double> ratios;
  bool valid = false;
  bool marginal = false;
  double threshold = 0.1;
  double marginal_threshold = 0.03;
};

inline RwaValidity rwa_validity(const SystemParams& p, const MeanFieldExpansion& ex, double threshold = 0.1,
                                double marginal_threshold = 0.03) {
  const double wmin = std::min({p.omega1, p.omega2, std::abs(p.omega1 - p.omega2)});
  RwaValidity v;
  v.threshold = threshold;
  v.marginal_threshold = marginal_threshold;
  const double ga = p.g * std::max(std::abs(ex.alpha_minus()), std::abs(ex.alpha_plus()));
  const double inf = std::numeric_limits<double>::infinity();
  v.ratios["coupling"] = wmin > 0.0 ? ga / wmin : inf;
  v.ratios["kappa"] = wmin > 0.0 ? p.kappa / wmin : inf;
  v.valid = v.ratios["coupling"] < threshold && v.ratios["kappa"] < threshold;
  v.marginal = v.ratios["coupling"] >= marginal_threshold || v.ratios["kappa"] >= marginal_threshold;
  return v;
}

struct MeanFieldResiduals {
  double A = 0.0;
  std::array<double, 2> B{0.0, 0.0};
};

/// Max over the sample times of |A(t)| and |B_j(t)| for the truncated fields.
inline MeanFieldResiduals mean_field_residuals(const SystemParams& p, const MeanFieldExpansion& ex,
                                               std::span<const double> times) {
  const cplx i(0.0, 1.0);
  const auto a = ex.alpha();
  const auto da = a.derivative();
  const std::array<ExponentialSeries, 2> b{ex.beta(0), ex.beta(1)};
  const std::array<ExponentialSeries, 2> db{b[0].derivative(), b[1].derivative()};
  const double wp = p.omega_plus();
  MeanFieldResiduals r;
  for (double t : times) {
    const cplx av = a(t);
    const cplx b1 = b[0](t), b2 = b[1](t);
    const cplx drive = -i * (p.E1 * std::exp(-i * wp * t) + p.E2 * std::exp(i * wp * t));
    const cplx res_a = drive - da(t) - ex.z * av - 2.0 * i * p.g * (b1.real() + b2.real()) * av;
    r.A = std::max(r.A, std::abs(res_a));
    const std::array<cplx, 2> bv{b1, b2};
    for (int j = 0; j < 2; ++j) {
      const cplx res_b = -db[j](t) - ex.w[j] * bv[j] - i * p.g * std::norm(av);
      r.B[j] = std::max(r.B[j], std::abs(res_b));
    }
  }
  return r;
}

}  // namespace mechent

#endif  // MECHENT_FULL_MODEL_HPP
