#include <random>

#include <gtest/gtest.h>

#include "mechent/presets.hpp"
#include "mechent/rwa_model.hpp"
#include "support.hpp"

using namespace mechent;
using mechent::testkit::random_params;

namespace {

SystemParams fig2(int k) { return fig2_params(fig2_cases()[k]); }

double rel_frobenius(const Mat& a, const Mat& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(Rwa, EffectiveCouplings) {
  SystemParams p;
  p.kappa = 1e5;
  p.omega1 = 50 * p.kappa;
  p.omega2 = 100 * p.kappa;
  p.Delta = 0.01 * p.kappa;
  p.g = 1e-4 * p.kappa;
  EXPECT_EQ(effective_couplings(p).abs1(), 0.0);
  p.E1 = 0.918 * p.kappa * std::abs(cplx(50 * p.kappa - 0.01 * p.kappa, p.kappa)) / p.g;
  EXPECT_NEAR(effective_couplings(p).abs1(), 0.918 * p.kappa, 1e-9 * p.kappa);
  p.Delta = 0.0;
  EXPECT_NEAR(effective_couplings(p).abs1(), p.g * p.E1 / p.omega1, 2e-4 * p.g * p.E1 / p.omega1);
}

TEST(Rwa, DetuningShift) {
  SystemParams p;
  p.g = 3.0;
  EXPECT_EQ(detuning_shift(5.0, p, {cplx(0.0), cplx(0.0)}), 5.0);
  EXPECT_DOUBLE_EQ(detuning_shift(5.0, p, {cplx(1.0, 2.0), cplx(-0.5, 1.0)}), 5.0 + 2.0 * 3.0 * 0.5);
  p.g = 0.0;
  EXPECT_EQ(detuning_shift(5.0, p, {cplx(7.0), cplx(1.0)}), 5.0);
}

TEST(Rwa, UncoupledSteadyStateIsThermal) {
  SystemParams p;
  p.kappa = 1e5;
  p.gamma1 = 10.0;
  p.gamma2 = 20.0;
  p.nbar1 = 200.0;
  p.nbar2 = 100.0;
  p.Delta = 1e3;
  const auto ss = steady_state(p);
  EXPECT_LT((ss.matrix() - thermal_state({0.0, 200.0, 100.0}).matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Rwa, StabilityBoundary) {
  SystemParams p;
  p.kappa = 1e5;
  p.gamma1 = p.gamma2 = 10.0;
  p.G2 = 1e5;
  p.Delta = 0.0;
  // the boundary sits at G1^2 - G2^2 = (kappa gamma / 2)(1 + 4 Delta^2/(gamma + 2 kappa)^2)
  p.G1 = std::sqrt(p.G2 * p.G2 + 0.5 * p.kappa * p.gamma1);
  const auto dd = build_drift_diffusion(p);
  EXPECT_NEAR(max_real_eigenvalue(dd.A), 0.0, 1e-6 * p.gamma1);
  p.G1 *= 1.0 + 1e-6;
  EXPECT_FALSE(stability_check(p).stable);
  p.G1 /= 1.0 + 2e-6;
  EXPECT_TRUE(stability_check(p).stable);
}

TEST(Rwa, StabilityExamples) {
  SystemParams p;
  p.kappa = 1e5;
  p.gamma1 = p.gamma2 = 10.0;
  p.G2 = 5e4;
  EXPECT_TRUE(stability_check(p).stable);
  for (double d : {0.0, 1e3, 1e5, -3e5}) {
    p.G1 = p.G2;
    p.Delta = d;
    const auto st = stability_check(p);
    ASSERT_TRUE(st.closed_form.has_value());
    EXPECT_TRUE(*st.closed_form);
    EXPECT_TRUE(st.stable) << "Delta = " << d;
  }
  for (int k = 0; k < 4; ++k) EXPECT_TRUE(stability_check(fig2(k)).stable);
}

TEST(Rwa, StabilityEquivalenceRandom) {
  std::mt19937_64 rng(2024);
  int compared = 0;
  for (int k = 0; k < 1000; ++k) {
    auto p = random_params(rng, false);
    const auto st = stability_check(p);
    ASSERT_TRUE(st.closed_form.has_value());
    if (std::abs(*st.closed_form_margin) < 1e-8 * p.kappa * p.kappa) continue;
    ++compared;
    EXPECT_TRUE(st.agree()) << "G1=" << p.G1 << " G2=" << p.G2 << " max_re=" << st.max_re_eig;
  }
  EXPECT_GT(compared, 990);
}

TEST(Rwa, UnstableAboveThreshold) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    SystemParams p;
    p.kappa = 1e5;
    p.gamma1 = p.gamma2 = 1e3 * u(rng) + 1.0;
    p.G2 = 1e5 * u(rng);
    p.Delta = 1e5 * (u(rng) - 0.5);
    const double thr = std::sqrt(p.G2 * p.G2 + 0.5 * p.kappa * p.gamma1 *
                                                   (1.0 + 4.0 * p.Delta * p.Delta /
                                                              std::pow(p.gamma1 + 2.0 * p.kappa, 2)));
    p.G1 = thr * (1.001 + u(rng));
    EXPECT_FALSE(stability_check(p).stable);
    EXPECT_THROW(steady_state(p), UnstableError);
  }
}

TEST(Rwa, LyapunovResidual) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    const auto p = random_params(rng, true);
    const auto dd = build_drift_diffusion(p);
    const Mat c = steady_state(p).matrix();
    const double scale = 2.0 * dd.A.norm() * c.norm() + dd.D.norm();
    EXPECT_LT((dd.A * c + c * dd.A.transpose() + dd.D).norm(), 1e-12 * scale);
  }
}

TEST(Rwa, Fig2CaseIvSteadyEntanglement) {
  const auto ss = steady_state(fig2(3));
  EXPECT_NEAR(log_negativity(ss.reduced({1, 2})), 0.32, 0.05);
}

TEST(Rwa, EvolveStartsAtInitialState) {
  const auto p = fig2(1);
  const std::vector<double> t{0.0, 1e-6};
  const auto tr = evolve(initial_state(p), p, t);
  EXPECT_EQ(tr.EN[0], 0.0);
  EXPECT_DOUBLE_EQ(tr.occupancy1[0], 200.0);
  EXPECT_NEAR(tr.photon_number[0], 0.0, 1e-15);
  EXPECT_EQ(tr.size(), 2u);
}

TEST(Rwa, EvolveSaturatesAtSteadyState) {
  for (int k = 0; k < 4; ++k) {
    const auto p = fig2(k);
    const auto grid = log_grid(1e-4 * settling_time(p), 10.0 * settling_time(p), 40, true);
    const auto tr = evolve(initial_state(p), p, grid);
    const double en_ss = log_negativity(steady_state(p).reduced({1, 2}));
    EXPECT_NEAR(tr.EN.back(), en_ss, 0.01 * en_ss) << "case " << k;
  }
}

TEST(Rwa, LyapunovMatchesLongTimeOde) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 20; ++k) {
    const auto p = random_params(rng, true);
    const auto dd = build_drift_diffusion(p);
    EXPECT_LT(rel_frobenius(steady_state(p).matrix(), testkit::ode_stationary(dd.A, dd.D)), 1e-6);
  }
}

TEST(Rwa, EvolveApproachesStationaryState) {
  std::mt19937_64 rng(19);
  for (int k = 0; k < 10; ++k) {
    const auto p = random_params(rng, true);
    const double tmax = 40.0 / -stability_check(p).max_re_eig;
    const std::vector<double> t{0.0, 0.5 * tmax, tmax};
    const auto tr = evolve(initial_state(p), p, t);
    EXPECT_LT(rel_frobenius(tr.covariances.back(), steady_state(p).matrix()), 1e-6);
  }
}

TEST(Rwa, UncertaintyPreservedAlongTrajectories) {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 10; ++k) {
    const auto p = random_params(rng, false);
    const auto grid = linear_grid(0.0, 50.0 / p.kappa, 30);
    const auto tr = evolve(initial_state(p), p, grid);
    for (const auto& c : tr.covariances) EXPECT_GT(uncertainty_margin(c), -1e-9 * std::max(1.0, c.cwiseAbs().maxCoeff()));
  }
}

TEST(Rwa, EffectiveBath) {
  const auto b0 = effective_bath(0.0, 3.0, 2.0);
  EXPECT_EQ(b0.n1_eff, 3.0);
  EXPECT_EQ(b0.n2_eff, 2.0);
  EXPECT_EQ(b0.m_bar, 0.0);
  const auto b1 = effective_bath(1.0, 0.0, 0.0);
  EXPECT_NEAR(b1.n1_eff, std::sinh(1.0) * std::sinh(1.0), 1e-15);
  EXPECT_NEAR(b1.n2_eff, std::sinh(1.0) * std::sinh(1.0), 1e-15);
  EXPECT_NEAR(b1.m_bar, std::cosh(1.0) * std::sinh(1.0), 1e-15);
  // the bath state is the Bogoliubov image of the thermal state
  const double r = 0.8;
  const auto b = effective_bath(r, 5.0, 2.0);
  const auto img = bogoliubov_frame(thermal_state({5.0, 2.0}), r, Direction::forward);
  const auto c = correlations_from_covariance(img);
  EXPECT_NEAR(c.n_b1, b.n1_eff, 1e-12);
  EXPECT_NEAR(c.n_b2, b.n2_eff, 1e-12);
  EXPECT_NEAR(std::abs(c.m_b), b.m_bar, 1e-12);
}

TEST(Rwa, BogoliubovAnalyticMatchesLyapunov) {
  for (double r : {0.5, 1.0, 1.5, 2.0, 2.5})
    for (double dk : {0.0, 0.125, 0.25, 0.375, 0.5})
      for (auto n : {std::pair{0.0, 0.0}, std::pair{200.0, 100.0}, std::pair{1000.0, 500.0}}) {
        SystemParams p;
        p.kappa = 1e5;
        p.gamma1 = p.gamma2 = 10.0;
        p.G2 = 1e5;
        p.G1 = p.G2 * std::tanh(r);
        p.Delta = dk * p.kappa;
        p.nbar1 = n.first;
        p.nbar2 = n.second;
        const auto an = bogoliubov_steady_analytic(p);
        const auto num = correlations_from_covariance(steady_state(p).reduced({1, 2}));
        const double scale = std::max(1.0, std::abs(num.m_b));
        EXPECT_LT(std::abs(an.corr_b.n_b1 - num.n_b1) / scale, 1e-6);
        EXPECT_LT(std::abs(an.corr_b.n_b2 - num.n_b2) / scale, 1e-6);
        EXPECT_LT(std::abs(an.corr_b.m_b - num.m_b) / scale, 1e-6);
      }
}

TEST(Rwa, BogoliubovAnalyticLimits) {
  SystemParams p;
  p.kappa = 1e5;
  p.gamma1 = p.gamma2 = 10.0;
  p.G2 = 1e5;
  p.nbar1 = 20.0;
  p.nbar2 = 10.0;
  const auto z = bogoliubov_steady_analytic(p);
  EXPECT_EQ(z.n1_eff, 20.0);
  EXPECT_EQ(z.m_bar, 0.0);
  EXPECT_EQ(logneg_from_occupancies(z.corr_b), 0.0);
  p.G1 = 0.5e5;
  p.G2 = 1e12;
  p.G1 = p.G2 * std::tanh(0.7);
  const auto big = bogoliubov_steady_analytic(p);
  EXPECT_LT(std::abs(big.m_beta), 1e-6 * big.m_bar);
  EXPECT_NEAR(big.n2_cool, big.n2_eff * big.epsilon, 1e-6 * big.n2_eff);
  p.G1 = p.G2;
  EXPECT_THROW(bogoliubov_steady_analytic(p), std::invalid_argument);
  p.G1 = 0.5 * p.G2;
  p.gamma2 = 20.0;
  EXPECT_THROW(bogoliubov_steady_analytic(p), std::invalid_argument);
}

TEST(Rwa, Fig3FormulaValues) {
  EXPECT_NEAR(r_opt(2e4, 200, 100), 0.25 * std::log(160000.0 / 301.0), 1e-15);
  EXPECT_NEAR(r_opt(2e4, 200, 100), 1.569, 5e-4);
  EXPECT_NEAR(EN_opt(2e4, 200, 100), 1.752, 5e-4);
  // minimum of nu_approx sits at r_opt
  double lo = 0.5, hi = 3.0;
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (nu_approx(a, 2e4, 200, 100) < nu_approx(b, 2e4, 200, 100)) hi = b;
    else lo = a;
  }
  EXPECT_NEAR(0.5 * (lo + hi), r_opt(2e4, 200, 100), 1e-6);
  EXPECT_THROW(nu_approx(1.0, 0.0, 1, 1), std::invalid_argument);
}

TEST(Rwa, DecoupledNuLimits) {
  const auto p = fig3_params();
  EXPECT_EQ(en_from_nu(nu_exact_decoupled(1.0, 0.0, p)), 0.0);
  const double c1 = cooperativity(p.G1, p.kappa, p.gamma1);
  EXPECT_NEAR(c1, 2e4, 1e-9);
  const double r = r_opt(c1, p.nbar1, p.nbar2);
  const double ex = nu_exact_decoupled(r, c1, p), ap = nu_approx(r, c1, p.nbar1, p.nbar2);
  EXPECT_LT(std::abs(ex - ap) / ex, 0.10);
}

TEST(Rwa, Fig3PeakNearOptimum) {
  auto p = fig3_params();
  double best = -1.0, r_best = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double r = 0.5 + 2.5 * k / 99.0;
    p.G2 = p.G1 / std::tanh(r);
    const double en = log_negativity(steady_state(p).reduced({1, 2}));
    if (en > best) best = en, r_best = r;
  }
  EXPECT_NEAR(r_best, 1.569, 0.15);
  EXPECT_NEAR(best, 1.752, 0.15);
}

TEST(Rwa, ApproxRegime) {
  // C1 >> e^{2r} >> e^{-2r}, Delta = 0, gamma << kappa
  auto p = fig3_params();
  for (double r : {1.0, 1.25, 1.5, 1.75}) {
    p.G2 = p.G1 / std::tanh(r);
    const double c1 = cooperativity(p.G1, p.kappa, p.gamma1);
    const double nu = 2.0 * min_pt_symplectic_eigenvalue(steady_state(p).reduced({1, 2}));
    EXPECT_LT(std::abs(nu - nu_approx(r, c1, p.nbar1, p.nbar2)) / nu, 0.15) << "r = " << r;
  }
}

TEST(Rwa, MonotoneInCooperativity) {
  auto p = fig3_params();
  double prev = -1.0;
  for (int k = 0; k <= 10; ++k) {
    p.G1 = 1e5 * std::pow(10.0, 0.1 * k - 0.5);
    const double c1 = cooperativity(p.G1, p.kappa, p.gamma1);
    const double r = r_opt(c1, p.nbar1, p.nbar2);
    p.G2 = p.G1 / std::tanh(r);
    const double en = log_negativity(steady_state(p).reduced({1, 2}));
    EXPECT_GE(en, prev - 1e-12);
    prev = en;
  }
}

TEST(Rwa, GridsAndSettlingTime) {
  const auto g = log_grid(1e-6, 1e-2, 5, true);
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_NEAR(g[1], 1e-6, 1e-20);
  EXPECT_NEAR(g[5], 1e-2, 1e-16);
  const auto l = linear_grid(0.0, 1.0, 3);
  EXPECT_EQ(l[1], 0.5);
  const auto p = fig2(0);
  EXPECT_NEAR(settling_time(p), (1e10 + 1e6) / ((1e10 - 0.995 * 0.995 * 1e10) * 1e5), 1e-15);
  const std::vector<double> bad{0.0, 1.0, 0.5};
  EXPECT_THROW(evolve(initial_state(p), p, bad), std::invalid_argument);
}
