#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "ddpb/bounds.hpp"
#include "ddpb/toy_model.hpp"

namespace ddpb::toy {
namespace {

// Reference values below were computed with 30-digit mpmath.

TEST(EtaSums, Examples) {
  const ToyConfig cfg = ToyConfig::calibrated();
  const EtaSums all = eta_sums(PrefixSet::initial_segment(100), cfg);
  EXPECT_NEAR(all.eta2_j, 1.6349839001848929, 1e-14);
  EXPECT_EQ(all.eta2_comp, 0.0);
  const EtaSums none = eta_sums(PrefixSet(), cfg);
  EXPECT_EQ(none.eta2_j, 0.0);
  EXPECT_NEAR(none.eta2_comp, 1.6349839001848929, 1e-14);
  EXPECT_NEAR(eta_sums(PrefixSet::initial_segment(24), cfg).eta2_comp,
              0.030860496593892008, 1e-15);
}

TEST(Phi, Examples) {
  const ToyConfig lit = ToyConfig::paper_literal();
  const ToyConfig cal = ToyConfig::calibrated();
  EXPECT_EQ(phi(0.0, lit), 4.0);
  EXPECT_NEAR(phi(1.6349839001848929, lit), 4.1046389696118331, 1e-14);
  EXPECT_NEAR(phi(0.030860496593892008, cal), 1.0019750717820091, 1e-14);
}

TEST(CondMutualInfo, Examples) {
  const ToyConfig lit = ToyConfig::paper_literal();
  const ToyConfig cal = ToyConfig::calibrated();
  EXPECT_EQ(cond_mutual_info(PrefixSet::initial_segment(100), cal), 0.0);
  EXPECT_NEAR(cond_mutual_info(PrefixSet(), lit), 12.911714489666140, 1e-11);
  EXPECT_NEAR(cond_mutual_info(PrefixSet(), cal), 49.759278625254929, 1e-10);
}

TEST(CondMutualInfo, NonincreasingAlongPrefixes) {
  const ToyConfig cal = ToyConfig::calibrated();
  double prev = cond_mutual_info(PrefixSet(), cal);
  for (int m = 1; m <= 100; ++m) {
    const double v = cond_mutual_info(PrefixSet::initial_segment(m), cal);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(CondMutualInfo, ScaleConsistent) {
  ToyConfig a = ToyConfig::calibrated();
  ToyConfig b = a;
  b.sigma = {a.sigma_sq() * 5.0, Scale::kVariance};
  b.kappa = {a.kappa_var() * 5.0, Scale::kVariance};
  for (int m : {0, 10, 50}) {
    EXPECT_NEAR(cond_mutual_info(PrefixSet::initial_segment(m), a),
                cond_mutual_info(PrefixSet::initial_segment(m), b), 1e-10);
  }
}

TEST(RiskUpper, Examples) {
  EXPECT_NEAR(risk_upper(ToyConfig::paper_literal()), 0.020281856185603127, 1e-15);
  EXPECT_NEAR(risk_upper(ToyConfig::calibrated()), 5.1229233640241597e-7, 1e-18);
  ToyConfig big = ToyConfig::calibrated();
  big.d_dim = 100000;
  big.tau = 1e4;
  EXPECT_LT(risk_upper(big), 1e-300);
}

TEST(ObjectiveBounds, Examples) {
  const ToyConfig cal = ToyConfig::calibrated();
  const auto b0 = phi_objective_bounds(PrefixSet(), cal);
  EXPECT_NEAR(b0.lower, 1.0551002179761784, 1e-11);
  const auto b24 = phi_objective_bounds(PrefixSet::initial_segment(24), cal);
  EXPECT_NEAR(b24.upper, 0.10479824088793457, 1e-11);
  EXPECT_NEAR(b24.upper, optimal_beta_bound(b24.r_bar, b24.c_of_j), 1e-15);
  EXPECT_THROW(phi_objective_bounds(PrefixSet::initial_segment(100), cal),
               std::invalid_argument);
}

TEST(ObjectiveBounds, LowerBelowUpper) {
  for (const ToyConfig& cfg : {ToyConfig::calibrated(), ToyConfig::paper_literal()}) {
    for (int m = 0; m < 100; ++m) {
      const auto b = phi_objective_bounds(PrefixSet::initial_segment(m), cfg);
      EXPECT_LE(b.lower, b.upper);
    }
  }
}

TEST(Sweep, CalibratedArgminAndRuntime) {
  const auto start = std::chrono::steady_clock::now();
  const Sweep s = sweep_alpha(ToyConfig::calibrated(), alpha_grid(0.01));
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 1.0);
  ASSERT_EQ(s.rows.size(), 100u);
  EXPECT_EQ(s.rows[s.argmin_upper].m, 24);
  EXPECT_NEAR(s.rows.front().bounds.lower,
              phi_objective_bounds(PrefixSet(), ToyConfig::calibrated()).lower, 0.0);
}

TEST(Sweep, PaperLiteralArgmin) {
  const Sweep s = sweep_alpha(ToyConfig::paper_literal(), alpha_grid(0.01));
  EXPECT_EQ(s.rows[s.argmin_upper].m, 14);
  EXPECT_NEAR(s.rows[s.argmin_upper].bounds.upper, 0.11770651182095496, 1e-11);
}

TEST(PrefixSet, Validation) {
  EXPECT_THROW(PrefixSet({3, 3}), std::invalid_argument);
  EXPECT_THROW(PrefixSet({0}), std::invalid_argument);
  EXPECT_THROW(PrefixSet({101}).check_within(100), std::invalid_argument);
  EXPECT_TRUE(PrefixSet::initial_segment(5).contains(5));
  EXPECT_FALSE(PrefixSet::initial_segment(5).contains(6));
}

TEST(Presets, Lookup) {
  EXPECT_TRUE(ToyConfig::preset("calibrated").has_value());
  EXPECT_TRUE(ToyConfig::preset("paper-literal").has_value());
  EXPECT_FALSE(ToyConfig::preset("other").has_value());
  EXPECT_EQ(ToyConfig::calibrated().sigma_sq(), 64.0);
  EXPECT_EQ(ToyConfig::paper_literal().kappa_var(), 4.0);
}

TEST(McSimulate, MatchesAnalyticKl) {
  const ToyConfig cal = ToyConfig::calibrated();
  Rng rng(42);
  for (int m : {0, 24}) {
    const PrefixSet j = PrefixSet::initial_segment(m);
    const SimResult r = mc_simulate(cal, j, {20000, 200}, rng);
    const double cmi = cond_mutual_info(j, cal);
    EXPECT_NEAR(r.mean_kl, cmi, 4 * r.kl_stderr);
    EXPECT_NEAR(r.mean_kl_full, cmi, 5 * r.kl_full_stderr);
    EXPECT_LE(r.mean_emp_risk_comp, risk_upper(cal) + 3 * r.risk_comp_stderr + 1e-12);
  }
}

TEST(McSimulate, SingleRemainingPoint) {
  const ToyConfig cal = ToyConfig::calibrated();
  const PrefixSet j = PrefixSet::initial_segment(99);
  const double phi_c = phi(1.0 / (100.0 * 100.0), cal);
  const double r = cal.kappa_var() / phi_c;
  const double psi = r - 1.0 - std::log(r);
  EXPECT_NEAR(per_sample_kl(0.0, phi_c, cal), 1000 * psi / 2, 1e-12);
  EXPECT_NEAR(per_sample_kl(2.0, phi_c, cal), 1000 * psi / 2 + 2.0 / (2 * phi_c), 1e-12);
  Rng rng(1);
  const SimResult s = mc_simulate(cal, j, {20000, 0}, rng);
  EXPECT_NEAR(s.mean_kl, cond_mutual_info(j, cal), 4 * s.kl_stderr);
}

TEST(Learner, SignalWeightIsDeterministic) {
  const ToyConfig cal = ToyConfig::calibrated();
  double h = 0.0;
  for (int i = 1; i <= cal.n; ++i) h += 1.0 / i;
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    const LearnerDraw d = simulate_learner(cal, PrefixSet(), rng);
    EXPECT_NEAR(d.signal_weight, h * std::sqrt(cal.tau / h), 1e-12);
  }
}

TEST(RateGain, EmptyIsZero) {
  EXPECT_EQ(information_rate_gain(PrefixSet(), ToyConfig::calibrated()), 0.0);
  EXPECT_GT(information_rate_gain(PrefixSet::initial_segment(24), ToyConfig::calibrated()),
            0.0);
}

TEST(ExcessBias, RandomSubsetIsUnbiased) {
  Rng rng(5);
  const ExcessBias e =
      excess_bias_mc(PrefixSet::initial_segment(30), ToyConfig::paper_literal(), 4000, rng,
                     true);
  EXPECT_NEAR(e.value, 0.0, 4 * e.std_error + 1e-12);
}

TEST(Prop1, SignAgreesWithDirectComparison) {
  const double beta = 0.5;
  for (const ToyConfig& cfg : {ToyConfig::calibrated(), ToyConfig::paper_literal()}) {
    for (int m : {5, 24, 60}) {
      const PrefixSet j = PrefixSet::initial_segment(m);
      for (double bias : {0.0, 0.01, 0.2}) {
        const double r_full = 0.05;
        const double direct = expected_linear_bound(PrefixSet(), cfg, beta, r_full) -
                              expected_linear_bound(j, cfg, beta, r_full + bias);
        const double margin = prop1_margin(j, cfg, beta, bias);
        EXPECT_EQ(direct > 0, margin > 0) << m << " " << bias;
      }
    }
  }
}

}  // namespace
}  // namespace ddpb::toy
