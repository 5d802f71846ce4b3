#include <gtest/gtest.h>

#include <cmath>

#include "smcmix/kernels.hpp"
#include "smcmix/oracle.hpp"

using namespace smcmix;
using namespace smcmix::oracle;

namespace {

FiniteChain two_state(double a, double b) {
  Matrix p(2, 2);
  p << 1 - a, a, b, 1 - b;
  return FiniteChain::from_transition(p);
}

// Independent sampler P(x, y) = pi(y).
FiniteChain independent_sampler(const Vector& pi) {
  Matrix p = pi.transpose().replicate(pi.size(), 1);
  return FiniteChain::create(p, pi);
}

Matrix taylor_exp(const Matrix& a) {
  Matrix term = Matrix::Identity(a.rows(), a.cols()), sum = term;
  for (int k = 1; k < 100; ++k) {
    term = term * a / double(k);
    sum += term;
  }
  return sum;
}

// Sup of Ent(f^2)/E(f,f) over two-point functions f = (1, x).
double two_point_lsi_sup(const FiniteChain& c) {
  double best = 0.0;
  for (double lx = -12.0; lx <= 12.0; lx += 0.001) {
    Vector f(2);
    f << 1.0, std::exp(lx);
    if (std::abs(lx) < 1e-9) continue;
    best = std::max(best, lsi_ratio(c, f));
  }
  return best;
}

}  // namespace

TEST(OracleBasics, MomentsAndForms) {
  Vector pi(3), f(3);
  pi << 0.2, 0.3, 0.5;
  f << 1.0, -2.0, 4.0;
  EXPECT_NEAR(expectation(pi, f), 0.2 - 0.6 + 2.0, 1e-15);
  const double m = 1.6;
  EXPECT_NEAR(variance(pi, f), 0.2 * (1 - m) * (1 - m) + 0.3 * (-2 - m) * (-2 - m) + 0.5 * (4 - m) * (4 - m), 1e-13);
  Vector g(3);
  g << 1.0, 2.0, 0.5;
  const double eg = 0.2 + 0.6 + 0.25;
  EXPECT_NEAR(entropy(pi, g), 0.3 * 2 * std::log(2.0) + 0.5 * 0.5 * std::log(0.5) - eg * std::log(eg), 1e-14);
  EXPECT_NEAR(lp_norm(pi, f, 2.0), std::sqrt(0.2 + 0.3 * 4 + 0.5 * 16), 1e-14);

  const auto chain = metropolis_transition_matrix(pi, uniform_proposal(3));
  EXPECT_NEAR(dirichlet_form(chain, f), dirichlet_form_pairwise(chain, f), 1e-13);
}

TEST(OracleSemigroup, SpectralPadeAndTaylorAgree) {
  const auto chain = four_state_chain();
  const Matrix gen = chain.transition() - Matrix::Identity(4, 4);
  for (double t : {0.0, 0.3, 1.0, 4.0}) {
    const Matrix ref = taylor_exp(t * gen);
    EXPECT_LT((semigroup(chain, t, SemigroupMethod::spectral) - ref).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((semigroup(chain, t, SemigroupMethod::pade) - ref).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((SpectralSemigroup(chain).at(t) - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
  Matrix cyc(3, 3);
  cyc << 0.0, 0.8, 0.2, 0.2, 0.0, 0.8, 0.8, 0.2, 0.0;
  const auto nr = FiniteChain::create(cyc, Vector::Constant(3, 1.0 / 3.0));
  const Matrix ref = taylor_exp(1.5 * (cyc - Matrix::Identity(3, 3)));
  EXPECT_LT((semigroup(nr, 1.5) - ref).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(semigroup(nr, 1.5, SemigroupMethod::spectral), std::invalid_argument);
}

TEST(OraclePoincare, TwoStateClosedForm) {
  for (double a : {0.1, 0.3, 0.5}) {
    const auto c = two_state(a, a);
    EXPECT_NEAR(poincare_constant(c), 1.0 / (2.0 * a), 1e-12);
  }
  // Asymmetric two-state: gap a + b.
  EXPECT_NEAR(poincare_constant(two_state(0.2, 0.5)), 1.0 / 0.7, 1e-12);
  const Vector h = gap_eigenfunction(two_state(0.2, 0.5));
  const auto c = two_state(0.2, 0.5);
  EXPECT_NEAR(variance(c.stationary(), h) / dirichlet_form(c, h), 1.0 / 0.7, 1e-10);
}

TEST(OracleLsi, SymmetricTwoState) {
  const double a = 0.25;
  const auto c = two_state(a, a);
  // Sup of Ent(f^2)/E(f,f) is 1/a, the Poincare limit 2 * 1/(2a).
  EXPECT_NEAR(two_point_lsi_sup(c), 1.0 / a, 1e-4);
  const auto est = lsi_constant_estimate(c, 8, 1);
  EXPECT_NEAR(est.poincare, 1.0 / (2 * a), 1e-12);
  EXPECT_NEAR(est.optimised_ratio, 1.0 / a, 1e-3);
  EXPECT_NEAR(est.value, 2.0 / a, 2e-3);
}

TEST(OracleLsi, IndependentSamplerTwoPoint) {
  // Two-point LSI: sup ratio log(q/p) / (q - p).
  Vector pi(2);
  pi << 0.2, 0.8;
  const auto c = independent_sampler(pi);
  const double exact = std::log(4.0) / 0.6;
  EXPECT_NEAR(exact, 2.3105, 1e-4);
  EXPECT_NEAR(two_point_lsi_sup(c), exact, 1e-5);
  const auto est = lsi_constant_estimate(c, 8, 2);
  EXPECT_NEAR(est.optimised_ratio, exact, 1e-3);
  EXPECT_LE(est.optimised_ratio, exact * (1 + 1e-9));
  EXPECT_NEAR(est.value, 2.0 * exact, 2e-3);
}

TEST(OracleChecks, FixturesPass) {
  Rng rng(1);
  EXPECT_TRUE(check_generator_decomposition(eight_state_glauber_mixture(), 200, rng).passed);
  EXPECT_TRUE(entropy_decomposition_check(eight_state_three_component_mixture(), 200, rng).passed);
  EXPECT_TRUE(semigroup_check(four_state_chain(), {0.1, 1.0, 3.0}).passed);
  EXPECT_TRUE(poincare_check(four_state_chain(), 200, rng).passed);
  const auto ladder = eight_state_ladder();
  const double t = time_for_lambda(ladder, 0.5);
  EXPECT_TRUE(single_step_check(ladder, t, 200, rng).passed);
  EXPECT_TRUE(inter_intra_check(ladder, t, 100, rng).passed);
  EXPECT_TRUE(density_ratio_contraction_check(eight_state_glauber_mixture(), {0.1, 1.0, 5.0}).passed);
}

TEST(OracleChecks, EntropySplitIsExact) {
  Rng rng(3);
  const auto mix = eight_state_three_component_mixture();
  const Vector f = random_positive(mix.size(), rng);
  const auto s = entropy_decomposition(mix, f);
  EXPECT_NEAR(s.total, s.within + s.between, 1e-12);
  EXPECT_NEAR(s.total, entropy(mix.chain().stationary(), f.cwiseProduct(f)), 1e-14);
}

TEST(OracleChecks, SlowMixtureChainFailsWithWitness) {
  // Components run full Glauber; the mixture chain moves 1% of the time.
  const auto base = eight_state_glauber_mixture();
  const Matrix slow = 0.99 * Matrix::Identity(8, 8) + 0.01 * base.chain().transition();
  const auto mix = FiniteMixture::create(FiniteChain::create(slow, base.chain().stationary()),
                                         base.components(), base.weights());
  Rng rng(4);
  const auto r = check_generator_decomposition(mix, 50, rng);
  EXPECT_FALSE(r.passed);
  EXPECT_LT(r.min_slack, 0.0);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_EQ(r.witness->size(), 8);
}

TEST(OracleChecks, UndersizedConstantFailsWithTime) {
  Rng rng(5);
  const auto v = variance_decay_check(eight_state_glauber_mixture(), {0.5, 1.0}, 20, rng, 1e-3);
  EXPECT_FALSE(v.inequality.passed);
  EXPECT_TRUE(v.inequality.witness.has_value());
  EXPECT_TRUE(v.inequality.witness_time.has_value());
  EXPECT_TRUE(v.convexity.passed);
}

TEST(OracleChecks, MixtureValidation) {
  const auto base = eight_state_glauber_mixture();
  EXPECT_THROW(FiniteMixture::create(base.chain(), base.components(), {0.5, 0.6}), std::invalid_argument);
  std::vector<double> flipped(base.weights().rbegin(), base.weights().rend());
  if (flipped != base.weights())
    EXPECT_THROW(FiniteMixture::create(base.chain(), base.components(), flipped), std::invalid_argument);
}

TEST(OracleSuite, SelectorsAndDeterminism) {
  const auto rep = run_verify_suite({"decomposition"}, 7);
  ASSERT_FALSE(rep.checks.empty());
  for (const auto& c : rep.checks) EXPECT_EQ(c.name.rfind("decomposition/", 0), 0u) << c.name;
  EXPECT_TRUE(rep.passed());
  const auto again = run_verify_suite({"decomposition"}, 7);
  for (std::size_t i = 0; i < rep.checks.size(); ++i) EXPECT_EQ(rep.checks[i].min_slack, again.checks[i].min_slack);
  EXPECT_THROW(run_verify_suite({"nonsense"}, 1), std::invalid_argument);
  const auto all = run_verify_suite({"all"}, 7);
  EXPECT_TRUE(all.passed());
  EXPECT_GT(all.checks.size(), rep.checks.size());
  EXPECT_EQ(suite_names().size(), 9u);
}
