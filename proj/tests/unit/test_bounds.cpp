#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "smcmix/bounds.hpp"

using namespace smcmix;

namespace {

AssumptionParams toy() {
  AssumptionParams p;
  p.n = 1;
  p.M = 1;
  p.w_star = 1.0;
  p.gamma = 1.0;
  p.c_star_per_level = {1.0};
  p.f_sup_bound = 1.0;
  p.epsilon = 0.5;
  p.delta = 0.1;
  return p;
}

double branch(const Prescription& p, const std::string& label) {
  for (const auto& b : p.n_branches)
    if (b.label == label) return b.value;
  throw std::out_of_range(label);
}

}  // namespace

TEST(Bounds, ToyGoldenValues) {
  const auto mse = prescribe_main(toy());
  EXPECT_EQ(mse.prescribed_n(), 128u);
  EXPECT_DOUBLE_EQ(branch(mse.main, "variance"), 32.0);
  EXPECT_DOUBLE_EQ(branch(mse.main, "hypercontractive"), 128.0);
  ASSERT_EQ(mse.prescribed_t().size(), 1u);
  EXPECT_DOUBLE_EQ(mse.prescribed_t()[0], 2.0);
  EXPECT_EQ(mse.main.source, "simplified_mse");

  const auto hp = prescribe_main(toy(), Guarantee::high_probability);
  EXPECT_NEAR(branch(hp.main, "variance"), 640.0, 1e-9);
  EXPECT_EQ(hp.prescribed_n(), 640u);
  const auto tv = prescribe_main(toy(), Guarantee::total_variation);
  EXPECT_DOUBLE_EQ(branch(tv.main, "variance"), 64.0);
  EXPECT_EQ(tv.prescribed_n(), 128u);
}

TEST(Bounds, ScalesWithLevelsAndGamma) {
  auto p = toy();
  p.n = 3;
  p.gamma = 2.0;
  p.M = 2;
  p.w_star = 0.5;
  p.c_star_per_level = {1.0, 2.0, 3.0};
  const auto r = prescribe_main(p);
  EXPECT_NEAR(branch(r.main, "variance"), 3 * 4.0 * 2 * 2 / (0.5 * 0.5) * 4.0, 1e-9);
  EXPECT_NEAR(branch(r.main, "hypercontractive"),
              3 * 128.0 * std::pow(2.0, 35.0 / 8) * std::pow(2.0, 7.0 / 4) / std::pow(0.5, 15.0 / 8), 1e-6);
  ASSERT_EQ(r.prescribed_t().size(), 3u);
  EXPECT_DOUBLE_EQ(r.prescribed_t()[2], 2.0 * 3.0 * 128.0);
  EXPECT_DOUBLE_EQ(r.beta, 1.0 + 2.0 / 0.5);
  EXPECT_DOUBLE_EQ(r.alpha, 1.0 / (2.0 * std::pow(2.0, 6.0)));
}

TEST(Bounds, CompleteFormToy) {
  const auto r = prescribe_main(toy());
  // alpha = 1/2, beta = 2: t = C*/2 max(gamma/alpha, log 3) = 1 and lambda = 1/2.
  EXPECT_DOUBLE_EQ(r.alpha, 0.5);
  EXPECT_DOUBLE_EQ(r.beta, 2.0);
  ASSERT_EQ(r.complete.t_per_level.size(), 1u);
  EXPECT_DOUBLE_EQ(r.complete.t_per_level[0], 1.0);
  EXPECT_DOUBLE_EQ(r.lambda_per_level[0], 0.5);
  EXPECT_NEAR(branch(r.complete, "variance"), 2.0 * (2.0 / 0.5) * 4.0, 1e-12);
  // delta(8) with alpha = 1/2, beta = 2, gamma = 1 is 4^{7/8}.
  const double d8 = std::pow(4.0, 7.0 / 8.0);
  EXPECT_NEAR(branch(r.complete, "hypercontractive"), 2.0 * 4.0 * d8 * d8, 1e-9);
  EXPECT_NEAR(r.delta8_simplified, d8, 1e-12);
  EXPECT_NEAR(r.delta8_simplified_bound, d8, 1e-12);
  EXPECT_EQ(r.theta, 1.0);
  ASSERT_EQ(r.q_samples.size(), 4u);
  EXPECT_DOUBLE_EQ(r.q_samples[0].q, 2.0);
  EXPECT_NEAR(r.q_samples[3].q, 1.0 + std::exp(2.0), 1e-12);
}

TEST(Bounds, DeltaRecursionByHand) {
  const double a = 0.25, b = 3.0, g = 1.2;
  const auto t = delta_recursion(8, a, b, g);
  ASSERT_EQ(t.size(), 4u);
  const double d2 = 2.0;
  const double d4 = d2 * std::pow(b * g * g / (1 - a * g * g), 0.25);
  const double d8 = d4 * std::pow(b * std::pow(g, 6) / (1 - a * std::pow(g, 6)), 0.125);
  EXPECT_DOUBLE_EQ(delta_at(t, 1), 1.0);
  EXPECT_NEAR(delta_at(t, 2), d2, 1e-14);
  EXPECT_NEAR(delta_at(t, 4), d4, 1e-13);
  EXPECT_NEAR(delta_at(t, 8), d8, 1e-13);
  EXPECT_THROW(delta_at(t, 16), std::out_of_range);
  EXPECT_THROW(delta_recursion(6, a, b, g), std::invalid_argument);
}

TEST(Bounds, DivergentRecursionThrows) {
  EXPECT_THROW(delta_recursion(8, 0.5, 2.0, 1.2), std::domain_error);
  auto p = toy();
  p.alpha = 0.9;
  p.gamma = 1.5;
  EXPECT_THROW(prescribe_main(p), std::domain_error);
}

TEST(Bounds, ScalarHelpers) {
  EXPECT_NEAR(theta_hyper(4.0, 2.0, 0.25), std::pow(4.0, 0.25), 1e-15);
  EXPECT_THROW(theta_hyper(2.0, 2.0, 0.5), std::invalid_argument);
  EXPECT_DOUBLE_EQ(q_of_t(2.0, 1.0, 0.0), 2.0);
  EXPECT_NEAR(q_of_t(2.0, 2.0, std::log(3.0)), 4.0, 1e-14);
  EXPECT_EQ(guarded_ceil(640.0000000001), 640u);
  EXPECT_EQ(guarded_ceil(640.01), 641u);
  EXPECT_EQ(guarded_ceil(0.2), 1u);
  EXPECT_EQ(guarded_ceil(1e300), std::numeric_limits<std::size_t>::max());
  EXPECT_THROW(guarded_ceil(std::numeric_limits<double>::infinity()), std::overflow_error);
  EXPECT_DOUBLE_EQ(beta_from_weights({{0.5, 0.5}, {0.25, 0.75}}), 1.0 + 4.0 + 4.0 / 3.0);
  const auto s = single_step_constants(2.0, 1.5, 3.0, {0.5, 0.5});
  EXPECT_DOUBLE_EQ(s.lambda, 0.5);
  EXPECT_DOUBLE_EQ(s.beta, 5.0);
  EXPECT_EQ(guarantee_from_string(to_string(Guarantee::total_variation)), Guarantee::total_variation);
  EXPECT_THROW(guarantee_from_string("kl"), std::invalid_argument);
}

TEST(Bounds, ValidationErrors) {
  auto bad = [](auto mutate) {
    auto p = toy();
    mutate(p);
    return p;
  };
  EXPECT_THROW(prescribe_main(bad([](auto& p) { p.epsilon = 0.0; })), std::invalid_argument);
  EXPECT_THROW(prescribe_main(bad([](auto& p) { p.delta = 1.0; })), std::invalid_argument);
  EXPECT_THROW(prescribe_main(bad([](auto& p) { p.gamma = 0.9; })), std::invalid_argument);
  EXPECT_THROW(prescribe_main(bad([](auto& p) { p.w_star = 0.0; })), std::invalid_argument);
  EXPECT_THROW(prescribe_main(bad([](auto& p) { p.c_star_per_level.clear(); })), std::invalid_argument);
  EXPECT_THROW(prescribe_main(bad([](auto& p) { p.c_star_per_level = {1.0, 2.0}; })), std::invalid_argument);
  EXPECT_THROW(prescribe_main(bad([](auto& p) { p.p = 6; })), std::invalid_argument);
  EXPECT_THROW(prescribe_main(bad([](auto& p) { p.beta = 1.0; })), std::invalid_argument);
}

TEST(Bounds, ConvolutionPrescription) {
  auto p = toy();
  p.c_star_per_level = {2.0};
  const std::vector<double> betas = {0.25, 0.5, 1.0};
  const auto r = prescribe_convolution(p, 1.0, betas, 2);
  EXPECT_EQ(r.main.source, "convolution");
  EXPECT_EQ(r.params.n, 4u);
  EXPECT_EQ(r.params.c_star_per_level, (std::vector<double>{6.0, 4.0, 3.0, 2.0}));
  // gamma = max ratio^{d/2} = 2.
  EXPECT_DOUBLE_EQ(r.params.gamma, 2.0);
  ASSERT_EQ(r.prescribed_t().size(), 4u);
  EXPECT_DOUBLE_EQ(r.prescribed_t()[0], 2.0 * 6.0 * 128.0);
  EXPECT_THROW(prescribe_convolution(p, 1.0, {0.5, 0.25}, 2), std::invalid_argument);
  EXPECT_THROW(prescribe_convolution(p, 1.0, betas, 0), std::invalid_argument);
}
