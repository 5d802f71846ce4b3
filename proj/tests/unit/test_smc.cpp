#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "smcmix/kernels.hpp"
#include "smcmix/smc.hpp"

using namespace smcmix;

namespace {

Vector pmf(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Two levels on 4 states: uniform, then (0.1, 0.2, 0.3, 0.4) moved by a Metropolis chain.
Ladder finite_ladder(double t) {
  const Vector a = pmf({0.25, 0.25, 0.25, 0.25});
  const Vector b = pmf({0.1, 0.2, 0.3, 0.4});
  Level l1;
  l1.density = DensitySpec::from_pmf(a);
  l1.exact_sampler = pmf_sampler(a);
  l1.kernel = KernelSpec::metropolis(1.0);
  Level l2;
  l2.density = DensitySpec::from_pmf(b);
  const Vector lr = b.cwiseQuotient(a).array().log().matrix();
  l2.log_ratio_to_prev = [lr](const StatePoint& x) { return lr[static_cast<Eigen::Index>(state_index(x))]; };
  l2.log_normalizer_ratio = 0.0;
  l2.kernel = KernelSpec::finite(std::make_shared<const FiniteChain>(
      metropolis_transition_matrix(b, uniform_proposal(4))));
  l2.time_budget = t;
  return Ladder::create({l1, l2}, 1.6);
}

SmcConfig finite_config(std::size_t n, std::uint64_t seed, double t = 1.0) {
  SmcConfig c{finite_ladder(t), n, seed, false,
              [](const StatePoint& x) { return state_index(x) == 3 ? 1.0 : 0.0; }, 1.0, 1, {}};
  return c;
}

std::vector<std::size_t> indices(const std::vector<StatePoint>& ps) {
  std::vector<std::size_t> out;
  for (const auto& p : ps) out.push_back(state_index(p));
  return out;
}

}  // namespace

TEST(Resample, FrequenciesFollowWeights) {
  Rng rng(7);
  const auto draws = multinomial_resample({1.0, 0.0, 3.0}, 100000, rng);
  std::vector<double> c(3, 0.0);
  for (auto i : draws) c[i] += 1.0;
  EXPECT_EQ(c[1], 0.0);
  EXPECT_NEAR(c[0] / 1e5, 0.25, 5 * std::sqrt(0.25 * 0.75 / 1e5));
  EXPECT_THROW(multinomial_resample({}, 3, rng), DegenerateWeights);
  EXPECT_THROW(multinomial_resample({0.0, 0.0}, 3, rng), DegenerateWeights);
  EXPECT_THROW(multinomial_resample({1.0, -1.0}, 3, rng), DegenerateWeights);
}

TEST(Resample, EffectiveSampleSize) {
  EXPECT_DOUBLE_EQ(effective_sample_size({1, 1, 1, 1}), 4.0);
  EXPECT_DOUBLE_EQ(effective_sample_size({5, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(effective_sample_size({1, 2}), 9.0 / 5.0);
  EXPECT_DOUBLE_EQ(effective_sample_size({0, 0}), 0.0);
}

TEST(Smc, DegenerateWeightsNameTheLevel) {
  auto cfg = finite_config(10, 1);
  std::vector<Level> levels = cfg.ladder.levels();
  levels[1].log_ratio_to_prev = [](const StatePoint&) { return -std::numeric_limits<double>::infinity(); };
  cfg.ladder = Ladder::create(levels, 1.6);
  try {
    run_smc(cfg);
    FAIL() << "expected DegenerateWeights";
  } catch (const DegenerateWeights& e) {
    EXPECT_EQ(e.level(), 2u);
  }
  levels[1].log_ratio_to_prev = [](const StatePoint&) { return std::nan(""); };
  cfg.ladder = Ladder::create(levels, 1.6);
  EXPECT_THROW(run_smc(cfg), DegenerateWeights);
}

TEST(Smc, SingleLevelIsSampleMeanOfInitialDraws) {
  const Vector a = pmf({0.1, 0.2, 0.3, 0.4});
  Level l1;
  l1.density = DensitySpec::from_pmf(a);
  l1.exact_sampler = pmf_sampler(a);
  l1.kernel = KernelSpec::metropolis(1.0);
  SmcConfig cfg{Ladder::create({l1}, 1.0), 500, 42, false,
                [](const StatePoint& x) { return double(state_index(x)); }, 3.0, 1, {}};
  const auto r = run_smc(cfg);
  Rng rng = make_rng(42, kInitStream);
  const auto init = init_sampler(cfg.ladder, 500, rng);
  double s = 0.0;
  for (const auto& p : init.ensemble.particles) s += double(state_index(p));
  EXPECT_NEAR(r.eta_estimate, s / 500.0, 1e-12);
  ASSERT_TRUE(r.nu_estimate.has_value());
  EXPECT_EQ(*r.nu_estimate, r.eta_estimate);
  EXPECT_EQ(r.ess_per_level, std::vector<double>{500.0});

  cfg.n_particles = 1;
  const auto one = run_smc(cfg);
  EXPECT_EQ(one.eta_estimate, double(state_index(one.final_ensemble.particles[0])));
}

TEST(Smc, ConstantEstimandIsExact) {
  auto cfg = finite_config(257, 5);
  for (double c : {0.1, -3.7, 1e-7}) {
    cfg.estimand = [c](const StatePoint&) { return c; };
    EXPECT_EQ(run_smc(cfg).eta_estimate, c);
  }
}

TEST(Smc, DeterministicAndThreadInvariant) {
  auto cfg = finite_config(300, 77);
  const auto a = run_smc(cfg);
  const auto b = run_smc(cfg);
  cfg.threads = 3;
  const auto c = run_smc(cfg);
  EXPECT_EQ(indices(a.final_ensemble.particles), indices(b.final_ensemble.particles));
  EXPECT_EQ(indices(a.final_ensemble.particles), indices(c.final_ensemble.particles));
  EXPECT_EQ(a.eta_estimate, c.eta_estimate);
  EXPECT_EQ(a.ess_per_level, c.ess_per_level);
  cfg.master_seed = 78;
  EXPECT_NE(indices(run_smc(cfg).final_ensemble.particles), indices(a.final_ensemble.particles));
}

TEST(Smc, ReportsPerLevelDiagnostics) {
  const auto r = run_smc(finite_config(1000, 3));
  ASSERT_EQ(r.ess_per_level.size(), 2u);
  ASSERT_EQ(r.weight_sums_per_level.size(), 2u);
  ASSERT_EQ(r.normalized_weight_sums_per_level.size(), 2u);
  EXPECT_EQ(r.weight_sums_per_level[0], 1.0);
  EXPECT_GT(r.ess_per_level[1], 0.0);
  EXPECT_LE(r.ess_per_level[1], 1000.0);
  // eta_1(gbar) for uniform level 1 is 1 in expectation.
  EXPECT_NEAR(r.normalized_weight_sums_per_level[1], 1.0, 0.1);
  EXPECT_NEAR(*r.nu_estimate, r.normalized_weight_sums_per_level[1] * r.eta_estimate, 1e-15);
  EXPECT_EQ(r.wall_time_per_level.size(), 2u);
}

TEST(Smc, PermutingSlotsAndLanesPermutesOutput) {
  const auto cfg = finite_config(64, 9);
  Rng rng(123);
  const auto init = init_sampler(cfg.ladder, 64, rng).ensemble.particles;
  std::vector<std::uint64_t> lanes(64);
  std::iota(lanes.begin(), lanes.end(), 0);
  std::vector<std::size_t> perm(64);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<StatePoint> init_p;
  std::vector<std::uint64_t> lanes_p;
  for (auto i : perm) {
    init_p.push_back(init[i]);
    lanes_p.push_back(lanes[i]);
  }
  const auto a = run_smc_from(cfg, init, lanes);
  const auto b = run_smc_from(cfg, init_p, lanes_p);
  for (std::size_t j = 0; j < 64; ++j)
    EXPECT_TRUE(same_state(b.final_ensemble.particles[j], a.final_ensemble.particles[perm[j]]));
  EXPECT_EQ(a.eta_estimate, b.eta_estimate);
  EXPECT_THROW(run_smc_from(cfg, init, {}), std::invalid_argument);
}

TEST(Smc, UnnormalizedLadderOmitsNu) {
  auto cfg = finite_config(20, 1);
  std::vector<Level> levels = cfg.ladder.levels();
  levels[1].log_normalizer_ratio.reset();
  cfg.ladder = Ladder::create(levels, 1.6);
  const auto r = run_smc(cfg);
  EXPECT_FALSE(r.nu_estimate.has_value());
  EXPECT_TRUE(r.normalized_weight_sums_per_level.empty());
}

TEST(Smc, NuIsUnbiased) {
  // With N = 3 eta is visibly biased, nu is not.
  const auto cfg = finite_config(3, 2024, 0.3);
  const auto reps = run_replicates(cfg, 60000, 1);
  double s = 0.0, s2 = 0.0;
  for (const auto& r : reps) {
    s += *r.nu;
    s2 += *r.nu * *r.nu;
  }
  const double n = double(reps.size());
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - 0.4), 4 * se) << "mean " << mean << " se " << se;
}

TEST(Replicates, OrderedSeedsAndThreadInvariance) {
  const auto cfg = finite_config(50, 11);
  const auto a = run_replicates(cfg, 12, 1);
  const auto b = run_replicates(cfg, 12, 4);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(a[i].index, i);
    EXPECT_EQ(a[i].seed, derive_seed(11, i));
    EXPECT_EQ(a[i].eta, b[i].eta);
  }
  const auto m = mse_over_runs(cfg, 12, 0.4, 2);
  std::vector<double> etas;
  for (const auto& r : a) etas.push_back(r.eta);
  EXPECT_DOUBLE_EQ(m.mse, mse_statistics(etas, 0.4).mse);
}

TEST(MseStatistics, HandComputed) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 6.0};
  const auto m = mse_statistics(v, 2.0);
  EXPECT_DOUBLE_EQ(m.mean, 3.0);
  EXPECT_DOUBLE_EQ(m.variance, 3.5);
  EXPECT_DOUBLE_EQ(m.bias_squared, 1.0);
  EXPECT_DOUBLE_EQ(m.mse, 4.5);
  EXPECT_EQ(m.replicates, 4u);
  // Jackknife standard error of the mse from leave-one-out recomputation.
  std::vector<double> loo;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j)
      if (j != i) acc += (v[j] - 2.0) * (v[j] - 2.0);
    loo.push_back(acc / 3.0);
  }
  const double bar = std::accumulate(loo.begin(), loo.end(), 0.0) / 4.0;
  double ss = 0.0;
  for (double x : loo) ss += (x - bar) * (x - bar);
  EXPECT_NEAR(m.mse_se, std::sqrt(0.75 * ss), 1e-12);
  EXPECT_EQ(mse_statistics({}, 1.0).replicates, 0u);
  EXPECT_EQ(mse_statistics({2.5}, 1.0).mse_se, 0.0);
}
