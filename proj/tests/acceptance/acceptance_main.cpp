// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Each criterion also has a wall-clock budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "smcmix/bounds.hpp"
#include "smcmix/kernels.hpp"
#include "smcmix/oracle.hpp"
#include "smcmix/parallel.hpp"
#include "smcmix/sequences.hpp"
#include "smcmix/smc.hpp"

using namespace smcmix;
namespace orc = smcmix::oracle;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;
  std::function<Outcome()> body;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// ------------------------------------------------------------------ 1

Outcome generator_decomposition() {
  struct Case {
    std::vector<std::vector<double>> probs;
    std::vector<double> w;
  };
  const std::vector<Case> cases = {
      {{{0.2, 0.3}, {0.8, 0.7}}, {0.2, 0.8}},
      {{{0.1, 0.2}, {0.5, 0.9}, {0.85, 0.6}}, {0.3, 0.3, 0.4}},
      {{{0.15, 0.2, 0.1}, {0.85, 0.9, 0.8}}, {0.2, 0.8}},
      {{{0.1, 0.2, 0.15}, {0.9, 0.1, 0.5}, {0.8, 0.85, 0.9}}, {0.3, 0.3, 0.4}},
  };
  Rng rng = make_rng(1, 1);
  double worst = std::numeric_limits<double>::infinity();
  int n_cases = 0;
  for (const auto& c : cases) {
    std::vector<Vector> pmfs;
    for (const auto& p : c.probs) pmfs.push_back(orc::product_measure_pmf(p));
    const std::size_t dim = c.probs[0].size();
    const std::vector<orc::FiniteMixture> mixes = {orc::glauber_mixture(dim, pmfs, c.w),
                                                    orc::metropolis_mixture(bit_flip_proposal(dim), pmfs, c.w)};
    for (const auto& mix : mixes) {
      ++n_cases;
      for (int i = 0; i < 1000; ++i) {
        const Vector f = orc::random_signed(mix.size(), rng);
        // Pairwise form: independent of the <f, (I - P) f> route.
        double parts = 0.0;
        for (std::size_t k = 0; k < c.w.size(); ++k)
          parts += c.w[k] * orc::dirichlet_form_pairwise(mix.components()[k], f);
        worst = std::min(worst, orc::dirichlet_form_pairwise(mix.chain(), f) - parts);
      }
    }
  }
  return {worst >= -1e-12, fmt("%d cases x 1000 f, min slack %.3e (>= -1e-12)", n_cases, worst)};
}

// ------------------------------------------------------------------ 2

Outcome variance_decay() {
  const auto mix = orc::eight_state_glauber_mixture();
  Rng rng = make_rng(2, 1);
  const auto rep = orc::variance_decay_check(mix, {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}, 100, rng, std::nullopt, 50);
  const bool ok = rep.inequality.min_slack >= -1e-12 && rep.convexity.min_slack >= -1e-10;
  return {ok, fmt("C*=%.6f, inequality min slack %.3e (>= -1e-12), second differences min %.3e (>= -1e-10)",
                  rep.c_star, rep.inequality.min_slack, rep.convexity.min_slack)};
}

// ------------------------------------------------------------------ 3

Outcome single_step() {
  const auto ladder = orc::eight_state_ladder();
  const double t = orc::time_for_lambda(ladder, 0.5);
  Rng rng = make_rng(3, 1);
  const auto rep = orc::single_step_check(ladder, t, 1000, rng);
  return {rep.passed && rep.min_slack >= -1e-12 && rep.trials == 1000,
          fmt("t=%.6f, %s, min slack %.3e (>= -1e-12)", t, rep.detail.c_str(), rep.min_slack)};
}

// ------------------------------------------------------------------ 4

Outcome hypercontractivity() {
  const auto mix = orc::eight_state_glauber_mixture();
  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(5.0 * i / 19.0);
  Rng rng = make_rng(4, 1);
  const auto rep = orc::hypercontractivity_check(mix, 2.0, grid, 100, rng, std::nullopt, 1e-9);
  const double c = rep.c_star;
  const double q = q_of_t(2.0, c, c * std::log(3.0) / 2.0);
  const bool ok = rep.monotone.min_slack >= -1e-9 && std::abs(q - 4.0) <= 1e-12;
  return {ok, fmt("C*=%.6f, monotone min slack %.3e (>= -1e-9), q(C* log3/2)-4 = %.1e", c, rep.monotone.min_slack,
                  q - 4.0)};
}

// ------------------------------------------------------------------ 5

Outcome entropy_identity() {
  Rng rng = make_rng(5, 1);
  double worst = 0.0;
  for (const auto& mix : {orc::eight_state_glauber_mixture(), orc::eight_state_three_component_mixture()}) {
    for (int i = 0; i < 1000; ++i) {
      const Vector f = orc::random_positive(mix.size(), rng);
      const auto s = orc::entropy_decomposition(mix, f);
      worst = std::max(worst, std::abs(s.total - s.within - s.between));
    }
  }
  return {worst <= 1e-12, fmt("2 mixtures x 1000 f, max |Ent - within - between| = %.3e (<= 1e-12)", worst)};
}

// ------------------------------------------------------------------ 6

Outcome delta_recursion_check() {
  const double d8 = delta_at(delta_recursion(8, 0.5, 2.0, 1.0), 8);
  const double expect = std::pow(4.0, 7.0 / 8.0);
  bool ok = std::abs(d8 - expect) <= 1e-12;
  double worst_ratio = 0.0;
  for (double g : {1.0, 1.5, 2.0})
    for (double b : {2.0, 5.0, 10.0}) {
      const double a = 1.0 / (2.0 * std::pow(g, 6.0));
      const double v = delta_at(delta_recursion(8, a, b, g), 8);
      const double bound = std::pow(2.0 * b, 7.0 / 8.0) * std::pow(g, 1.25);
      worst_ratio = std::max(worst_ratio, v / bound);
      ok = ok && v <= bound * (1.0 + 1e-12);  // gamma = 1 is the equality case
    }
  return {ok, fmt("delta(8)-4^(7/8) = %.1e, max delta(8)/bound over grid = %.6f (<= 1)", d8 - expect, worst_ratio)};
}

// ------------------------------------------------------------------ 7

Outcome poissonized_fidelity() {
  const FiniteChain chain = orc::four_state_chain();
  const double t = 1.3;
  const Matrix exact = orc::semigroup(chain, t, orc::SemigroupMethod::pade);
  Rng rng = make_rng(7, 1);
  const int reps = 100000;
  double worst = 0.0;
  for (std::size_t x = 0; x < chain.size(); ++x) {
    Vector counts = Vector::Zero(4);
    for (int r = 0; r < reps; ++r) {
      const auto out = poissonized_evolve(chain, FiniteState{x, 4}, t, rng);
      counts[static_cast<Eigen::Index>(state_index(out.state))] += 1.0;
    }
    const double tv = 0.5 * (counts / reps - exact.row(static_cast<Eigen::Index>(x)).transpose()).cwiseAbs().sum();
    worst = std::max(worst, tv);
  }
  return {worst <= 0.01, fmt("t=1.3, 4 start states x 1e5 draws, max TV %.4f (<= 0.01)", worst)};
}

// ------------------------------------------------------------------ 8

Ladder four_state_ladder(double t) {
  const FiniteChain chain = orc::four_state_chain();
  const Vector lower = Vector::Constant(4, 0.25);
  const Vector& upper = chain.stationary();
  Level l1;
  l1.density = DensitySpec::from_pmf(lower);
  l1.exact_sampler = pmf_sampler(lower);
  l1.kernel = KernelSpec::finite(std::make_shared<const FiniteChain>(chain));
  Level l2;
  l2.density = DensitySpec::from_pmf(upper);
  const Vector log_ratio = upper.cwiseQuotient(lower).array().log().matrix();
  l2.log_ratio_to_prev = [log_ratio](const StatePoint& x) {
    return log_ratio[static_cast<Eigen::Index>(state_index(x))];
  };
  l2.log_normalized_ratio = l2.log_ratio_to_prev;
  l2.kernel = KernelSpec::finite(std::make_shared<const FiniteChain>(chain));
  l2.time_budget = t;
  return Ladder::create({l1, l2}, upper.cwiseQuotient(lower).maxCoeff());
}

Ladder gaussian_benchmark() {
  const auto target = TargetMixture::create(
      {DensitySpec::from_gaussian(GaussianComponent::isotropic(Vector::Constant(2, -3.0), 1.0)),
       DensitySpec::from_gaussian(GaussianComponent::isotropic(Vector::Constant(2, 3.0), 1.0))},
      {0.3, 0.7});
  PowerTemperingOptions o;
  o.kernel = KernelSpec::langevin(0.05);
  return build_power_tempering(target, TemperingSchedule::geometric(0.05, 10), o)
      .with_time_budgets(std::vector<double>(10, 1.0));
}

double x1_positive(const StatePoint& x) { return coordinates(x)[0] > 0.0 ? 1.0 : 0.0; }

double sample_variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

Outcome smc_unbiased_and_scaling(std::size_t threads) {
  // Part A: finite two-level ladder, f = 1{x = 3}, mu_2(f) = 0.4. eta carries
  // an O(1/N) self-normalisation bias that the kernel contracts; N = 200 and
  // t = 3 keep it well under one standard error. nu is exactly unbiased.
  SmcConfig fc{four_state_ladder(3.0), 200, 8001, false, [](const StatePoint& x) { return state_index(x) == 3 ? 1.0 : 0.0; },
               1.0, 1, {}};
  const auto runs = run_replicates(fc, 10000, threads);
  std::vector<double> eta, nu;
  for (const auto& r : runs) {
    eta.push_back(r.eta);
    nu.push_back(*r.nu);
  }
  auto mean_of = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
  };
  const double se_eta = std::sqrt(sample_variance(eta) / eta.size());
  const double se_nu = std::sqrt(sample_variance(nu) / nu.size());
  const double z_eta = (mean_of(eta) - 0.4) / se_eta;
  const double z_nu = (mean_of(nu) - 0.4) / se_nu;

  // Part B: Var(eta) at N=2000 against N=4000 on the Gaussian benchmark.
  const Ladder g = gaussian_benchmark();
  SmcConfig small{g, 2000, 8002, false, x1_positive, 1.0, 1, {}};
  SmcConfig large{g, 4000, 8003, false, x1_positive, 1.0, 1, {}};
  std::vector<double> e_small, e_large;
  for (const auto& r : run_replicates(small, 200, threads)) e_small.push_back(r.eta);
  for (const auto& r : run_replicates(large, 200, threads)) e_large.push_back(r.eta);
  const double ratio = sample_variance(e_small) / sample_variance(e_large);

  const bool ok = std::abs(z_eta) <= 3.0 && ratio >= 1.5 && ratio <= 2.7;
  return {ok, fmt("finite ladder: |mean eta - 0.4| = %.2f SE (nu: %.2f SE); Var(N=2000)/Var(N=4000) = %.3f in [1.5, 2.7]",
                  std::abs(z_eta), std::abs(z_nu), ratio)};
}

// ------------------------------------------------------------------ 9

Outcome weight_recovery(std::size_t threads) {
  const Ladder g = gaussian_benchmark();
  SmcConfig c{g, 5000, 9001, false, x1_positive, 1.0, 1, {}};
  double mean = 0.0;
  const auto runs = run_replicates(c, 50, threads);
  for (const auto& r : runs) mean += r.eta / 50.0;
  const bool mean_ok = std::abs(mean - 0.7) <= 0.05;

  // Binned x1 marginal against 0.3 N(-3,1) + 0.7 N(3,1): 32 bins on [-8, 8]
  // plus one tail bin on each side.
  std::vector<double> edges;
  for (int i = 0; i <= 32; ++i) edges.push_back(-8.0 + 0.5 * i);
  auto cdf = [](double x) { return 0.3 * normal_cdf(x + 3.0) + 0.7 * normal_cdf(x - 3.0); };
  std::vector<double> p_exact = {cdf(edges.front())};
  for (std::size_t i = 1; i < edges.size(); ++i) p_exact.push_back(cdf(edges[i]) - cdf(edges[i - 1]));
  p_exact.push_back(1.0 - cdf(edges.back()));
  auto bin_of = [&](double x) -> std::size_t {
    if (x < edges.front()) return 0;
    if (x >= edges.back()) return edges.size();
    return 1 + static_cast<std::size_t>((x - edges.front()) / 0.5);
  };

  const std::vector<std::size_t> ns = {500, 2000, 8000};
  const std::size_t reps = 20;
  std::vector<double> tv_mean, tv_se;
  for (std::size_t n : ns) {
    std::vector<double> tvs(reps);
    parallel_for(reps, static_cast<unsigned>(threads), [&](std::size_t i) {
      SmcConfig rc{g, n, derive_seed(9100 + n, i), false, x1_positive, 1.0, 1, {}};
      const auto r = run_smc(rc);
      std::vector<double> counts(p_exact.size(), 0.0);
      for (const auto& x : r.final_ensemble.particles) counts[bin_of(coordinates(x)[0])] += 1.0;
      double tv = 0.0;
      for (std::size_t b = 0; b < counts.size(); ++b) tv += std::abs(counts[b] / double(n) - p_exact[b]);
      tvs[i] = 0.5 * tv;
    });
    double m = 0.0;
    for (double v : tvs) m += v / reps;
    tv_mean.push_back(m);
    tv_se.push_back(std::sqrt(sample_variance(tvs) / reps));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < ns.size(); ++i)
    monotone = monotone && tv_mean[i] <= tv_mean[i - 1] + tv_se[i] + tv_se[i - 1];
  return {mean_ok && monotone,
          fmt("N=5000 x 50: mean estimate %.4f (0.7 +- 0.05); TV at N=500/2000/8000: %.4f/%.4f/%.4f (se %.4f/%.4f/%.4f)",
              mean, tv_mean[0], tv_mean[1], tv_mean[2], tv_se[0], tv_se[1], tv_se[2])};
}

// ------------------------------------------------------------------ 10

Outcome bound_golden() {
  AssumptionParams p;
  p.n = 1;
  p.M = 1;
  p.w_star = 1.0;
  p.gamma = 1.0;
  p.c_star_per_level = {1.0};
  p.f_sup_bound = 1.0;
  p.epsilon = 0.5;
  p.delta = 0.1;
  const auto mse = prescribe_main(p, Guarantee::mse);
  const auto hp = prescribe_main(p, Guarantee::high_probability);
  const auto tv = prescribe_main(p, Guarantee::total_variation);
  auto variance_branch = [](const BoundReport& r) { return r.main.n_branches.at(0).value; };
  const bool ok = mse.prescribed_n() == 128 && std::abs(mse.prescribed_t().at(0) - 2.0) <= 1e-12 &&
                  guarded_ceil(variance_branch(hp)) == 640 && guarded_ceil(variance_branch(tv)) == 64;
  return {ok, fmt("N=%zu, t_1=%.3f (=2C*), high-probability branch %zu, TV branch %zu",
                  mse.prescribed_n(), mse.prescribed_t().at(0), guarded_ceil(variance_branch(hp)),
                  guarded_ceil(variance_branch(tv)))};
}

}  // namespace

int main() {
  const std::size_t threads = default_thread_count();
  const std::vector<Criterion> criteria = {
      {1, "generator decomposition", 10.0, generator_decomposition},
      {2, "variance decay and convexity", 30.0, variance_decay},
      {3, "single-step bound", 10.0, single_step},
      {4, "hypercontractivity", 30.0, hypercontractivity},
      {5, "entropy decomposition", 5.0, entropy_identity},
      {6, "delta recursion", 1.0, delta_recursion_check},
      {7, "Poissonized semigroup fidelity", 10.0, poissonized_fidelity},
      {8, "SMC unbiasedness and 1/N scaling", 300.0, [threads] { return smc_unbiased_and_scaling(threads); }},
      {9, "multimodal weight recovery", 300.0, [threads] { return weight_recovery(threads); }},
      {10, "bound calculator golden values", 1.0, bound_golden},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s; %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.title,
                o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : " OVER BUDGET");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
