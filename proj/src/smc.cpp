#include "smcmix/smc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "smcmix/kernels.hpp"
#include "smcmix/parallel.hpp"

namespace smcmix {

namespace {

bool state_less(const StatePoint& a, const StatePoint& b) {
  if (a.index() != b.index()) return a.index() < b.index();
  if (const auto* va = std::get_if<Vector>(&a)) {
    const auto& vb = std::get<Vector>(b);
    return std::lexicographical_compare(va->data(), va->data() + va->size(), vb.data(),
                                        vb.data() + vb.size());
  }
  return state_index(a) < state_index(b);
}

/// Cumulative weights; throws DegenerateWeights unless some weight is
/// positive and all are finite.
std::vector<double> cumulative(const std::vector<double>& weights, std::size_t level) {
  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (!std::isfinite(w) || w < 0.0) throw DegenerateWeights("degenerate weights", level);
    acc += w;
    cdf[i] = acc;
  }
  if (!(acc > 0.0) || !std::isfinite(acc)) throw DegenerateWeights("degenerate weights", level);
  return cdf;
}

std::size_t draw_index(const std::vector<double>& cdf, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, cdf.back());
  const double u = unif(rng);
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  // Skip zero-weight entries that share the boundary value.
  auto idx = static_cast<std::size_t>(it - cdf.begin());
  while (idx > 0 && cdf[idx] == cdf[idx - 1]) --idx;
  return idx;
}

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

std::vector<std::size_t> multinomial_resample(const std::vector<double>& weights,
                                              std::size_t n_draws, Rng& rng) {
  if (weights.empty()) throw DegenerateWeights("degenerate weights", 0);
  const auto cdf = cumulative(weights, 0);
  std::vector<std::size_t> out(n_draws);
  for (auto& o : out) o = draw_index(cdf, rng);
  return out;
}

double effective_sample_size(const std::vector<double>& weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

double nu_estimate(const std::vector<double>& normalized_weight_sums, double eta) {
  double phi = 1.0;
  for (double v : normalized_weight_sums) phi *= v;
  return phi * eta;
}

SmcRunResult run_smc(const SmcConfig& config) {
  if (config.n_particles == 0) throw std::invalid_argument("smc: need at least one particle");
  Rng init_rng = make_rng(config.master_seed, kInitStream);
  InitResult init = init_sampler(config.ladder, config.n_particles, init_rng, config.init);
  std::vector<std::uint64_t> lanes(config.n_particles);
  std::iota(lanes.begin(), lanes.end(), std::uint64_t{0});
  SmcRunResult r = run_smc_from(config, std::move(init.ensemble.particles), lanes);
  r.init_acceptance_rate = init.acceptance_rate;
  return r;
}

SmcRunResult run_smc_from(const SmcConfig& config, std::vector<StatePoint> initial,
                          const std::vector<std::uint64_t>& lane_streams) {
  const std::size_t n = config.n_particles;
  if (n == 0) throw std::invalid_argument("smc: need at least one particle");
  if (initial.size() != n || lane_streams.size() != n)
    throw std::invalid_argument("smc: initial ensemble and lanes must have N entries");
  if (!config.estimand) throw std::invalid_argument("smc: estimand missing");
  if (!std::isfinite(config.f_sup_bound)) throw std::invalid_argument("smc: f sup bound must be finite");

  const Ladder& ladder = config.ladder;
  const unsigned threads = static_cast<unsigned>(std::max<std::size_t>(1, config.threads));
  bool normalized = true;
  for (std::size_t k = 1; k < ladder.size(); ++k)
    normalized = normalized && ladder.level(k).has_normalized_ratio();

  std::vector<Rng> lane_rng;
  lane_rng.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    lane_rng.push_back(make_rng(config.master_seed, kLaneStreamBase + lane_streams[j]));

  SmcRunResult r;
  r.seed = config.master_seed;
  r.final_ensemble.seed_lineage = {config.master_seed};
  auto t0 = std::chrono::steady_clock::now();
  std::vector<StatePoint> particles = std::move(initial);
  r.ess_per_level.push_back(static_cast<double>(n));
  r.weight_sums_per_level.push_back(1.0);
  if (normalized) r.normalized_weight_sums_per_level.push_back(1.0);
  r.wall_time_per_level.push_back(elapsed_seconds(t0));
  if (config.record_trajectory) r.trajectory.push_back(particles);
  double nu_scale = 1.0;

  std::vector<double> logw(n), w(n);
  std::vector<std::size_t> order(n), ancestor(n);
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    t0 = std::chrono::steady_clock::now();
    const Level& lv = ladder.level(k);
    parallel_for(n, threads, [&](std::size_t i) { logw[i] = lv.log_ratio_to_prev(particles[i]); });

    // Canonical order makes the resampled multiset independent of slot order.
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return state_less(particles[a], particles[b]);
    });
    auto degenerate = [k]() {
      std::ostringstream msg;
      msg << "degenerate weights at level " << (k + 1);
      return DegenerateWeights(msg.str(), k + 1);
    };
    double top = -std::numeric_limits<double>::infinity();
    for (double v : logw) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) throw degenerate();
      top = std::max(top, v);
    }
    if (!std::isfinite(top)) throw degenerate();
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(logw[order[i]] - top);
    const double mean_w = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(n);
    r.ess_per_level.push_back(effective_sample_size(w));
    r.weight_sums_per_level.push_back(mean_w * std::exp(top));
    if (normalized) {
      double g = 0.0;
      if (lv.log_normalized_ratio) {
        for (std::size_t i : order) g += std::exp(lv.log_normalized_ratio(particles[i]));
        g /= static_cast<double>(n);
      } else {
        g = r.weight_sums_per_level.back() * std::exp(*lv.log_normalizer_ratio);
      }
      r.normalized_weight_sums_per_level.push_back(g);
      nu_scale *= g;
    }

    std::vector<double> cdf;
    try {
      cdf = cumulative(w, k + 1);
    } catch (const DegenerateWeights&) {
      throw degenerate();
    }
    for (std::size_t j = 0; j < n; ++j) ancestor[j] = order[draw_index(cdf, lane_rng[j])];
    std::vector<StatePoint> next(n);
    parallel_for(n, threads, [&](std::size_t j) {
      next[j] = apply_kernel(lv, particles[ancestor[j]], lane_rng[j]);
    });
    particles = std::move(next);
    r.wall_time_per_level.push_back(elapsed_seconds(t0));
    if (config.record_trajectory) r.trajectory.push_back(particles);
  }

  // Running mean in canonical order: slot permutations leave eta unchanged
  // and a constant estimand returns that constant bit for bit.
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return state_less(particles[a], particles[b]);
  });
  double eta = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    eta += (config.estimand(particles[order[i]]) - eta) / static_cast<double>(i + 1);
  r.eta_estimate = eta;
  if (normalized) r.nu_estimate = nu_estimate(r.normalized_weight_sums_per_level, r.eta_estimate);
  else r.normalized_weight_sums_per_level.clear();

  r.final_ensemble.level_index = ladder.size();
  r.final_ensemble.nu_scale = nu_scale;
  r.final_ensemble.particles = std::move(particles);
  return r;
}

MseReport mse_statistics(const std::vector<double>& values, double exact) {
  MseReport m;
  const std::size_t rn = values.size();
  m.replicates = rn;
  if (rn == 0) return m;
  double s1 = 0.0, s2 = 0.0;
  for (double v : values) {
    s1 += v;
    s2 += v * v;
  }
  const double r = static_cast<double>(rn);
  auto stats = [exact](double mean, double sq, double& mse, double& var, double& b2) {
    var = std::max(0.0, sq - mean * mean);
    b2 = (mean - exact) * (mean - exact);
    mse = var + b2;
  };
  m.mean = s1 / r;
  // Direct sum for mse avoids cancellation in sq - mean^2.
  double mse_direct = 0.0, var_direct = 0.0;
  for (double v : values) {
    mse_direct += (v - exact) * (v - exact);
    var_direct += (v - m.mean) * (v - m.mean);
  }
  m.mse = mse_direct / r;
  m.variance = var_direct / r;
  m.bias_squared = (m.mean - exact) * (m.mean - exact);
  if (rn < 2) return m;

  std::vector<double> jm(rn), jv(rn), jb(rn);
  for (std::size_t i = 0; i < rn; ++i) {
    const double mean_i = (s1 - values[i]) / (r - 1.0);
    const double sq_i = (s2 - values[i] * values[i]) / (r - 1.0);
    stats(mean_i, sq_i, jm[i], jv[i], jb[i]);
  }
  auto jack_se = [r](const std::vector<double>& loo) {
    const double bar = std::accumulate(loo.begin(), loo.end(), 0.0) / r;
    double acc = 0.0;
    for (double v : loo) acc += (v - bar) * (v - bar);
    return std::sqrt((r - 1.0) / r * acc);
  };
  m.mse_se = jack_se(jm);
  m.variance_se = jack_se(jv);
  m.bias_squared_se = jack_se(jb);
  return m;
}

std::vector<ReplicateOutcome> run_replicates(const SmcConfig& config, std::size_t n_replicates,
                                             std::size_t threads) {
  std::vector<ReplicateOutcome> out(n_replicates);
  parallel_for(n_replicates, static_cast<unsigned>(std::max<std::size_t>(1, threads)),
               [&](std::size_t i) {
                 SmcConfig c = config;
                 c.master_seed = derive_seed(config.master_seed, i);
                 c.threads = 1;
                 const SmcRunResult r = run_smc(c);
                 auto& o = out[i];
                 o.index = i;
                 o.seed = c.master_seed;
                 o.eta = r.eta_estimate;
                 o.nu = r.nu_estimate;
                 o.ess_per_level = r.ess_per_level;
                 o.weight_sums_per_level = r.weight_sums_per_level;
                 o.wall_time_per_level = r.wall_time_per_level;
               });
  return out;
}

MseReport mse_over_runs(const SmcConfig& config, std::size_t n_replicates, double exact,
                        std::size_t threads) {
  const auto reps = run_replicates(config, n_replicates, threads);
  std::vector<double> etas;
  etas.reserve(reps.size());
  for (const auto& r : reps) etas.push_back(r.eta);
  return mse_statistics(etas, exact);
}

}  // namespace smcmix
