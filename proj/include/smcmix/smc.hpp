#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smcmix/core.hpp"
#include "smcmix/sequences.hpp"

namespace smcmix {

using Estimand = std::function<double(const StatePoint&)>;

/// Thrown when every weight at a level is zero or non-finite.
class DegenerateWeights : public std::runtime_error {
 public:
  DegenerateWeights(const std::string& what, std::size_t level)
      : std::runtime_error(what), level_(level) {}
  /// 1-based level the particles were moving into; 0 when not tied to a level.
  std::size_t level() const { return level_; }

 private:
  std::size_t level_;
};

struct SmcConfig {
  Ladder ladder;
  std::size_t n_particles = 1;
  std::uint64_t master_seed = 0;
  bool record_trajectory = false;
  Estimand estimand;
  /// Bound on sup |f|; must be finite.
  double f_sup_bound = 1.0;
  /// Worker threads for particle mutation inside one run.
  std::size_t threads = 1;
  InitOptions init;
};

struct SmcRunResult {
  ParticleEnsemble final_ensemble;
  double eta_estimate = 0.0;
  /// phi_n * eta_n(f); empty when some level lacks a normalised ratio.
  std::optional<double> nu_estimate;
  /// One entry per level. Level 1 holds N; level k holds the ESS of the
  /// weights g_{k-1,k} on the level k-1 particles.
  std::vector<double> ess_per_level;
  /// One entry per level: eta_{k-1}(g_{k-1,k}); 1 at level 1.
  std::vector<double> weight_sums_per_level;
  /// Same with gbar; empty when unavailable.
  std::vector<double> normalized_weight_sums_per_level;
  std::vector<double> wall_time_per_level;
  /// Particles after each level, when requested.
  std::vector<std::vector<StatePoint>> trajectory;
  double init_acceptance_rate = 1.0;
  std::uint64_t seed = 0;
};

/// n_draws i.i.d. categorical indices proportional to weights.
std::vector<std::size_t> multinomial_resample(const std::vector<double>& weights,
                                              std::size_t n_draws, Rng& rng);

/// (sum w)^2 / sum w^2.
double effective_sample_size(const std::vector<double>& weights);

SmcRunResult run_smc(const SmcConfig& config);

/// Runs from a supplied level-1 ensemble. lane_streams[i] names the RNG
/// stream driving particle slot i; permuting particles and lanes together
/// permutes the output.
SmcRunResult run_smc_from(const SmcConfig& config, std::vector<StatePoint> initial,
                          const std::vector<std::uint64_t>& lane_streams);

/// phi * eta(f), where phi multiplies the per-level means of gbar.
double nu_estimate(const std::vector<double>& normalized_weight_sums, double eta);

struct MseReport {
  double mean = 0.0;
  double mse = 0.0;
  double variance = 0.0;
  double bias_squared = 0.0;
  double mse_se = 0.0;
  double variance_se = 0.0;
  double bias_squared_se = 0.0;
  std::size_t replicates = 0;
};

/// Jackknife statistics of values around the exact answer. variance uses
/// the 1/R convention so that mse = variance + bias^2.
MseReport mse_statistics(const std::vector<double>& values, double exact);

struct ReplicateOutcome {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double eta = 0.0;
  std::optional<double> nu;
  std::vector<double> ess_per_level;
  std::vector<double> weight_sums_per_level;
  std::vector<double> wall_time_per_level;
};

/// Replicate i uses seed derive_seed(master_seed, i). Results are ordered by
/// replicate index regardless of thread count.
std::vector<ReplicateOutcome> run_replicates(const SmcConfig& config, std::size_t n_replicates,
                                             std::size_t threads);

MseReport mse_over_runs(const SmcConfig& config, std::size_t n_replicates, double exact,
                        std::size_t threads = 1);

}  // namespace smcmix
