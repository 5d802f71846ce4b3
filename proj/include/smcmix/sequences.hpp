#pragma once

// Ladder builders for Gaussian-mixture targets (power tempering and Gaussian
// convolution) together with their closed-form constants, plus the level-1
// initializer used by run_smc.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "smcmix/core.hpp"

namespace smcmix {

struct TemperingSchedule {
  /// Power tempering: 0 < b_1 < ... < b_n = 1.
  /// Convolution: 0 < b_1 < ... < b_{n-1} (noise variance sigma^2 / b_k).
  std::vector<double> betas;
  /// Convolution base scale.
  double sigma = 1.0;

  /// b_i = b_1^{(n-i)/(n-1)}: constant ratio, ending at 1.
  static TemperingSchedule geometric(double beta1, std::size_t n);
  /// b_k = b_1 * ratio^{k-1}, k = 1..count.
  static TemperingSchedule geometric_noise(double beta1, double ratio, std::size_t count,
                                           double sigma);
};

struct PowerTemperingOptions {
  /// Multiply gamma by (2 pi)^{d dBeta / 2}; see power_tempering_gamma.
  bool conservative = false;
  /// Kernel for every level; defaults to ULA with default_step_size.
  std::optional<KernelSpec> kernel;
};

Ladder build_power_tempering(const TargetMixture& target, const TemperingSchedule& schedule,
                             const PowerTemperingOptions& options = {});

/// (1/min a)(b_i/b_{i-1})^{d/2}(max|S|/min|S|)^{dBeta/2}. The conservative
/// variant carries the extra (2 pi)^{d dBeta/2} factor that shows up when
/// the normaliser ratio is bounded one integral at a time; the two factors
/// cancel in the exact ratio, so the default omits it.
double power_tempering_gamma(const TargetMixture& target, double beta_i, double beta_prev,
                             bool conservative = false);

/// (1/min a) * lambda_max(Sigma_k) / beta_i.
double tempered_component_lsi(const TargetMixture& target, std::size_t k, double beta_i);

/// Lower bound on every tempered mixture weight. Equal covariances give
/// (min a)^2; otherwise the integral ratio is evaluated in closed form for
/// each beta in `betas`.
double tempered_weight_lower_bound(const TargetMixture& target,
                                   const std::vector<double>& betas = {1.0});

/// Hint Gaussian matching the first two moments of sum_k a_k N(m_k, S_k/beta).
GaussianComponent tempered_moment_match(const TargetMixture& target, double beta);

struct ConvolutionOptions {
  std::optional<KernelSpec> kernel;
};

/// Levels 1..n-1 convolve the target with N(0, sigma^2/b_k I); level n is the
/// target itself.
Ladder build_gaussian_convolution(const TargetMixture& target, const TemperingSchedule& schedule,
                                  const ConvolutionOptions& options = {});

/// gamma for the step from noise variance s to the bare target:
/// max_i prod_j sqrt((l_ij + s)/l_ij) over the covariance eigenvalues l_ij.
double convolution_final_gamma(const TargetMixture& target, double noise_variance);

double lsi_convolution_bound(double c1, double c2);

/// Exact samplers.
std::function<StatePoint(Rng&)> gaussian_mixture_sampler(const TargetMixture& target);
std::function<StatePoint(Rng&)> pmf_sampler(const Vector& pmf);
std::function<StatePoint(Rng&)> hypercube_pmf_sampler(const Vector& pmf, std::size_t dim);

struct InitOptions {
  double acceptance_floor = 1e-4;
  std::size_t probe_count = 100'000;
  /// Scale inflation of the Gaussian proposal.
  double inflation = 1.5;
  /// Multiplicative safety margin on the probed envelope constant.
  double envelope_margin = 1.1;
};

struct InitResult {
  ParticleEnsemble ensemble;
  double acceptance_rate = 1.0;
  bool exact = true;
  std::size_t proposals = 0;
};

/// Draws n_samples from level 1: the exact sampler when present, otherwise
/// rejection sampling from the inflated proposal_hint Gaussian.
InitResult init_sampler(const Ladder& ladder, std::size_t n_samples, Rng& rng,
                        const InitOptions& options = {});

}  // namespace smcmix
