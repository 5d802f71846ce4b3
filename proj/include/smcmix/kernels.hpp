#pragma once

#include <cstddef>
#include <functional>

#include "smcmix/core.hpp"

namespace smcmix {

/// 0.05 * min(1, 1/L) for a potential whose Hessian is bounded by L.
double default_step_size(double curvature);

/// ceil(t/h), with a relative guard so t = k*h in floating point gives k.
std::size_t ula_step_count(double t, double h);

/// ceil(t/h) Euler-Maruyama steps x <- x + h grad log p(x) + sqrt(2h) xi.
StatePoint ula_evolve(const DensitySpec& density, const StatePoint& x, double t, double h, Rng& rng);

/// One Metropolis step. Proposal: isotropic Gaussian (R^d), uniform single
/// bit flip (hypercube) or uniform over states (finite).
StatePoint mh_step(const DensitySpec& density, const StatePoint& x, double proposal_scale, Rng& rng);

/// One Glauber update on {0,1}^d: pick i uniformly, flip it with
/// probability p(y) / (p(x) + p(y)).
StatePoint glauber_step(const DensitySpec& density, const StatePoint& x, Rng& rng);

/// Explicit 2^d x 2^d Glauber matrix; d <= 12.
FiniteChain glauber_transition_matrix(const DensitySpec& density, std::size_t dim);

/// Metropolis matrix for target pmf and a symmetric proposal matrix Q.
FiniteChain metropolis_transition_matrix(const Vector& pmf, const Matrix& proposal);
/// Q for single-bit-flip proposals on {0,1}^d.
Matrix bit_flip_proposal(std::size_t dim);
/// Q(x, y) = 1/S.
Matrix uniform_proposal(std::size_t n_states);

struct PoissonizedResult {
  StatePoint state;
  std::size_t jumps = 0;
};

using JumpSampler = std::function<StatePoint(const StatePoint&, Rng&)>;

/// K ~ Poisson(t) jumps of the discrete chain: a draw from row x of e^{t(P-I)}.
PoissonizedResult poissonized_evolve(const FiniteChain& chain, const StatePoint& x, double t, Rng& rng);
PoissonizedResult poissonized_evolve(const JumpSampler& step, const StatePoint& x, double t, Rng& rng);

/// One draw from row `from` of P.
std::size_t sample_row(const FiniteChain& chain, std::size_t from, Rng& rng);

/// Applies the level's kernel for its time budget.
StatePoint apply_kernel(const Level& level, const StatePoint& x, Rng& rng);

}  // namespace smcmix
