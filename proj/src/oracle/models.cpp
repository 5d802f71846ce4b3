#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smcmix/core.hpp"
#include "smcmix/kernels.hpp"
#include "smcmix/oracle.hpp"

namespace smcmix::oracle {

FiniteMixture FiniteMixture::create(FiniteChain chain, std::vector<FiniteChain> components,
                                    std::vector<double> weights) {
  if (components.empty() || components.size() != weights.size())
    throw std::invalid_argument("finite mixture: need one weight per component");
  Vector mix = Vector::Zero(static_cast<Eigen::Index>(chain.size()));
  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    if (components[k].size() != chain.size())
      throw std::invalid_argument("finite mixture: component state spaces differ");
    if (!(weights[k] > 0.0)) throw std::invalid_argument("finite mixture: weights must be positive");
    mix += weights[k] * components[k].stationary();
    total += weights[k];
  }
  if (std::abs(total - 1.0) > kMixtureTolerance)
    throw std::invalid_argument("finite mixture: weights do not sum to 1");
  if ((mix - chain.stationary()).cwiseAbs().maxCoeff() > kMixtureTolerance)
    throw std::invalid_argument("finite mixture: sum_k w_k pi_k differs from pi");
  return FiniteMixture(std::move(chain), std::move(components), std::move(weights));
}

double FiniteMixture::w_star() const { return *std::min_element(weights_.begin(), weights_.end()); }

Vector product_measure_pmf(const std::vector<double>& probs) {
  const std::size_t d = probs.size();
  const std::size_t s = std::size_t{1} << d;
  Vector p(static_cast<Eigen::Index>(s));
  for (std::size_t x = 0; x < s; ++x) {
    double v = 1.0;
    for (std::size_t i = 0; i < d; ++i) v *= ((x >> i) & 1u) ? probs[i] : 1.0 - probs[i];
    p[static_cast<Eigen::Index>(x)] = v;
  }
  return p;
}

Vector mix_pmfs(const std::vector<Vector>& pmfs, const std::vector<double>& weights) {
  Vector out = Vector::Zero(pmfs.at(0).size());
  for (std::size_t k = 0; k < pmfs.size(); ++k) out += weights.at(k) * pmfs[k];
  return out;
}

FiniteMixture glauber_mixture(std::size_t dim, const std::vector<Vector>& component_pmfs,
                              const std::vector<double>& weights) {
  const Vector mix = mix_pmfs(component_pmfs, weights);
  const FiniteChain chain = glauber_transition_matrix(DensitySpec::from_hypercube_pmf(mix), dim);
  std::vector<FiniteChain> comps;
  for (const auto& p : component_pmfs)
    comps.push_back(glauber_transition_matrix(DensitySpec::from_hypercube_pmf(p), dim));
  return FiniteMixture::create(chain, std::move(comps), weights);
}

FiniteMixture metropolis_mixture(const Matrix& proposal, const std::vector<Vector>& component_pmfs,
                                 const std::vector<double>& weights) {
  const Vector mix = mix_pmfs(component_pmfs, weights);
  FiniteChain chain = metropolis_transition_matrix(mix, proposal);
  std::vector<FiniteChain> comps;
  for (const auto& p : component_pmfs) comps.push_back(metropolis_transition_matrix(p, proposal));
  return FiniteMixture::create(std::move(chain), std::move(comps), weights);
}

TwoLevelLadder make_two_level(FiniteMixture lower, const Vector& upper_pmf) {
  const Vector& pi = lower.chain().stationary();
  if (upper_pmf.size() != pi.size()) throw std::invalid_argument("two-level ladder: size mismatch");
  if ((pi.array() <= 0.0).any()) throw std::invalid_argument("two-level ladder: lower level must be positive");
  Vector gbar = upper_pmf.cwiseQuotient(pi);
  const double gamma = std::max(1.0, gbar.maxCoeff());
  return TwoLevelLadder{std::move(lower), upper_pmf, std::move(gbar), gamma};
}

namespace {

std::vector<Vector> two_modes_3d() {
  return {product_measure_pmf({0.15, 0.2, 0.1}), product_measure_pmf({0.85, 0.9, 0.8})};
}

}  // namespace

FiniteMixture eight_state_glauber_mixture() { return glauber_mixture(3, two_modes_3d(), {0.3, 0.7}); }

FiniteMixture eight_state_three_component_mixture() {
  return glauber_mixture(3,
                         {product_measure_pmf({0.1, 0.2, 0.15}), product_measure_pmf({0.9, 0.1, 0.5}),
                          product_measure_pmf({0.8, 0.85, 0.9})},
                         {0.3, 0.3, 0.4});
}

TwoLevelLadder eight_state_ladder() {
  const auto comps = two_modes_3d();
  return make_two_level(glauber_mixture(3, comps, {0.3, 0.7}), mix_pmfs(comps, {0.6, 0.4}));
}

FiniteChain four_state_chain() {
  // Metropolis chain for a lopsided pmf under a cycle proposal: reversible,
  // aperiodic, all four states communicate.
  Vector pmf(4);
  pmf << 0.1, 0.2, 0.3, 0.4;
  Matrix q = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) {
    q(i, (i + 1) % 4) = 0.5;
    q(i, (i + 3) % 4) = 0.5;
  }
  return metropolis_transition_matrix(pmf, q);
}

}  // namespace smcmix::oracle
