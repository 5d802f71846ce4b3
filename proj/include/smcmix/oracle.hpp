#pragma once

// Exact finite-state verification of the variance, mixing and
// hypercontractivity inequalities. Every quantity is computed by dense linear
// algebra on the enumerated state space; nothing is sampled except the test
// functions themselves.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smcmix/finite_chain.hpp"
#include "smcmix/rng.hpp"

namespace smcmix::oracle {

// ---------------------------------------------------------------- models

/// Mixture chain P with pi = sum_k w_k pi_k, and the component chains P_k.
class FiniteMixture {
 public:
  static constexpr double kMixtureTolerance = 1e-12;

  static FiniteMixture create(FiniteChain chain, std::vector<FiniteChain> components,
                              std::vector<double> weights);

  const FiniteChain& chain() const { return chain_; }
  const std::vector<FiniteChain>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }
  double w_star() const;
  std::size_t size() const { return chain_.size(); }

 private:
  FiniteMixture(FiniteChain chain, std::vector<FiniteChain> components, std::vector<double> weights)
      : chain_(std::move(chain)), components_(std::move(components)), weights_(std::move(weights)) {}
  FiniteChain chain_;
  std::vector<FiniteChain> components_;
  std::vector<double> weights_;
};

/// prod_i Bern(probs[i]) on {0,1}^d in enumeration-index order.
Vector product_measure_pmf(const std::vector<double>& probs);
Vector mix_pmfs(const std::vector<Vector>& pmfs, const std::vector<double>& weights);

/// Glauber chains for the mixture and for each component pmf on {0,1}^d.
FiniteMixture glauber_mixture(std::size_t dim, const std::vector<Vector>& component_pmfs,
                              const std::vector<double>& weights);
/// Metropolis chains sharing the symmetric proposal Q.
FiniteMixture metropolis_mixture(const Matrix& proposal, const std::vector<Vector>& component_pmfs,
                                 const std::vector<double>& weights);

/// Lower level: a finite mixture. Upper level: mu_k, with gbar = mu_k / mu_{k-1}.
struct TwoLevelLadder {
  FiniteMixture lower;
  Vector upper;
  Vector gbar;
  double gamma = 1.0;
};

TwoLevelLadder make_two_level(FiniteMixture lower, const Vector& upper_pmf);

/// Default fixtures.
FiniteMixture eight_state_glauber_mixture();
FiniteMixture eight_state_three_component_mixture();
/// Glauber mixture on {0,1}^3 as lower level; upper level reweights the
/// components to (0.6, 0.4).
TwoLevelLadder eight_state_ladder();
/// Reversible 4-state chain used for the jump-process checks.
FiniteChain four_state_chain();

// ---------------------------------------------------------------- basics

double expectation(const Vector& pi, const Vector& f);
double variance(const Vector& pi, const Vector& f);
/// Ent_pi(g) = E[g log g] - E[g] log E[g] for g >= 0.
double entropy(const Vector& pi, const Vector& g);
/// (sum_x pi(x) |f(x)|^p)^{1/p}
double lp_norm(const Vector& pi, const Vector& f, double p);

/// <f, (I - P) f>_pi
double dirichlet_form(const FiniteChain& chain, const Vector& f);
/// (1/2) sum_{x,y} (f(x) - f(y))^2 pi(x) P(x, y)
double dirichlet_form_pairwise(const FiniteChain& chain, const Vector& f);

enum class SemigroupMethod { automatic, spectral, pade };

/// e^{t(P - I)}. Spectral route (pi-symmetrised eigendecomposition) for
/// reversible chains with positive pi; scaling-and-squaring Pade otherwise.
Matrix semigroup(const FiniteChain& chain, double t, SemigroupMethod method = SemigroupMethod::automatic);

/// Reuses one eigendecomposition for many times t.
class SpectralSemigroup {
 public:
  explicit SpectralSemigroup(const FiniteChain& chain);
  Matrix at(double t) const;
  /// Eigenvalues of I - P, ascending.
  const Vector& generator_spectrum() const { return spectrum_; }

 private:
  Vector sqrt_pi_;
  Matrix basis_;
  Vector spectrum_;
};

/// 1 / spectral gap of I - P on mean-zero functions. Throws for
/// non-reversible chains.
double poincare_constant(const FiniteChain& chain);
/// Eigenvector (as a function on states) attaining the gap.
Vector gap_eigenfunction(const FiniteChain& chain);

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, Vector best, double best_ratio)
      : std::runtime_error(what), best_(std::move(best)), best_ratio_(best_ratio) {}
  const Vector& best_iterate() const { return best_; }
  double best_ratio() const { return best_ratio_; }

 private:
  Vector best_;
  double best_ratio_;
};

struct LsiEstimate {
  /// Reported constant: 2 * max(optimised ratio, 2 * poincare).
  double value = 0.0;
  double optimised_ratio = 0.0;
  double poincare = 0.0;
  Vector best_function;
  std::size_t converged_restarts = 0;
};

/// Ent(f^2)/E(f, f) ratio.
double lsi_ratio(const FiniteChain& chain, const Vector& f);

LsiEstimate lsi_constant_estimate(const FiniteChain& chain, std::size_t restarts, std::uint64_t seed,
                                  std::size_t max_iterations = 4000);

// ---------------------------------------------------------------- test functions

Vector random_nonnegative(std::size_t n, Rng& rng);
Vector random_positive(std::size_t n, Rng& rng);
Vector random_signed(std::size_t n, Rng& rng);

// ---------------------------------------------------------------- checks

struct CheckReport {
  std::string name;
  bool passed = true;
  double min_slack = 0.0;
  std::size_t trials = 0;
  std::optional<Vector> witness;
  /// Time (T or t) at which the witness was found.
  std::optional<double> witness_time;
  std::string detail;
};

/// E_mix(f,f) - sum_k w_k E_k(f,f) >= -tol over random signed f.
CheckReport check_generator_decomposition(const FiniteMixture& mix, std::size_t trials, Rng& rng,
                                          double tolerance = 1e-12);

struct VarianceDecayReport {
  CheckReport inequality;
  CheckReport convexity;
  double c_star = 0.0;
};

/// sum_k w_k Var_{pi_k}(P_T f) <= (C*/2T) Var_pi(f) on T_grid, and convexity
/// of t -> Var_pi(P_t f) on a uniform grid of convexity_points over
/// [0, max T]. C* defaults to the largest exact component Poincare constant.
VarianceDecayReport variance_decay_check(const FiniteMixture& mix, const std::vector<double>& t_grid,
                                         std::size_t trials, Rng& rng,
                                         std::optional<double> c_star = std::nullopt,
                                         std::size_t convexity_points = 50);

struct InterIntra {
  double intra = 0.0;
  double inter = 0.0;
  double total = 0.0;
  double intra_bound = 0.0;
  double inter_bound = 0.0;
};

/// Law of total variance for qhat(f) = P^t(gbar f) over the lower-level
/// components, with the two bounds. C* defaults to the exact maximum
/// component Poincare constant.
InterIntra inter_intra_decomposition(const TwoLevelLadder& ladder, const Vector& f, double t,
                                     std::optional<double> c_star = std::nullopt);

CheckReport inter_intra_check(const TwoLevelLadder& ladder, double t, std::size_t trials, Rng& rng);

/// ||qhat f||^2 <= lambda ||f||^2 + beta mu(f)^2 for random nonnegative f.
CheckReport single_step_check(const TwoLevelLadder& ladder, double t, std::size_t trials, Rng& rng);

/// t making lambda = target for the ladder's exact C* and gamma.
double time_for_lambda(const TwoLevelLadder& ladder, double lambda);

struct HypercontractivityReport {
  CheckReport monotone;
  double c_star = 0.0;
};

/// t -> ||P_t f||_{q(t)} / (w*)^{1/q(t)} non-increasing on t_grid for
/// strictly positive f. C* defaults to the largest inflated component LSI estimate.
HypercontractivityReport hypercontractivity_check(const FiniteMixture& mix, double p,
                                                  const std::vector<double>& t_grid, std::size_t trials,
                                                  Rng& rng, std::optional<double> c_star = std::nullopt,
                                                  double tolerance = 1e-9);

struct EntropySplit {
  double total = 0.0;
  double within = 0.0;
  double between = 0.0;
};

/// Ent_pi(f^2) = sum w_k Ent_{pi_k}(f^2) + Ent_w(k -> E_{pi_k} f^2).
EntropySplit entropy_decomposition(const FiniteMixture& mix, const Vector& f);
CheckReport entropy_decomposition_check(const FiniteMixture& mix, std::size_t trials, Rng& rng,
                                        double tolerance = 1e-12);

/// sup_y |(mu_i P_t)(y)/mu(y) - 1| <= sup_y |mu_i(y)/mu(y) - 1| for each component.
CheckReport density_ratio_contraction_check(const FiniteMixture& mix, const std::vector<double>& t_grid);

/// Semigroup sanity: rows stochastic, S(t)S(s) = S(t+s), spectral vs Pade agreement.
CheckReport semigroup_check(const FiniteChain& chain, const std::vector<double>& t_grid);

/// Var <= C E for random f, and equality on the gap eigenfunction.
CheckReport poincare_check(const FiniteChain& chain, std::size_t trials, Rng& rng);

// ---------------------------------------------------------------- suite

struct VerifyReport {
  std::uint64_t seed = 0;
  std::vector<CheckReport> checks;
  bool passed() const;
};

/// Suites: decomposition, variance_decay, inter_intra, single_step,
/// hypercontractivity, entropy, contraction, semigroup, poincare; "all" runs
/// every suite.
std::vector<std::string> suite_names();
VerifyReport run_verify_suite(const std::vector<std::string>& selectors, std::uint64_t seed);

}  // namespace smcmix::oracle
