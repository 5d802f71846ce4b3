#pragma once

// Domain types shared by every module: states, densities, mixtures, ladders
// and particle ensembles. Everything here is an immutable value once built;
// evaluation callbacks must be pure so they can be shared across threads.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smcmix/finite_chain.hpp"
#include "smcmix/gaussian.hpp"
#include "smcmix/rng.hpp"

namespace smcmix {

/// Point of {0,1}^d. Bit i of the enumeration index is bits[i].
struct BitString {
  std::vector<std::uint8_t> bits;

  std::size_t index() const;
  static BitString from_index(std::size_t index, std::size_t dim);
  friend bool operator==(const BitString&, const BitString&) = default;
};

/// Index into an enumerated state list of size n_states.
struct FiniteState {
  std::size_t index = 0;
  std::size_t n_states = 1;
  friend bool operator==(const FiniteState&, const FiniteState&) = default;
};

using StatePoint = std::variant<Vector, BitString, FiniteState>;

bool same_state(const StatePoint& a, const StatePoint& b);
/// Euclidean coordinates; throws std::bad_variant_access for discrete states.
const Vector& coordinates(const StatePoint& x);
/// Index of a discrete state (finite index or hypercube enumeration index).
std::size_t state_index(const StatePoint& x);

using LogDensityFn = std::function<double(const StatePoint&)>;
using GradientFn = std::function<Vector(const Vector&)>;

/// log p~(x) with optional gradient (of the log density) and optional log Z,
/// so that the normalised density is exp(log_density(x) - log_normalizer).
struct DensitySpec {
  LogDensityFn log_density;
  GradientFn gradient;
  std::optional<double> log_normalizer;
  /// Set when this density is exactly the (normalised) Gaussian below.
  std::optional<GaussianComponent> gaussian;

  double normalized_log_density(const StatePoint& x) const;
  bool normalized() const { return log_normalizer.has_value(); }

  static DensitySpec from_gaussian(const GaussianComponent& g);
  /// Normalised probability mass function on FiniteState points.
  static DensitySpec from_pmf(const Vector& pmf);
  /// Normalised pmf on {0,1}^d given in enumeration-index order.
  static DensitySpec from_hypercube_pmf(const Vector& pmf);
};

/// mu = sum_i w_i mu_i with every component normalised (or with a known
/// normaliser).
class TargetMixture {
 public:
  static TargetMixture create(std::vector<DensitySpec> components, std::vector<double> weights);

  const std::vector<DensitySpec>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  double w_star() const { return w_star_; }
  /// True when every component carries a Gaussian descriptor.
  bool all_gaussian() const;

 private:
  TargetMixture() = default;
  std::vector<DensitySpec> components_;
  std::vector<double> weights_;
  double w_star_ = 1.0;
};

/// log sum_i w_i p_i(x), evaluated with log-sum-exp.
double eval_mixture_logdensity(const TargetMixture& m, const StatePoint& x);
/// Gradient of the log mixture density (all components need gradients).
Vector eval_mixture_gradient(const TargetMixture& m, const Vector& x);
/// Mixture packaged as a normalised DensitySpec.
DensitySpec mixture_density(const TargetMixture& m);

enum class KernelKind { langevin, metropolis_hastings, glauber, finite_chain };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

struct KernelSpec {
  KernelKind kind = KernelKind::langevin;
  /// ULA step h (langevin only).
  double step_size = 0.05;
  /// Std of the isotropic Gaussian proposal (metropolis_hastings on R^d).
  double proposal_scale = 1.0;
  /// Explicit transition matrix (finite_chain only).
  std::shared_ptr<const FiniteChain> chain;

  static KernelSpec langevin(double h);
  static KernelSpec metropolis(double scale);
  static KernelSpec glauber();
  static KernelSpec finite(std::shared_ptr<const FiniteChain> chain);

  void validate() const;
};

/// One rung mu_k of the ladder.
struct Level {
  DensitySpec density;
  /// Explicit mixture decomposition, when known.
  std::optional<TargetMixture> mixture;
  /// log g_{k-1,k}: unnormalised ratio to the previous level (empty at level 1).
  LogDensityFn log_ratio_to_prev;
  /// log gbar_{k-1,k}: normalised ratio, when normalisers are known.
  LogDensityFn log_normalized_ratio;
  /// log(Z_{k-1}/Z_k); turns g into gbar when log_normalized_ratio is absent.
  std::optional<double> log_normalizer_ratio;
  KernelSpec kernel;
  double time_budget = 0.0;
  std::optional<double> lsi_constant_bound;
  /// Exact sampler for this level, when one exists (used for level 1).
  std::function<StatePoint(Rng&)> exact_sampler;
  /// Gaussian approximation used to build a rejection proposal.
  std::optional<GaussianComponent> proposal_hint;

  bool has_normalized_ratio() const;
  /// log gbar_{k-1,k}(x); throws std::logic_error when unavailable.
  double log_gbar(const StatePoint& x) const;
};

class Ladder {
 public:
  static Ladder create(std::vector<Level> levels, double gamma_bound);

  const std::vector<Level>& levels() const { return levels_; }
  const Level& level(std::size_t k) const { return levels_.at(k); }
  std::size_t size() const { return levels_.size(); }
  double gamma_bound() const { return gamma_bound_; }

  /// Copy with every time budget replaced.
  Ladder with_time_budgets(const std::vector<double>& times) const;
  Ladder with_kernel(const KernelSpec& kernel) const;
  Ladder with_gamma_bound(double gamma) const;

 private:
  Ladder() = default;
  std::vector<Level> levels_;
  double gamma_bound_ = 1.0;
};

struct ParticleEnsemble {
  std::size_t level_index = 0;
  std::vector<StatePoint> particles;
  /// Running product of eta_j^N(gbar_{j,j+1}); exactly 1 at level 1.
  double nu_scale = 1.0;
  std::vector<std::uint64_t> seed_lineage;
};

struct LevelRatioCheck {
  std::size_t level = 0;
  bool evaluated = false;
  double max_ratio = 0.0;
  bool flagged = false;
};

struct LadderValidation {
  std::vector<LevelRatioCheck> levels;
  bool any_flagged = false;
};

/// Spot-checks gbar_{k-1,k} <= gamma_bound on the probes. Reporting only; a
/// clean report is not a proof.
LadderValidation validate_ladder(const Ladder& ladder, const std::vector<StatePoint>& probes);

/// Regular grid on [lo, hi]^dim with per_axis points per coordinate.
std::vector<StatePoint> grid_probes(std::size_t dim, double lo, double hi, std::size_t per_axis);

}  // namespace smcmix
