#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "smcmix/bounds.hpp"
#include "smcmix/core.hpp"
#include "smcmix/smc.hpp"

namespace smcmix::cli {

using Json = nlohmann::json;

/// Collected schema diagnostics, one "path: message" line each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

enum class TargetKind { gaussian_mixture, finite, hypercube };

struct TargetModel {
  TargetKind kind = TargetKind::gaussian_mixture;
  std::size_t dim = 0;
  /// Gaussian mixture, or hypercube product-measure mixture.
  std::optional<TargetMixture> mixture;
  /// Finite and hypercube targets: pmf in enumeration order.
  Vector pmf;
  /// Product-measure components (hypercube).
  std::vector<std::vector<double>> bernoulli;
  std::vector<double> weights;
  /// Finite target given by a chain file.
  std::shared_ptr<const FiniteChain> chain;
};

struct EstimandSpec {
  std::string name;
  Vector direction;
  double offset = 0.0;
  std::size_t coordinate = 0;
  std::size_t mode = 0;
  double value = 1.0;
  std::size_t state = 0;
  std::optional<double> sup_bound;
};

struct TimePolicy {
  enum class Kind { explicit_times, from_theorem } kind = Kind::explicit_times;
  std::vector<double> times;
  double epsilon = 0.5;
  std::optional<double> max_time;
};

struct BoundsSpec {
  Guarantee guarantee = Guarantee::mse;
  double epsilon = 0.5;
  double delta = 0.1;
  unsigned p = 4;
  double feasibility_cap = 1e7;
  std::optional<std::size_t> n;
  std::optional<std::size_t> M;
  std::optional<double> w_star;
  std::optional<double> gamma;
  std::vector<double> c_star;
  std::optional<double> f_sup_bound;
  std::optional<double> f_lp_norm;
  std::optional<double> alpha;
  std::optional<double> beta;
};

struct SweepSpec {
  enum class Parameter { n_particles, time } parameter = Parameter::n_particles;
  std::vector<double> values;
  std::size_t replicates = 20;
};

/// Validated configuration plus everything built from it.
struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  std::size_t n_particles = 1000;
  std::size_t replicates = 1;
  std::optional<TargetModel> target;
  std::optional<Ladder> ladder;
  std::string ladder_type;
  /// Tempering / convolution schedule, when the ladder has one.
  std::vector<double> betas;
  double sigma = 1.0;
  std::optional<EstimandSpec> estimand;
  TimePolicy time_policy;
  BoundsSpec bounds;
  std::optional<SweepSpec> sweep;
  std::optional<double> exact_value;
  InitOptions init;
  Json source;
};

/// Parses and validates; throws ConfigError listing every problem found.
/// Relative chain_file paths resolve against base_dir.
ExperimentConfig parse_config(const Json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FiniteChain from {"transition": [[...]], "stationary": [...]?}. Invariant
/// violations surface as ChainError.
FiniteChain load_chain(const Json& doc);

Estimand make_estimand(const EstimandSpec& spec, const TargetModel& target);
double estimand_sup_bound(const EstimandSpec& spec, const TargetModel& target);
/// mu_n(f) in closed form or by enumeration; empty when not available.
std::optional<double> exact_expectation(const EstimandSpec& spec, const TargetModel& target);

/// Assumption parameters from explicit values, falling back to the ladder.
/// Throws ConfigError when C* is neither given nor derivable.
AssumptionParams derive_assumptions(const ExperimentConfig& config);

/// Bound report matching the ladder type (convolution or main).
BoundReport bound_report(const ExperimentConfig& config);

/// Per-level times the run will use, and whether a cap was applied.
struct ResolvedTimes {
  std::vector<double> times;
  bool capped = false;
};
ResolvedTimes resolve_times(const ExperimentConfig& config);

SmcConfig make_smc_config(const ExperimentConfig& config, std::size_t threads);

}  // namespace smcmix::cli
