#include "cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "smcmix/kernels.hpp"
#include "smcmix/oracle.hpp"
#include "smcmix/sequences.hpp"

namespace smcmix::cli {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

// Collects every schema problem instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  bool object(const Json& j, const std::string& path, const std::vector<std::string>& allowed,
              const std::vector<std::string>& required = {}) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [key, value] : j.items())
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        fail(path + "/" + key, "unknown field");
    bool ok = true;
    for (const auto& key : required)
      if (!j.contains(key)) {
        fail(path + "/" + key, "required field missing");
        ok = false;
      }
    return ok;
  }

  std::optional<double> number(const Json& obj, const std::string& key, const std::string& path,
                               bool required = false) {
    if (!obj.contains(key)) {
      if (required) fail(path + "/" + key, "required field missing");
      return std::nullopt;
    }
    const Json& v = obj.at(key);
    if (!v.is_number()) {
      fail(path + "/" + key, "expected a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      fail(path + "/" + key, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<double> positive(const Json& obj, const std::string& key, const std::string& path,
                                 bool required = false) {
    auto v = number(obj, key, path, required);
    if (v && !(*v > 0.0)) {
      fail(path + "/" + key, "must be > 0");
      return std::nullopt;
    }
    return v;
  }

  std::optional<double> open_unit(const Json& obj, const std::string& key, const std::string& path,
                                  bool required = false) {
    auto v = number(obj, key, path, required);
    if (v && !(*v > 0.0 && *v < 1.0)) {
      fail(path + "/" + key, "must lie in (0, 1)");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::uint64_t> count(const Json& obj, const std::string& key, const std::string& path,
                                     bool required = false, std::uint64_t min = 0) {
    if (!obj.contains(key)) {
      if (required) fail(path + "/" + key, "required field missing");
      return std::nullopt;
    }
    const Json& v = obj.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      fail(path + "/" + key, "expected a non-negative integer");
      return std::nullopt;
    }
    const auto u = v.get<std::uint64_t>();
    if (u < min) {
      fail(path + "/" + key, "must be >= " + std::to_string(min));
      return std::nullopt;
    }
    return u;
  }

  std::optional<bool> boolean(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_boolean()) {
      fail(path + "/" + key, "expected a boolean");
      return std::nullopt;
    }
    return obj.at(key).get<bool>();
  }

  std::optional<std::string> choice(const Json& obj, const std::string& key, const std::string& path,
                                    const std::vector<std::string>& options, bool required = true) {
    if (!obj.contains(key)) {
      if (required) fail(path + "/" + key, "required field missing");
      return std::nullopt;
    }
    const Json& v = obj.at(key);
    if (!v.is_string() || std::find(options.begin(), options.end(), v.get<std::string>()) == options.end()) {
      std::string list;
      for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
      fail(path + "/" + key, "must be one of: " + list);
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const Json& obj, const std::string& key, const std::string& path,
                                             bool required = false, std::size_t min_size = 1) {
    if (!obj.contains(key)) {
      if (required) fail(path + "/" + key, "required field missing");
      return std::nullopt;
    }
    return number_list(obj.at(key), path + "/" + key, min_size);
  }

  std::optional<std::vector<double>> number_list(const Json& v, const std::string& path, std::size_t min_size = 1) {
    if (!v.is_array() || v.size() < min_size) {
      fail(path, "expected an array of at least " + std::to_string(min_size) + " numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        fail(path, "entries must be finite numbers");
        return std::nullopt;
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::optional<Matrix> matrix(const Json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) {
      fail(path, "expected a non-empty array of rows");
      return std::nullopt;
    }
    const auto rows = v.size();
    std::optional<Matrix> out;
    for (std::size_t i = 0; i < rows; ++i) {
      auto row = number_list(v[i], path + "/" + std::to_string(i));
      if (!row) return std::nullopt;
      if (!out) out = Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(row->size()));
      if (static_cast<Eigen::Index>(row->size()) != out->cols()) {
        fail(path, "rows have different lengths");
        return std::nullopt;
      }
      for (std::size_t j = 0; j < row->size(); ++j) (*out)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*row)[j];
    }
    return out;
  }
};

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open file"});
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
}

bool is_power_of_two(unsigned v) { return v != 0 && (v & (v - 1)) == 0; }

// ---------------------------------------------------------------- target

std::optional<TargetModel> parse_target(Reader& r, const Json& j, const std::filesystem::path& base) {
  const std::string path = "/target";
  if (!j.is_object()) {
    r.fail(path, "expected an object");
    return std::nullopt;
  }
  const auto type = r.choice(j, "type", path, {"gaussian_mixture", "finite", "hypercube"});
  if (!type) return std::nullopt;
  TargetModel t;
  if (*type == "gaussian_mixture") {
    t.kind = TargetKind::gaussian_mixture;
    if (!r.object(j, path, {"type", "components", "weights"}, {"components", "weights"})) return std::nullopt;
    const auto weights = r.numbers(j, "weights", path, true);
    const Json& comps = j.at("components");
    if (!comps.is_array() || comps.empty()) {
      r.fail(path + "/components", "expected a non-empty array");
      return std::nullopt;
    }
    std::vector<DensitySpec> specs;
    std::size_t dim = 0;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string cp = path + "/components/" + std::to_string(i);
      if (!r.object(comps[i], cp, {"mean", "covariance", "variance"}, {"mean"})) continue;
      const auto mean = r.numbers(comps[i], "mean", cp, true);
      if (!mean) continue;
      if (dim == 0) dim = mean->size();
      if (mean->size() != dim) {
        r.fail(cp + "/mean", "dimension differs from component 0");
        continue;
      }
      const bool has_cov = comps[i].contains("covariance"), has_var = comps[i].contains("variance");
      if (has_cov == has_var) {
        r.fail(cp, "give exactly one of covariance, variance");
        continue;
      }
      try {
        if (has_var) {
          const auto v = r.positive(comps[i], "variance", cp, true);
          if (!v) continue;
          specs.push_back(DensitySpec::from_gaussian(GaussianComponent::isotropic(to_vector(*mean), *v)));
        } else {
          const auto cov = r.matrix(comps[i].at("covariance"), cp + "/covariance");
          if (!cov) continue;
          if (cov->rows() != static_cast<Eigen::Index>(dim) || cov->cols() != static_cast<Eigen::Index>(dim)) {
            r.fail(cp + "/covariance", "must be " + std::to_string(dim) + " x " + std::to_string(dim));
            continue;
          }
          specs.push_back(DensitySpec::from_gaussian(GaussianComponent::create(to_vector(*mean), *cov)));
        }
      } catch (const std::exception& e) {
        r.fail(cp, e.what());
      }
    }
    if (!weights || specs.size() != comps.size()) return std::nullopt;
    if (weights->size() != specs.size()) {
      r.fail(path + "/weights", "need one weight per component");
      return std::nullopt;
    }
    try {
      t.mixture = TargetMixture::create(specs, *weights);
    } catch (const std::exception& e) {
      r.fail(path + "/weights", e.what());
      return std::nullopt;
    }
    t.weights = *weights;
    t.dim = dim;
    return t;
  }
  if (*type == "finite") {
    t.kind = TargetKind::finite;
    if (!r.object(j, path, {"type", "pmf", "chain_file"})) return std::nullopt;
    const bool has_pmf = j.contains("pmf"), has_chain = j.contains("chain_file");
    if (has_pmf == has_chain) {
      r.fail(path, "give exactly one of pmf, chain_file");
      return std::nullopt;
    }
    if (has_pmf) {
      const auto pmf = r.numbers(j, "pmf", path, true);
      if (!pmf) return std::nullopt;
      t.pmf = to_vector(*pmf);
    } else {
      if (!j.at("chain_file").is_string()) {
        r.fail(path + "/chain_file", "expected a path string");
        return std::nullopt;
      }
      std::filesystem::path file = j.at("chain_file").get<std::string>();
      if (file.is_relative()) file = base / file;
      try {
        t.chain = std::make_shared<const FiniteChain>(load_chain(read_json_file(file)));
        t.pmf = t.chain->stationary();
      } catch (const ConfigError& e) {
        for (const auto& d : e.diagnostics()) r.fail(path + "/chain_file", d);
        return std::nullopt;
      } catch (const std::exception& e) {
        r.fail(path + "/chain_file", e.what());
        return std::nullopt;
      }
    }
    if ((t.pmf.array() <= 0.0).any() || std::abs(t.pmf.sum() - 1.0) > 1e-12) {
      r.fail(path + "/pmf", "must be strictly positive and sum to 1");
      return std::nullopt;
    }
    t.dim = 1;
    return t;
  }
  t.kind = TargetKind::hypercube;
  if (!r.object(j, path, {"type", "components", "weights"}, {"components", "weights"})) return std::nullopt;
  const auto weights = r.numbers(j, "weights", path, true);
  const Json& comps = j.at("components");
  if (!comps.is_array() || comps.empty()) {
    r.fail(path + "/components", "expected a non-empty array");
    return std::nullopt;
  }
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string cp = path + "/components/" + std::to_string(i);
    if (!r.object(comps[i], cp, {"probs"}, {"probs"})) return std::nullopt;
    const auto probs = r.numbers(comps[i], "probs", cp, true);
    if (!probs) return std::nullopt;
    for (double p : *probs)
      if (!(p > 0.0 && p < 1.0)) {
        r.fail(cp + "/probs", "entries must lie in (0, 1)");
        return std::nullopt;
      }
    if (!t.bernoulli.empty() && probs->size() != t.bernoulli[0].size()) {
      r.fail(cp + "/probs", "dimension differs from component 0");
      return std::nullopt;
    }
    t.bernoulli.push_back(*probs);
  }
  if (!weights) return std::nullopt;
  if (weights->size() != t.bernoulli.size()) {
    r.fail(path + "/weights", "need one weight per component");
    return std::nullopt;
  }
  t.dim = t.bernoulli[0].size();
  if (t.dim > 12) {
    r.fail(path + "/components", "hypercube dimension is limited to 12");
    return std::nullopt;
  }
  std::vector<DensitySpec> specs;
  std::vector<Vector> pmfs;
  for (const auto& probs : t.bernoulli) {
    pmfs.push_back(oracle::product_measure_pmf(probs));
    specs.push_back(DensitySpec::from_hypercube_pmf(pmfs.back()));
  }
  try {
    t.mixture = TargetMixture::create(specs, *weights);
  } catch (const std::exception& e) {
    r.fail(path + "/weights", e.what());
    return std::nullopt;
  }
  t.weights = *weights;
  t.pmf = oracle::mix_pmfs(pmfs, *weights);
  return t;
}

// ---------------------------------------------------------------- kernel

std::optional<KernelSpec> parse_kernel(Reader& r, const Json& j) {
  const std::string path = "/kernel";
  if (!r.object(j, path, {"kind", "step_size", "proposal_scale"}, {"kind"})) return std::nullopt;
  const auto kind = r.choice(j, "kind", path, {"langevin", "metropolis_hastings", "glauber", "finite_chain"});
  if (!kind) return std::nullopt;
  KernelSpec k;
  k.kind = kernel_kind_from_string(*kind);
  if (const auto h = r.positive(j, "step_size", path)) {
    if (k.kind != KernelKind::langevin) r.fail(path + "/step_size", "only valid for langevin");
    k.step_size = *h;
  } else if (k.kind == KernelKind::langevin && !j.contains("step_size")) {
    k.step_size = 0.0;  // resolved per level by the ladder builder
  }
  if (const auto s = r.positive(j, "proposal_scale", path)) {
    if (k.kind != KernelKind::metropolis_hastings) r.fail(path + "/proposal_scale", "only valid for metropolis_hastings");
    k.proposal_scale = *s;
  }
  return k;
}

// ---------------------------------------------------------------- ladders

struct DiscreteLevelSpec {
  Vector pmf;
  std::optional<TargetMixture> mixture;
  std::vector<double> weights;
  std::shared_ptr<const FiniteChain> chain;
};

DensitySpec discrete_density(const TargetModel& t, const Vector& pmf) {
  return t.kind == TargetKind::hypercube ? DensitySpec::from_hypercube_pmf(pmf) : DensitySpec::from_pmf(pmf);
}

KernelSpec discrete_kernel(const TargetModel& t, const std::optional<KernelSpec>& requested,
                           const DiscreteLevelSpec& lv) {
  const KernelKind kind = requested ? requested->kind
                                    : (t.kind == TargetKind::hypercube ? KernelKind::glauber : KernelKind::finite_chain);
  switch (kind) {
    case KernelKind::langevin:
      throw std::invalid_argument("langevin needs a Euclidean target");
    case KernelKind::glauber:
      if (t.kind != TargetKind::hypercube) throw std::invalid_argument("glauber needs a hypercube target");
      return KernelSpec::glauber();
    case KernelKind::metropolis_hastings:
      return KernelSpec::metropolis(requested ? requested->proposal_scale : 1.0);
    case KernelKind::finite_chain: {
      if (lv.chain) return KernelSpec::finite(lv.chain);
      const DensitySpec d = discrete_density(t, lv.pmf);
      auto chain = t.kind == TargetKind::hypercube
                       ? glauber_transition_matrix(d, t.dim)
                       : metropolis_transition_matrix(lv.pmf, uniform_proposal(static_cast<std::size_t>(lv.pmf.size())));
      return KernelSpec::finite(std::make_shared<const FiniteChain>(std::move(chain)));
    }
  }
  throw std::logic_error("unknown kernel kind");
}

Ladder build_discrete_ladder(const TargetModel& t, const std::vector<DiscreteLevelSpec>& specs,
                             const std::optional<KernelSpec>& kernel) {
  std::vector<Level> levels;
  double gamma = 1.0;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    Level lv;
    lv.density = discrete_density(t, specs[k].pmf);
    lv.mixture = specs[k].mixture;
    lv.kernel = discrete_kernel(t, kernel, specs[k]);
    if (k == 0) {
      lv.exact_sampler = t.kind == TargetKind::hypercube ? hypercube_pmf_sampler(specs[k].pmf, t.dim)
                                                          : pmf_sampler(specs[k].pmf);
    } else {
      const Vector ratio = specs[k].pmf.cwiseQuotient(specs[k - 1].pmf);
      gamma = std::max(gamma, ratio.maxCoeff());
      const Vector log_ratio = ratio.array().log().matrix();
      lv.log_ratio_to_prev = [log_ratio](const StatePoint& x) {
        return log_ratio[static_cast<Eigen::Index>(state_index(x))];
      };
      lv.log_normalized_ratio = lv.log_ratio_to_prev;
      lv.log_normalizer_ratio = 0.0;
    }
    levels.push_back(std::move(lv));
  }
  return Ladder::create(std::move(levels), gamma);
}

std::optional<std::vector<double>> parse_schedule(Reader& r, const Json& j, const std::string& path,
                                                  bool tempering) {
  const auto kind = r.choice(j, "kind", path, {"geometric", "explicit"});
  if (!kind) return std::nullopt;
  if (*kind == "explicit") {
    if (!r.object(j, path, {"kind", "betas"}, {"betas"})) return std::nullopt;
    auto betas = r.numbers(j, "betas", path, true);
    if (!betas) return std::nullopt;
    for (std::size_t i = 0; i < betas->size(); ++i) {
      if (!((*betas)[i] > 0.0)) r.fail(path + "/betas", "entries must be > 0");
      if (i > 0 && (*betas)[i] < (*betas)[i - 1]) r.fail(path + "/betas", "must be non-decreasing");
    }
    if (tempering && std::abs(betas->back() - 1.0) > 0.0) r.fail(path + "/betas", "tempering schedule must end at 1");
    if (tempering && betas->back() > 1.0) r.fail(path + "/betas", "tempering betas must not exceed 1");
    return betas;
  }
  if (tempering) {
    if (!r.object(j, path, {"kind", "beta1", "levels"}, {"beta1", "levels"})) return std::nullopt;
    const auto b1 = r.open_unit(j, "beta1", path, true);
    const auto n = r.count(j, "levels", path, true, 2);
    if (!b1 || !n) return std::nullopt;
    return TemperingSchedule::geometric(*b1, *n).betas;
  }
  if (!r.object(j, path, {"kind", "beta1", "ratio", "count"}, {"beta1", "ratio", "count"})) return std::nullopt;
  const auto b1 = r.positive(j, "beta1", path, true);
  const auto ratio = r.number(j, "ratio", path, true);
  const auto count = r.count(j, "count", path, true, 1);
  if (ratio && !(*ratio >= 1.0)) r.fail(path + "/ratio", "must be >= 1");
  if (!b1 || !ratio || !count || *ratio < 1.0) return std::nullopt;
  return TemperingSchedule::geometric_noise(*b1, *ratio, *count, 1.0).betas;
}

void parse_ladder(Reader& r, const Json& j, ExperimentConfig& cfg, const std::optional<KernelSpec>& kernel,
                  const std::filesystem::path& base) {
  const std::string path = "/ladder";
  if (!cfg.target) {
    r.fail(path, "a ladder needs a target");
    return;
  }
  const TargetModel& t = *cfg.target;
  const auto type = r.choice(j, "type", path, {"tempering", "convolution", "explicit"});
  if (!type) return;
  cfg.ladder_type = *type;
  const bool gaussian = t.kind == TargetKind::gaussian_mixture;

  if (*type == "tempering" || *type == "convolution") {
    if (!gaussian) {
      r.fail(path + "/type", *type + " ladders need a gaussian_mixture target");
      return;
    }
    const bool tempering = *type == "tempering";
    if (tempering) r.object(j, path, {"type", "schedule", "conservative"}, {"schedule"});
    else r.object(j, path, {"type", "schedule", "sigma"}, {"schedule"});
    if (!j.contains("schedule")) return;
    const auto betas = parse_schedule(r, j.at("schedule"), path + "/schedule", tempering);
    if (!betas) return;
    cfg.betas = *betas;
    std::optional<KernelSpec> k = kernel;
    if (k && k->kind != KernelKind::langevin && k->kind != KernelKind::metropolis_hastings) {
      r.fail("/kernel/kind", "Euclidean targets take langevin or metropolis_hastings");
      return;
    }
    if (k && k->kind == KernelKind::langevin && k->step_size == 0.0) k.reset();
    if (!r.errors.empty()) return;
    try {
      if (tempering) {
        PowerTemperingOptions o;
        o.conservative = r.boolean(j, "conservative", path).value_or(false);
        o.kernel = k;
        cfg.ladder = build_power_tempering(*t.mixture, TemperingSchedule{*betas, 1.0}, o);
      } else {
        cfg.sigma = r.positive(j, "sigma", path).value_or(1.0);
        ConvolutionOptions o;
        o.kernel = k;
        cfg.ladder = build_gaussian_convolution(*t.mixture, TemperingSchedule{*betas, cfg.sigma}, o);
      }
    } catch (const std::exception& e) {
      r.fail(path, e.what());
    }
    return;
  }

  if (!r.object(j, path, {"type", "levels"}, {"levels"})) return;
  const Json& lj = j.at("levels");
  if (!lj.is_array() || lj.empty()) {
    r.fail(path + "/levels", "expected a non-empty array");
    return;
  }
  if (gaussian) {
    for (std::size_t k = 0; k < lj.size(); ++k) {
      const std::string lp = path + "/levels/" + std::to_string(k);
      if (!r.object(lj[k], lp, {"target"}, {"target"})) continue;
      if (!lj[k].at("target").is_boolean() || !lj[k].at("target").get<bool>())
        r.fail(lp + "/target", "Gaussian explicit ladders only take {\"target\": true} levels");
    }
    if (lj.size() != 1) r.fail(path + "/levels", "Gaussian explicit ladders have exactly one level");
    if (!r.errors.empty()) return;
    Level lv;
    lv.density = mixture_density(*t.mixture);
    lv.mixture = *t.mixture;
    lv.exact_sampler = gaussian_mixture_sampler(*t.mixture);
    KernelSpec k = kernel.value_or(KernelSpec::langevin(0.05));
    if (k.kind == KernelKind::langevin && k.step_size == 0.0) k.step_size = 0.05;
    lv.kernel = k;
    try {
      cfg.ladder = Ladder::create({std::move(lv)}, 1.0);
    } catch (const std::exception& e) {
      r.fail(path, e.what());
    }
    return;
  }

  std::vector<DiscreteLevelSpec> specs;
  const auto n_states = static_cast<std::size_t>(t.pmf.size());
  for (std::size_t k = 0; k < lj.size(); ++k) {
    const std::string lp = path + "/levels/" + std::to_string(k);
    if (!r.object(lj[k], lp, {"pmf", "weights", "target", "chain_file"})) continue;
    const int given = int(lj[k].contains("pmf")) + int(lj[k].contains("weights")) + int(lj[k].contains("target"));
    if (given != 1) {
      r.fail(lp, "give exactly one of pmf, weights, target");
      continue;
    }
    DiscreteLevelSpec s;
    if (lj[k].contains("target")) {
      if (!lj[k].at("target").is_boolean() || !lj[k].at("target").get<bool>()) {
        r.fail(lp + "/target", "must be true");
        continue;
      }
      s.pmf = t.pmf;
      s.chain = t.chain;
      if (t.mixture) {
        s.mixture = t.mixture;
        s.weights = t.weights;
      }
    } else if (lj[k].contains("pmf")) {
      const auto pmf = r.numbers(lj[k], "pmf", lp, true);
      if (!pmf) continue;
      if (pmf->size() != n_states) {
        r.fail(lp + "/pmf", "expected " + std::to_string(n_states) + " entries");
        continue;
      }
      s.pmf = to_vector(*pmf);
      if ((s.pmf.array() <= 0.0).any() || std::abs(s.pmf.sum() - 1.0) > 1e-12) {
        r.fail(lp + "/pmf", "must be strictly positive and sum to 1");
        continue;
      }
    } else {
      if (t.kind != TargetKind::hypercube) {
        r.fail(lp + "/weights", "component reweighting needs a hypercube target");
        continue;
      }
      const auto w = r.numbers(lj[k], "weights", lp, true);
      if (!w) continue;
      if (w->size() != t.bernoulli.size()) {
        r.fail(lp + "/weights", "need one weight per target component");
        continue;
      }
      try {
        s.mixture = TargetMixture::create(t.mixture->components(), *w);
      } catch (const std::exception& e) {
        r.fail(lp + "/weights", e.what());
        continue;
      }
      std::vector<Vector> pmfs;
      for (const auto& probs : t.bernoulli) pmfs.push_back(oracle::product_measure_pmf(probs));
      s.pmf = oracle::mix_pmfs(pmfs, *w);
      s.weights = *w;
    }
    if (lj[k].contains("chain_file")) {
      if (!lj[k].at("chain_file").is_string()) {
        r.fail(lp + "/chain_file", "expected a path string");
        continue;
      }
      std::filesystem::path file = lj[k].at("chain_file").get<std::string>();
      if (file.is_relative()) file = base / file;
      try {
        auto chain = std::make_shared<const FiniteChain>(load_chain(read_json_file(file)));
        if (chain->size() != n_states || (chain->stationary() - s.pmf).cwiseAbs().maxCoeff() > 1e-10) {
          r.fail(lp + "/chain_file", "chain stationary law differs from the level pmf");
          continue;
        }
        s.chain = std::move(chain);
      } catch (const ConfigError& e) {
        for (const auto& d : e.diagnostics()) r.fail(lp + "/chain_file", d);
        continue;
      } catch (const std::exception& e) {
        r.fail(lp + "/chain_file", e.what());
        continue;
      }
    }
    specs.push_back(std::move(s));
  }
  if (!r.errors.empty()) return;
  if ((specs.back().pmf - t.pmf).cwiseAbs().maxCoeff() > 1e-12) {
    r.fail(path + "/levels", "the last level must be the target");
    return;
  }
  try {
    cfg.ladder = build_discrete_ladder(t, specs, kernel);
  } catch (const std::exception& e) {
    r.fail(path, e.what());
  }
}

// ---------------------------------------------------------------- estimand

std::optional<EstimandSpec> parse_estimand(Reader& r, const Json& j, const std::optional<TargetModel>& target) {
  const std::string path = "/estimand";
  if (!j.is_object()) {
    r.fail(path, "expected an object");
    return std::nullopt;
  }
  const auto name = r.choice(j, "name", path,
                             {"indicator_halfspace", "coordinate_mean", "mode_indicator", "constant", "state_indicator"});
  if (!name) return std::nullopt;
  EstimandSpec e;
  e.name = *name;
  const std::size_t dim = target ? target->dim : 0;
  if (e.name == "indicator_halfspace") {
    r.object(j, path, {"name", "direction", "offset"}, {"direction"});
    const auto dir = r.numbers(j, "direction", path, true);
    if (dir && target && dir->size() != dim) r.fail(path + "/direction", "must have the target dimension");
    if (dir) e.direction = to_vector(*dir);
    e.offset = r.number(j, "offset", path).value_or(0.0);
  } else if (e.name == "coordinate_mean") {
    r.object(j, path, {"name", "coordinate", "sup_bound"}, {"coordinate"});
    e.coordinate = r.count(j, "coordinate", path, true).value_or(0);
    if (target && e.coordinate >= dim) r.fail(path + "/coordinate", "out of range");
    e.sup_bound = r.positive(j, "sup_bound", path);
  } else if (e.name == "mode_indicator") {
    r.object(j, path, {"name", "mode"}, {"mode"});
    e.mode = r.count(j, "mode", path, true).value_or(0);
    if (target && (!target->mixture || e.mode >= target->mixture->size()))
      r.fail(path + "/mode", "needs a mixture target with that component");
  } else if (e.name == "constant") {
    r.object(j, path, {"name", "value"});
    e.value = r.number(j, "value", path).value_or(1.0);
  } else {
    r.object(j, path, {"name", "state"}, {"state"});
    e.state = r.count(j, "state", path, true).value_or(0);
    if (target && target->kind == TargetKind::gaussian_mixture)
      r.fail(path + "/name", "state_indicator needs a discrete target");
    else if (target && e.state >= static_cast<std::size_t>(target->pmf.size()))
      r.fail(path + "/state", "out of range");
  }
  return e;
}

Vector point_coordinates(const StatePoint& x) {
  if (const auto* v = std::get_if<Vector>(&x)) return *v;
  if (const auto* b = std::get_if<BitString>(&x)) {
    Vector out(static_cast<Eigen::Index>(b->bits.size()));
    for (std::size_t i = 0; i < b->bits.size(); ++i) out[static_cast<Eigen::Index>(i)] = b->bits[i];
    return out;
  }
  return Vector::Constant(1, static_cast<double>(std::get<FiniteState>(x).index));
}

StatePoint state_of_index(const TargetModel& t, std::size_t idx) {
  if (t.kind == TargetKind::hypercube) return BitString::from_index(idx, t.dim);
  return FiniteState{idx, static_cast<std::size_t>(t.pmf.size())};
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::runtime_error(join_lines(diagnostics)), diagnostics_(std::move(diagnostics)) {}

FiniteChain load_chain(const Json& doc) {
  Reader r;
  if (!r.object(doc, "", {"transition", "stationary"}, {"transition"})) throw ConfigError(r.errors);
  const auto p = r.matrix(doc.at("transition"), "/transition");
  std::optional<std::vector<double>> pi;
  if (doc.contains("stationary")) pi = r.numbers(doc, "stationary", "");
  if (!r.errors.empty()) throw ConfigError(r.errors);
  if (p->rows() != p->cols()) throw ConfigError({"/transition: must be square"});
  if (!pi) return FiniteChain::from_transition(*p);
  return FiniteChain::create(*p, to_vector(*pi));
}

ExperimentConfig parse_config(const Json& doc, const std::filesystem::path& base_dir) {
  Reader r;
  ExperimentConfig cfg;
  cfg.source = doc;
  if (!r.object(doc, "", {"schema_version", "master_seed", "n_particles", "replicates", "target", "ladder", "kernel",
                          "t_policy", "estimand", "bounds", "sweep", "exact_value", "init"}))
    throw ConfigError(r.errors);
  if (doc.contains("schema_version") && !(doc.at("schema_version").is_number_integer() && doc.at("schema_version") == 1))
    r.fail("/schema_version", "only version 1 is supported");
  cfg.master_seed = r.count(doc, "master_seed", "").value_or(0);
  cfg.n_particles = r.count(doc, "n_particles", "", false, 1).value_or(1000);
  cfg.replicates = r.count(doc, "replicates", "", false, 1).value_or(1);
  cfg.exact_value = r.number(doc, "exact_value", "");

  if (doc.contains("target")) cfg.target = parse_target(r, doc.at("target"), base_dir);
  std::optional<KernelSpec> kernel;
  if (doc.contains("kernel")) kernel = parse_kernel(r, doc.at("kernel"));
  if (cfg.target && r.errors.empty()) {
    const Json ladder = doc.contains("ladder") ? doc.at("ladder") : Json{{"type", "explicit"}, {"levels", {{{"target", true}}}}};
    parse_ladder(r, ladder, cfg, kernel, base_dir);
  } else if (doc.contains("ladder") && !doc.contains("target")) {
    r.fail("/ladder", "a ladder needs a target");
  }
  if (doc.contains("estimand")) cfg.estimand = parse_estimand(r, doc.at("estimand"), cfg.target);
  else if (cfg.target) {
    EstimandSpec e;
    e.name = "constant";
    cfg.estimand = e;
  }

  if (doc.contains("t_policy")) {
    const Json& j = doc.at("t_policy");
    const std::string path = "/t_policy";
    if (j.is_object()) {
      const auto kind = r.choice(j, "kind", path, {"explicit", "from_theorem"});
      if (kind && *kind == "explicit") {
        r.object(j, path, {"kind", "times", "time"});
        if (j.contains("times") == j.contains("time")) r.fail(path, "give exactly one of times, time");
        if (const auto t = r.number(j, "time", path)) {
          if (*t < 0.0) r.fail(path + "/time", "must be >= 0");
          cfg.time_policy.times = {*t};
        }
        if (const auto ts = r.numbers(j, "times", path)) {
          for (double t : *ts)
            if (t < 0.0) r.fail(path + "/times", "entries must be >= 0");
          if (cfg.ladder && ts->size() != cfg.ladder->size())
            r.fail(path + "/times", "need one time per level (" + std::to_string(cfg.ladder->size()) + ")");
          cfg.time_policy.times = *ts;
        }
      } else if (kind) {
        cfg.time_policy.kind = TimePolicy::Kind::from_theorem;
        r.object(j, path, {"kind", "epsilon", "max_time"});
        cfg.time_policy.epsilon = r.open_unit(j, "epsilon", path).value_or(0.5);
        cfg.time_policy.max_time = r.positive(j, "max_time", path);
      }
    } else {
      r.fail(path, "expected an object");
    }
  } else {
    cfg.time_policy.times = {1.0};
  }

  if (doc.contains("bounds")) {
    const Json& j = doc.at("bounds");
    const std::string path = "/bounds";
    if (r.object(j, path, {"guarantee", "epsilon", "delta", "p", "feasibility_cap", "n", "M", "w_star", "gamma",
                           "c_star", "f_sup_bound", "f_lp_norm", "alpha", "beta"})) {
      auto& b = cfg.bounds;
      if (const auto g = r.choice(j, "guarantee", path, {"mse", "high_probability", "total_variation"}, false))
        b.guarantee = guarantee_from_string(*g);
      b.epsilon = r.open_unit(j, "epsilon", path).value_or(0.5);
      b.delta = r.open_unit(j, "delta", path).value_or(0.1);
      if (const auto p = r.count(j, "p", path, false, 4)) {
        if (!is_power_of_two(static_cast<unsigned>(*p))) r.fail(path + "/p", "must be a power of 2");
        b.p = static_cast<unsigned>(*p);
      }
      b.feasibility_cap = r.positive(j, "feasibility_cap", path).value_or(1e7);
      if (const auto n = r.count(j, "n", path, false, 1)) b.n = *n;
      if (const auto m = r.count(j, "M", path, false, 1)) b.M = *m;
      b.w_star = r.number(j, "w_star", path);
      if (b.w_star && !(*b.w_star > 0.0 && *b.w_star <= 1.0)) r.fail(path + "/w_star", "must lie in (0, 1]");
      b.gamma = r.number(j, "gamma", path);
      if (b.gamma && !(*b.gamma >= 1.0)) r.fail(path + "/gamma", "must be >= 1");
      if (const auto c = r.numbers(j, "c_star", path)) {
        for (double v : *c)
          if (!(v > 0.0)) r.fail(path + "/c_star", "entries must be > 0");
        b.c_star = *c;
      }
      b.f_sup_bound = r.number(j, "f_sup_bound", path);
      if (b.f_sup_bound && *b.f_sup_bound < 0.0) r.fail(path + "/f_sup_bound", "must be >= 0");
      b.f_lp_norm = r.number(j, "f_lp_norm", path);
      if (b.f_lp_norm && *b.f_lp_norm < 0.0) r.fail(path + "/f_lp_norm", "must be >= 0");
      b.alpha = r.open_unit(j, "alpha", path);
      b.beta = r.number(j, "beta", path);
      if (b.beta && !(*b.beta > 1.0)) r.fail(path + "/beta", "must exceed 1");
    }
  }

  if (doc.contains("sweep")) {
    const Json& j = doc.at("sweep");
    const std::string path = "/sweep";
    if (r.object(j, path, {"parameter", "values", "replicates"}, {"parameter", "values"})) {
      SweepSpec s;
      if (const auto p = r.choice(j, "parameter", path, {"n_particles", "time"}))
        s.parameter = *p == "time" ? SweepSpec::Parameter::time : SweepSpec::Parameter::n_particles;
      if (const auto v = r.numbers(j, "values", path, true)) {
        for (double x : *v) {
          if (s.parameter == SweepSpec::Parameter::n_particles && !(x >= 1.0 && x == std::floor(x)))
            r.fail(path + "/values", "particle counts must be positive integers");
          if (s.parameter == SweepSpec::Parameter::time && x < 0.0) r.fail(path + "/values", "times must be >= 0");
        }
        s.values = *v;
      }
      s.replicates = r.count(j, "replicates", path, false, 2).value_or(20);
      cfg.sweep = s;
    }
  }

  if (doc.contains("init")) {
    const Json& j = doc.at("init");
    const std::string path = "/init";
    if (r.object(j, path, {"acceptance_floor", "probe_count", "inflation", "envelope_margin"})) {
      cfg.init.acceptance_floor = r.open_unit(j, "acceptance_floor", path).value_or(cfg.init.acceptance_floor);
      cfg.init.probe_count = r.count(j, "probe_count", path, false, 1).value_or(cfg.init.probe_count);
      if (const auto v = r.number(j, "inflation", path)) {
        if (!(*v >= 1.0)) r.fail(path + "/inflation", "must be >= 1");
        cfg.init.inflation = *v;
      }
      if (const auto v = r.number(j, "envelope_margin", path)) {
        if (!(*v >= 1.0)) r.fail(path + "/envelope_margin", "must be >= 1");
        cfg.init.envelope_margin = *v;
      }
    }
  }

  if (!r.errors.empty()) throw ConfigError(r.errors);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path), path.parent_path());
}

Estimand make_estimand(const EstimandSpec& spec, const TargetModel& target) {
  if (spec.name == "indicator_halfspace") {
    const Vector a = spec.direction;
    const double c = spec.offset;
    return [a, c](const StatePoint& x) { return point_coordinates(x).dot(a) > c ? 1.0 : 0.0; };
  }
  if (spec.name == "coordinate_mean") {
    const auto j = static_cast<Eigen::Index>(spec.coordinate);
    if (target.kind == TargetKind::gaussian_mixture)
      return [j](const StatePoint& x) { return coordinates(x)[j]; };
    return [j](const StatePoint& x) { return point_coordinates(x)[j]; };
  }
  if (spec.name == "mode_indicator") {
    const TargetMixture m = *target.mixture;
    const std::size_t mode = spec.mode;
    return [m, mode](const StatePoint& x) {
      std::size_t best = 0;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double v = std::log(m.weights()[i]) + m.components()[i].normalized_log_density(x);
        if (v > top) {
          top = v;
          best = i;
        }
      }
      return best == mode ? 1.0 : 0.0;
    };
  }
  if (spec.name == "constant") {
    const double v = spec.value;
    return [v](const StatePoint&) { return v; };
  }
  const std::size_t s = spec.state;
  return [s](const StatePoint& x) { return state_index(x) == s ? 1.0 : 0.0; };
}

double estimand_sup_bound(const EstimandSpec& spec, const TargetModel& target) {
  // Bound on the oscillation sup |f - mu(f)|.
  if (spec.name == "constant") return 0.0;
  if (spec.name != "coordinate_mean") return 1.0;
  if (spec.sup_bound) return *spec.sup_bound;
  if (target.kind == TargetKind::hypercube) return 1.0;
  if (target.kind == TargetKind::finite) return static_cast<double>(target.pmf.size() - 1);
  // Gaussian coordinates are unbounded; use the spread of the means plus six
  // standard deviations on either side as a practical range.
  const auto j = static_cast<Eigen::Index>(spec.coordinate);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : target.mixture->components()) {
    const double sd = std::sqrt(c.gaussian->covariance()(j, j));
    lo = std::min(lo, c.gaussian->mean()[j] - 6.0 * sd);
    hi = std::max(hi, c.gaussian->mean()[j] + 6.0 * sd);
  }
  return hi - lo;
}

std::optional<double> exact_expectation(const EstimandSpec& spec, const TargetModel& target) {
  if (target.kind != TargetKind::gaussian_mixture) {
    const Estimand f = make_estimand(spec, target);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < target.pmf.size(); ++i)
      acc += target.pmf[i] * f(state_of_index(target, static_cast<std::size_t>(i)));
    return acc;
  }
  const TargetMixture& m = *target.mixture;
  if (spec.name == "constant") return spec.value;
  double acc = 0.0;
  if (spec.name == "coordinate_mean") {
    for (std::size_t i = 0; i < m.size(); ++i)
      acc += m.weights()[i] * m.components()[i].gaussian->mean()[static_cast<Eigen::Index>(spec.coordinate)];
    return acc;
  }
  if (spec.name == "indicator_halfspace") {
    // a.x ~ N(a.m, a' S a) under each component.
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto& g = *m.components()[i].gaussian;
      const double mean = spec.direction.dot(g.mean()) - spec.offset;
      const double sd = std::sqrt(spec.direction.dot(g.covariance() * spec.direction));
      acc += m.weights()[i] * (sd > 0.0 ? 0.5 * std::erfc(-mean / (sd * std::sqrt(2.0))) : (mean > 0.0 ? 1.0 : 0.0));
    }
    return acc;
  }
  return std::nullopt;
}

AssumptionParams derive_assumptions(const ExperimentConfig& cfg) {
  const BoundsSpec& b = cfg.bounds;
  AssumptionParams p;
  p.epsilon = b.epsilon;
  p.delta = b.delta;
  p.p = b.p;
  p.alpha = b.alpha;
  p.beta = b.beta;
  p.f_lp_norm = b.f_lp_norm;
  std::vector<std::string> missing;

  const Ladder* ladder = cfg.ladder ? &*cfg.ladder : nullptr;
  const TargetModel* target = cfg.target ? &*cfg.target : nullptr;

  if (b.n) p.n = *b.n;
  else if (ladder) p.n = ladder->size();
  else missing.push_back("/bounds/n: not given and no ladder to derive it");

  if (b.gamma) p.gamma = *b.gamma;
  else if (ladder) p.gamma = ladder->gamma_bound();
  else missing.push_back("/bounds/gamma: not given and no ladder to derive it");

  // Mixture structure per level, when the ladder carries it.
  std::vector<std::vector<double>> level_weights;
  if (ladder)
    for (const auto& lv : ladder->levels())
      if (lv.mixture) level_weights.push_back(lv.mixture->weights());
  const bool all_mixed = ladder && level_weights.size() == ladder->size();

  if (b.M) p.M = *b.M;
  else if (ladder && cfg.ladder_type == "tempering") p.M = target->mixture->size();
  else if (all_mixed) {
    p.M = 1;
    for (const auto& w : level_weights) p.M = std::max(p.M, w.size());
  } else if (ladder) p.M = 1;
  else missing.push_back("/bounds/M: not given and no ladder to derive it");

  if (b.w_star) p.w_star = *b.w_star;
  else if (ladder && cfg.ladder_type == "tempering") p.w_star = tempered_weight_lower_bound(*target->mixture, cfg.betas);
  else if (all_mixed) {
    p.w_star = 1.0;
    for (const auto& w : level_weights) p.w_star = std::min(p.w_star, *std::min_element(w.begin(), w.end()));
  } else if (ladder) p.w_star = 1.0;
  else missing.push_back("/bounds/w_star: not given and no ladder to derive it");

  if (!p.beta && all_mixed && cfg.ladder_type != "tempering") p.beta = beta_from_weights(level_weights);

  if (b.f_sup_bound) p.f_sup_bound = *b.f_sup_bound;
  else if (cfg.estimand && target) p.f_sup_bound = estimand_sup_bound(*cfg.estimand, *target);
  else p.f_sup_bound = 1.0;

  if (!b.c_star.empty()) {
    p.c_star_per_level = b.c_star;
  } else if (ladder) {
    for (std::size_t k = 0; k < ladder->size(); ++k) {
      const Level& lv = ladder->level(k);
      if (lv.lsi_constant_bound) {
        p.c_star_per_level.push_back(*lv.lsi_constant_bound);
        continue;
      }
      if (!target || target->kind == TargetKind::gaussian_mixture) {
        missing.push_back("/bounds/c_star: level " + std::to_string(k + 1) + " has no LSI bound");
        break;
      }
      // Discrete level: inflated LSI estimate of each component chain (or of
      // the level chain when no decomposition is known).
      std::vector<FiniteChain> chains;
      if (lv.mixture && target->kind == TargetKind::hypercube) {
        for (const auto& probs : target->bernoulli)
          chains.push_back(glauber_transition_matrix(DensitySpec::from_hypercube_pmf(oracle::product_measure_pmf(probs)),
                                                     target->dim));
      } else if (lv.kernel.chain) {
        chains.push_back(*lv.kernel.chain);
      } else if (target->kind == TargetKind::hypercube) {
        chains.push_back(glauber_transition_matrix(lv.density, target->dim));
      }
      if (chains.empty()) {
        missing.push_back("/bounds/c_star: level " + std::to_string(k + 1) + " has no explicit chain");
        break;
      }
      double c = 0.0;
      for (std::size_t i = 0; i < chains.size(); ++i)
        c = std::max(c, oracle::lsi_constant_estimate(chains[i], 8, 1000 + i).value);
      p.c_star_per_level.push_back(c);
    }
  } else {
    missing.push_back("/bounds/c_star: not given and no ladder to derive it");
  }
  if (!missing.empty()) throw ConfigError(missing);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError({std::string("/bounds: ") + e.what()});
  }
  return p;
}

BoundReport bound_report(const ExperimentConfig& cfg) {
  const AssumptionParams p = derive_assumptions(cfg);
  if (cfg.ladder_type == "convolution" && cfg.ladder && !cfg.bounds.gamma && cfg.bounds.c_star.empty()) {
    AssumptionParams base = p;
    base.c_star_per_level = {p.c_star_per_level.back()};
    base.gamma = 1.0;
    return prescribe_convolution(base, cfg.sigma, cfg.betas, cfg.target->dim, cfg.bounds.guarantee);
  }
  return prescribe_main(p, cfg.bounds.guarantee);
}

ResolvedTimes resolve_times(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.ladder->size();
  ResolvedTimes out;
  if (cfg.time_policy.kind == TimePolicy::Kind::explicit_times) {
    out.times = cfg.time_policy.times.size() == 1 ? std::vector<double>(n, cfg.time_policy.times[0])
                                                  : cfg.time_policy.times;
    return out;
  }
  ExperimentConfig copy = cfg;
  copy.bounds.epsilon = cfg.time_policy.epsilon;
  out.times = bound_report(copy).prescribed_t();
  out.times.resize(n, out.times.empty() ? 0.0 : out.times.back());
  if (cfg.time_policy.max_time)
    for (double& t : out.times)
      if (t > *cfg.time_policy.max_time) {
        t = *cfg.time_policy.max_time;
        out.capped = true;
      }
  return out;
}

SmcConfig make_smc_config(const ExperimentConfig& cfg, std::size_t threads) {
  if (!cfg.ladder || !cfg.target || !cfg.estimand) throw ConfigError({"/target: run needs a target"});
  const ResolvedTimes times = resolve_times(cfg);
  return SmcConfig{cfg.ladder->with_time_budgets(times.times),
                   cfg.n_particles,
                   cfg.master_seed,
                   false,
                   make_estimand(*cfg.estimand, *cfg.target),
                   estimand_sup_bound(*cfg.estimand, *cfg.target),
                   threads,
                   cfg.init};
}

}  // namespace smcmix::cli
