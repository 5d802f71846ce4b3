#include "smcmix/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "smcmix/kernels.hpp"

namespace smcmix {

namespace {

void require_gaussian(const TargetMixture& target, const char* who) {
  if (!target.all_gaussian())
    throw std::invalid_argument(std::string(who) +
                                ": every target component must be Gaussian with known parameters");
  const auto d = target.components()[0].gaussian->dim();
  for (const auto& c : target.components())
    if (c.gaussian->dim() != d) throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

std::size_t target_dim(const TargetMixture& target) {
  return static_cast<std::size_t>(target.components()[0].gaussian->dim());
}

double log_det_spread(const TargetMixture& target) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : target.components()) {
    lo = std::min(lo, c.gaussian->log_det());
    hi = std::max(hi, c.gaussian->log_det());
  }
  return hi - lo;
}

double min_covariance_eigenvalue(const GaussianComponent& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g.covariance(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// Largest Hessian eigenvalue of -log q_k^beta over components: beta / min eig(S_k).
double curvature_estimate(const TargetMixture& target, double beta) {
  double top = 0.0;
  for (const auto& c : target.components())
    top = std::max(top, beta / min_covariance_eigenvalue(*c.gaussian));
  return top;
}

bool covariances_equal(const TargetMixture& target) {
  const Matrix& s0 = target.components()[0].gaussian->covariance();
  for (const auto& c : target.components())
    if ((c.gaussian->covariance() - s0).cwiseAbs().maxCoeff() > 1e-14 * std::max(1.0, s0.norm()))
      return false;
  return true;
}

}  // namespace

TemperingSchedule TemperingSchedule::geometric(double beta1, std::size_t n) {
  if (n == 0) throw std::invalid_argument("geometric schedule: n must be >= 1");
  if (!(beta1 > 0.0 && beta1 <= 1.0))
    throw std::invalid_argument("geometric schedule: beta1 must lie in (0, 1]");
  TemperingSchedule s;
  if (n == 1) {
    s.betas = {1.0};
    return s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double e = static_cast<double>(n - 1 - i) / static_cast<double>(n - 1);
    s.betas.push_back(std::pow(beta1, e));
  }
  s.betas.back() = 1.0;
  return s;
}

TemperingSchedule TemperingSchedule::geometric_noise(double beta1, double ratio, std::size_t count,
                                                     double sigma) {
  if (!(beta1 > 0.0) || !(ratio >= 1.0) || count == 0 || !(sigma > 0.0))
    throw std::invalid_argument("noise schedule: need beta1 > 0, ratio >= 1, count >= 1, sigma > 0");
  TemperingSchedule s;
  s.sigma = sigma;
  for (std::size_t k = 0; k < count; ++k) s.betas.push_back(beta1 * std::pow(ratio, double(k)));
  return s;
}

double power_tempering_gamma(const TargetMixture& target, double beta_i, double beta_prev,
                             bool conservative) {
  require_gaussian(target, "power_tempering_gamma");
  if (!(beta_prev > 0.0) || beta_i < beta_prev)
    throw std::invalid_argument("power_tempering_gamma: need beta_i >= beta_prev > 0");
  const double d = static_cast<double>(target_dim(target));
  const double db = beta_i - beta_prev;
  double log_g = -std::log(target.w_star()) + 0.5 * d * std::log(beta_i / beta_prev) +
                 0.5 * db * log_det_spread(target);
  if (conservative) log_g += 0.5 * d * db * std::log(2.0 * std::numbers::pi);
  return std::exp(log_g);
}

double tempered_component_lsi(const TargetMixture& target, std::size_t k, double beta_i) {
  require_gaussian(target, "tempered_component_lsi");
  if (!(beta_i > 0.0 && beta_i <= 1.0))
    throw std::invalid_argument("tempered_component_lsi: beta must lie in (0, 1]");
  return target.components().at(k).gaussian->lambda_max() / (target.w_star() * beta_i);
}

double tempered_weight_lower_bound(const TargetMixture& target, const std::vector<double>& betas) {
  require_gaussian(target, "tempered_weight_lower_bound");
  const double a2 = target.w_star() * target.w_star();
  if (covariances_equal(target)) return a2;
  const auto& comps = target.components();
  const auto& alpha = target.weights();
  double worst = std::numeric_limits<double>::infinity();
  for (double b : betas) {
    for (std::size_t k = 0; k < comps.size(); ++k) {
      // Integral of q(.; m_k, S_j)^b depends only on S_j.
      double denom = 0.0;
      for (std::size_t j = 0; j < comps.size(); ++j)
        denom += alpha[j] * std::exp(comps[j].gaussian->log_integral_of_power(b));
      worst = std::min(worst, std::exp(comps[k].gaussian->log_integral_of_power(b)) / denom);
    }
  }
  return worst * a2;
}

GaussianComponent tempered_moment_match(const TargetMixture& target, double beta) {
  require_gaussian(target, "tempered_moment_match");
  const auto d = static_cast<Eigen::Index>(target_dim(target));
  Vector mean = Vector::Zero(d);
  Matrix second = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < target.size(); ++k) {
    const auto& g = *target.components()[k].gaussian;
    const double a = target.weights()[k];
    mean += a * g.mean();
    second += a * (g.covariance() / beta + g.mean() * g.mean().transpose());
  }
  Matrix cov = second - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return GaussianComponent::create(mean, cov);
}

Ladder build_power_tempering(const TargetMixture& target, const TemperingSchedule& schedule,
                             const PowerTemperingOptions& options) {
  require_gaussian(target, "build_power_tempering");
  const auto& betas = schedule.betas;
  if (betas.empty()) throw std::invalid_argument("power tempering: empty schedule");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] <= 1.0))
      throw std::invalid_argument("power tempering: betas must lie in (0, 1]");
    if (i > 0 && !(betas[i] > betas[i - 1]))
      throw std::invalid_argument("power tempering: betas must be strictly increasing");
  }
  if (betas.back() != 1.0) throw std::invalid_argument("power tempering: last beta must equal 1");

  const DensitySpec base = mixture_density(target);
  double gamma = 1.0;
  std::vector<Level> levels;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const double b = betas[i];
    Level lv;
    lv.density.log_density = [base, b](const StatePoint& x) { return b * base.log_density(x); };
    lv.density.gradient = [base, b](const Vector& x) { return Vector(b * base.gradient(x)); };
    if (b == 1.0) {
      lv.density.log_normalizer = 0.0;
      lv.mixture = target;
    }
    if (i > 0) {
      const double db = b - betas[i - 1];
      lv.log_ratio_to_prev = [base, db](const StatePoint& x) { return db * base.log_density(x); };
      gamma = std::max(gamma, power_tempering_gamma(target, b, betas[i - 1], options.conservative));
    }
    lv.kernel = options.kernel ? *options.kernel
                               : KernelSpec::langevin(default_step_size(curvature_estimate(target, b)));
    double lsi = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k)
      lsi = std::max(lsi, tempered_component_lsi(target, k, b));
    lv.lsi_constant_bound = lsi;
    if (target.size() == 1 && b == 1.0) lv.exact_sampler = gaussian_mixture_sampler(target);
    lv.proposal_hint = tempered_moment_match(target, b);
    levels.push_back(std::move(lv));
  }
  return Ladder::create(std::move(levels), gamma);
}

double convolution_final_gamma(const TargetMixture& target, double noise_variance) {
  require_gaussian(target, "convolution_final_gamma");
  double worst = 0.0;
  for (const auto& c : target.components()) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c.gaussian->covariance(), Eigen::EigenvaluesOnly);
    double log_r = 0.0;
    for (Eigen::Index j = 0; j < eig.eigenvalues().size(); ++j) {
      const double l = eig.eigenvalues()[j];
      log_r += 0.5 * std::log((l + noise_variance) / l);
    }
    worst = std::max(worst, std::exp(log_r));
  }
  return worst;
}

Ladder build_gaussian_convolution(const TargetMixture& target, const TemperingSchedule& schedule,
                                  const ConvolutionOptions& options) {
  require_gaussian(target, "build_gaussian_convolution");
  const auto& betas = schedule.betas;
  if (!(schedule.sigma > 0.0)) throw std::invalid_argument("convolution: sigma must be positive");
  for (std::size_t k = 0; k < betas.size(); ++k) {
    if (!(betas[k] > 0.0) || !std::isfinite(betas[k]))
      throw std::invalid_argument("convolution: betas must be positive");
    if (k > 0 && !(betas[k] >= betas[k - 1]))
      throw std::invalid_argument("convolution: betas must be non-decreasing");
  }
  const double d = static_cast<double>(target_dim(target));
  const double s2 = schedule.sigma * schedule.sigma;

  std::vector<TargetMixture> mixtures;
  std::vector<double> noise;
  for (double b : betas) {
    std::vector<DensitySpec> comps;
    for (const auto& c : target.components())
      comps.push_back(DensitySpec::from_gaussian(c.gaussian->widened(s2 / b)));
    mixtures.push_back(TargetMixture::create(std::move(comps), target.weights()));
    noise.push_back(s2 / b);
  }
  mixtures.push_back(target);
  noise.push_back(0.0);

  double c_star = 0.0;
  for (const auto& c : target.components()) c_star = std::max(c_star, c.gaussian->lambda_max());

  double gamma = 1.0;
  std::vector<Level> levels;
  for (std::size_t k = 0; k < mixtures.size(); ++k) {
    Level lv;
    lv.density = mixture_density(mixtures[k]);
    lv.mixture = mixtures[k];
    if (k > 0) {
      const DensitySpec prev = levels.back().density;
      const DensitySpec cur = lv.density;
      lv.log_ratio_to_prev = [prev, cur](const StatePoint& x) {
        return cur.log_density(x) - prev.log_density(x);
      };
      lv.log_normalizer_ratio = 0.0;
      const bool final_step = k == betas.size();
      gamma = std::max(gamma, final_step ? convolution_final_gamma(target, noise[k - 1])
                                         : std::pow(betas[k] / betas[k - 1], 0.5 * d));
    }
    const double curvature = [&] {
      double top = 0.0;
      for (const auto& c : mixtures[k].components())
        top = std::max(top, 1.0 / min_covariance_eigenvalue(*c.gaussian));
      return top;
    }();
    lv.kernel = options.kernel ? *options.kernel : KernelSpec::langevin(default_step_size(curvature));
    lv.lsi_constant_bound = lsi_convolution_bound(c_star, noise[k]);
    if (k == 0) lv.exact_sampler = gaussian_mixture_sampler(mixtures[k]);
    levels.push_back(std::move(lv));
  }
  return Ladder::create(std::move(levels), gamma);
}

double lsi_convolution_bound(double c1, double c2) {
  if (!(c1 >= 0.0) || !(c2 >= 0.0))
    throw std::invalid_argument("lsi_convolution_bound: constants must be nonnegative");
  return c1 + c2;
}

std::function<StatePoint(Rng&)> gaussian_mixture_sampler(const TargetMixture& target) {
  require_gaussian(target, "gaussian_mixture_sampler");
  std::vector<GaussianComponent> comps;
  for (const auto& c : target.components()) comps.push_back(*c.gaussian);
  const std::vector<double> w = target.weights();
  return [comps, w](Rng& rng) -> StatePoint {
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    return comps[pick(rng)].sample(rng);
  };
}

std::function<StatePoint(Rng&)> pmf_sampler(const Vector& pmf) {
  std::vector<double> w(pmf.data(), pmf.data() + pmf.size());
  const std::size_t n = w.size();
  return [w, n](Rng& rng) -> StatePoint {
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    return FiniteState{pick(rng), n};
  };
}

std::function<StatePoint(Rng&)> hypercube_pmf_sampler(const Vector& pmf, std::size_t dim) {
  if (static_cast<std::size_t>(pmf.size()) != (std::size_t{1} << dim))
    throw std::invalid_argument("hypercube sampler: pmf size must be 2^d");
  std::vector<double> w(pmf.data(), pmf.data() + pmf.size());
  return [w, dim](Rng& rng) -> StatePoint {
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    return BitString::from_index(pick(rng), dim);
  };
}

InitResult init_sampler(const Ladder& ladder, std::size_t n_samples, Rng& rng,
                        const InitOptions& options) {
  if (n_samples == 0) throw std::invalid_argument("init_sampler: need at least one sample");
  const Level& first = ladder.level(0);
  InitResult out;
  out.ensemble.level_index = 1;
  out.ensemble.nu_scale = 1.0;
  out.ensemble.particles.reserve(n_samples);

  if (first.exact_sampler) {
    for (std::size_t i = 0; i < n_samples; ++i) out.ensemble.particles.push_back(first.exact_sampler(rng));
    out.proposals = n_samples;
    return out;
  }
  if (!first.proposal_hint)
    throw std::invalid_argument("init_sampler: level 1 has neither an exact sampler nor a proposal");

  const GaussianComponent& hint = *first.proposal_hint;
  const GaussianComponent proposal = GaussianComponent::create(
      hint.mean(), options.inflation * options.inflation * hint.covariance());
  const auto& logp = first.density.log_density;

  // Envelope constant: sup log p~ - log q over proposal draws plus the
  // centres of the level mixture (or of the hint).
  double log_m = -std::numeric_limits<double>::infinity();
  auto probe = [&](const Vector& x) {
    const double v = logp(StatePoint{x}) - proposal.log_pdf(x);
    if (std::isfinite(v)) log_m = std::max(log_m, v);
  };
  for (std::size_t i = 0; i < options.probe_count; ++i) probe(proposal.sample(rng));
  probe(hint.mean());
  if (first.mixture)
    for (const auto& c : first.mixture->components())
      if (c.gaussian) probe(c.gaussian->mean());
  if (!std::isfinite(log_m)) throw std::runtime_error("init_sampler: density vanishes on all probes");
  log_m += std::log(options.envelope_margin);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t accepted = 0, tried = 0;
  const std::size_t check_after = static_cast<std::size_t>(std::ceil(10.0 / options.acceptance_floor));
  while (accepted < n_samples) {
    Vector x = proposal.sample(rng);
    ++tried;
    if (std::log(unif(rng)) < logp(StatePoint{x}) - proposal.log_pdf(x) - log_m) {
      out.ensemble.particles.emplace_back(std::move(x));
      ++accepted;
    }
    if (tried >= check_after &&
        static_cast<double>(accepted) / static_cast<double>(tried) < options.acceptance_floor)
      throw std::runtime_error("proposal too loose");
  }
  out.exact = false;
  out.proposals = tried;
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(tried);
  return out;
}

}  // namespace smcmix
