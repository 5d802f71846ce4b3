#include "smcmix/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace smcmix {

std::size_t BitString::index() const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) idx |= (std::size_t{1} << i);
  return idx;
}

BitString BitString::from_index(std::size_t index, std::size_t dim) {
  BitString b;
  b.bits.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) b.bits[i] = static_cast<std::uint8_t>((index >> i) & 1u);
  return b;
}

bool same_state(const StatePoint& a, const StatePoint& b) {
  if (a.index() != b.index()) return false;
  if (const auto* va = std::get_if<Vector>(&a)) {
    const auto& vb = std::get<Vector>(b);
    return va->size() == vb.size() && *va == vb;
  }
  if (const auto* ba = std::get_if<BitString>(&a)) return *ba == std::get<BitString>(b);
  return std::get<FiniteState>(a) == std::get<FiniteState>(b);
}

const Vector& coordinates(const StatePoint& x) { return std::get<Vector>(x); }

std::size_t state_index(const StatePoint& x) {
  if (const auto* f = std::get_if<FiniteState>(&x)) return f->index;
  if (const auto* b = std::get_if<BitString>(&x)) return b->index();
  throw std::invalid_argument("state_index: euclidean state has no index");
}

double DensitySpec::normalized_log_density(const StatePoint& x) const {
  if (!log_normalizer) throw std::logic_error("density has no known normalizer");
  return log_density(x) - *log_normalizer;
}

DensitySpec DensitySpec::from_gaussian(const GaussianComponent& g) {
  DensitySpec d;
  d.log_density = [g](const StatePoint& x) { return g.log_pdf(coordinates(x)); };
  d.gradient = [g](const Vector& x) { return g.grad_log_pdf(x); };
  d.log_normalizer = 0.0;
  d.gaussian = g;
  return d;
}

namespace {

Vector checked_pmf(const Vector& pmf) {
  if (pmf.size() == 0) throw std::invalid_argument("pmf: empty");
  if (!pmf.allFinite() || (pmf.array() < 0.0).any())
    throw std::invalid_argument("pmf: entries must be finite and nonnegative");
  const double total = pmf.sum();
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("pmf: does not sum to 1");
  return pmf;
}

double log_or_neg_inf(double v) {
  return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

}  // namespace

DensitySpec DensitySpec::from_pmf(const Vector& pmf) {
  const Vector p = checked_pmf(pmf);
  const auto n = static_cast<std::size_t>(p.size());
  DensitySpec d;
  d.log_density = [p, n](const StatePoint& x) {
    const auto& s = std::get<FiniteState>(x);
    if (s.index >= n) throw std::out_of_range("finite state index out of range");
    return log_or_neg_inf(p[static_cast<Eigen::Index>(s.index)]);
  };
  d.log_normalizer = 0.0;
  return d;
}

DensitySpec DensitySpec::from_hypercube_pmf(const Vector& pmf) {
  const Vector p = checked_pmf(pmf);
  DensitySpec d;
  d.log_density = [p](const StatePoint& x) {
    const auto idx = std::get<BitString>(x).index();
    if (idx >= static_cast<std::size_t>(p.size()))
      throw std::out_of_range("hypercube state out of range");
    return log_or_neg_inf(p[static_cast<Eigen::Index>(idx)]);
  };
  d.log_normalizer = 0.0;
  return d;
}

TargetMixture TargetMixture::create(std::vector<DensitySpec> components,
                                    std::vector<double> weights) {
  if (components.empty()) throw std::invalid_argument("mixture: needs at least one component");
  if (components.size() != weights.size())
    throw std::invalid_argument("mixture: component and weight counts differ");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("mixture: weights must be positive and finite");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights do not sum to 1");
  for (const auto& c : components)
    if (!c.log_density) throw std::invalid_argument("mixture: component without log density");

  TargetMixture m;
  m.w_star_ = *std::min_element(weights.begin(), weights.end());
  m.components_ = std::move(components);
  m.weights_ = std::move(weights);
  return m;
}

bool TargetMixture::all_gaussian() const {
  return std::all_of(components_.begin(), components_.end(),
                     [](const DensitySpec& c) { return c.gaussian.has_value(); });
}

double eval_mixture_logdensity(const TargetMixture& m, const StatePoint& x) {
  const std::size_t k = m.size();
  std::vector<double> terms(k);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = m.components()[i];
    if (!c.log_normalizer) throw std::invalid_argument("unnormalized mixture component");
    terms[i] = std::log(m.weights()[i]) + c.log_density(x) - *c.log_normalizer;
    top = std::max(top, terms[i]);
  }
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

namespace {

// All-Gaussian mixtures skip the variant boxing and std::function hops; this
// is the inner loop of every Langevin step.
Vector gaussian_mixture_gradient(const TargetMixture& m, const Vector& x) {
  const std::size_t k = m.size();
  double top = -std::numeric_limits<double>::infinity();
  double stack_terms[8];
  std::vector<double> heap_terms;
  double* terms = stack_terms;
  if (k > 8) {
    heap_terms.resize(k);
    terms = heap_terms.data();
  }
  for (std::size_t i = 0; i < k; ++i) {
    terms[i] = std::log(m.weights()[i]) + m.components()[i].gaussian->log_pdf(x);
    top = std::max(top, terms[i]);
  }
  Vector grad = Vector::Zero(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = std::exp(terms[i] - top);
    if (r == 0.0) continue;
    const auto& g = *m.components()[i].gaussian;
    const Matrix& prec = g.precision();
    const Vector& mu = g.mean();
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      double acc = 0.0;
      for (Eigen::Index l = 0; l < x.size(); ++l) acc += prec(j, l) * (x[l] - mu[l]);
      grad[j] -= r * acc;
    }
    total += r;
  }
  grad /= total;
  return grad;
}

}  // namespace

Vector eval_mixture_gradient(const TargetMixture& m, const Vector& x) {
  if (m.all_gaussian()) return gaussian_mixture_gradient(m, x);
  const std::size_t k = m.size();
  const StatePoint sx = x;
  std::vector<double> terms(k);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = m.components()[i];
    if (!c.log_normalizer) throw std::invalid_argument("unnormalized mixture component");
    if (!c.gradient) throw std::invalid_argument("mixture gradient: component without gradient");
    terms[i] = std::log(m.weights()[i]) + c.log_density(sx) - *c.log_normalizer;
    top = std::max(top, terms[i]);
  }
  Vector grad = Vector::Zero(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = std::exp(terms[i] - top);
    if (r == 0.0) continue;
    grad += r * m.components()[i].gradient(x);
    total += r;
  }
  return grad / total;
}

DensitySpec mixture_density(const TargetMixture& m) {
  DensitySpec d;
  d.log_density = [m](const StatePoint& x) { return eval_mixture_logdensity(m, x); };
  const bool has_grad = std::all_of(m.components().begin(), m.components().end(),
                                    [](const DensitySpec& c) { return bool(c.gradient); });
  if (has_grad) d.gradient = [m](const Vector& x) { return eval_mixture_gradient(m, x); };
  d.log_normalizer = 0.0;
  if (m.size() == 1 && m.components()[0].gaussian) d.gaussian = m.components()[0].gaussian;
  return d;
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::langevin: return "langevin";
    case KernelKind::metropolis_hastings: return "metropolis_hastings";
    case KernelKind::glauber: return "glauber";
    case KernelKind::finite_chain: return "finite_chain";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "langevin") return KernelKind::langevin;
  if (name == "metropolis_hastings") return KernelKind::metropolis_hastings;
  if (name == "glauber") return KernelKind::glauber;
  if (name == "finite_chain") return KernelKind::finite_chain;
  throw std::invalid_argument("unknown kernel kind: " + name);
}

KernelSpec KernelSpec::langevin(double h) {
  KernelSpec k;
  k.kind = KernelKind::langevin;
  k.step_size = h;
  k.validate();
  return k;
}

KernelSpec KernelSpec::metropolis(double scale) {
  KernelSpec k;
  k.kind = KernelKind::metropolis_hastings;
  k.proposal_scale = scale;
  k.validate();
  return k;
}

KernelSpec KernelSpec::glauber() {
  KernelSpec k;
  k.kind = KernelKind::glauber;
  return k;
}

KernelSpec KernelSpec::finite(std::shared_ptr<const FiniteChain> chain) {
  KernelSpec k;
  k.kind = KernelKind::finite_chain;
  k.chain = std::move(chain);
  k.validate();
  return k;
}

void KernelSpec::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("kernel: step_size must be positive");
  if (!(proposal_scale > 0.0) || !std::isfinite(proposal_scale))
    throw std::invalid_argument("kernel: proposal_scale must be positive");
  if (kind == KernelKind::finite_chain && !chain)
    throw std::invalid_argument("kernel: finite_chain kind needs a transition matrix");
}

bool Level::has_normalized_ratio() const {
  return bool(log_normalized_ratio) || (log_ratio_to_prev && log_normalizer_ratio.has_value());
}

double Level::log_gbar(const StatePoint& x) const {
  if (log_normalized_ratio) return log_normalized_ratio(x);
  if (log_ratio_to_prev && log_normalizer_ratio) return log_ratio_to_prev(x) + *log_normalizer_ratio;
  throw std::logic_error("normalized ratio unavailable: normalizers unknown");
}

Ladder Ladder::create(std::vector<Level> levels, double gamma_bound) {
  if (levels.empty()) throw std::invalid_argument("ladder: needs at least one level");
  if (!(gamma_bound >= 1.0) || std::isnan(gamma_bound))
    throw std::invalid_argument("ladder: gamma_bound must be >= 1");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto& lv = levels[k];
    std::ostringstream where;
    where << "ladder level " << (k + 1) << ": ";
    if (!lv.density.log_density) throw std::invalid_argument(where.str() + "missing density");
    if (k > 0 && !lv.log_ratio_to_prev)
      throw std::invalid_argument(where.str() + "missing ratio to previous level");
    if (!(lv.time_budget >= 0.0) || !std::isfinite(lv.time_budget))
      throw std::invalid_argument(where.str() + "time budget must be finite and >= 0");
    if (lv.lsi_constant_bound && !(*lv.lsi_constant_bound > 0.0))
      throw std::invalid_argument(where.str() + "lsi constant bound must be positive");
    lv.kernel.validate();
  }
  Ladder l;
  l.levels_ = std::move(levels);
  l.gamma_bound_ = gamma_bound;
  return l;
}

Ladder Ladder::with_time_budgets(const std::vector<double>& times) const {
  if (times.size() != levels_.size())
    throw std::invalid_argument("ladder: time budget count does not match level count");
  auto levels = levels_;
  for (std::size_t k = 0; k < levels.size(); ++k) levels[k].time_budget = times[k];
  return create(std::move(levels), gamma_bound_);
}

Ladder Ladder::with_kernel(const KernelSpec& kernel) const {
  auto levels = levels_;
  for (auto& lv : levels) lv.kernel = kernel;
  return create(std::move(levels), gamma_bound_);
}

Ladder Ladder::with_gamma_bound(double gamma) const { return create(levels_, gamma); }

LadderValidation validate_ladder(const Ladder& ladder, const std::vector<StatePoint>& probes) {
  LadderValidation report;
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    const auto& lv = ladder.level(k);
    LevelRatioCheck c;
    c.level = k + 1;
    if (lv.has_normalized_ratio()) {
      c.evaluated = true;
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& x : probes) best = std::max(best, lv.log_gbar(x));
      c.max_ratio = std::exp(best);
      c.flagged = c.max_ratio > ladder.gamma_bound();
    }
    report.any_flagged = report.any_flagged || c.flagged;
    report.levels.push_back(c);
  }
  return report;
}

std::vector<StatePoint> grid_probes(std::size_t dim, double lo, double hi, std::size_t per_axis) {
  if (dim == 0 || per_axis == 0) throw std::invalid_argument("grid_probes: empty grid");
  std::size_t total = 1;
  for (std::size_t i = 0; i < dim; ++i) {
    if (total > 10'000'000 / per_axis) throw std::invalid_argument("grid_probes: grid too large");
    total *= per_axis;
  }
  const double step = per_axis > 1 ? (hi - lo) / static_cast<double>(per_axis - 1) : 0.0;
  std::vector<StatePoint> out;
  out.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    Vector x(static_cast<Eigen::Index>(dim));
    std::size_t r = n;
    for (std::size_t i = 0; i < dim; ++i) {
      x[static_cast<Eigen::Index>(i)] = lo + step * static_cast<double>(r % per_axis);
      r /= per_axis;
    }
    out.emplace_back(std::move(x));
  }
  return out;
}

}  // namespace smcmix
