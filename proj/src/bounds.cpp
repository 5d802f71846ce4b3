#include "smcmix/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace smcmix {

namespace {

bool power_of_two(unsigned p) { return p >= 1 && (p & (p - 1)) == 0; }

}  // namespace

void AssumptionParams::validate() const {
  if (n < 1) throw std::invalid_argument("params: n must be >= 1");
  if (M < 1) throw std::invalid_argument("params: M must be >= 1");
  if (!(w_star > 0.0 && w_star <= 1.0)) throw std::invalid_argument("params: w_star must lie in (0, 1]");
  if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw std::invalid_argument("params: gamma must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("params: epsilon must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("params: delta must lie in (0, 1)");
  if (!(f_sup_bound >= 0.0) || !std::isfinite(f_sup_bound))
    throw std::invalid_argument("params: f_sup_bound must be finite and >= 0");
  if (f_lp_norm && !(*f_lp_norm >= 0.0)) throw std::invalid_argument("params: f_lp_norm must be >= 0");
  if (!power_of_two(p) || p < 4) throw std::invalid_argument("params: p must be a power of 2, >= 4");
  if (c_star_per_level.empty()) throw std::invalid_argument("params: missing C* per level");
  if (c_star_per_level.size() != 1 && c_star_per_level.size() != n)
    throw std::invalid_argument("params: C* needs one entry or one per level");
  for (double c : c_star_per_level)
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("params: C* must be positive");
  if (alpha && !(*alpha > 0.0 && *alpha < 1.0)) throw std::invalid_argument("params: alpha must lie in (0, 1)");
  if (beta && !(*beta > 1.0)) throw std::invalid_argument("params: beta must exceed 1");
}

double AssumptionParams::c_star(std::size_t level) const {
  return c_star_per_level.size() == 1 ? c_star_per_level[0] : c_star_per_level.at(level);
}

double AssumptionParams::c_star_max() const {
  return *std::max_element(c_star_per_level.begin(), c_star_per_level.end());
}

SingleStepConstants single_step_constants(double c_star, double gamma, double t,
                                          const std::vector<double>& weights) {
  if (!(t > 0.0)) throw std::invalid_argument("single_step_constants: t must be positive");
  SingleStepConstants s;
  s.lambda = c_star * gamma / (2.0 * t);
  s.beta = 1.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("single_step_constants: weights must be positive");
    s.beta += 1.0 / w;
  }
  return s;
}

std::vector<DeltaEntry> delta_recursion(unsigned p_target, double alpha, double beta, double gamma) {
  if (!power_of_two(p_target)) throw std::invalid_argument("delta_recursion: p must be a power of 2");
  std::vector<DeltaEntry> table{{1, 1.0}};
  for (unsigned q = 1; q < p_target; q *= 2) {
    const double g = std::pow(gamma, 2.0 * q - 2.0);
    if (alpha * g >= 1.0) {
      std::ostringstream msg;
      msg << "recursion diverges at p = " << q;
      throw std::domain_error(msg.str());
    }
    const double step = std::pow(beta * g / (1.0 - alpha * g), 1.0 / (2.0 * q));
    table.push_back({2 * q, table.back().value * step});
  }
  return table;
}

double delta_at(const std::vector<DeltaEntry>& table, unsigned p) {
  for (const auto& e : table)
    if (e.p == p) return e.value;
  throw std::out_of_range("delta table has no entry for the requested p");
}

double theta_hyper(double q, double p, double w_star) {
  if (!(p >= 1.0) || !(q > p)) throw std::invalid_argument("theta_hyper: need q > p >= 1");
  if (!(w_star > 0.0 && w_star <= 1.0)) throw std::invalid_argument("theta_hyper: w_star must lie in (0, 1]");
  return std::pow(1.0 / w_star, 1.0 / p - 1.0 / q);
}

double q_of_t(double p, double c_star, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("q_of_t: t must be >= 0");
  return 1.0 + (p - 1.0) * std::exp(2.0 * t / c_star);
}

ChatVbar chat_vbar(const AssumptionParams& params, double alpha, double beta,
                   const std::vector<DeltaEntry>& delta_table, double theta) {
  const double n = static_cast<double>(params.n);
  const double p = static_cast<double>(params.p);
  const double g = params.gamma;
  const double d2p = delta_at(delta_table, 2 * params.p);
  ChatVbar r;
  r.c_hat = n * (3.0 + g) * std::pow(g, (2.0 * p - 1.0) / p) * d2p * d2p * theta;
  r.v_bar = n * g * beta / (1.0 - alpha);
  return r;
}

std::string to_string(Guarantee g) {
  switch (g) {
    case Guarantee::mse: return "mse";
    case Guarantee::high_probability: return "high_probability";
    case Guarantee::total_variation: return "total_variation";
  }
  return "unknown";
}

Guarantee guarantee_from_string(const std::string& name) {
  if (name == "mse") return Guarantee::mse;
  if (name == "high_probability") return Guarantee::high_probability;
  if (name == "total_variation") return Guarantee::total_variation;
  throw std::invalid_argument("unknown guarantee: " + name);
}

std::size_t guarded_ceil(double v) {
  if (!std::isfinite(v)) throw std::overflow_error("prescribed value is not finite");
  const double c = std::ceil(v * (1.0 - 1e-12));
  constexpr auto top = std::numeric_limits<std::size_t>::max();
  if (c >= static_cast<double>(top)) return top;
  return static_cast<std::size_t>(std::max(1.0, c));
}

double beta_from_weights(const std::vector<std::vector<double>>& per_level_weights) {
  double worst = 0.0;
  for (const auto& ws : per_level_weights) {
    double s = 0.0;
    for (double w : ws) s += 1.0 / w;
    worst = std::max(worst, s);
  }
  return 1.0 + worst;
}

namespace {

Prescription simplified(const AssumptionParams& pr, Guarantee g, const std::vector<double>& c_levels) {
  const double n = static_cast<double>(pr.n);
  const double M = static_cast<double>(pr.M);
  const double gam = pr.gamma;
  const double ws = pr.w_star;
  const double sup2 = pr.f_sup_bound * pr.f_sup_bound;
  Prescription out;
  Branch first;
  switch (g) {
    case Guarantee::mse:
      out.source = "simplified_mse";
      first = {"variance", n * 4.0 * gam * M / (ws * pr.epsilon) * (1.0 + 3.0 * sup2)};
      break;
    case Guarantee::high_probability:
      out.source = "high_probability";
      first = {"variance", n * 4.0 * gam * M / (ws * pr.epsilon * pr.epsilon * pr.delta) * (1.0 + 3.0 * sup2)};
      break;
    case Guarantee::total_variation:
      out.source = "total_variation";
      first = {"variance", n * 16.0 * gam * M / (ws * pr.epsilon * pr.epsilon)};
      break;
  }
  const Branch second{"hypercontractive",
                      n * 128.0 * std::pow(gam, 35.0 / 8.0) * std::pow(M, 7.0 / 4.0) /
                          std::pow(ws, 15.0 / 8.0)};
  out.n_branches = {first, second};
  out.n_particles = guarded_ceil(std::max(first.value, second.value));
  for (double c : c_levels) out.t_per_level.push_back(2.0 * c * std::pow(gam, 7.0));
  return out;
}

void fill_common(BoundReport& rep, const std::vector<double>& c_levels) {
  const AssumptionParams& pr = rep.params;
  const double p = static_cast<double>(pr.p);
  rep.alpha = pr.alpha ? *pr.alpha : 1.0 / (2.0 * std::pow(pr.gamma, 2.0 * p - 2.0));
  rep.beta = pr.beta ? *pr.beta : 1.0 + static_cast<double>(pr.M) / pr.w_star;
  rep.delta_table = delta_recursion(2 * pr.p, rep.alpha, rep.beta, pr.gamma);
  rep.theta = pr.w_star < 1.0 ? theta_hyper(p, p / 2.0, pr.w_star) : 1.0;
  const ChatVbar cv = chat_vbar(pr, rep.alpha, rep.beta, rep.delta_table, rep.theta);
  rep.c_hat = cv.c_hat;
  rep.v_bar = cv.v_bar;

  // Complete form, printed constants.
  const double n = static_cast<double>(pr.n);
  const double g = pr.gamma;
  const double lp = pr.f_lp_norm ? *pr.f_lp_norm : pr.f_sup_bound;
  const double d2p = delta_at(rep.delta_table, 2 * pr.p);
  Prescription& c = rep.complete;
  c.source = "complete_mse";
  const Branch b1{"variance", n / pr.epsilon * (g * rep.beta / (1.0 - rep.alpha)) *
                                  (1.0 + lp * lp + 2.0 * pr.f_sup_bound * pr.f_sup_bound)};
  const Branch b2{"hypercontractive", 2.0 * n * (3.0 + g) * std::pow(g, (2.0 * p - 1.0) / (2.0 * p)) *
                                          d2p * d2p / std::pow(pr.w_star, 1.0 / (2.0 * p))};
  c.n_branches = {b1, b2};
  c.n_particles = guarded_ceil(std::max(b1.value, b2.value));
  const double mix = std::max(g / rep.alpha, std::log((p - 1.0) / (p / 2.0 - 1.0)));
  for (double cs : c_levels) {
    const double t = 0.5 * cs * mix;
    c.t_per_level.push_back(t);
    rep.lambda_per_level.push_back(cs * g / (2.0 * t));
  }

  const double cmax = *std::max_element(c_levels.begin(), c_levels.end());
  const double t_end = c.t_per_level.empty() ? 0.0 : *std::max_element(c.t_per_level.begin(), c.t_per_level.end());
  for (double frac : {0.0, 0.25, 0.5, 1.0}) {
    const double t = frac * t_end;
    rep.q_samples.push_back({t, q_of_t(p / 2.0, cmax, t)});
  }

  const double a8 = 1.0 / (2.0 * std::pow(g, 6.0));
  rep.delta8_simplified = delta_at(delta_recursion(8, a8, rep.beta, g), 8);
  rep.delta8_simplified_bound = std::pow(2.0 * rep.beta, 7.0 / 8.0) * std::pow(g, 5.0 / 4.0);
}

std::vector<double> per_level(const AssumptionParams& pr) {
  std::vector<double> out;
  for (std::size_t k = 0; k < pr.n; ++k) out.push_back(pr.c_star(k));
  return out;
}

}  // namespace

BoundReport prescribe_main(const AssumptionParams& params, Guarantee guarantee) {
  params.validate();
  BoundReport rep;
  rep.params = params;
  rep.guarantee = guarantee;
  const auto c_levels = per_level(params);
  rep.main = simplified(params, guarantee, c_levels);
  fill_common(rep, c_levels);
  return rep;
}

BoundReport prescribe_convolution(const AssumptionParams& params, double sigma,
                                  const std::vector<double>& betas, std::size_t dim,
                                  Guarantee guarantee) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("prescribe_convolution: sigma must be >= 0");
  if (dim == 0) throw std::invalid_argument("prescribe_convolution: dim must be >= 1");
  for (std::size_t k = 0; k < betas.size(); ++k) {
    if (!(betas[k] > 0.0)) throw std::invalid_argument("prescribe_convolution: betas must be positive");
    if (k > 0 && betas[k] < betas[k - 1])
      throw std::invalid_argument("prescribe_convolution: betas must be non-decreasing");
  }
  AssumptionParams pr = params;
  pr.n = betas.size() + 1;
  const double base = params.c_star_max();
  double gamma = 1.0;
  for (std::size_t k = 1; k < betas.size(); ++k)
    gamma = std::max(gamma, std::pow(betas[k] / betas[k - 1], 0.5 * static_cast<double>(dim)));
  pr.gamma = std::max(params.gamma, gamma);
  pr.c_star_per_level.clear();
  for (double b : betas) pr.c_star_per_level.push_back(base + sigma * sigma / b);
  pr.c_star_per_level.push_back(base);
  pr.validate();

  BoundReport rep;
  rep.params = pr;
  rep.guarantee = guarantee;
  rep.main = simplified(pr, guarantee, pr.c_star_per_level);
  rep.main.source = "convolution";
  fill_common(rep, pr.c_star_per_level);
  return rep;
}

}  // namespace smcmix
