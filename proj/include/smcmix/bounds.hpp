#pragma once

// Closed-form constants and sample-size / time prescriptions. Everything is
// evaluated exactly as the formulas read, including where they are loose.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace smcmix {

struct AssumptionParams {
  std::size_t n = 1;
  std::size_t M = 1;
  double w_star = 1.0;
  double gamma = 1.0;
  /// One entry per level, or a single entry applied to every level.
  std::vector<double> c_star_per_level;
  /// ||f - mu_n(f)||_sup
  double f_sup_bound = 1.0;
  /// ||f||_{L^p(mu_n)} for the complete-form prescription; defaults to f_sup_bound.
  std::optional<double> f_lp_norm;
  double epsilon = 0.5;
  double delta = 0.1;
  /// Moment order for the complete form: a power of 2, >= 4.
  unsigned p = 4;
  /// Single-step contraction; defaults to 1 / (2 gamma^{2p-2}).
  std::optional<double> alpha;
  /// 1 + max_k sum_i 1/w_k^(i) when the weights are known; else 1 + M/w_star.
  std::optional<double> beta;

  void validate() const;
  double c_star(std::size_t level) const;
  double c_star_max() const;
};

struct SingleStepConstants {
  double lambda = 0.0;
  double beta = 0.0;
};

/// lambda = c* gamma / (2t), beta = 1 + sum 1/w_i.
SingleStepConstants single_step_constants(double c_star, double gamma, double t,
                                          const std::vector<double>& weights);

struct DeltaEntry {
  unsigned p = 1;
  double value = 1.0;
};

/// delta(1) = 1, delta(2q) = delta(q) (beta gamma^{2q-2} / (1 - alpha gamma^{2q-2}))^{1/(2q)}
/// for q = 1, 2, 4, ... up to p_target / 2.
std::vector<DeltaEntry> delta_recursion(unsigned p_target, double alpha, double beta, double gamma);
double delta_at(const std::vector<DeltaEntry>& table, unsigned p);

/// (1/w*)^{1/p - 1/q}
double theta_hyper(double q, double p, double w_star);

/// 1 + (p-1) e^{2t/c*}
double q_of_t(double p, double c_star, double t);

struct ChatVbar {
  double c_hat = 0.0;
  double v_bar = 0.0;
};

/// c_hat = n (3+gamma) gamma^{(2p-1)/p} delta(2p)^2 theta,
/// v_bar = n gamma beta / (1 - alpha).
ChatVbar chat_vbar(const AssumptionParams& params, double alpha, double beta,
                   const std::vector<DeltaEntry>& delta_table, double theta);

enum class Guarantee { mse, high_probability, total_variation };
std::string to_string(Guarantee g);
Guarantee guarantee_from_string(const std::string& name);

struct Branch {
  std::string label;
  double value = 0.0;
};

struct Prescription {
  /// simplified_mse | high_probability | total_variation | complete_mse | convolution
  std::string source;
  std::vector<Branch> n_branches;
  std::size_t n_particles = 1;
  std::vector<double> t_per_level;
};

struct QSample {
  double t = 0.0;
  double q = 0.0;
};

struct BoundReport {
  AssumptionParams params;
  Guarantee guarantee = Guarantee::mse;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> lambda_per_level;
  std::vector<DeltaEntry> delta_table;
  /// theta(p, p/2)
  double theta = 1.0;
  std::vector<QSample> q_samples;
  double c_hat = 0.0;
  double v_bar = 0.0;
  /// Headline prescription (simplified form, or the convolution variant).
  Prescription main;
  /// Complete form for the chosen alpha and p.
  Prescription complete;
  /// delta(8) against (2 beta)^{7/8} gamma^{5/4}, at alpha = 1/(2 gamma^6).
  double delta8_simplified = 0.0;
  double delta8_simplified_bound = 0.0;

  std::size_t prescribed_n() const { return main.n_particles; }
  const std::vector<double>& prescribed_t() const { return main.t_per_level; }
};

/// ceil with a relative guard so 640.0000000000001 rounds to 640; saturates
/// at SIZE_MAX.
std::size_t guarded_ceil(double v);

BoundReport prescribe_main(const AssumptionParams& params, Guarantee guarantee = Guarantee::mse);

/// Convolution ladder: per-level constant C* + sigma^2/b_k and
/// gamma = max_k (b_k/b_{k-1})^{d/2}. betas holds b_1..b_{n-1}.
BoundReport prescribe_convolution(const AssumptionParams& params, double sigma,
                                  const std::vector<double>& betas, std::size_t dim,
                                  Guarantee guarantee = Guarantee::mse);

/// 1 + max_k sum_i 1/w_k^(i).
double beta_from_weights(const std::vector<std::vector<double>>& per_level_weights);

}  // namespace smcmix
