#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "smcmix/bounds.hpp"
#include "smcmix/kernels.hpp"
#include "smcmix/oracle.hpp"

namespace smcmix::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Records a slack value; the first (most negative) violation becomes the witness.
void record(CheckReport& r, double slack, double tolerance, const Vector& f,
            std::optional<double> time = std::nullopt) {
  ++r.trials;
  if (r.trials == 1 || slack < r.min_slack) {
    r.min_slack = slack;
    if (slack < -tolerance) {
      r.passed = false;
      r.witness = f;
      r.witness_time = time;
    }
  }
}

std::vector<double> component_poincare(const FiniteMixture& mix) {
  std::vector<double> c;
  for (const auto& comp : mix.components()) c.push_back(poincare_constant(comp));
  return c;
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

Vector random_nonnegative(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector f(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = u(rng);
  return f;
}

Vector random_positive(std::size_t n, Rng& rng) {
  std::normal_distribution<double> z;
  Vector f(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = std::exp(z(rng));
  return f;
}

Vector random_signed(std::size_t n, Rng& rng) {
  std::normal_distribution<double> z;
  Vector f(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = z(rng);
  return f;
}

CheckReport check_generator_decomposition(const FiniteMixture& mix, std::size_t trials, Rng& rng,
                                          double tolerance) {
  CheckReport r;
  r.name = "decomposition";
  for (std::size_t i = 0; i < trials; ++i) {
    const Vector f = random_signed(mix.size(), rng);
    double parts = 0.0;
    for (std::size_t k = 0; k < mix.components().size(); ++k)
      parts += mix.weights()[k] * dirichlet_form(mix.components()[k], f);
    record(r, dirichlet_form(mix.chain(), f) - parts, tolerance, f);
  }
  return r;
}

VarianceDecayReport variance_decay_check(const FiniteMixture& mix, const std::vector<double>& t_grid,
                                         std::size_t trials, Rng& rng, std::optional<double> c_star,
                                         std::size_t convexity_points) {
  VarianceDecayReport out;
  out.c_star = c_star ? *c_star : max_of(component_poincare(mix));
  out.inequality.name = "variance_decay";
  out.convexity.name = "variance_convexity";
  if (t_grid.empty()) throw std::invalid_argument("variance_decay_check: empty T grid");
  const SpectralSemigroup sg(mix.chain());
  const Vector& pi = mix.chain().stationary();

  std::vector<Matrix> at_t;
  for (double t : t_grid) at_t.push_back(sg.at(t));
  const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  std::vector<Matrix> conv;
  const std::size_t pts = std::max<std::size_t>(3, convexity_points);
  for (std::size_t i = 0; i < pts; ++i) conv.push_back(sg.at(t_max * double(i) / double(pts - 1)));

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const Vector f = random_signed(mix.size(), rng);
    const double var_f = variance(pi, f);
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
      const Vector pf = at_t[j] * f;
      double lhs = 0.0;
      for (std::size_t k = 0; k < mix.components().size(); ++k)
        lhs += mix.weights()[k] * variance(mix.components()[k].stationary(), pf);
      const double rhs = t_grid[j] > 0.0 ? out.c_star / (2.0 * t_grid[j]) * var_f : kInf;
      record(out.inequality, rhs - lhs, 1e-12, f, t_grid[j]);
    }
    std::vector<double> v;
    for (const auto& m : conv) v.push_back(variance(pi, m * f));
    for (std::size_t i = 1; i + 1 < v.size(); ++i)
      record(out.convexity, v[i + 1] - 2.0 * v[i] + v[i - 1], 1e-10, f,
             t_max * double(i) / double(pts - 1));
  }
  return out;
}

InterIntra inter_intra_decomposition(const TwoLevelLadder& ladder, const Vector& f, double t,
                                     std::optional<double> c_star) {
  const FiniteMixture& lower = ladder.lower;
  const Vector& mu = lower.chain().stationary();
  const Vector q = semigroup(lower.chain(), t) * ladder.gbar.cwiseProduct(f);
  const double cs = c_star ? *c_star : max_of(component_poincare(lower));
  InterIntra out;
  const double mean = expectation(mu, q);
  double inv_w = 0.0;
  for (std::size_t i = 0; i < lower.components().size(); ++i) {
    const Vector& pi_i = lower.components()[i].stationary();
    const double w = lower.weights()[i];
    out.intra += w * variance(pi_i, q);
    const double d = expectation(pi_i, q) - mean;
    out.inter += w * d * d;
    inv_w += 1.0 / w;
  }
  out.total = variance(mu, q);
  const double mk_f2 = expectation(ladder.upper, f.cwiseAbs2());
  const double mk_f = expectation(ladder.upper, f);
  out.intra_bound = t > 0.0 ? cs * ladder.gamma / (2.0 * t) * mk_f2 : kInf;
  out.inter_bound = inv_w * mk_f * mk_f;
  return out;
}

CheckReport inter_intra_check(const TwoLevelLadder& ladder, double t, std::size_t trials, Rng& rng) {
  CheckReport r;
  r.name = "inter_intra";
  const double cs = max_of(component_poincare(ladder.lower));
  for (std::size_t i = 0; i < trials; ++i) {
    const Vector f = random_nonnegative(ladder.upper.size(), rng);
    const InterIntra d = inter_intra_decomposition(ladder, f, t, cs);
    const double identity = -std::abs(d.total - d.intra - d.inter);
    const double slack = std::min({identity, d.intra_bound - d.intra, d.inter_bound - d.inter});
    record(r, slack, 1e-12, f, t);
  }
  return r;
}

double time_for_lambda(const TwoLevelLadder& ladder, double lambda) {
  const double cs = max_of(component_poincare(ladder.lower));
  return cs * ladder.gamma / (2.0 * lambda);
}

CheckReport single_step_check(const TwoLevelLadder& ladder, double t, std::size_t trials, Rng& rng) {
  CheckReport r;
  r.name = "single_step";
  const FiniteMixture& lower = ladder.lower;
  const double cs = max_of(component_poincare(lower));
  const SingleStepConstants k = single_step_constants(cs, ladder.gamma, t, lower.weights());
  const Matrix pt = semigroup(lower.chain(), t);
  const Vector& mu = lower.chain().stationary();
  for (std::size_t i = 0; i < trials; ++i) {
    const Vector f = random_nonnegative(ladder.upper.size(), rng);
    const Vector q = pt * ladder.gbar.cwiseProduct(f);
    const double lhs = expectation(mu, q.cwiseAbs2());
    const double mf = expectation(ladder.upper, f);
    const double rhs = k.lambda * expectation(ladder.upper, f.cwiseAbs2()) + k.beta * mf * mf;
    record(r, rhs - lhs, 1e-12, f, t);
  }
  std::ostringstream d;
  d << "lambda=" << k.lambda << " beta=" << k.beta << " gamma=" << ladder.gamma;
  r.detail = d.str();
  return r;
}

HypercontractivityReport hypercontractivity_check(const FiniteMixture& mix, double p,
                                                  const std::vector<double>& t_grid, std::size_t trials,
                                                  Rng& rng, std::optional<double> c_star, double tolerance) {
  HypercontractivityReport out;
  out.monotone.name = "hypercontractivity";
  if (c_star) {
    out.c_star = *c_star;
  } else {
    for (std::size_t k = 0; k < mix.components().size(); ++k)
      out.c_star = std::max(out.c_star, lsi_constant_estimate(mix.components()[k], 16, 1000 + k).value);
  }
  const double ws = mix.w_star();
  const Vector& pi = mix.chain().stationary();
  const SpectralSemigroup sg(mix.chain());
  std::vector<Matrix> at_t;
  for (double t : t_grid) at_t.push_back(sg.at(t));
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const Vector f = random_positive(mix.size(), rng);
    double prev = kInf;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
      const double q = q_of_t(p, out.c_star, t_grid[j]);
      const double cur = lp_norm(pi, at_t[j] * f, q) / std::pow(ws, 1.0 / q);
      if (j > 0) record(out.monotone, (prev - cur) / std::max(1.0, prev), tolerance, f, t_grid[j]);
      prev = cur;
    }
  }
  std::ostringstream d;
  d << "C*=" << out.c_star << " w*=" << ws;
  out.monotone.detail = d.str();
  return out;
}

EntropySplit entropy_decomposition(const FiniteMixture& mix, const Vector& f) {
  const Vector g = f.cwiseAbs2();
  EntropySplit s;
  s.total = entropy(mix.chain().stationary(), g);
  const std::size_t m = mix.components().size();
  Vector h(static_cast<Eigen::Index>(m)), w(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    const Vector& pk = mix.components()[k].stationary();
    s.within += mix.weights()[k] * entropy(pk, g);
    h[static_cast<Eigen::Index>(k)] = expectation(pk, g);
    w[static_cast<Eigen::Index>(k)] = mix.weights()[k];
  }
  s.between = entropy(w, h);
  return s;
}

CheckReport entropy_decomposition_check(const FiniteMixture& mix, std::size_t trials, Rng& rng,
                                        double tolerance) {
  CheckReport r;
  r.name = "entropy";
  for (std::size_t i = 0; i < trials; ++i) {
    const Vector f = random_positive(mix.size(), rng);
    const EntropySplit s = entropy_decomposition(mix, f);
    // Roundoff grows with the magnitude of the summands, so compare on the
    // scale of E[f^2 |log f^2|].
    const Vector g = f.cwiseAbs2();
    const double scale =
        std::max(1.0, expectation(mix.chain().stationary(), g.cwiseProduct(g.array().log().abs().matrix())));
    record(r, -std::abs(s.total - s.within - s.between) / scale, tolerance, f);
  }
  return r;
}

CheckReport density_ratio_contraction_check(const FiniteMixture& mix, const std::vector<double>& t_grid) {
  CheckReport r;
  r.name = "contraction";
  const Vector& mu = mix.chain().stationary();
  const SpectralSemigroup sg(mix.chain());
  for (double t : t_grid) {
    const Matrix pt = sg.at(t);
    for (const auto& comp : mix.components()) {
      const Vector& pi_i = comp.stationary();
      const double before = (pi_i.cwiseQuotient(mu).array() - 1.0).abs().maxCoeff();
      const Vector moved = pt.transpose() * pi_i;
      const double after = (moved.cwiseQuotient(mu).array() - 1.0).abs().maxCoeff();
      record(r, before - after, 1e-12, pi_i, t);
    }
  }
  return r;
}

CheckReport semigroup_check(const FiniteChain& chain, const std::vector<double>& t_grid) {
  CheckReport r;
  r.name = "semigroup";
  const auto s = static_cast<Eigen::Index>(chain.size());
  const Vector ones = Vector::Ones(s);
  for (double t : t_grid) {
    const Matrix a = semigroup(chain, t);
    const Matrix b = semigroup(chain, t, SemigroupMethod::pade);
    const double rows = (a * ones - ones).cwiseAbs().maxCoeff();
    const double agree = (a - b).cwiseAbs().maxCoeff();
    const Matrix half = semigroup(chain, 0.5 * t);
    const double law = (half * half - a).cwiseAbs().maxCoeff();
    record(r, 1e-10 - std::max({rows, agree, law}), 0.0, ones, t);
  }
  return r;
}

CheckReport poincare_check(const FiniteChain& chain, std::size_t trials, Rng& rng) {
  CheckReport r;
  r.name = "poincare";
  const double c = poincare_constant(chain);
  const Vector& pi = chain.stationary();
  for (std::size_t i = 0; i < trials; ++i) {
    const Vector f = random_signed(chain.size(), rng);
    record(r, c * dirichlet_form(chain, f) - variance(pi, f), 1e-12, f);
  }
  const Vector v = gap_eigenfunction(chain);
  const double var = variance(pi, v);
  record(r, 1e-9 * var - std::abs(var - c * dirichlet_form(chain, v)), 0.0, v);
  return r;
}

// ---------------------------------------------------------------- suite

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.passed; });
}

std::vector<std::string> suite_names() {
  return {"decomposition", "variance_decay", "inter_intra", "single_step", "hypercontractivity",
          "entropy",       "contraction",    "semigroup",   "poincare"};
}

namespace {

struct DecompositionCase {
  std::string label;
  std::size_t dim;
  std::vector<std::vector<double>> probs;
  std::vector<double> weights;
};

std::vector<DecompositionCase> decomposition_cases() {
  return {
      {"d2_w0.2-0.8", 2, {{0.2, 0.3}, {0.8, 0.7}}, {0.2, 0.8}},
      {"d2_w0.3-0.3-0.4", 2, {{0.1, 0.2}, {0.5, 0.9}, {0.85, 0.6}}, {0.3, 0.3, 0.4}},
      {"d3_w0.2-0.8", 3, {{0.15, 0.2, 0.1}, {0.85, 0.9, 0.8}}, {0.2, 0.8}},
      {"d3_w0.3-0.3-0.4", 3, {{0.1, 0.2, 0.15}, {0.9, 0.1, 0.5}, {0.8, 0.85, 0.9}}, {0.3, 0.3, 0.4}},
  };
}

bool selected(const std::vector<std::string>& sel, const std::string& name) {
  return std::find(sel.begin(), sel.end(), "all") != sel.end() ||
         std::find(sel.begin(), sel.end(), name) != sel.end();
}

void rename(CheckReport& r, const std::string& name) { r.name = name; }

}  // namespace

VerifyReport run_verify_suite(const std::vector<std::string>& selectors, std::uint64_t seed) {
  const auto known = suite_names();
  for (const auto& s : selectors)
    if (s != "all" && std::find(known.begin(), known.end(), s) == known.end())
      throw std::invalid_argument("unknown verify suite: " + s);

  VerifyReport rep;
  rep.seed = seed;
  std::uint64_t stream = 0;
  auto next_rng = [&] { return make_rng(seed, stream++); };

  if (selected(selectors, "decomposition")) {
    for (const auto& c : decomposition_cases()) {
      std::vector<Vector> pmfs;
      for (const auto& p : c.probs) pmfs.push_back(product_measure_pmf(p));
      Rng g1 = next_rng();
      auto r1 = check_generator_decomposition(glauber_mixture(c.dim, pmfs, c.weights), 1000, g1);
      rename(r1, "decomposition/glauber/" + c.label);
      rep.checks.push_back(r1);
      Rng g2 = next_rng();
      auto r2 = check_generator_decomposition(metropolis_mixture(bit_flip_proposal(c.dim), pmfs, c.weights),
                                              1000, g2);
      rename(r2, "decomposition/metropolis_bitflip/" + c.label);
      rep.checks.push_back(r2);
    }
    const auto c = decomposition_cases()[3];
    std::vector<Vector> pmfs;
    for (const auto& p : c.probs) pmfs.push_back(product_measure_pmf(p));
    Rng g = next_rng();
    auto r = check_generator_decomposition(metropolis_mixture(uniform_proposal(8), pmfs, c.weights), 1000, g);
    rename(r, "decomposition/metropolis_uniform/" + c.label);
    rep.checks.push_back(r);
  } else {
    stream += 9;
  }

  if (selected(selectors, "variance_decay")) {
    Rng g = next_rng();
    auto v = variance_decay_check(eight_state_glauber_mixture(), {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}, 100, g);
    rep.checks.push_back(v.inequality);
    rep.checks.push_back(v.convexity);
  } else {
    ++stream;
  }

  if (selected(selectors, "inter_intra")) {
    Rng g = next_rng();
    const auto ladder = eight_state_ladder();
    rep.checks.push_back(inter_intra_check(ladder, time_for_lambda(ladder, 0.5), 1000, g));
  } else {
    ++stream;
  }

  if (selected(selectors, "single_step")) {
    Rng g = next_rng();
    const auto ladder = eight_state_ladder();
    rep.checks.push_back(single_step_check(ladder, time_for_lambda(ladder, 0.5), 1000, g));
  } else {
    ++stream;
  }

  if (selected(selectors, "hypercontractivity")) {
    Rng g = next_rng();
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) grid.push_back(5.0 * i / 19.0);
    rep.checks.push_back(hypercontractivity_check(eight_state_glauber_mixture(), 2.0, grid, 100, g).monotone);
  } else {
    ++stream;
  }

  if (selected(selectors, "entropy")) {
    Rng g1 = next_rng();
    auto e2 = entropy_decomposition_check(eight_state_glauber_mixture(), 1000, g1);
    rename(e2, "entropy/two_component");
    rep.checks.push_back(e2);
    Rng g2 = next_rng();
    auto e3 = entropy_decomposition_check(eight_state_three_component_mixture(), 1000, g2);
    rename(e3, "entropy/three_component");
    rep.checks.push_back(e3);
  } else {
    stream += 2;
  }

  if (selected(selectors, "contraction"))
    rep.checks.push_back(density_ratio_contraction_check(eight_state_glauber_mixture(), {0.1, 0.5, 1.0, 5.0}));

  if (selected(selectors, "semigroup"))
    rep.checks.push_back(semigroup_check(four_state_chain(), {0.0, 0.5, 1.3, 4.0, 100.0}));

  if (selected(selectors, "poincare")) {
    Rng g = next_rng();
    rep.checks.push_back(poincare_check(eight_state_glauber_mixture().chain(), 1000, g));
  }
  return rep;
}

}  // namespace smcmix::oracle
