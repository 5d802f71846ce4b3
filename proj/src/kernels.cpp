#include "smcmix/kernels.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace smcmix {

double default_step_size(double curvature) {
  if (!(curvature > 0.0)) return 0.05;
  return 0.05 * std::min(1.0, 1.0 / curvature);
}

std::size_t ula_step_count(double t, double h) {
  if (!(t >= 0.0)) throw std::invalid_argument("ula: time must be >= 0");
  if (!(h > 0.0)) throw std::invalid_argument("ula: step size must be positive");
  if (t == 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(t / h * (1.0 - 1e-12)));
}

StatePoint ula_evolve(const DensitySpec& density, const StatePoint& x, double t, double h, Rng& rng) {
  const std::size_t steps = ula_step_count(t, h);
  if (steps == 0) return x;
  if (!density.gradient) throw std::invalid_argument("ula: density has no gradient");
  Vector y = coordinates(x);
  const double noise = std::sqrt(2.0 * h);
  std::normal_distribution<double> normal;
  Vector xi(y.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const Vector g = density.gradient(y);
    if (!g.allFinite()) {
      std::ostringstream msg;
      msg << "ula: non-finite gradient at x = [" << y.transpose() << "]";
      throw std::runtime_error(msg.str());
    }
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
    y += h * g + noise * xi;
  }
  return y;
}

StatePoint mh_step(const DensitySpec& density, const StatePoint& x, double proposal_scale, Rng& rng) {
  StatePoint y;
  if (const auto* v = std::get_if<Vector>(&x)) {
    std::normal_distribution<double> normal(0.0, proposal_scale);
    Vector z(v->size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = (*v)[i] + normal(rng);
    y = std::move(z);
  } else if (const auto* b = std::get_if<BitString>(&x)) {
    if (b->bits.empty()) return x;
    std::uniform_int_distribution<std::size_t> pick(0, b->bits.size() - 1);
    BitString c = *b;
    const auto i = pick(rng);
    c.bits[i] ^= 1u;
    y = std::move(c);
  } else {
    const auto& f = std::get<FiniteState>(x);
    std::uniform_int_distribution<std::size_t> pick(0, f.n_states - 1);
    y = FiniteState{pick(rng), f.n_states};
  }
  const double log_ratio = density.log_density(y) - density.log_density(x);
  if (log_ratio >= 0.0) return y;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < log_ratio ? y : x;
}

StatePoint glauber_step(const DensitySpec& density, const StatePoint& x, Rng& rng) {
  const auto& b = std::get<BitString>(x);
  if (b.bits.empty()) return x;
  std::uniform_int_distribution<std::size_t> pick(0, b.bits.size() - 1);
  BitString c = b;
  c.bits[pick(rng)] ^= 1u;
  const StatePoint y = c;
  // p(y)/(p(x)+p(y)) = 1/(1 + exp(log p(x) - log p(y)))
  const double diff = density.log_density(x) - density.log_density(y);
  const double flip = 1.0 / (1.0 + std::exp(diff));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return unif(rng) < flip ? y : x;
}

FiniteChain glauber_transition_matrix(const DensitySpec& density, std::size_t dim) {
  if (dim == 0 || dim > 12) throw std::invalid_argument("glauber matrix: need 1 <= d <= 12");
  const std::size_t s = std::size_t{1} << dim;
  Vector logp(static_cast<Eigen::Index>(s));
  for (std::size_t i = 0; i < s; ++i)
    logp[static_cast<Eigen::Index>(i)] = density.log_density(BitString::from_index(i, dim));
  const double top = logp.maxCoeff();
  Vector p = (logp.array() - top).exp().matrix();
  p /= p.sum();

  Matrix pm = Matrix::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
  const double inv_d = 1.0 / static_cast<double>(dim);
  for (std::size_t x = 0; x < s; ++x) {
    const auto xi = static_cast<Eigen::Index>(x);
    double off = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const auto yi = static_cast<Eigen::Index>(x ^ (std::size_t{1} << i));
      const double v = inv_d / (1.0 + std::exp(logp[xi] - logp[yi]));
      pm(xi, yi) = v;
      off += v;
    }
    pm(xi, xi) = 1.0 - off;
  }
  return FiniteChain::create(std::move(pm), std::move(p));
}

FiniteChain metropolis_transition_matrix(const Vector& pmf, const Matrix& proposal) {
  const auto s = pmf.size();
  if (proposal.rows() != s || proposal.cols() != s)
    throw std::invalid_argument("metropolis matrix: proposal shape mismatch");
  if ((proposal - proposal.transpose()).cwiseAbs().maxCoeff() > 1e-14)
    throw std::invalid_argument("metropolis matrix: proposal must be symmetric");
  if ((pmf.array() <= 0.0).any())
    throw std::invalid_argument("metropolis matrix: target must be strictly positive");
  Matrix pm = Matrix::Zero(s, s);
  for (Eigen::Index x = 0; x < s; ++x) {
    double off = 0.0;
    for (Eigen::Index y = 0; y < s; ++y) {
      if (y == x || proposal(x, y) == 0.0) continue;
      const double v = proposal(x, y) * std::min(1.0, pmf[y] / pmf[x]);
      pm(x, y) = v;
      off += v;
    }
    pm(x, x) = 1.0 - off;
  }
  return FiniteChain::create(std::move(pm), pmf / pmf.sum());
}

Matrix bit_flip_proposal(std::size_t dim) {
  const std::size_t s = std::size_t{1} << dim;
  Matrix q = Matrix::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
  for (std::size_t x = 0; x < s; ++x)
    for (std::size_t i = 0; i < dim; ++i)
      q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x ^ (std::size_t{1} << i))) =
          1.0 / static_cast<double>(dim);
  return q;
}

Matrix uniform_proposal(std::size_t n_states) {
  const auto s = static_cast<Eigen::Index>(n_states);
  return Matrix::Constant(s, s, 1.0 / static_cast<double>(n_states));
}

std::size_t sample_row(const FiniteChain& chain, std::size_t from, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  const auto& p = chain.transition();
  const auto r = static_cast<Eigen::Index>(from);
  double acc = 0.0;
  Eigen::Index last = 0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    if (p(r, j) <= 0.0) continue;
    acc += p(r, j);
    last = j;
    if (u < acc) return static_cast<std::size_t>(j);
  }
  return static_cast<std::size_t>(last);
}

PoissonizedResult poissonized_evolve(const JumpSampler& step, const StatePoint& x, double t, Rng& rng) {
  if (!(t >= 0.0)) throw std::invalid_argument("poissonized_evolve: time must be >= 0");
  PoissonizedResult out{x, 0};
  if (t == 0.0) return out;
  std::poisson_distribution<std::size_t> jumps(t);
  out.jumps = jumps(rng);
  for (std::size_t k = 0; k < out.jumps; ++k) out.state = step(out.state, rng);
  return out;
}

PoissonizedResult poissonized_evolve(const FiniteChain& chain, const StatePoint& x, double t, Rng& rng) {
  JumpSampler step = [&chain](const StatePoint& s, Rng& r) -> StatePoint {
    const std::size_t next = sample_row(chain, state_index(s), r);
    if (const auto* b = std::get_if<BitString>(&s)) return BitString::from_index(next, b->bits.size());
    return FiniteState{next, chain.size()};
  };
  return poissonized_evolve(step, x, t, rng);
}

StatePoint apply_kernel(const Level& level, const StatePoint& x, Rng& rng) {
  const double t = level.time_budget;
  if (t == 0.0) return x;
  const auto& k = level.kernel;
  switch (k.kind) {
    case KernelKind::langevin:
      return ula_evolve(level.density, x, t, k.step_size, rng);
    case KernelKind::metropolis_hastings: {
      const double scale = k.proposal_scale;
      JumpSampler step = [&level, scale](const StatePoint& s, Rng& r) {
        return mh_step(level.density, s, scale, r);
      };
      return poissonized_evolve(step, x, t, rng).state;
    }
    case KernelKind::glauber: {
      JumpSampler step = [&level](const StatePoint& s, Rng& r) {
        return glauber_step(level.density, s, r);
      };
      return poissonized_evolve(step, x, t, rng).state;
    }
    case KernelKind::finite_chain:
      return poissonized_evolve(*k.chain, x, t, rng).state;
  }
  throw std::logic_error("apply_kernel: unknown kernel kind");
}

}  // namespace smcmix
