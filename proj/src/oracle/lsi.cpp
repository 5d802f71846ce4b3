#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "smcmix/oracle.hpp"

namespace smcmix::oracle {

namespace {

// Below this spread of u, Ent(f^2) and E(f, f) are both O(spread^2) and
// rounding dominates their ratio. The near-constant limit is the Poincare
// term of the estimate, so such iterates are rejected.
constexpr double kMinSpread = 1e-4;

struct Objective {
  Vector pi;
  Matrix a;  // symmetric part of D (I - P)

  explicit Objective(const FiniteChain& chain) : pi(chain.stationary()) {
    const auto s = pi.size();
    const Matrix m = pi.asDiagonal() * (Matrix::Identity(s, s) - chain.transition());
    a = 0.5 * (m + m.transpose());
  }

  /// Ratio at f = e^u; gradient with respect to u written into grad.
  double eval(const Vector& u, Vector* grad) const {
    if (u.maxCoeff() - u.minCoeff() < kMinSpread) return -std::numeric_limits<double>::infinity();
    const Vector f = (u.array() - u.maxCoeff()).exp().matrix();
    const Vector g = f.cwiseAbs2();
    const double m = pi.dot(g);
    const Vector logr = (g / m).array().log().matrix();
    const double ent = pi.dot(g.cwiseProduct(logr));
    const Vector af = a * f;
    const double e = f.dot(af);
    if (!(e > 0.0)) return 0.0;
    if (grad) {
      const Vector dent = 2.0 * g.cwiseProduct(pi).cwiseProduct(logr);
      const Vector de = 2.0 * af.cwiseProduct(f);
      *grad = (dent * e - ent * de) / (e * e);
    }
    return ent / e;
  }
};

}  // namespace

double lsi_ratio(const FiniteChain& chain, const Vector& f) {
  const double e = dirichlet_form(chain, f);
  if (!(e > 0.0)) return 0.0;
  return entropy(chain.stationary(), f.cwiseAbs2()) / e;
}

LsiEstimate lsi_constant_estimate(const FiniteChain& chain, std::size_t restarts, std::uint64_t seed,
                                  std::size_t max_iterations) {
  if (!chain.reversible()) throw std::invalid_argument("lsi_constant_estimate: chain is not reversible");
  if (restarts == 0) throw std::invalid_argument("lsi_constant_estimate: need at least one restart");
  const Objective obj(chain);
  const auto s = static_cast<Eigen::Index>(chain.size());
  Rng rng(seed);
  std::normal_distribution<double> normal;

  std::vector<Vector> starts;
  const Vector v = gap_eigenfunction(chain);
  starts.push_back(0.05 * v / v.cwiseAbs().maxCoeff());
  for (Eigen::Index x = 0; x < s && static_cast<std::size_t>(x) < restarts; ++x) {
    Vector u = Vector::Zero(s);
    u[x] = 2.0;
    starts.push_back(u);
  }
  for (std::size_t r = 0; r < restarts; ++r) {
    Vector u(s);
    const double scale = 0.5 * static_cast<double>(1 + r % 4);
    for (Eigen::Index i = 0; i < s; ++i) u[i] = scale * normal(rng);
    starts.push_back(u);
  }

  LsiEstimate out;
  out.poincare = poincare_constant(chain);
  double best = -1.0;
  Vector best_u = starts.front();
  Vector grad(s), trial_grad(s);
  for (const Vector& start : starts) {
    Vector u = start;
    double val = obj.eval(u, &grad);
    if (!std::isfinite(val)) continue;
    double step = 1.0;
    bool converged = false;
    double window_start = val;
    for (std::size_t it = 0; it < max_iterations; ++it) {
      const double gn2 = grad.squaredNorm();
      if (gn2 <= 1e-24 * std::max(1.0, val * val)) {
        converged = true;
        break;
      }
      step = std::min(step * 2.0, 1e6);
      Vector trial;
      double tv = val;
      bool moved = false;
      for (int bt = 0; bt < 80; ++bt) {
        trial = u + step * grad;
        tv = obj.eval(trial, &trial_grad);
        if (std::isfinite(tv) && tv >= val + 1e-4 * step * gn2) {
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) {
        converged = true;  // no ascent direction left at machine precision
        break;
      }
      u = trial;
      val = tv;
      grad = trial_grad;
      if ((it + 1) % 100 == 0) {
        if (val - window_start <= 1e-13 * std::max(1.0, val)) {
          converged = true;
          break;
        }
        window_start = val;
      }
    }
    if (converged) ++out.converged_restarts;
    if (val > best) {
      best = val;
      best_u = u;
    }
  }
  out.optimised_ratio = best;
  out.best_function = (best_u.array() - best_u.maxCoeff()).exp().matrix();
  if (out.converged_restarts == 0)
    throw NonConvergence("lsi_constant_estimate: optimizer did not converge", out.best_function, best);
  // Near-constant f gives Ent(f^2)/E(f,f) -> 2 Var(h)/E(h,h); the sup is at
  // least twice the Poincare constant.
  out.value = 2.0 * std::max(best, 2.0 * out.poincare);
  return out;
}

}  // namespace smcmix::oracle
