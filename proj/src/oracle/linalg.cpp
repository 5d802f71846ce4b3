#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "smcmix/oracle.hpp"

namespace smcmix::oracle {

double expectation(const Vector& pi, const Vector& f) { return pi.dot(f); }

double variance(const Vector& pi, const Vector& f) {
  const double m = expectation(pi, f);
  return pi.dot((f.array() - m).square().matrix());
}

double entropy(const Vector& pi, const Vector& g) {
  const double m = expectation(pi, g);
  if (m <= 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (g[i] > 0.0) acc += pi[i] * g[i] * std::log(g[i] / m);
  return acc;
}

double lp_norm(const Vector& pi, const Vector& f, double p) {
  // Scale out the maximum before raising to p to keep large q finite.
  const double top = f.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) acc += pi[i] * std::pow(std::abs(f[i]) / top, p);
  return top * std::pow(acc, 1.0 / p);
}

double dirichlet_form(const FiniteChain& chain, const Vector& f) {
  const Vector lf = f - chain.transition() * f;
  return chain.stationary().dot(f.cwiseProduct(lf));
}

double dirichlet_form_pairwise(const FiniteChain& chain, const Vector& f) {
  const auto& p = chain.transition();
  const auto& pi = chain.stationary();
  double acc = 0.0;
  for (Eigen::Index x = 0; x < p.rows(); ++x)
    for (Eigen::Index y = 0; y < p.cols(); ++y) {
      const double d = f[x] - f[y];
      acc += d * d * pi[x] * p(x, y);
    }
  return 0.5 * acc;
}

SpectralSemigroup::SpectralSemigroup(const FiniteChain& chain) {
  if (!chain.reversible()) throw std::invalid_argument("spectral semigroup: chain is not reversible");
  const Vector& pi = chain.stationary();
  if ((pi.array() <= 0.0).any())
    throw std::invalid_argument("spectral semigroup: stationary law must be strictly positive");
  sqrt_pi_ = pi.cwiseSqrt();
  // B = D^{1/2} (I - P) D^{-1/2} is symmetric for reversible chains.
  const auto s = pi.size();
  Matrix b = Matrix::Identity(s, s) - sqrt_pi_.asDiagonal() * chain.transition() * sqrt_pi_.cwiseInverse().asDiagonal();
  b = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  if (eig.info() != Eigen::Success) throw std::runtime_error("spectral semigroup: eigensolver failed");
  basis_ = eig.eigenvectors();
  spectrum_ = eig.eigenvalues();
}

Matrix SpectralSemigroup::at(double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("semigroup: t must be >= 0");
  const Vector decay = (-t * spectrum_.array()).exp().matrix();
  const Matrix sym = basis_ * decay.asDiagonal() * basis_.transpose();
  return sqrt_pi_.cwiseInverse().asDiagonal() * sym * sqrt_pi_.asDiagonal();
}

Matrix semigroup(const FiniteChain& chain, double t, SemigroupMethod method) {
  if (!(t >= 0.0)) throw std::invalid_argument("semigroup: t must be >= 0");
  const auto s = static_cast<Eigen::Index>(chain.size());
  if (method == SemigroupMethod::automatic)
    method = chain.reversible() && (chain.stationary().array() > 0.0).all() ? SemigroupMethod::spectral
                                                                             : SemigroupMethod::pade;
  if (method == SemigroupMethod::spectral) return SpectralSemigroup(chain).at(t);
  const Matrix gen = t * (chain.transition() - Matrix::Identity(s, s));
  return gen.exp();
}

double poincare_constant(const FiniteChain& chain) {
  if (!chain.reversible()) throw std::invalid_argument("poincare_constant: chain is not reversible");
  if (chain.size() < 2) return 0.0;
  const SpectralSemigroup sg(chain);
  const double gap = sg.generator_spectrum()[1];
  if (!(gap > 0.0)) throw std::domain_error("poincare_constant: chain is reducible (zero gap)");
  return 1.0 / gap;
}

Vector gap_eigenfunction(const FiniteChain& chain) {
  if (!chain.reversible()) throw std::invalid_argument("gap_eigenfunction: chain is not reversible");
  const Vector& pi = chain.stationary();
  const auto s = pi.size();
  const Vector r = pi.cwiseSqrt();
  Matrix b = Matrix::Identity(s, s) - r.asDiagonal() * chain.transition() * r.cwiseInverse().asDiagonal();
  b = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  return r.cwiseInverse().asDiagonal() * eig.eigenvectors().col(1);
}

}  // namespace smcmix::oracle
