#include "smcmix/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace smcmix {

GaussianComponent GaussianComponent::create(Vector mean, Matrix covariance) {
  const auto d = mean.size();
  if (d == 0) throw std::invalid_argument("gaussian component: empty mean");
  if (covariance.rows() != d || covariance.cols() != d)
    throw std::invalid_argument("gaussian component: covariance shape does not match mean");
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("gaussian component: covariance not symmetric");
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gaussian component: covariance not positive definite");

  GaussianComponent g;
  g.mean_ = std::move(mean);
  g.covariance_ = std::move(covariance);
  g.chol_lower_ = llt.matrixL();
  g.precision_ = llt.solve(Matrix::Identity(d, d));
  g.log_det_ = 2.0 * g.chol_lower_.diagonal().array().log().sum();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g.covariance_, Eigen::EigenvaluesOnly);
  g.lambda_max_ = eig.eigenvalues().maxCoeff();
  g.log_norm_const_ =
      -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) - 0.5 * g.log_det_;
  return g;
}

GaussianComponent GaussianComponent::isotropic(Vector mean, double variance) {
  const auto d = mean.size();
  return create(std::move(mean), variance * Matrix::Identity(d, d));
}

double GaussianComponent::log_pdf(const Vector& x) const {
  // Plain loops: no temporaries on the hot path.
  const Eigen::Index d = mean_.size();
  double q = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double dj = x[j] - mean_[j];
    double row = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) row += precision_(i, j) * (x[i] - mean_[i]);
    q += dj * row;
  }
  return log_norm_const_ - 0.5 * q;
}

Vector GaussianComponent::grad_log_pdf(const Vector& x) const {
  return -(precision_ * (x - mean_));
}

Vector GaussianComponent::sample(Rng& rng) const {
  std::normal_distribution<double> normal;
  Vector z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return mean_ + chol_lower_ * z;
}

GaussianComponent GaussianComponent::widened(double extra_variance) const {
  return create(mean_, covariance_ + extra_variance * Matrix::Identity(dim(), dim()));
}

double GaussianComponent::log_integral_of_power(double beta) const {
  // int q^beta = (2 pi)^{d(1-beta)/2} beta^{-d/2} |Sigma|^{(1-beta)/2}
  const double d = static_cast<double>(dim());
  return 0.5 * d * (1.0 - beta) * std::log(2.0 * std::numbers::pi) - 0.5 * d * std::log(beta) +
         0.5 * (1.0 - beta) * log_det_;
}

}  // namespace smcmix
