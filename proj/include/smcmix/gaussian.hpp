#pragma once

#include <Eigen/Dense>

#include "smcmix/rng.hpp"

namespace smcmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// N(mean, covariance) with cached factorisation. Construct through create(),
/// which rejects non-symmetric or non-positive-definite covariances.
class GaussianComponent {
 public:
  static GaussianComponent create(Vector mean, Matrix covariance);
  static GaussianComponent isotropic(Vector mean, double variance);

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  const Matrix& precision() const { return precision_; }
  double lambda_max() const { return lambda_max_; }
  double log_det() const { return log_det_; }
  Eigen::Index dim() const { return mean_.size(); }

  double log_pdf(const Vector& x) const;
  /// Gradient of log_pdf.
  Vector grad_log_pdf(const Vector& x) const;
  Vector sample(Rng& rng) const;

  /// Same mean, covariance + extra * I.
  GaussianComponent widened(double extra_variance) const;

  /// log of the integral of pdf(x)^beta over R^d (closed form).
  double log_integral_of_power(double beta) const;

 private:
  GaussianComponent() = default;

  Vector mean_;
  Matrix covariance_;
  Matrix chol_lower_;
  Matrix precision_;
  double log_det_ = 0.0;
  double lambda_max_ = 0.0;
  double log_norm_const_ = 0.0;
};

}  // namespace smcmix
