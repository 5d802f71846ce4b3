#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "smcmix/gaussian.hpp"

namespace smcmix {

/// Raised when a transition matrix or stationary vector breaks a chain invariant.
/// `check()` names the violated invariant (e.g. "row_stochastic").
class ChainError : public std::invalid_argument {
 public:
  ChainError(std::string check, const std::string& what)
      : std::invalid_argument(what), check_(std::move(check)) {}
  const std::string& check() const { return check_; }

 private:
  std::string check_;
};

/// Explicit Markov chain on states {0, ..., S-1}: row-stochastic P and its
/// stationary distribution pi. Immutable once built.
class FiniteChain {
 public:
  static constexpr std::size_t kMaxStates = 4096;
  static constexpr double kRowTolerance = 1e-12;
  static constexpr double kStationaryTolerance = 1e-10;
  static constexpr double kBalanceTolerance = 1e-12;

  /// Validates P and pi; the reversible flag is set when detailed balance
  /// holds entrywise within kBalanceTolerance.
  static FiniteChain create(Matrix transition, Vector stationary);

  /// Stationary distribution computed as the normalised left Perron vector.
  static FiniteChain from_transition(Matrix transition);

  std::size_t size() const { return static_cast<std::size_t>(pi_.size()); }
  const Matrix& transition() const { return p_; }
  const Vector& stationary() const { return pi_; }
  bool reversible() const { return reversible_; }
  /// max_{x,y} |pi(x)P(x,y) - pi(y)P(y,x)|
  double balance_defect() const { return balance_defect_; }

  /// (I + P) / 2: the lazy version, same stationary law, half the Dirichlet form.
  FiniteChain lazy() const;

 private:
  FiniteChain() = default;
  Matrix p_;
  Vector pi_;
  bool reversible_ = false;
  double balance_defect_ = 0.0;
};

}  // namespace smcmix
