#include "smcmix/finite_chain.hpp"

#include <cmath>
#include <sstream>

namespace smcmix {

FiniteChain FiniteChain::create(Matrix transition, Vector stationary) {
  const auto s = stationary.size();
  if (s == 0) throw ChainError("shape", "finite chain: empty state space");
  if (static_cast<std::size_t>(s) > kMaxStates)
    throw ChainError("shape", "finite chain: state space exceeds 4096 states");
  if (transition.rows() != s || transition.cols() != s)
    throw ChainError("shape", "finite chain: transition matrix shape does not match pi");
  if (!transition.allFinite() || !stationary.allFinite())
    throw ChainError("finite", "finite chain: non-finite entries");
  if ((transition.array() < 0.0).any())
    throw ChainError("nonnegative", "finite chain: negative transition probability");
  if ((stationary.array() < 0.0).any())
    throw ChainError("nonnegative", "finite chain: negative stationary mass");

  for (Eigen::Index i = 0; i < s; ++i) {
    const double row = transition.row(i).sum();
    if (std::abs(row - 1.0) > kRowTolerance) {
      std::ostringstream msg;
      msg << "finite chain: row " << i << " sums to " << row;
      throw ChainError("row_stochastic", msg.str());
    }
  }
  if (std::abs(stationary.sum() - 1.0) > kRowTolerance)
    throw ChainError("stationary", "finite chain: pi does not sum to 1");
  const Vector drift = transition.transpose() * stationary - stationary;
  if (drift.cwiseAbs().maxCoeff() > kStationaryTolerance) {
    std::ostringstream msg;
    msg << "finite chain: pi P differs from pi by " << drift.cwiseAbs().maxCoeff();
    throw ChainError("stationary", msg.str());
  }

  FiniteChain chain;
  const Matrix flow = stationary.asDiagonal() * transition;
  chain.balance_defect_ = (flow - flow.transpose()).cwiseAbs().maxCoeff();
  chain.reversible_ = chain.balance_defect_ <= kBalanceTolerance;
  chain.p_ = std::move(transition);
  chain.pi_ = std::move(stationary);
  return chain;
}

FiniteChain FiniteChain::from_transition(Matrix transition) {
  const auto s = transition.rows();
  if (s == 0 || transition.cols() != s)
    throw ChainError("shape", "finite chain: transition matrix must be square and non-empty");
  // Solve pi (P - I) = 0 with sum(pi) = 1 by replacing one equation.
  Matrix a = (transition - Matrix::Identity(s, s)).transpose();
  a.row(s - 1).setOnes();
  Vector rhs = Vector::Zero(s);
  rhs[s - 1] = 1.0;
  Vector pi = a.fullPivLu().solve(rhs);
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  return create(std::move(transition), std::move(pi));
}

FiniteChain FiniteChain::lazy() const {
  const auto s = pi_.size();
  return create(0.5 * (Matrix::Identity(s, s) + p_), pi_);
}

}  // namespace smcmix
