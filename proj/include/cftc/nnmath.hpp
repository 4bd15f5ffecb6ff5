#pragma once

#include <cmath>

#include "cftc/types.hpp"

namespace cftc {

// Probabilities are clamped away from {0,1} before any log.
inline constexpr Scalar kProbEps = 1e-7;

inline Scalar sigmoid(Scalar x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Derived>
Mat sigmoid(const Eigen::MatrixBase<Derived>& x) {
  return x.derived().unaryExpr([](Scalar v) { return sigmoid(v); });
}

inline Scalar clamp_prob(Scalar p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

inline Vec stable_softmax(const Vec& z) {
  const Scalar m = z.maxCoeff();
  Vec e = (z.array() - m).exp();
  return e / e.sum();
}

}  // namespace cftc
