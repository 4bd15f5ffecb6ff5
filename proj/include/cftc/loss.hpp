#pragma once

#include "cftc/network.hpp"
#include "cftc/types.hpp"

namespace cftc {

// Mean binary cross-entropy over labels. Probabilities are clamped to
// [kProbEps, 1-kProbEps] before the logs.
Scalar bce_loss(const Vec& probs, const IntVec& truth);

// bce_loss(clamp(sigmoid(scores)), truth).
Scalar bce_from_scores(const Vec& scores, const IntVec& truth);

// Gradient of bce_from_scores with respect to the scores. Zero where the
// clamp is active, (sigmoid(s) - y) / L elsewhere.
Vec bce_score_grad(const Vec& scores, const IntVec& truth);

struct LossWeights {
  Scalar text = 1.0;
  Scalar fused = 0.1;
  Scalar counterfactual = 0.1;
  Scalar debiased = 1.0;
};

struct LossBreakdown {
  Scalar text = 0.0;
  Scalar fused = 0.0;
  Scalar counterfactual = 0.0;
  Scalar debiased = 0.0;
  Scalar total = 0.0;
};

Scalar combine_terms(const LossBreakdown& terms, const LossWeights& weights);

// Per-document combined loss; with drop_debiased the debiased term is
// excluded from the total (its value is still reported).
LossBreakdown combined_loss(const PredictionBundle& bundle, const IntVec& truth,
                            const LossWeights& weights, bool drop_debiased = false);

}  // namespace cftc
