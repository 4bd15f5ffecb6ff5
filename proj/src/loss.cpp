#include "cftc/loss.hpp"

#include <cmath>

#include "cftc/errors.hpp"
#include "cftc/nnmath.hpp"

namespace cftc {

Scalar bce_loss(const Vec& probs, const IntVec& truth) {
  if (probs.size() != truth.size() || probs.size() == 0) {
    throw ContractViolation("bce_loss size mismatch");
  }
  Scalar sum = 0.0;
  for (Index i = 0; i < probs.size(); ++i) {
    const Scalar p = clamp_prob(probs[i]);
    sum += truth[i] != 0 ? std::log(p) : std::log(1.0 - p);
  }
  return -sum / static_cast<Scalar>(probs.size());
}

Scalar bce_from_scores(const Vec& scores, const IntVec& truth) {
  return bce_loss(sigmoid(scores), truth);
}

Vec bce_score_grad(const Vec& scores, const IntVec& truth) {
  if (scores.size() != truth.size() || scores.size() == 0) {
    throw ContractViolation("bce_score_grad size mismatch");
  }
  const Scalar inv_l = 1.0 / static_cast<Scalar>(scores.size());
  Vec g(scores.size());
  for (Index i = 0; i < scores.size(); ++i) {
    const Scalar p = sigmoid(scores[i]);
    if (p <= kProbEps || p >= 1.0 - kProbEps) {
      g[i] = 0.0;  // inside the clamp plateau
    } else {
      g[i] = (p - static_cast<Scalar>(truth[i])) * inv_l;
    }
  }
  return g;
}

Scalar combine_terms(const LossBreakdown& terms, const LossWeights& weights) {
  return weights.text * terms.text + weights.fused * terms.fused +
         weights.counterfactual * terms.counterfactual +
         weights.debiased * terms.debiased;
}

LossBreakdown combined_loss(const PredictionBundle& bundle, const IntVec& truth,
                            const LossWeights& weights, bool drop_debiased) {
  LossBreakdown out;
  out.text = bce_from_scores(bundle.score_text, truth);
  out.fused = bce_from_scores(bundle.score_fused, truth);
  out.counterfactual = bce_from_scores(bundle.score_counterfactual, truth);
  out.debiased = bce_from_scores(bundle.score_debiased, truth);
  LossWeights w = weights;
  if (drop_debiased) w.debiased = 0.0;
  out.total = combine_terms(out, w);
  return out;
}

}  // namespace cftc
