#include <doctest.h>

#include <cmath>

#include "cftc/loss.hpp"
#include "cftc/network.hpp"
#include "test_util.hpp"

using namespace cftc;

namespace {

PredictionBundle bundle_from_scores(const Vec& text, const Vec& fused,
                                    const Vec& counterfactual) {
  PredictionBundle b;
  b.score_text = text;
  b.score_fused = fused;
  b.score_counterfactual = counterfactual;
  b.score_debiased = fused - counterfactual;
  return b;
}

}  // namespace

TEST_CASE("binary cross-entropy hand values") {
  IntVec truth(2);
  truth << 1, 0;

  Vec perfect(2);
  perfect << 1.0 - 1e-9, 1e-9;
  CHECK(bce_loss(perfect, truth) < 1e-6);

  Vec half(2);
  half << 0.5, 0.5;
  CHECK(std::abs(bce_loss(half, truth) - std::log(2.0)) < 1e-12);

  IntVec one(1);
  one << 1;
  Vec quarter(1);
  quarter << 0.25;
  CHECK(std::abs(bce_loss(quarter, one) - 1.3862943611198906) < 1e-12);
}

TEST_CASE("clamping keeps the loss finite at the extremes") {
  IntVec truth(2);
  truth << 1, 0;
  Vec degenerate(2);
  degenerate << 0.0, 1.0;  // worst case on both labels
  const Scalar loss = bce_loss(degenerate, truth);
  CHECK(std::isfinite(loss));
  CHECK(loss > 10.0);
}

TEST_CASE("score-space gradient matches the probability-space definition") {
  Rng rng(5);
  IntVec truth(3);
  truth << 1, 0, 1;
  for (int trial = 0; trial < 50; ++trial) {
    Vec scores(3);
    for (Index i = 0; i < 3; ++i) scores[i] = rng.uniform(-4.0, 4.0);
    Vec grad = bce_score_grad(scores, truth);
    const Scalar h = 1e-6;
    for (Index i = 0; i < 3; ++i) {
      Vec up = scores, down = scores;
      up[i] += h;
      down[i] -= h;
      const Scalar fd = (bce_from_scores(up, truth) - bce_from_scores(down, truth)) /
                        (2.0 * h);
      CHECK(std::abs(fd - grad[i]) < 1e-6);
    }
  }
}

TEST_CASE("weighted combination reduces to the text term when weights vanish") {
  Vec text(2), fused(2), cf(2);
  text << 0.3, -0.8;
  fused << 1.0, 0.2;
  cf << -0.5, 0.1;
  IntVec truth(2);
  truth << 1, 0;
  PredictionBundle b = bundle_from_scores(text, fused, cf);
  LossWeights w{1.0, 0.0, 0.0, 0.0};
  LossBreakdown out = combined_loss(b, truth, w);
  CHECK(out.total == out.text);
}

TEST_CASE("identical branch scores factor the shared term") {
  Vec s(3);
  s << 0.4, -1.0, 2.0;
  IntVec truth(3);
  truth << 0, 1, 1;
  PredictionBundle b = bundle_from_scores(s, s, Vec::Zero(3));
  b.score_debiased = s;  // fused - zero counterfactual
  LossWeights w{1.0, 0.1, 0.1, 1.0};
  LossBreakdown out = combined_loss(b, truth, w);
  // text, fused, and debiased terms all equal bce(s); counterfactual differs.
  CHECK(std::abs(out.fused - out.text) < 1e-15);
  CHECK(std::abs(out.debiased - out.text) < 1e-15);
  CHECK(std::abs(out.total - (2.1 * out.text + 0.1 * out.counterfactual)) < 1e-12);
}

TEST_CASE("hand-set term values combine to 0.77") {
  LossBreakdown terms;
  terms.text = 0.5;
  terms.fused = 0.3;
  terms.counterfactual = 0.4;
  terms.debiased = 0.2;
  LossWeights w{1.0, 0.1, 0.1, 1.0};
  CHECK(std::abs(combine_terms(terms, w) - 0.77) < 1e-12);
}

TEST_CASE("reported total is exactly the weighted sum of reported terms") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    Vec text(4), fused(4), cf(4);
    IntVec truth(4);
    for (Index i = 0; i < 4; ++i) {
      text[i] = rng.uniform(-3.0, 3.0);
      fused[i] = rng.uniform(-3.0, 3.0);
      cf[i] = rng.uniform(-3.0, 3.0);
      truth[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    PredictionBundle b = bundle_from_scores(text, fused, cf);
    LossWeights w{1.0, rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0),
                  rng.uniform(0.0, 2.0)};
    LossBreakdown out = combined_loss(b, truth, w);
    const Scalar expected = w.text * out.text + w.fused * out.fused +
                            w.counterfactual * out.counterfactual +
                            w.debiased * out.debiased;
    CHECK(std::abs(out.total - expected) < 1e-9);
  }
}

TEST_CASE("dropping the debias term removes its weight from the total") {
  Vec text(2), fused(2), cf(2);
  text << 0.3, -0.8;
  fused << 1.0, 0.2;
  cf << -0.5, 0.1;
  IntVec truth(2);
  truth << 1, 0;
  PredictionBundle b = bundle_from_scores(text, fused, cf);
  LossWeights w{1.0, 0.1, 0.1, 1.0};
  LossBreakdown dropped = combined_loss(b, truth, w, /*drop_debiased=*/true);
  CHECK(std::abs(dropped.total -
                 (dropped.text + 0.1 * dropped.fused + 0.1 * dropped.counterfactual)) <
        1e-12);
  CHECK(dropped.debiased > 0.0);  // still reported
}
