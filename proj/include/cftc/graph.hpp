#pragma once

#include <cstdint>
#include <vector>

#include "cftc/loss.hpp"
#include "cftc/network.hpp"
#include "cftc/types.hpp"

namespace cftc {

struct EncodedDoc {
  std::vector<int> tokens;
  IntVec truth;
};

// Everything the backward pass needs from one document of a batch.
struct DocTrace {
  Index length = 0;
  Mat states;       // m x 2H, rows are per-position text states
  Vec score_text;
  IntVec masked_labels;
  std::vector<Mat> li_layers;  // LI_0 .. LI_n
  std::vector<Mat> li_prod;    // adjacency * LI_k, k < n
  std::vector<Mat> li_preact;  // (adjacency * LI_k) * W_k, k < n
  Vec label_info;              // pooled LI_n
  Vec att_weights;
  Vec att_pooled;
  Vec score_fused;
  Vec score_counterfactual;
  Vec score_debiased;
};

struct BatchTrace {
  std::vector<DocTrace> docs;
  LstmCache fwd_cache;
  LstmCache bwd_cache;
  Index max_len = 0;
};

// Runs the whole pipeline over a batch of documents with one recurrent GEMM
// per step. Sequences are padded to the batch maximum; padded positions are
// excluded from pooling, attention, and gradients. In train mode the masks
// draw from `mask_rng`.
BatchTrace batch_forward(const std::vector<const EncodedDoc*>& docs,
                         const NetworkParameters& params, const Mat& adjacency,
                         const MaskConfig& cfg, Scalar mu, RunMode mode,
                         Rng* mask_rng, bool keep_caches);

// Mean loss terms over the batch (unweighted term values).
LossBreakdown batch_loss(const BatchTrace& trace,
                         const std::vector<const EncodedDoc*>& docs,
                         const LossWeights& weights);

// Accumulates d(mean weighted loss)/d(params) into `grads`. The text states
// consumed by the fused branch are gradient-stopped: encoder tensors receive
// gradients only through the text-head term, decoder tensors only through
// the fused/counterfactual/debiased terms.
void batch_backward(const BatchTrace& trace,
                    const std::vector<const EncodedDoc*>& docs,
                    const NetworkParameters& params, const Mat& adjacency,
                    const LossWeights& weights, NetworkParameters& grads);

// Per-doc prediction matrices (docs x labels) for one branch of the batch.
IntMat batch_predictions(const BatchTrace& trace, Scalar mu,
                         const Vec DocTrace::*score);

}  // namespace cftc
