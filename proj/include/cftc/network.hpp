#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cftc/lstm.hpp"
#include "cftc/rng.hpp"
#include "cftc/types.hpp"

namespace cftc {

struct NetworkDims {
  Index vocab = 0;
  Index labels = 0;
  Index word_dim = 300;
  Index hidden = 300;      // per direction; text states are 2*hidden wide
  Index label_dim = 300;
  Index gcn_layers = 3;
};

// The encoder group is trained by the text loss only; the decoder group by
// the fused/counterfactual/debiased losses only.
enum class ParamGroup { encoder, decoder };

struct NetworkParameters {
  NetworkDims dims;

  Mat word_embeddings;  // word_dim x vocab, one column per word
  LstmParams enc_fwd;
  LstmParams enc_bwd;
  Mat text_W;  // labels x 2*hidden
  Vec text_b;

  Mat label_in;   // labels x label_dim, embedding when the label is present
  Mat label_out;  // labels x label_dim, embedding when the label is absent
  std::vector<Mat> gcn_W;  // label_dim x label_dim per layer
  Mat attn_W;              // 2*hidden x label_dim
  Mat fused_W;             // labels x (2*hidden + label_dim)
  Vec fused_b;
  Vec proxy;  // 2*hidden, stands in for the text states of any document

  static NetworkParameters zeros(const NetworkDims& dims);
  static NetworkParameters init(const NetworkDims& dims, std::uint64_t seed);
};

// Flat view over every tensor, in a fixed canonical order. The same order is
// used by the optimizer state, checkpoints, and parameter hashing.
struct TensorView {
  std::string name;
  ParamGroup group;
  Scalar* data;
  Index rows;
  Index cols;

  Index size() const { return rows * cols; }
};

std::vector<TensorView> tensor_views(NetworkParameters& params);
std::vector<TensorView> tensor_views(const NetworkParameters& params);

std::uint64_t parameter_hash(const NetworkParameters& params);

struct MaskConfig {
  Scalar tau = 1.0;
  Scalar random_rate = 0.05;
  bool probability_mask = true;
  bool random_mask = true;
};

enum class RunMode { train, infer };

struct PredictionBundle {
  Vec score_text;             // from the text head alone
  Vec score_fused;            // text + label information
  Vec score_counterfactual;   // proxy text + label information
  Vec score_debiased;         // fused - counterfactual

  Vec prob_text;
  Vec prob_fused;
  Vec prob_counterfactual;
  Vec prob_debiased;

  IntVec pred_text;
  IntVec pred_fused;
  IntVec pred_counterfactual;
  IntVec pred_debiased;

  IntVec masked_labels;  // the label estimate fed to the extractor
};

// --- forward operations -----------------------------------------------------

// Token indices -> per-position text states, one row per token, forward and
// backward direction concatenated.
Mat encode_text(const std::vector<int>& tokens, const NetworkParameters& params);

Vec mean_pool(const Mat& states);

Vec score_text(const Mat& states, const NetworkParameters& params);

// 1 iff sigmoid(score) >= mu (boundary inclusive).
IntVec threshold_predict(const Vec& scores, Scalar mu);

// Confidence-based stochastic flip of the presence probabilities via the
// Gumbel-Softmax relaxation over the per-label (present, absent) pair.
// `gumbel_pairs` is L x 2 of injected noise.
Vec probability_mask(const Vec& scores, const MaskConfig& cfg, Rng& rng);
Vec probability_mask_with_noise(const Vec& scores, const MaskConfig& cfg,
                                const Mat& gumbel_pairs);

// Flips p -> 1-p for each label selected independently at random_rate.
Vec random_mask(const Vec& probs, const MaskConfig& cfg, Rng& rng);
Vec random_mask_selected(const Vec& probs, const std::vector<std::uint8_t>& selected);

// Selects the present/absent embedding per label; the input is a constant
// with respect to gradients.
Mat embed_labels(const IntVec& labels, const NetworkParameters& params);

// One propagation step over the normalized co-occurrence graph:
// relu(adjacency * input * weight).
Mat gcn_layer(const Mat& input, const Mat& adjacency, const Mat& weight);

// embed_labels -> gcn_layers propagation steps -> mean over label rows.
Vec extract_li(const IntVec& labels, const Mat& adjacency,
               const NetworkParameters& params);

struct Attention {
  Vec weights;  // softmax over positions, sums to 1
  Vec pooled;   // weighted combination of text states
};

Attention li_attention(const Mat& states, const Vec& label_info,
                       const NetworkParameters& params);

// Affine head over [text-states pooled ++ label info]; the same parameters
// serve the factual and the proxy call.
Vec fuse_score(const Vec& pooled, const Vec& label_info,
               const NetworkParameters& params);

Vec debias(const Vec& factual, const Vec& counterfactual);

// Full per-document pipeline. In train mode an rng must be supplied and the
// masks are applied; in infer mode the initial prediction (or the override)
// feeds the extractor directly.
PredictionBundle forward(const std::vector<int>& tokens, const Mat& adjacency,
                         const NetworkParameters& params, const MaskConfig& cfg,
                         Scalar mu, RunMode mode, Rng* rng = nullptr,
                         const IntVec* given_labels = nullptr);

}  // namespace cftc
