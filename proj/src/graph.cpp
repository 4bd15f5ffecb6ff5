#include "cftc/graph.hpp"

#include "cftc/errors.hpp"
#include "cftc/nnmath.hpp"

namespace cftc {

namespace {

Index doc_length(const EncodedDoc& doc) {
  return static_cast<Index>(doc.tokens.size());
}

}  // namespace

BatchTrace batch_forward(const std::vector<const EncodedDoc*>& docs,
                         const NetworkParameters& params, const Mat& adjacency,
                         const MaskConfig& cfg, Scalar mu, RunMode mode,
                         Rng* mask_rng, bool keep_caches) {
  if (docs.empty()) throw ContractViolation("batch_forward on empty batch");
  if (mode == RunMode::train && mask_rng == nullptr) {
    throw ContractViolation("train-mode batch requires an rng");
  }
  const Index batch = static_cast<Index>(docs.size());
  const Index hidden = params.dims.hidden;
  const Index two_h = 2 * hidden;
  const Index labels = params.dims.labels;
  const std::size_t layers = params.gcn_W.size();

  BatchTrace trace;
  trace.docs.resize(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const Index len = doc_length(*docs[d]);
    if (len == 0) throw ContractViolation("empty document in batch");
    trace.docs[d].length = len;
    trace.max_len = std::max(trace.max_len, len);
  }

  // Padded positions carry zero inputs; their states are never read.
  std::vector<Mat> fwd_in(static_cast<std::size_t>(trace.max_len),
                          Mat::Zero(params.dims.word_dim, batch));
  std::vector<Mat> bwd_in = fwd_in;
  for (Index d = 0; d < batch; ++d) {
    const auto& tokens = docs[static_cast<std::size_t>(d)]->tokens;
    const Index len = trace.docs[static_cast<std::size_t>(d)].length;
    for (Index t = 0; t < len; ++t) {
      const int fwd_tok = tokens[static_cast<std::size_t>(t)];
      const int bwd_tok = tokens[static_cast<std::size_t>(len - 1 - t)];
      if (fwd_tok < 0 || fwd_tok >= params.dims.vocab) {
        throw ContractViolation("token index out of vocabulary range");
      }
      fwd_in[static_cast<std::size_t>(t)].col(d) = params.word_embeddings.col(fwd_tok);
      bwd_in[static_cast<std::size_t>(t)].col(d) = params.word_embeddings.col(bwd_tok);
    }
  }

  LstmCache* fwd_cache = keep_caches ? &trace.fwd_cache : nullptr;
  LstmCache* bwd_cache = keep_caches ? &trace.bwd_cache : nullptr;
  auto fwd_states = lstm_forward(params.enc_fwd, fwd_in, fwd_cache);
  auto bwd_states = lstm_forward(params.enc_bwd, bwd_in, bwd_cache);

  Mat pooled(two_h, batch);
  for (Index d = 0; d < batch; ++d) {
    DocTrace& doc = trace.docs[static_cast<std::size_t>(d)];
    doc.states.resize(doc.length, two_h);
    for (Index t = 0; t < doc.length; ++t) {
      doc.states.row(t).head(hidden) =
          fwd_states[static_cast<std::size_t>(t)].col(d).transpose();
      doc.states.row(t).tail(hidden) =
          bwd_states[static_cast<std::size_t>(doc.length - 1 - t)].col(d).transpose();
    }
    pooled.col(d) = doc.states.colwise().mean().transpose();
  }

  Mat text_scores = params.text_W * pooled;
  text_scores.colwise() += params.text_b;

  for (Index d = 0; d < batch; ++d) {
    DocTrace& doc = trace.docs[static_cast<std::size_t>(d)];
    doc.score_text = text_scores.col(d);

    if (mode == RunMode::train) {
      Vec masked = cfg.probability_mask
                       ? probability_mask(doc.score_text, cfg, *mask_rng)
                       : Vec(sigmoid(doc.score_text));
      if (cfg.random_mask) masked = random_mask(masked, cfg, *mask_rng);
      doc.masked_labels.resize(labels);
      for (Index i = 0; i < labels; ++i) {
        doc.masked_labels[i] = masked[i] >= mu ? 1 : 0;
      }
    } else {
      doc.masked_labels = threshold_predict(doc.score_text, mu);
    }

    doc.li_layers.resize(layers + 1);
    doc.li_prod.resize(layers);
    doc.li_preact.resize(layers);
    doc.li_layers[0] = embed_labels(doc.masked_labels, params);
    for (std::size_t k = 0; k < layers; ++k) {
      doc.li_prod[k].noalias() = adjacency * doc.li_layers[k];
      doc.li_preact[k].noalias() = doc.li_prod[k] * params.gcn_W[k];
      doc.li_layers[k + 1] = doc.li_preact[k].cwiseMax(0.0);
    }
    doc.label_info = doc.li_layers[layers].colwise().mean().transpose();

    Attention att = li_attention(doc.states, doc.label_info, params);
    doc.att_weights = att.weights;
    doc.att_pooled = att.pooled;
    doc.score_fused = fuse_score(doc.att_pooled, doc.label_info, params);
    doc.score_counterfactual = fuse_score(params.proxy, doc.label_info, params);
    doc.score_debiased = debias(doc.score_fused, doc.score_counterfactual);
  }
  return trace;
}

LossBreakdown batch_loss(const BatchTrace& trace,
                         const std::vector<const EncodedDoc*>& docs,
                         const LossWeights& weights) {
  LossBreakdown mean;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const DocTrace& doc = trace.docs[d];
    const IntVec& truth = docs[d]->truth;
    mean.text += bce_from_scores(doc.score_text, truth);
    mean.fused += bce_from_scores(doc.score_fused, truth);
    mean.counterfactual += bce_from_scores(doc.score_counterfactual, truth);
    mean.debiased += bce_from_scores(doc.score_debiased, truth);
  }
  const auto inv_b = 1.0 / static_cast<Scalar>(docs.size());
  mean.text *= inv_b;
  mean.fused *= inv_b;
  mean.counterfactual *= inv_b;
  mean.debiased *= inv_b;
  mean.total = combine_terms(mean, weights);
  return mean;
}

void batch_backward(const BatchTrace& trace,
                    const std::vector<const EncodedDoc*>& docs,
                    const NetworkParameters& params, const Mat& adjacency,
                    const LossWeights& weights, NetworkParameters& grads) {
  const Index batch = static_cast<Index>(docs.size());
  const Index hidden = params.dims.hidden;
  const Index two_h = 2 * hidden;
  const Index labels = params.dims.labels;
  const Index label_dim = params.dims.label_dim;
  const std::size_t layers = params.gcn_W.size();
  const Scalar inv_b = 1.0 / static_cast<Scalar>(batch);

  const bool decoder_active = weights.fused != 0.0 ||
                              weights.counterfactual != 0.0 ||
                              weights.debiased != 0.0;
  if (decoder_active) {
    for (Index d = 0; d < batch; ++d) {
      const DocTrace& doc = trace.docs[static_cast<std::size_t>(d)];
      const IntVec& truth = docs[static_cast<std::size_t>(d)]->truth;

      Vec g_cd = weights.debiased != 0.0
                     ? Vec(weights.debiased * inv_b *
                           bce_score_grad(doc.score_debiased, truth))
                     : Vec(Vec::Zero(labels));
      Vec g_fused = g_cd;
      if (weights.fused != 0.0) {
        g_fused += weights.fused * inv_b * bce_score_grad(doc.score_fused, truth);
      }
      Vec g_cf = -g_cd;
      if (weights.counterfactual != 0.0) {
        g_cf += weights.counterfactual * inv_b *
                bce_score_grad(doc.score_counterfactual, truth);
      }

      Vec joint(two_h + label_dim);
      joint.head(two_h) = doc.att_pooled;
      joint.tail(label_dim) = doc.label_info;
      Vec joint_cf(two_h + label_dim);
      joint_cf.head(two_h) = params.proxy;
      joint_cf.tail(label_dim) = doc.label_info;

      grads.fused_W.noalias() += g_fused * joint.transpose();
      grads.fused_W.noalias() += g_cf * joint_cf.transpose();
      grads.fused_b += g_fused + g_cf;

      Vec d_joint = params.fused_W.transpose() * g_fused;
      Vec d_joint_cf = params.fused_W.transpose() * g_cf;
      Vec d_pooled = d_joint.head(two_h);
      grads.proxy += d_joint_cf.head(two_h);
      Vec d_li = d_joint.tail(label_dim) + d_joint_cf.tail(label_dim);

      // Attention: pooled = states^T * A, A = softmax(states * W_a * li).
      // The states themselves are gradient-stopped.
      Vec d_att = doc.states * d_pooled;
      const Vec& att = doc.att_weights;
      Vec d_logits = att.cwiseProduct(d_att);
      d_logits.array() -= att.array() * att.dot(d_att);
      Vec d_query = doc.states.transpose() * d_logits;
      grads.attn_W.noalias() += d_query * doc.label_info.transpose();
      d_li.noalias() += params.attn_W.transpose() * d_query;

      // Pooling over label rows.
      Mat d_layer =
          (d_li / static_cast<Scalar>(labels)).transpose().replicate(labels, 1);
      for (std::size_t k = layers; k-- > 0;) {
        Mat d_pre = (doc.li_preact[k].array() > 0.0)
                        .select(d_layer, Mat::Zero(labels, label_dim));
        grads.gcn_W[k].noalias() += doc.li_prod[k].transpose() * d_pre;
        d_layer.noalias() = adjacency.transpose() * (d_pre * params.gcn_W[k].transpose());
      }
      for (Index i = 0; i < labels; ++i) {
        if (doc.masked_labels[i] != 0) {
          grads.label_in.row(i) += d_layer.row(i);
        } else {
          grads.label_out.row(i) += d_layer.row(i);
        }
      }
    }
  }

  if (weights.text == 0.0) return;

  Mat text_grad(labels, batch);
  Mat pooled(two_h, batch);
  for (Index d = 0; d < batch; ++d) {
    const DocTrace& doc = trace.docs[static_cast<std::size_t>(d)];
    text_grad.col(d) = weights.text * inv_b *
                       bce_score_grad(doc.score_text, docs[static_cast<std::size_t>(d)]->truth);
    pooled.col(d) = doc.states.colwise().mean().transpose();
  }
  grads.text_W.noalias() += text_grad * pooled.transpose();
  grads.text_b += text_grad.rowwise().sum();

  Mat d_pooled = params.text_W.transpose() * text_grad;  // 2H x B
  std::vector<Mat> dh_fwd(static_cast<std::size_t>(trace.max_len),
                          Mat::Zero(hidden, batch));
  std::vector<Mat> dh_bwd = dh_fwd;
  for (Index d = 0; d < batch; ++d) {
    const Index len = trace.docs[static_cast<std::size_t>(d)].length;
    const Vec d_fwd = d_pooled.col(d).head(hidden) / static_cast<Scalar>(len);
    const Vec d_bwd = d_pooled.col(d).tail(hidden) / static_cast<Scalar>(len);
    for (Index t = 0; t < len; ++t) {
      dh_fwd[static_cast<std::size_t>(t)].col(d) += d_fwd;
      dh_bwd[static_cast<std::size_t>(t)].col(d) += d_bwd;
    }
  }

  auto dx_fwd = lstm_backward(params.enc_fwd, trace.fwd_cache, dh_fwd, grads.enc_fwd);
  auto dx_bwd = lstm_backward(params.enc_bwd, trace.bwd_cache, dh_bwd, grads.enc_bwd);
  for (Index d = 0; d < batch; ++d) {
    const auto& tokens = docs[static_cast<std::size_t>(d)]->tokens;
    const Index len = trace.docs[static_cast<std::size_t>(d)].length;
    for (Index t = 0; t < len; ++t) {
      grads.word_embeddings.col(tokens[static_cast<std::size_t>(t)]) +=
          dx_fwd[static_cast<std::size_t>(t)].col(d);
      grads.word_embeddings.col(tokens[static_cast<std::size_t>(len - 1 - t)]) +=
          dx_bwd[static_cast<std::size_t>(t)].col(d);
    }
  }
}

IntMat batch_predictions(const BatchTrace& trace, Scalar mu,
                         const Vec DocTrace::*score) {
  const Index batch = static_cast<Index>(trace.docs.size());
  const Index labels = trace.docs.empty() ? 0 : (trace.docs[0].*score).size();
  IntMat preds(batch, labels);
  for (Index d = 0; d < batch; ++d) {
    preds.row(d) =
        threshold_predict(trace.docs[static_cast<std::size_t>(d)].*score, mu)
            .transpose();
  }
  return preds;
}

}  // namespace cftc
