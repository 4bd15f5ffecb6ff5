#include "cftc/network.hpp"

#include <cmath>

#include "cftc/errors.hpp"
#include "cftc/hash.hpp"
#include "cftc/nnmath.hpp"

namespace cftc {

namespace {

void fill_uniform(Mat& m, Rng& rng, Scalar lo, Scalar hi) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      m(i, j) = rng.uniform(lo, hi);
    }
  }
}

void glorot_init(Mat& m, std::uint64_t seed, std::string_view name) {
  Rng rng(derive_seed(seed, "init", fnv1a(name)));
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(m.rows() + m.cols()));
  fill_uniform(m, rng, -bound, bound);
}

void embedding_init(Mat& m, std::uint64_t seed, std::string_view name) {
  Rng rng(derive_seed(seed, "init", fnv1a(name)));
  fill_uniform(m, rng, -0.1, 0.1);
}

}  // namespace

NetworkParameters NetworkParameters::zeros(const NetworkDims& dims) {
  NetworkParameters p;
  p.dims = dims;
  const Index two_h = 2 * dims.hidden;
  p.word_embeddings = Mat::Zero(dims.word_dim, dims.vocab);
  p.enc_fwd.W = Mat::Zero(4 * dims.hidden, dims.word_dim);
  p.enc_fwd.U = Mat::Zero(4 * dims.hidden, dims.hidden);
  p.enc_fwd.b = Vec::Zero(4 * dims.hidden);
  p.enc_bwd = p.enc_fwd;
  p.text_W = Mat::Zero(dims.labels, two_h);
  p.text_b = Vec::Zero(dims.labels);
  p.label_in = Mat::Zero(dims.labels, dims.label_dim);
  p.label_out = Mat::Zero(dims.labels, dims.label_dim);
  p.gcn_W.assign(static_cast<std::size_t>(dims.gcn_layers),
                 Mat::Zero(dims.label_dim, dims.label_dim));
  p.attn_W = Mat::Zero(two_h, dims.label_dim);
  p.fused_W = Mat::Zero(dims.labels, two_h + dims.label_dim);
  p.fused_b = Vec::Zero(dims.labels);
  p.proxy = Vec::Zero(two_h);
  return p;
}

NetworkParameters NetworkParameters::init(const NetworkDims& dims,
                                          std::uint64_t seed) {
  NetworkParameters p = zeros(dims);
  embedding_init(p.word_embeddings, seed, "word_embeddings");
  glorot_init(p.enc_fwd.W, seed, "enc_fwd.W");
  glorot_init(p.enc_fwd.U, seed, "enc_fwd.U");
  glorot_init(p.enc_bwd.W, seed, "enc_bwd.W");
  glorot_init(p.enc_bwd.U, seed, "enc_bwd.U");
  glorot_init(p.text_W, seed, "head_T.W");
  embedding_init(p.label_in, seed, "label_emb.in");
  embedding_init(p.label_out, seed, "label_emb.out");
  for (std::size_t k = 0; k < p.gcn_W.size(); ++k) {
    glorot_init(p.gcn_W[k], seed, "gcn." + std::to_string(k) + ".W");
  }
  glorot_init(p.attn_W, seed, "attn.W_a");
  glorot_init(p.fused_W, seed, "head_fused.W");
  // Biases and the proxy stay zero: the counterfactual branch starts at the
  // fusion bias.
  return p;
}

namespace {

template <typename Params>
std::vector<TensorView> views_impl(Params& p) {
  auto* q = const_cast<NetworkParameters*>(&p);
  std::vector<TensorView> v;
  auto add = [&v](const std::string& name, ParamGroup g, Mat& m) {
    v.push_back({name, g, m.data(), m.rows(), m.cols()});
  };
  auto add_vec = [&v](const std::string& name, ParamGroup g, Vec& x) {
    v.push_back({name, g, x.data(), x.size(), 1});
  };
  add("word_embeddings", ParamGroup::encoder, q->word_embeddings);
  add("enc_fwd.W", ParamGroup::encoder, q->enc_fwd.W);
  add("enc_fwd.U", ParamGroup::encoder, q->enc_fwd.U);
  add_vec("enc_fwd.b", ParamGroup::encoder, q->enc_fwd.b);
  add("enc_bwd.W", ParamGroup::encoder, q->enc_bwd.W);
  add("enc_bwd.U", ParamGroup::encoder, q->enc_bwd.U);
  add_vec("enc_bwd.b", ParamGroup::encoder, q->enc_bwd.b);
  add("head_T.W", ParamGroup::encoder, q->text_W);
  add_vec("head_T.b", ParamGroup::encoder, q->text_b);
  add("label_emb.in", ParamGroup::decoder, q->label_in);
  add("label_emb.out", ParamGroup::decoder, q->label_out);
  for (std::size_t k = 0; k < q->gcn_W.size(); ++k) {
    add("gcn." + std::to_string(k) + ".W", ParamGroup::decoder, q->gcn_W[k]);
  }
  add("attn.W_a", ParamGroup::decoder, q->attn_W);
  add("head_fused.W", ParamGroup::decoder, q->fused_W);
  add_vec("head_fused.b", ParamGroup::decoder, q->fused_b);
  add_vec("proxy.h", ParamGroup::decoder, q->proxy);
  return v;
}

}  // namespace

std::vector<TensorView> tensor_views(NetworkParameters& params) {
  return views_impl(params);
}

std::vector<TensorView> tensor_views(const NetworkParameters& params) {
  return views_impl(params);
}

std::uint64_t parameter_hash(const NetworkParameters& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tensor_views(params)) {
    h = fnv1a(t.name, h);
    h = fnv1a_bytes(t.data, sizeof(Scalar) * static_cast<std::size_t>(t.size()), h);
  }
  return h;
}

Mat encode_text(const std::vector<int>& tokens, const NetworkParameters& params) {
  if (tokens.empty()) throw ContractViolation("encode_text on empty document");
  const Index m = static_cast<Index>(tokens.size());
  const Index hidden = params.dims.hidden;
  for (int t : tokens) {
    if (t < 0 || t >= params.dims.vocab) {
      throw ContractViolation("token index out of vocabulary range");
    }
  }
  std::vector<Mat> fwd_in(tokens.size());
  std::vector<Mat> bwd_in(tokens.size());
  for (Index t = 0; t < m; ++t) {
    fwd_in[static_cast<std::size_t>(t)] =
        params.word_embeddings.col(tokens[static_cast<std::size_t>(t)]);
    bwd_in[static_cast<std::size_t>(t)] =
        params.word_embeddings.col(tokens[static_cast<std::size_t>(m - 1 - t)]);
  }
  auto fwd = lstm_forward(params.enc_fwd, fwd_in, nullptr);
  auto bwd = lstm_forward(params.enc_bwd, bwd_in, nullptr);
  Mat states(m, 2 * hidden);
  for (Index t = 0; t < m; ++t) {
    states.row(t).head(hidden) = fwd[static_cast<std::size_t>(t)].col(0).transpose();
    states.row(t).tail(hidden) =
        bwd[static_cast<std::size_t>(m - 1 - t)].col(0).transpose();
  }
  return states;
}

Vec mean_pool(const Mat& states) {
  if (states.rows() == 0) throw ContractViolation("mean_pool on empty states");
  return states.colwise().mean().transpose();
}

Vec score_text(const Mat& states, const NetworkParameters& params) {
  return params.text_W * mean_pool(states) + params.text_b;
}

IntVec threshold_predict(const Vec& scores, Scalar mu) {
  if (mu <= 0.0 || mu >= 1.0) {
    throw ContractViolation("threshold mu must lie in (0,1)");
  }
  IntVec out(scores.size());
  for (Index i = 0; i < scores.size(); ++i) {
    out[i] = sigmoid(scores[i]) >= mu ? 1 : 0;
  }
  return out;
}

Vec probability_mask_with_noise(const Vec& scores, const MaskConfig& cfg,
                                const Mat& gumbel_pairs) {
  if (cfg.tau <= 0.0) throw ContractViolation("mask temperature must be > 0");
  if (gumbel_pairs.rows() != scores.size() || gumbel_pairs.cols() != 2) {
    throw ContractViolation("gumbel noise must be L x 2");
  }
  // Two-way softmax over perturbed log-probabilities [log s(x), log s(-x)].
  // log s(x) - log s(-x) = x, so the presence component reduces to
  // sigmoid((x + g1 - g2) / tau). Clamped so saturation cannot emit 0 or 1.
  Vec out(scores.size());
  for (Index i = 0; i < scores.size(); ++i) {
    out[i] = clamp_prob(
        sigmoid((scores[i] + gumbel_pairs(i, 0) - gumbel_pairs(i, 1)) / cfg.tau));
  }
  return out;
}

Vec probability_mask(const Vec& scores, const MaskConfig& cfg, Rng& rng) {
  Mat noise(scores.size(), 2);
  for (Index i = 0; i < scores.size(); ++i) {
    noise(i, 0) = rng.gumbel();
    noise(i, 1) = rng.gumbel();
  }
  return probability_mask_with_noise(scores, cfg, noise);
}

Vec random_mask_selected(const Vec& probs,
                         const std::vector<std::uint8_t>& selected) {
  if (static_cast<Index>(selected.size()) != probs.size()) {
    throw ContractViolation("random mask selection length mismatch");
  }
  Vec out = probs;
  for (Index i = 0; i < probs.size(); ++i) {
    if (selected[static_cast<std::size_t>(i)] != 0) out[i] = 1.0 - probs[i];
  }
  return out;
}

Vec random_mask(const Vec& probs, const MaskConfig& cfg, Rng& rng) {
  std::vector<std::uint8_t> selected(static_cast<std::size_t>(probs.size()));
  for (auto& s : selected) s = rng.bernoulli(cfg.random_rate) ? 1 : 0;
  return random_mask_selected(probs, selected);
}

Mat embed_labels(const IntVec& labels, const NetworkParameters& params) {
  if (labels.size() != params.dims.labels) {
    throw ContractViolation("label vector length mismatch");
  }
  Mat out(params.dims.labels, params.dims.label_dim);
  for (Index i = 0; i < labels.size(); ++i) {
    out.row(i) = labels[i] != 0 ? params.label_in.row(i) : params.label_out.row(i);
  }
  return out;
}

Mat gcn_layer(const Mat& input, const Mat& adjacency, const Mat& weight) {
  return ((adjacency * input) * weight).cwiseMax(0.0);
}

Vec extract_li(const IntVec& labels, const Mat& adjacency,
               const NetworkParameters& params) {
  Mat li = embed_labels(labels, params);
  for (const auto& w : params.gcn_W) {
    li = gcn_layer(li, adjacency, w);
  }
  return li.colwise().mean().transpose();
}

Attention li_attention(const Mat& states, const Vec& label_info,
                       const NetworkParameters& params) {
  Attention att;
  Vec query = params.attn_W * label_info;
  Vec logits = states * query;
  att.weights = stable_softmax(logits);
  att.pooled = states.transpose() * att.weights;
  return att;
}

Vec fuse_score(const Vec& pooled, const Vec& label_info,
               const NetworkParameters& params) {
  const Index two_h = 2 * params.dims.hidden;
  if (pooled.size() != two_h || label_info.size() != params.dims.label_dim) {
    throw ContractViolation("fuse_score input size mismatch");
  }
  Vec joint(two_h + params.dims.label_dim);
  joint.head(two_h) = pooled;
  joint.tail(params.dims.label_dim) = label_info;
  return params.fused_W * joint + params.fused_b;
}

Vec debias(const Vec& factual, const Vec& counterfactual) {
  if (factual.size() != counterfactual.size()) {
    throw ContractViolation("debias length mismatch");
  }
  return factual - counterfactual;
}

PredictionBundle forward(const std::vector<int>& tokens, const Mat& adjacency,
                         const NetworkParameters& params, const MaskConfig& cfg,
                         Scalar mu, RunMode mode, Rng* rng,
                         const IntVec* given_labels) {
  if (mode == RunMode::train && rng == nullptr) {
    throw ContractViolation("train-mode forward requires an rng");
  }
  if (given_labels != nullptr && given_labels->size() != params.dims.labels) {
    throw ContractViolation("given labels length mismatch");
  }

  auto probs = [](const Vec& scores) {
    return Vec(scores.unaryExpr([](Scalar s) { return clamp_prob(sigmoid(s)); }));
  };

  PredictionBundle b;
  Mat states = encode_text(tokens, params);
  b.score_text = score_text(states, params);
  b.prob_text = probs(b.score_text);
  b.pred_text = threshold_predict(b.score_text, mu);

  if (mode == RunMode::train) {
    Vec masked = cfg.probability_mask
                     ? probability_mask(b.score_text, cfg, *rng)
                     : Vec(sigmoid(b.score_text));
    if (cfg.random_mask) masked = random_mask(masked, cfg, *rng);
    IntVec y_m(masked.size());
    for (Index i = 0; i < masked.size(); ++i) y_m[i] = masked[i] >= mu ? 1 : 0;
    b.masked_labels = y_m;
  } else {
    b.masked_labels = given_labels != nullptr ? *given_labels : b.pred_text;
  }

  Vec li = extract_li(b.masked_labels, adjacency, params);
  Attention att = li_attention(states, li, params);
  b.score_fused = fuse_score(att.pooled, li, params);
  b.score_counterfactual = fuse_score(params.proxy, li, params);
  b.score_debiased = debias(b.score_fused, b.score_counterfactual);

  b.prob_fused = probs(b.score_fused);
  b.prob_counterfactual = probs(b.score_counterfactual);
  b.prob_debiased = probs(b.score_debiased);
  b.pred_fused = threshold_predict(b.score_fused, mu);
  b.pred_counterfactual = threshold_predict(b.score_counterfactual, mu);
  b.pred_debiased = threshold_predict(b.score_debiased, mu);
  return b;
}

}  // namespace cftc
