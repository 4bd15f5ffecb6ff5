#pragma once

// Central finite-difference checks for every parameter tensor under each
// loss term, run against the same batched graph the trainer uses. Mask noise
// is drawn from a fixed seed so every evaluation sees the same draws.

#include <cmath>
#include <string>
#include <vector>

#include "cftc/graph.hpp"
#include "cftc/rng.hpp"
#include "cftc/train.hpp"

namespace cftc::gradcheck {

enum class Term { text, fused, counterfactual, debiased };

inline const char* term_name(Term t) {
  switch (t) {
    case Term::text: return "text";
    case Term::fused: return "fused";
    case Term::counterfactual: return "counterfactual";
    case Term::debiased: return "debiased";
  }
  return "?";
}

inline LossWeights unit_weights(Term t) {
  LossWeights w{0.0, 0.0, 0.0, 0.0};
  switch (t) {
    case Term::text: w.text = 1.0; break;
    case Term::fused: w.fused = 1.0; break;
    case Term::counterfactual: w.counterfactual = 1.0; break;
    case Term::debiased: w.debiased = 1.0; break;
  }
  return w;
}

struct Instance {
  NetworkParameters params;
  Mat adjacency;
  std::vector<EncodedDoc> docs;
  MaskConfig cfg;
  Scalar mu = 0.5;
  std::uint64_t noise_seed = 0;

  std::vector<const EncodedDoc*> ptrs() const {
    std::vector<const EncodedDoc*> out;
    for (const auto& d : docs) out.push_back(&d);
    return out;
  }
};

inline Instance make_instance(std::uint64_t seed) {
  Rng rng(seed);
  NetworkDims dims;
  dims.vocab = 6 + static_cast<Index>(rng.index(4));
  dims.labels = 3 + static_cast<Index>(rng.index(3));   // <= 5
  dims.word_dim = 3 + static_cast<Index>(rng.index(5)); // <= 7
  dims.hidden = 3 + static_cast<Index>(rng.index(5));
  dims.label_dim = 3 + static_cast<Index>(rng.index(5));
  dims.gcn_layers = 2 + static_cast<Index>(rng.index(2));

  Instance inst;
  inst.params = NetworkParameters::init(dims, rng.raw());
  // A nonzero proxy so the counterfactual branch has generic gradients.
  for (Index i = 0; i < inst.params.proxy.size(); ++i) {
    inst.params.proxy[i] = rng.uniform(-0.3, 0.3);
  }
  inst.adjacency = Mat(dims.labels, dims.labels);
  for (Index j = 0; j < dims.labels; ++j) {
    for (Index i = 0; i < dims.labels; ++i) {
      inst.adjacency(i, j) = rng.uniform(0.0, 1.0);
    }
  }
  const int doc_count = 2;
  inst.docs.resize(doc_count);
  for (auto& doc : inst.docs) {
    const Index m = 1 + static_cast<Index>(rng.index(7));  // <= 7
    doc.tokens.resize(static_cast<std::size_t>(m));
    for (auto& t : doc.tokens) {
      t = static_cast<int>(rng.index(static_cast<std::size_t>(dims.vocab)));
    }
    doc.truth = IntVec(dims.labels);
    for (Index i = 0; i < dims.labels; ++i) {
      doc.truth[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
  }
  inst.cfg.tau = 1.0;
  inst.cfg.random_rate = 0.3;
  inst.cfg.probability_mask = true;
  inst.cfg.random_mask = true;
  inst.noise_seed = rng.raw();
  return inst;
}

inline Scalar eval_term(const Instance& inst, const NetworkParameters& params,
                        Term t) {
  Rng rng(inst.noise_seed);
  auto ptrs = inst.ptrs();
  BatchTrace trace = batch_forward(ptrs, params, inst.adjacency, inst.cfg, inst.mu,
                                   RunMode::train, &rng, false);
  LossBreakdown loss = batch_loss(trace, ptrs, unit_weights(t));
  switch (t) {
    case Term::text: return loss.text;
    case Term::fused: return loss.fused;
    case Term::counterfactual: return loss.counterfactual;
    case Term::debiased: return loss.debiased;
  }
  return 0.0;
}

struct CheckResult {
  int entries_checked = 0;
  Scalar max_rel_error = 0.0;
  std::string worst = "";
  bool routing_ok = true;
};

// Analytic gradients vs central differences for one loss term. Encoder
// tensors are gradient-stopped under the decoder terms, so for those pairs
// the analytic gradient is required to be exactly zero instead.
inline CheckResult check_term(const Instance& inst, Term t, Scalar step = 1e-5,
                              Scalar floor = 1e-6) {
  CheckResult result;
  NetworkParameters params = inst.params;
  NetworkParameters grads = NetworkParameters::zeros(params.dims);
  {
    Rng rng(inst.noise_seed);
    auto ptrs = inst.ptrs();
    batch_gradients(ptrs, params, inst.adjacency, inst.cfg, inst.mu,
                    unit_weights(t), rng, grads);
  }
  auto param_views = tensor_views(params);
  auto grad_views = tensor_views(grads);
  for (std::size_t v = 0; v < param_views.size(); ++v) {
    const bool stopped =
        t != Term::text && param_views[v].group == ParamGroup::encoder;
    for (Index i = 0; i < param_views[v].size(); ++i) {
      const Scalar analytic = grad_views[v].data[i];
      if (stopped) {
        if (analytic != 0.0) result.routing_ok = false;
        continue;
      }
      const Scalar saved = param_views[v].data[i];
      param_views[v].data[i] = saved + step;
      const Scalar up = eval_term(inst, params, t);
      param_views[v].data[i] = saved - step;
      const Scalar down = eval_term(inst, params, t);
      param_views[v].data[i] = saved;
      const Scalar fd = (up - down) / (2.0 * step);
      const Scalar rel = std::abs(analytic - fd) /
                         std::max({std::abs(analytic), std::abs(fd), floor});
      ++result.entries_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = param_views[v].name + "[" + std::to_string(i) + "] " +
                       term_name(t) + " analytic=" + std::to_string(analytic) +
                       " fd=" + std::to_string(fd);
      }
    }
  }
  return result;
}

}  // namespace cftc::gradcheck
