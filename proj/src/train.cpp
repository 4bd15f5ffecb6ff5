#include "cftc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cftc/errors.hpp"
#include "cftc/metrics.hpp"

namespace cftc {

namespace {

std::string format_scalar(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParseError("boolean expected for " + key + ", got: " + value);
}

}  // namespace

void TrainingConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
    throw ContractViolation("loss weights must be nonnegative");
  }
  if (batch_size < 1) throw ContractViolation("batch_size must be >= 1");
  if (epochs < 1) throw ContractViolation("epochs must be >= 1");
  if (mu <= 0.0 || mu >= 1.0) throw ContractViolation("mu must lie in (0,1)");
  if (mask.tau <= 0.0) throw ContractViolation("tau must be > 0");
  if (mask.random_rate < 0.0 || mask.random_rate > 1.0) {
    throw ContractViolation("mask_rate must lie in [0,1]");
  }
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw ContractViolation("validation_fraction must lie in [0,1)");
  }
  if (learning_rate <= 0.0) throw ContractViolation("learning_rate must be > 0");
  if (word_dim < 1 || hidden_dim < 1 || label_dim < 1 || gcn_layers < 0) {
    throw ContractViolation("network dimensions must be positive");
  }
}

std::string TrainingConfig::to_key_values() const {
  std::ostringstream out;
  out << "alpha=" << format_scalar(alpha) << '\n';
  out << "beta=" << format_scalar(beta) << '\n';
  out << "gamma=" << format_scalar(gamma) << '\n';
  out << "learning_rate=" << format_scalar(learning_rate) << '\n';
  out << "batch_size=" << batch_size << '\n';
  out << "epochs=" << epochs << '\n';
  out << "tau=" << format_scalar(mask.tau) << '\n';
  out << "mask_rate=" << format_scalar(mask.random_rate) << '\n';
  out << "probability_mask=" << (mask.probability_mask ? "true" : "false") << '\n';
  out << "random_mask=" << (mask.random_mask ? "true" : "false") << '\n';
  out << "mu=" << format_scalar(mu) << '\n';
  out << "disable_mask=" << (disable_mask ? "true" : "false") << '\n';
  out << "disable_debias=" << (disable_debias ? "true" : "false") << '\n';
  out << "encoder_mode=" << (encoder_mode == EncoderMode::routed ? "routed" : "frozen") << '\n';
  out << "selection=" << (selection == SelectionMode::train ? "train" : "validation") << '\n';
  out << "validation_fraction=" << format_scalar(validation_fraction) << '\n';
  out << "seed=" << seed << '\n';
  out << "word_dim=" << word_dim << '\n';
  out << "hidden_dim=" << hidden_dim << '\n';
  out << "label_dim=" << label_dim << '\n';
  out << "gcn_layers=" << gcn_layers << '\n';
  out << "max_tokens=" << max_tokens << '\n';
  out << "min_freq=" << min_freq << '\n';
  out << "max_vocab=" << max_vocab << '\n';
  out << "grad_clip=" << format_scalar(grad_clip) << '\n';
  out << "drop_unlabeled=" << (drop_unlabeled ? "true" : "false") << '\n';
  return out.str();
}

TrainingConfig TrainingConfig::from_key_values(const std::string& text) {
  TrainingConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (strip(line).empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) +
                       ": expected key=value");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    try {
      if (key == "alpha") cfg.alpha = std::stod(value);
      else if (key == "beta") cfg.beta = std::stod(value);
      else if (key == "gamma") cfg.gamma = std::stod(value);
      else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
      else if (key == "batch_size") cfg.batch_size = std::stol(value);
      else if (key == "epochs") cfg.epochs = std::stoi(value);
      else if (key == "tau") cfg.mask.tau = std::stod(value);
      else if (key == "mask_rate") cfg.mask.random_rate = std::stod(value);
      else if (key == "probability_mask") cfg.mask.probability_mask = parse_bool(value, key);
      else if (key == "random_mask") cfg.mask.random_mask = parse_bool(value, key);
      else if (key == "mu") cfg.mu = std::stod(value);
      else if (key == "disable_mask") cfg.disable_mask = parse_bool(value, key);
      else if (key == "disable_debias") cfg.disable_debias = parse_bool(value, key);
      else if (key == "encoder_mode") {
        if (value == "routed") cfg.encoder_mode = EncoderMode::routed;
        else if (value == "frozen") cfg.encoder_mode = EncoderMode::frozen;
        else throw ParseError("encoder_mode must be routed or frozen");
      } else if (key == "selection") {
        if (value == "train") cfg.selection = SelectionMode::train;
        else if (value == "validation") cfg.selection = SelectionMode::validation;
        else throw ParseError("selection must be train or validation");
      }
      else if (key == "validation_fraction") cfg.validation_fraction = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "word_dim") cfg.word_dim = std::stol(value);
      else if (key == "hidden_dim") cfg.hidden_dim = std::stol(value);
      else if (key == "label_dim") cfg.label_dim = std::stol(value);
      else if (key == "gcn_layers") cfg.gcn_layers = std::stol(value);
      else if (key == "max_tokens") cfg.max_tokens = std::stoul(value);
      else if (key == "min_freq") cfg.min_freq = std::stol(value);
      else if (key == "max_vocab") cfg.max_vocab = std::stoul(value);
      else if (key == "grad_clip") cfg.grad_clip = std::stod(value);
      else if (key == "drop_unlabeled") cfg.drop_unlabeled = parse_bool(value, key);
      else throw ParseError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw ParseError("bad value for config key " + key + ": " + value);
    } catch (const std::out_of_range&) {
      throw ParseError("value out of range for config key " + key);
    }
  }
  return cfg;
}

TrainingConfig TrainingConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open training config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_key_values(buffer.str());
}

const Vec DocTrace::*TrainedModel::headline_branch() const {
  return config.disable_debias ? &DocTrace::score_fused : &DocTrace::score_debiased;
}

AdamOptimizer::AdamOptimizer(const NetworkDims& dims, Scalar learning_rate,
                             Scalar clip_norm, Scalar beta1, Scalar beta2,
                             Scalar epsilon)
    : first_(NetworkParameters::zeros(dims)),
      second_(NetworkParameters::zeros(dims)),
      lr_(learning_rate),
      clip_(clip_norm),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon) {}

void AdamOptimizer::step_group(NetworkParameters& params,
                               const NetworkParameters& grads, ParamGroup group,
                               long step_count) {
  auto p_views = tensor_views(params);
  auto g_views = tensor_views(grads);
  auto m_views = tensor_views(first_);
  auto v_views = tensor_views(second_);

  Scalar norm_sq = 0.0;
  for (std::size_t t = 0; t < g_views.size(); ++t) {
    if (g_views[t].group != group) continue;
    for (Index i = 0; i < g_views[t].size(); ++i) {
      norm_sq += g_views[t].data[i] * g_views[t].data[i];
    }
  }
  Scalar scale = 1.0;
  if (clip_ > 0.0) {
    const Scalar norm = std::sqrt(norm_sq);
    if (norm > clip_) scale = clip_ / norm;
  }

  const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(step_count));
  const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(step_count));
  for (std::size_t t = 0; t < p_views.size(); ++t) {
    if (p_views[t].group != group) continue;
    Scalar* p = p_views[t].data;
    const Scalar* g = g_views[t].data;
    Scalar* m = m_views[t].data;
    Scalar* v = v_views[t].data;
    const Index n = p_views[t].size();
    for (Index i = 0; i < n; ++i) {
      const Scalar gi = g[i] * scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      const Scalar m_hat = m[i] / bc1;
      const Scalar v_hat = v[i] / bc2;
      p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void AdamOptimizer::step(NetworkParameters& params, const NetworkParameters& grads,
                         bool update_encoder, bool update_decoder) {
  if (update_encoder) {
    step_group(params, grads, ParamGroup::encoder, ++steps_encoder_);
  }
  if (update_decoder) {
    step_group(params, grads, ParamGroup::decoder, ++steps_decoder_);
  }
}

LossBreakdown batch_gradients(const std::vector<const EncodedDoc*>& batch,
                              const NetworkParameters& params,
                              const Mat& adjacency, const MaskConfig& cfg,
                              Scalar mu, const LossWeights& weights,
                              Rng& mask_rng, NetworkParameters& grads) {
  BatchTrace trace = batch_forward(batch, params, adjacency, cfg, mu,
                                   RunMode::train, &mask_rng,
                                   /*keep_caches=*/weights.text != 0.0);
  LossBreakdown loss = batch_loss(trace, batch, weights);
  const struct {
    const char* name;
    Scalar value;
  } terms[] = {{"text", loss.text},
               {"fused", loss.fused},
               {"counterfactual", loss.counterfactual},
               {"debiased", loss.debiased},
               {"total", loss.total}};
  for (const auto& term : terms) {
    if (!std::isfinite(term.value)) {
      throw NumericalError(std::string("non-finite ") + term.name + " loss");
    }
  }
  batch_backward(trace, batch, params, adjacency, weights, grads);
  return loss;
}

std::vector<EncodedDoc> encode_corpus(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<EncodedDoc> out;
  out.reserve(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    EncodedDoc enc;
    enc.tokens = vocab.encode(doc.tokens, 0);
    enc.truth = doc.labels;
    out.push_back(std::move(enc));
  }
  return out;
}

namespace {

struct SelectionMetrics {
  Scalar hamming = 0.0;
  Scalar micro_f1 = 0.0;
};

SelectionMetrics evaluate_selection(const std::vector<const EncodedDoc*>& docs,
                                    const NetworkParameters& params,
                                    const Mat& adjacency, const MaskConfig& cfg,
                                    Scalar mu, Index batch_size,
                                    const Vec DocTrace::*branch) {
  const Index total = static_cast<Index>(docs.size());
  const Index labels = params.dims.labels;
  IntMat truth(total, labels);
  IntMat pred(total, labels);
  for (Index start = 0; start < total; start += batch_size) {
    const Index count = std::min(batch_size, total - start);
    std::vector<const EncodedDoc*> chunk(
        docs.begin() + start, docs.begin() + start + count);
    BatchTrace trace = batch_forward(chunk, params, adjacency, cfg, mu,
                                     RunMode::infer, nullptr, false);
    IntMat chunk_pred = batch_predictions(trace, mu, branch);
    for (Index d = 0; d < count; ++d) {
      truth.row(start + d) = docs[static_cast<std::size_t>(start + d)]->truth.transpose();
      pred.row(start + d) = chunk_pred.row(d);
    }
  }
  SelectionMetrics out;
  out.hamming = hamming_loss(truth, pred);
  out.micro_f1 = micro_prf(truth, pred).f1;
  return out;
}

struct Phase {
  LossWeights weights;
  bool update_encoder = true;
  bool update_decoder = true;
};

}  // namespace

TrainedModel train(const Corpus& train_corpus, const TrainingConfig& config,
                   const CooccurrenceMatrix& cooccurrence) {
  config.validate();
  if (train_corpus.docs.empty()) throw ContractViolation("empty training corpus");
  if (cooccurrence.normalized.rows() != train_corpus.label_count()) {
    throw ContractViolation("cooccurrence size does not match the label space");
  }

  TrainedModel model;
  model.labels = train_corpus.labels;
  model.cooccurrence = cooccurrence;
  model.config = config;
  model.vocab = Vocabulary::build(train_corpus.docs, config.min_freq, config.max_vocab);

  NetworkDims dims;
  dims.vocab = model.vocab.size();
  dims.labels = train_corpus.label_count();
  dims.word_dim = config.word_dim;
  dims.hidden = config.hidden_dim;
  dims.label_dim = config.label_dim;
  dims.gcn_layers = config.gcn_layers;
  model.params = NetworkParameters::init(dims, config.seed);

  std::vector<EncodedDoc> encoded = encode_corpus(train_corpus, model.vocab);

  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<const EncodedDoc*> fit_docs;
  std::vector<const EncodedDoc*> selection_docs;
  if (config.selection == SelectionMode::validation && encoded.size() >= 2 &&
      config.validation_fraction > 0.0) {
    Rng split_rng(derive_seed(config.seed, "val-split"));
    split_rng.shuffle(order);
    auto held = static_cast<std::size_t>(std::floor(
        config.validation_fraction * static_cast<Scalar>(encoded.size())));
    held = std::max<std::size_t>(held, 1);
    held = std::min(held, encoded.size() - 1);
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < held ? selection_docs : fit_docs).push_back(&encoded[order[i]]);
    }
  } else {
    for (const auto& doc : encoded) fit_docs.push_back(&doc);
    selection_docs = fit_docs;
  }

  MaskConfig mask = config.mask;
  if (config.disable_mask) {
    mask.probability_mask = false;
    mask.random_mask = false;
  }
  const Scalar gamma_eff = config.disable_debias ? 0.0 : config.gamma;
  const Vec DocTrace::*headline = model.headline_branch();

  std::vector<Phase> phases;
  if (config.encoder_mode == EncoderMode::routed) {
    phases.push_back({LossWeights{1.0, config.alpha, config.beta, gamma_eff},
                      true, config.alpha != 0.0 || config.beta != 0.0 ||
                                gamma_eff != 0.0});
  } else {
    phases.push_back({LossWeights{1.0, 0.0, 0.0, 0.0}, true, false});
    phases.push_back({LossWeights{0.0, config.alpha, config.beta, gamma_eff},
                      false, true});
  }

  AdamOptimizer optimizer(dims, config.learning_rate, config.grad_clip);
  NetworkParameters grads = NetworkParameters::zeros(dims);

  NetworkParameters best_params = model.params;
  Scalar best_f1 = -1.0;
  int epoch_counter = 0;

  std::vector<std::size_t> fit_order(fit_docs.size());
  for (std::size_t i = 0; i < fit_order.size(); ++i) fit_order[i] = i;

  for (const auto& phase : phases) {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const auto epoch_start = std::chrono::steady_clock::now();
      ++epoch_counter;
      Rng shuffle_rng(derive_seed(config.seed, "shuffle",
                                  static_cast<std::uint64_t>(epoch_counter)));
      shuffle_rng.shuffle(fit_order);

      LossBreakdown epoch_loss;
      std::size_t batch_count = 0;
      for (std::size_t start = 0; start < fit_order.size();
           start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end = std::min(
            fit_order.size(), start + static_cast<std::size_t>(config.batch_size));
        std::vector<const EncodedDoc*> batch;
        batch.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
          batch.push_back(fit_docs[fit_order[i]]);
        }
        Rng mask_rng(derive_seed(config.seed, "mask",
                                 static_cast<std::uint64_t>(epoch_counter),
                                 static_cast<std::uint64_t>(batch_count)));
        for (auto& view : tensor_views(grads)) {
          std::fill(view.data, view.data + view.size(), 0.0);
        }
        LossBreakdown loss;
        try {
          loss = batch_gradients(batch, model.params, cooccurrence.normalized,
                                 mask, config.mu, phase.weights, mask_rng, grads);
        } catch (const NumericalError& err) {
          throw NumericalError("epoch " + std::to_string(epoch_counter) +
                               " batch " + std::to_string(batch_count) + ": " +
                               err.what());
        }
        optimizer.step(model.params, grads, phase.update_encoder,
                       phase.update_decoder);
        epoch_loss.text += loss.text;
        epoch_loss.fused += loss.fused;
        epoch_loss.counterfactual += loss.counterfactual;
        epoch_loss.debiased += loss.debiased;
        epoch_loss.total += loss.total;
        ++batch_count;
      }
      const auto batches = static_cast<Scalar>(std::max<std::size_t>(batch_count, 1));
      epoch_loss.text /= batches;
      epoch_loss.fused /= batches;
      epoch_loss.counterfactual /= batches;
      epoch_loss.debiased /= batches;
      epoch_loss.total /= batches;

      SelectionMetrics sel = evaluate_selection(
          selection_docs, model.params, cooccurrence.normalized, mask, config.mu,
          config.batch_size, headline);
      if (sel.micro_f1 > best_f1) {
        best_f1 = sel.micro_f1;
        best_params = model.params;
      }

      EpochLog log;
      log.epoch = epoch_counter;
      log.loss = epoch_loss;
      log.selection_hamming = sel.hamming;
      log.selection_micro_f1 = sel.micro_f1;
      log.seconds = std::chrono::duration_cast<std::chrono::duration<Scalar>>(
                        std::chrono::steady_clock::now() - epoch_start)
                        .count();
      model.log.push_back(log);
    }
  }

  model.params = best_params;
  return model;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,loss_text,loss_fused,loss_counterfactual,loss_debiased,"
         "loss_total,selection_hamming,selection_micro_f1,seconds\n";
  for (const auto& row : log) {
    out << row.epoch << ',' << format_scalar(row.loss.text) << ','
        << format_scalar(row.loss.fused) << ','
        << format_scalar(row.loss.counterfactual) << ','
        << format_scalar(row.loss.debiased) << ','
        << format_scalar(row.loss.total) << ','
        << format_scalar(row.selection_hamming) << ','
        << format_scalar(row.selection_micro_f1) << ','
        << format_scalar(row.seconds) << '\n';
  }
  return out.str();
}

std::vector<EpochLog> parse_training_log_csv(const std::string& text) {
  std::vector<EpochLog> log;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw ParseError("bad training log row: " + line);
    EpochLog row;
    row.epoch = std::stoi(cells[0]);
    row.loss.text = std::stod(cells[1]);
    row.loss.fused = std::stod(cells[2]);
    row.loss.counterfactual = std::stod(cells[3]);
    row.loss.debiased = std::stod(cells[4]);
    row.loss.total = std::stod(cells[5]);
    row.selection_hamming = std::stod(cells[6]);
    row.selection_micro_f1 = std::stod(cells[7]);
    row.seconds = std::stod(cells[8]);
    log.push_back(row);
  }
  return log;
}

}  // namespace cftc
