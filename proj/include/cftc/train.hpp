#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cftc/cooccurrence.hpp"
#include "cftc/corpus.hpp"
#include "cftc/graph.hpp"
#include "cftc/loss.hpp"
#include "cftc/network.hpp"

namespace cftc {

enum class EncoderMode { routed, frozen };
enum class SelectionMode { train, validation };

struct TrainingConfig {
  Scalar alpha = 0.1;
  Scalar beta = 0.1;
  Scalar gamma = 1.0;
  Scalar learning_rate = 1e-4;
  Index batch_size = 64;
  int epochs = 50;
  MaskConfig mask;
  Scalar mu = 0.5;
  bool disable_mask = false;
  bool disable_debias = false;
  EncoderMode encoder_mode = EncoderMode::routed;
  SelectionMode selection = SelectionMode::validation;
  Scalar validation_fraction = 0.1;
  std::uint64_t seed = 0;

  Index word_dim = 300;
  Index hidden_dim = 300;
  Index label_dim = 300;
  Index gcn_layers = 3;

  std::size_t max_tokens = 256;
  std::int64_t min_freq = 1;
  std::size_t max_vocab = 0;  // 0 = unbounded
  Scalar grad_clip = 5.0;
  bool drop_unlabeled = false;

  void validate() const;

  static TrainingConfig from_file(const std::filesystem::path& path);
  std::string to_key_values() const;
  static TrainingConfig from_key_values(const std::string& text);
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;       // mean over training batches
  Scalar selection_hamming = 0.0;
  Scalar selection_micro_f1 = 0.0;
  Scalar seconds = 0.0;
};

struct TrainedModel {
  NetworkParameters params;
  Vocabulary vocab;
  LabelSpace labels;
  CooccurrenceMatrix cooccurrence;
  TrainingConfig config;
  std::vector<EpochLog> log;

  // The branch reported as headline predictions: debiased, unless the
  // debias term is disabled, in which case fused.
  const Vec DocTrace::*headline_branch() const;
};

// Adam with per-group gradient clipping. The encoder and decoder groups
// keep independent step counts so either can be driven alone.
class AdamOptimizer {
 public:
  AdamOptimizer(const NetworkDims& dims, Scalar learning_rate,
                Scalar clip_norm = 5.0, Scalar beta1 = 0.9, Scalar beta2 = 0.999,
                Scalar epsilon = 1e-8);

  void step(NetworkParameters& params, const NetworkParameters& grads,
            bool update_encoder, bool update_decoder);

 private:
  void step_group(NetworkParameters& params, const NetworkParameters& grads,
                  ParamGroup group, long step_count);

  NetworkParameters first_;
  NetworkParameters second_;
  Scalar lr_;
  Scalar clip_;
  Scalar beta1_;
  Scalar beta2_;
  Scalar eps_;
  long steps_encoder_ = 0;
  long steps_decoder_ = 0;
};

// One gradient evaluation over a batch: forward in train mode, loss, and
// backward. Throws NumericalError when any loss term is non-finite.
LossBreakdown batch_gradients(const std::vector<const EncodedDoc*>& batch,
                              const NetworkParameters& params,
                              const Mat& adjacency, const MaskConfig& cfg,
                              Scalar mu, const LossWeights& weights,
                              Rng& mask_rng, NetworkParameters& grads);

std::vector<EncodedDoc> encode_corpus(const Corpus& corpus, const Vocabulary& vocab);

// Full training loop: builds the vocabulary, splits off the selection set,
// runs shuffled mini-batches under Adam with the text/decoder gradient
// routing, and returns the model snapshot that scored best under the
// configured selection metric.
TrainedModel train(const Corpus& train_corpus, const TrainingConfig& config,
                   const CooccurrenceMatrix& cooccurrence);

std::string training_log_csv(const std::vector<EpochLog>& log);
std::vector<EpochLog> parse_training_log_csv(const std::string& text);

}  // namespace cftc
