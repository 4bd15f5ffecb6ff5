#pragma once

#include <string>

#include "cftc/metrics.hpp"
#include "cftc/train.hpp"

namespace cftc {

struct BranchMetrics {
  Scalar hamming = 0.0;
  Scalar precision = 0.0;
  Scalar recall = 0.0;
  Scalar f1 = 0.0;
};

struct MetricReport {
  BranchMetrics text;
  BranchMetrics fused;
  BranchMetrics counterfactual;
  BranchMetrics debiased;
  BranchMetrics headline;
  std::string headline_name;  // "debiased" or "fused"
  Index documents = 0;
  Index labels = 0;
};

// Inference over every document; headline metrics follow the model's
// configured prediction branch, per-branch numbers are always included.
MetricReport evaluate(const TrainedModel& model, const Corpus& corpus);

std::string metric_report_text(const MetricReport& report);
std::string metric_report_csv(const MetricReport& report);

// Joint prediction frequencies (fraction of documents with both labels on)
// for the truth, the fused branch, and the headline-debiased branch, with
// L1 distances of the two prediction matrices to the truth.
struct BiasReport {
  Mat true_frequency;
  Mat before;  // fused branch, prior to subtracting the proxy score
  Mat after;   // debiased branch
  Scalar distance_before = 0.0;
  Scalar distance_after = 0.0;
};

BiasReport cooccurrence_bias_report(const TrainedModel& model, const Corpus& corpus);

// Inference with the extractor's label estimate overridden.
PredictionBundle intervene(const TrainedModel& model, const Document& doc,
                           const IntVec& given_labels);

// Plain inference on one document (the extractor sees the text prediction).
PredictionBundle infer(const TrainedModel& model, const Document& doc);

}  // namespace cftc
