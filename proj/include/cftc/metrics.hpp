#pragma once

#include "cftc/types.hpp"

namespace cftc {

// Fraction of (document, label) cells where prediction and truth disagree.
Scalar hamming_loss(const IntMat& truth, const IntMat& pred);

struct Prf {
  Scalar precision = 0.0;
  Scalar recall = 0.0;
  Scalar f1 = 0.0;
};

// Micro-averaged precision/recall/F1: confusion counts pooled over all
// labels and documents. Zero denominators yield 0.
Prf micro_prf(const IntMat& truth, const IntMat& pred);

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
};

ConfusionCounts pooled_confusion(const IntMat& truth, const IntMat& pred);

// (i, j) entry: fraction of documents where labels i and j are both on.
Mat joint_frequency(const IntMat& preds);

Scalar l1_distance(const Mat& a, const Mat& b);

}  // namespace cftc
