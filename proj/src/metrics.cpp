#include "cftc/metrics.hpp"

#include "cftc/errors.hpp"

namespace cftc {

namespace {

void check_shapes(const IntMat& truth, const IntMat& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw ContractViolation("truth/prediction shape mismatch");
  }
  if (truth.rows() == 0 || truth.cols() == 0) {
    throw ContractViolation("empty truth/prediction matrices");
  }
}

}  // namespace

Scalar hamming_loss(const IntMat& truth, const IntMat& pred) {
  check_shapes(truth, pred);
  std::int64_t mismatches = 0;
  for (Index i = 0; i < truth.rows(); ++i) {
    for (Index j = 0; j < truth.cols(); ++j) {
      mismatches += (truth(i, j) != 0) != (pred(i, j) != 0) ? 1 : 0;
    }
  }
  return static_cast<Scalar>(mismatches) /
         static_cast<Scalar>(truth.rows() * truth.cols());
}

ConfusionCounts pooled_confusion(const IntMat& truth, const IntMat& pred) {
  check_shapes(truth, pred);
  ConfusionCounts c;
  for (Index i = 0; i < truth.rows(); ++i) {
    for (Index j = 0; j < truth.cols(); ++j) {
      const bool t = truth(i, j) != 0;
      const bool p = pred(i, j) != 0;
      if (t && p) ++c.tp;
      else if (!t && p) ++c.fp;
      else if (t && !p) ++c.fn;
      else ++c.tn;
    }
  }
  return c;
}

Prf micro_prf(const IntMat& truth, const IntMat& pred) {
  const ConfusionCounts c = pooled_confusion(truth, pred);
  Prf out;
  if (c.tp + c.fp > 0) {
    out.precision = static_cast<Scalar>(c.tp) / static_cast<Scalar>(c.tp + c.fp);
  }
  if (c.tp + c.fn > 0) {
    out.recall = static_cast<Scalar>(c.tp) / static_cast<Scalar>(c.tp + c.fn);
  }
  if (2 * c.tp + c.fp + c.fn > 0) {
    out.f1 = static_cast<Scalar>(2 * c.tp) /
             static_cast<Scalar>(2 * c.tp + c.fp + c.fn);
  }
  return out;
}

Mat joint_frequency(const IntMat& preds) {
  if (preds.rows() == 0) throw ContractViolation("joint_frequency of no documents");
  const Index L = preds.cols();
  Mat out = Mat::Zero(L, L);
  for (Index d = 0; d < preds.rows(); ++d) {
    for (Index i = 0; i < L; ++i) {
      if (preds(d, i) == 0) continue;
      for (Index j = 0; j < L; ++j) {
        if (preds(d, j) != 0) out(i, j) += 1.0;
      }
    }
  }
  return out / static_cast<Scalar>(preds.rows());
}

Scalar l1_distance(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation("l1_distance shape mismatch");
  }
  return (a - b).cwiseAbs().sum();
}

}  // namespace cftc
