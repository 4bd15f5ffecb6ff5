#include "cftc/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "cftc/errors.hpp"

namespace cftc {

namespace {

void check_compatible(const TrainedModel& model, const Corpus& corpus) {
  if (corpus.docs.empty()) {
    throw ContractViolation("evaluation requires a nonempty corpus");
  }
  if (corpus.labels.hash() != model.labels.hash()) {
    throw IntegrityError("corpus label space does not match the model");
  }
}

std::vector<int> encode_doc(const TrainedModel& model, const Document& doc) {
  return model.vocab.encode(doc.tokens, model.config.max_tokens);
}

BranchMetrics branch_metrics(const IntMat& truth, const IntMat& pred) {
  BranchMetrics out;
  out.hamming = hamming_loss(truth, pred);
  const Prf prf = micro_prf(truth, pred);
  out.precision = prf.precision;
  out.recall = prf.recall;
  out.f1 = prf.f1;
  return out;
}

struct CorpusPredictions {
  IntMat truth;
  IntMat text;
  IntMat fused;
  IntMat counterfactual;
  IntMat debiased;
};

CorpusPredictions predict_corpus(const TrainedModel& model, const Corpus& corpus) {
  const Index n = static_cast<Index>(corpus.docs.size());
  const Index L = model.labels.size();
  CorpusPredictions out;
  out.truth.resize(n, L);
  out.text.resize(n, L);
  out.fused.resize(n, L);
  out.counterfactual.resize(n, L);
  out.debiased.resize(n, L);
  for (Index d = 0; d < n; ++d) {
    const Document& doc = corpus.docs[static_cast<std::size_t>(d)];
    PredictionBundle bundle = infer(model, doc);
    out.truth.row(d) = doc.labels.transpose();
    out.text.row(d) = bundle.pred_text.transpose();
    out.fused.row(d) = bundle.pred_fused.transpose();
    out.counterfactual.row(d) = bundle.pred_counterfactual.transpose();
    out.debiased.row(d) = bundle.pred_debiased.transpose();
  }
  return out;
}

std::string format_metric(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void append_branch_text(std::ostream& out, const std::string& name,
                        const BranchMetrics& m) {
  out << name << "_hamming_loss: " << format_metric(m.hamming) << '\n';
  out << name << "_micro_precision: " << format_metric(m.precision) << '\n';
  out << name << "_micro_recall: " << format_metric(m.recall) << '\n';
  out << name << "_micro_f1: " << format_metric(m.f1) << '\n';
}

}  // namespace

PredictionBundle infer(const TrainedModel& model, const Document& doc) {
  return forward(encode_doc(model, doc), model.cooccurrence.normalized,
                 model.params, model.config.mask, model.config.mu, RunMode::infer);
}

PredictionBundle intervene(const TrainedModel& model, const Document& doc,
                           const IntVec& given_labels) {
  if (given_labels.size() != model.labels.size()) {
    throw ContractViolation("given labels length mismatch");
  }
  return forward(encode_doc(model, doc), model.cooccurrence.normalized,
                 model.params, model.config.mask, model.config.mu, RunMode::infer,
                 nullptr, &given_labels);
}

MetricReport evaluate(const TrainedModel& model, const Corpus& corpus) {
  check_compatible(model, corpus);
  const CorpusPredictions preds = predict_corpus(model, corpus);
  MetricReport report;
  report.documents = preds.truth.rows();
  report.labels = preds.truth.cols();
  report.text = branch_metrics(preds.truth, preds.text);
  report.fused = branch_metrics(preds.truth, preds.fused);
  report.counterfactual = branch_metrics(preds.truth, preds.counterfactual);
  report.debiased = branch_metrics(preds.truth, preds.debiased);
  if (model.config.disable_debias) {
    report.headline = report.fused;
    report.headline_name = "fused";
  } else {
    report.headline = report.debiased;
    report.headline_name = "debiased";
  }
  return report;
}

std::string metric_report_text(const MetricReport& report) {
  std::ostringstream out;
  out << "documents: " << report.documents << '\n';
  out << "labels: " << report.labels << '\n';
  out << "headline_branch: " << report.headline_name << '\n';
  append_branch_text(out, "headline", report.headline);
  append_branch_text(out, "text", report.text);
  append_branch_text(out, "fused", report.fused);
  append_branch_text(out, "counterfactual", report.counterfactual);
  append_branch_text(out, "debiased", report.debiased);
  return out.str();
}

std::string metric_report_csv(const MetricReport& report) {
  std::ostringstream header;
  std::ostringstream row;
  header << "documents,labels,headline_branch";
  row << report.documents << ',' << report.labels << ',' << report.headline_name;
  const struct {
    const char* name;
    const BranchMetrics* m;
  } branches[] = {{"headline", &report.headline},
                  {"text", &report.text},
                  {"fused", &report.fused},
                  {"counterfactual", &report.counterfactual},
                  {"debiased", &report.debiased}};
  for (const auto& b : branches) {
    header << ',' << b.name << "_hamming_loss," << b.name << "_micro_precision,"
           << b.name << "_micro_recall," << b.name << "_micro_f1";
    row << ',' << format_metric(b.m->hamming) << ',' << format_metric(b.m->precision)
        << ',' << format_metric(b.m->recall) << ',' << format_metric(b.m->f1);
  }
  return header.str() + "\n" + row.str() + "\n";
}

BiasReport cooccurrence_bias_report(const TrainedModel& model, const Corpus& corpus) {
  check_compatible(model, corpus);
  const CorpusPredictions preds = predict_corpus(model, corpus);
  BiasReport report;
  report.true_frequency = joint_frequency(preds.truth);
  report.before = joint_frequency(preds.fused);
  report.after = joint_frequency(preds.debiased);
  report.distance_before = l1_distance(report.before, report.true_frequency);
  report.distance_after = l1_distance(report.after, report.true_frequency);
  return report;
}

}  // namespace cftc
