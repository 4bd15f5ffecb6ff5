#include "cftc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cftc/checkpoint.hpp"
#include "cftc/cooccurrence.hpp"
#include "cftc/errors.hpp"
#include "cftc/evaluation.hpp"
#include "cftc/manifest.hpp"
#include "cftc/synthetic.hpp"
#include "cftc/text.hpp"
#include "cftc/train.hpp"

namespace cftc {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIntegrity = 4;

std::map<std::string, std::string> config_to_map(const std::string& key_values) {
  std::map<std::string, std::string> out;
  std::istringstream in(key_values);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::string synth_spec_to_key_values(const SyntheticSpec& spec) {
  std::ostringstream out;
  out << "label_count=" << spec.label_count << '\n'
      << "vocab_size=" << spec.vocab_size << '\n'
      << "docs_train=" << spec.docs_train << '\n'
      << "docs_test=" << spec.docs_test << '\n'
      << "tokens_per_doc=" << spec.tokens_per_doc << '\n'
      << "base_label_prob=" << spec.base_label_prob << '\n'
      << "tokens_per_label=" << spec.tokens_per_label << '\n'
      << "noise_token_fraction=" << spec.noise_token_fraction << '\n'
      << "seed=" << spec.seed << '\n';
  out << "shortcut_pairs=";
  for (std::size_t i = 0; i < spec.shortcut_pairs.size(); ++i) {
    const auto& p = spec.shortcut_pairs[i];
    if (i > 0) out << ';';
    out << p.first << ':' << p.second << ':' << p.train_prob << ':' << p.test_prob;
  }
  out << '\n';
  return out.str();
}

// 16x-upscaled grayscale heatmap, brighter = more frequent.
void write_heatmap_pgm(const fs::path& path, const Mat& m) {
  const int cell = 16;
  const Scalar top = std::max(m.maxCoeff(), 1e-12);
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write heatmap: " + path.string());
  out << "P2\n" << m.cols() * cell << ' ' << m.rows() * cell << "\n255\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (int py = 0; py < cell; ++py) {
      for (Index j = 0; j < m.cols(); ++j) {
        const int v = static_cast<int>(255.0 * m(i, j) / top);
        for (int px = 0; px < cell; ++px) out << v << ' ';
      }
      out << '\n';
    }
  }
}

struct CommonFlags {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool no_mask = false;
  bool no_debias = false;
  std::optional<int> epochs;
  std::optional<std::string> encoder_mode;
  std::optional<std::string> selection;
  bool plots = false;
};

fs::path resolve_train_file(const fs::path& data) {
  if (fs::is_directory(data)) return data / "train.tsv";
  return data;
}

int cmd_synth(const CommonFlags& flags, std::ostream& out) {
  SyntheticSpec spec = SyntheticSpec::from_file(flags.config_path);
  if (flags.seed.has_value()) spec.seed = *flags.seed;
  SyntheticData data = generate_synthetic(spec);

  const fs::path dir(flags.out_dir);
  fs::create_directories(dir);

  RunManifest manifest;
  manifest.command = "synth";
  manifest.seed = spec.seed;
  manifest.config = config_to_map(synth_spec_to_key_values(spec));
  manifest.inputs[flags.config_path] = file_content_hash(flags.config_path);
  manifest.outputs = {"train.tsv", "test.tsv", "cooc_true_train.csv",
                      "cooc_true_test.csv"};
  write_manifest(dir, manifest);

  write_dataset_file(dir / "train.tsv", data.train);
  write_dataset_file(dir / "test.tsv", data.test);
  write_matrix_csv(dir / "cooc_true_train.csv", data.train.labels.names(),
                   data.true_train_cooccurrence);
  write_matrix_csv(dir / "cooc_true_test.csv", data.test.labels.names(),
                   data.true_test_cooccurrence);
  out << "wrote " << data.train.size() << " train and " << data.test.size()
      << " test documents to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, std::ostream& out, std::ostream& err) {
  TrainingConfig config = flags.config_path.empty()
                              ? TrainingConfig{}
                              : TrainingConfig::from_file(flags.config_path);
  if (flags.seed.has_value()) config.seed = *flags.seed;
  if (flags.no_mask) config.disable_mask = true;
  if (flags.no_debias) config.disable_debias = true;
  if (flags.epochs.has_value()) config.epochs = *flags.epochs;
  if (flags.encoder_mode.has_value()) {
    config.encoder_mode = *flags.encoder_mode == "frozen" ? EncoderMode::frozen
                                                          : EncoderMode::routed;
  }
  if (flags.selection.has_value()) {
    config.selection = *flags.selection == "train" ? SelectionMode::train
                                                   : SelectionMode::validation;
  }
  config.validate();

  const fs::path train_file = resolve_train_file(flags.data_path);
  if (!fs::exists(train_file)) {
    throw ParseError("training data not found: " + train_file.string());
  }
  CorpusOptions options;
  options.max_tokens = config.max_tokens;
  options.drop_unlabeled = config.drop_unlabeled;
  Corpus corpus = load_dataset(train_file, Split::train, nullptr, options);
  CooccurrenceMatrix cooc = build_cooccurrence(corpus);

  const fs::path dir(flags.out_dir);
  fs::create_directories(dir);
  RunManifest manifest;
  manifest.command = "train";
  manifest.seed = config.seed;
  manifest.config = config_to_map(config.to_key_values());
  manifest.inputs[train_file.string()] = file_content_hash(train_file);
  if (!flags.config_path.empty()) {
    manifest.inputs[flags.config_path] = file_content_hash(flags.config_path);
  }
  manifest.outputs = {"checkpoint.cftc", "training_log.csv"};
  write_manifest(dir, manifest);

  TrainedModel model = train(corpus, config, cooc);
  save_checkpoint(model, dir / "checkpoint.cftc");
  std::ofstream log_out(dir / "training_log.csv");
  log_out << training_log_csv(model.log);

  if (!model.log.empty()) {
    const auto& last = model.log.back();
    out << "trained " << model.log.size() << " epochs; final total loss "
        << last.loss.total << ", selection micro-F1 " << last.selection_micro_f1
        << '\n';
  }
  (void)err;
  return kExitOk;
}

Corpus load_eval_corpus(const TrainedModel& model, const fs::path& data,
                        std::ostream& err) {
  CorpusOptions options;
  options.max_tokens = model.config.max_tokens;
  std::vector<std::string> warnings;
  auto records = read_dataset_file(data);
  bool any_known = false;
  for (const auto& rec : records) {
    for (const auto& name : rec.labels) {
      if (model.labels.index_of(name).has_value()) {
        any_known = true;
        break;
      }
    }
    if (any_known) break;
  }
  if (!any_known) {
    throw IntegrityError("no dataset label resolves in the model's label space: " +
                         data.string());
  }
  Corpus corpus = make_corpus(records, model.labels, Split::test, options, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return corpus;
}

int cmd_eval(const std::string& model_path, const CommonFlags& flags,
             std::ostream& out, std::ostream& err) {
  TrainedModel model = load_checkpoint(model_path);
  Corpus corpus = load_eval_corpus(model, flags.data_path, err);

  const fs::path dir(flags.out_dir);
  fs::create_directories(dir);
  RunManifest manifest;
  manifest.command = "eval";
  manifest.seed = model.config.seed;
  manifest.config = config_to_map(model.config.to_key_values());
  manifest.inputs[model_path] = file_content_hash(model_path);
  manifest.inputs[flags.data_path] = file_content_hash(flags.data_path);
  manifest.outputs = {"metrics.txt", "metrics.csv"};
  write_manifest(dir, manifest);

  MetricReport report = evaluate(model, corpus);
  std::ofstream txt(dir / "metrics.txt");
  txt << metric_report_text(report);
  std::ofstream csv(dir / "metrics.csv");
  csv << metric_report_csv(report);
  out << metric_report_text(report);
  return kExitOk;
}

int cmd_bias(const std::string& model_path, const CommonFlags& flags,
             std::ostream& out, std::ostream& err) {
  TrainedModel model = load_checkpoint(model_path);
  Corpus corpus = load_eval_corpus(model, flags.data_path, err);

  const fs::path dir(flags.out_dir);
  fs::create_directories(dir);
  RunManifest manifest;
  manifest.command = "bias";
  manifest.seed = model.config.seed;
  manifest.config = config_to_map(model.config.to_key_values());
  manifest.inputs[model_path] = file_content_hash(model_path);
  manifest.inputs[flags.data_path] = file_content_hash(flags.data_path);
  manifest.outputs = {"cooc_true.csv", "cooc_before.csv", "cooc_after.csv",
                      "distances.csv"};
  if (flags.plots) {
    manifest.outputs.insert(manifest.outputs.end(),
                            {"cooc_true.pgm", "cooc_before.pgm", "cooc_after.pgm"});
  }
  write_manifest(dir, manifest);

  BiasReport report = cooccurrence_bias_report(model, corpus);
  const auto& names = model.labels.names();
  write_matrix_csv(dir / "cooc_true.csv", names, report.true_frequency);
  write_matrix_csv(dir / "cooc_before.csv", names, report.before);
  write_matrix_csv(dir / "cooc_after.csv", names, report.after);
  {
    std::ofstream csv(dir / "distances.csv");
    char buf[64];
    csv << "which,l1_distance\n";
    std::snprintf(buf, sizeof(buf), "%.17g", report.distance_before);
    csv << "before," << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", report.distance_after);
    csv << "after," << buf << '\n';
  }
  if (flags.plots) {
    write_heatmap_pgm(dir / "cooc_true.pgm", report.true_frequency);
    write_heatmap_pgm(dir / "cooc_before.pgm", report.before);
    write_heatmap_pgm(dir / "cooc_after.pgm", report.after);
  }
  out << "distance before: " << report.distance_before << '\n'
      << "distance after: " << report.distance_after << '\n';
  return kExitOk;
}

std::string label_set(const IntVec& bits, const LabelSpace& labels) {
  std::string out;
  for (Index i = 0; i < bits.size(); ++i) {
    if (bits[i] == 0) continue;
    if (!out.empty()) out += ", ";
    out += labels.name(i);
  }
  return out.empty() ? "∅" : out;
}

int cmd_intervene(const std::string& model_path, const std::string& text,
                  const std::optional<std::string>& given, std::ostream& out) {
  TrainedModel model = load_checkpoint(model_path);

  Document doc;
  doc.text = text;
  doc.tokens = tokenize(text);
  if (doc.tokens.empty()) throw ParseError("text produced no tokens");
  doc.labels = IntVec::Zero(model.labels.size());

  PredictionBundle bundle;
  std::string given_display;
  if (given.has_value()) {
    IntVec bits = IntVec::Zero(model.labels.size());
    std::stringstream ss(*given);
    std::string name;
    while (std::getline(ss, name, ',')) {
      std::size_t b = 0, e = name.size();
      while (b < e && std::isspace(static_cast<unsigned char>(name[b]))) ++b;
      while (e > b && std::isspace(static_cast<unsigned char>(name[e - 1]))) --e;
      name = name.substr(b, e - b);
      if (name.empty()) continue;
      auto idx = model.labels.index_of(name);
      if (!idx.has_value()) {
        std::string valid;
        for (const auto& n : model.labels.names()) {
          if (!valid.empty()) valid += ", ";
          valid += n;
        }
        throw ParseError("unknown label name: " + name + " (valid: " + valid + ")");
      }
      bits[*idx] = 1;
    }
    bundle = intervene(model, doc, bits);
    given_display = label_set(bits, model.labels);
  } else {
    bundle = infer(model, doc);
    given_display = label_set(bundle.masked_labels, model.labels);
  }

  out << "Given Labels | Counterfactual | Fused | Debiased\n";
  out << given_display << " | " << label_set(bundle.pred_counterfactual, model.labels)
      << " | " << label_set(bundle.pred_fused, model.labels) << " | "
      << label_set(bundle.pred_debiased, model.labels) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"counterfactual multi-label text classifier"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string model_path;
  std::string text;
  std::optional<std::string> given;

  auto add_seed = [&flags](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&flags](const std::uint64_t& v) { flags.seed = v; },
        "root seed; every random stream derives from it");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--config", flags.config_path, "synthetic spec (key=value)")
      ->required();
  synth->add_option("--out", flags.out_dir, "output directory")->required();
  add_seed(synth);

  auto* train_cmd = app.add_subcommand("train", "train a classifier");
  train_cmd->add_option("--config", flags.config_path, "training config (key=value)");
  train_cmd->add_option("--data", flags.data_path, "train.tsv or its directory")
      ->required();
  train_cmd->add_option("--out", flags.out_dir, "output directory")->required();
  add_seed(train_cmd);
  train_cmd->add_flag("--no-mask", flags.no_mask, "disable the mask mechanism");
  train_cmd->add_flag("--no-debias", flags.no_debias,
                      "disable the counterfactual subtraction");
  train_cmd->add_option_function<int>(
      "--epochs", [&flags](const int& v) { flags.epochs = v; }, "epoch count");
  train_cmd
      ->add_option_function<std::string>(
          "--encoder-mode",
          [&flags](const std::string& v) { flags.encoder_mode = v; },
          "routed or frozen")
      ->check(CLI::IsMember({"routed", "frozen"}));
  train_cmd
      ->add_option_function<std::string>(
          "--select", [&flags](const std::string& v) { flags.selection = v; },
          "model selection split")
      ->check(CLI::IsMember({"train", "validation"}));

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--model", model_path, "checkpoint file")->required();
  eval_cmd->add_option("--data", flags.data_path, "dataset file")->required();
  eval_cmd->add_option("--out", flags.out_dir, "output directory")->required();

  auto* bias_cmd = app.add_subcommand("bias", "co-occurrence bias diagnostic");
  bias_cmd->add_option("--model", model_path, "checkpoint file")->required();
  bias_cmd->add_option("--data", flags.data_path, "dataset file")->required();
  bias_cmd->add_option("--out", flags.out_dir, "output directory")->required();
  bias_cmd->add_flag("--plots", flags.plots, "also write heatmap images");

  auto* intervene_cmd =
      app.add_subcommand("intervene", "predict with overridden given labels");
  intervene_cmd->add_option("--model", model_path, "checkpoint file")->required();
  intervene_cmd->add_option("--text", text, "document text")->required();
  intervene_cmd->add_option_function<std::string>(
      "--given", [&given](const std::string& v) { given = v; },
      "comma-separated label names fed to the extractor (empty = none)");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(flags, out);
    if (train_cmd->parsed()) return cmd_train(flags, out, err);
    if (eval_cmd->parsed()) return cmd_eval(model_path, flags, out, err);
    if (bias_cmd->parsed()) return cmd_bias(model_path, flags, out, err);
    if (intervene_cmd->parsed()) return cmd_intervene(model_path, text, given, out);
    err << "no subcommand given\n";
    return kExitInput;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and friends
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << '\n';
    return kExitIntegrity;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InfeasibleSpec& e) {
    err << "infeasible spec: " << e.what() << '\n';
    return kExitInput;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace cftc
