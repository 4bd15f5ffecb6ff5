#include "cftc/synthetic.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "cftc/errors.hpp"
#include "cftc/rng.hpp"

namespace cftc {

namespace {

// P(second | first absent) that keeps the second label's marginal at base.
Scalar offset_prob(Scalar base, Scalar cond) {
  return base * (1.0 - cond) / (1.0 - base);
}

void check_pair_feasible(const SyntheticSpec& spec, const ShortcutPair& pair,
                         Scalar cond, const char* split) {
  if (cond < 0.0 || cond > 1.0) {
    throw InfeasibleSpec("shortcut pair probability outside [0,1]");
  }
  const Scalar base = spec.base_label_prob;
  if (base >= 1.0) {
    throw InfeasibleSpec("base_label_prob must be < 1 when shortcut pairs exist");
  }
  const Scalar q = offset_prob(base, cond);
  if (q < 0.0 || q > 1.0) {
    std::ostringstream msg;
    msg << "infeasible shortcut pair (" << pair.first << "," << pair.second
        << "): " << split << " conditional " << cond << " with marginal " << base
        << " needs off-branch probability " << q;
    throw InfeasibleSpec(msg.str());
  }
}

std::string signal_word(int label, int k) {
  return "w" + std::to_string(label) + "x" + std::to_string(k);
}

std::string noise_word(int k) { return "n" + std::to_string(k); }

Corpus generate_split(const SyntheticSpec& spec, const LabelSpace& labels,
                      int doc_count, bool test_split, const char* id_prefix,
                      std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const int L = spec.label_count;
  const int noise_count = spec.vocab_size - L * spec.tokens_per_label;

  std::vector<int> pair_of(static_cast<std::size_t>(L), -1);
  for (std::size_t p = 0; p < spec.shortcut_pairs.size(); ++p) {
    pair_of[static_cast<std::size_t>(spec.shortcut_pairs[p].second)] =
        static_cast<int>(p);
  }

  Corpus corpus;
  corpus.labels = labels;
  corpus.docs.reserve(static_cast<std::size_t>(doc_count));
  for (int d = 0; d < doc_count; ++d) {
    Document doc;
    doc.labels = IntVec::Zero(L);
    // Dependent labels are drawn after their conditioning label.
    for (int l = 0; l < L; ++l) {
      if (pair_of[static_cast<std::size_t>(l)] >= 0) continue;
      doc.labels[l] = rng.bernoulli(spec.base_label_prob) ? 1 : 0;
    }
    for (const auto& pair : spec.shortcut_pairs) {
      const Scalar cond = test_split ? pair.test_prob : pair.train_prob;
      const Scalar p = doc.labels[pair.first] != 0
                           ? cond
                           : offset_prob(spec.base_label_prob, cond);
      doc.labels[pair.second] = rng.bernoulli(p) ? 1 : 0;
    }

    std::vector<int> present;
    for (int l = 0; l < L; ++l) {
      if (doc.labels[l] != 0) present.push_back(l);
    }
    doc.tokens.reserve(static_cast<std::size_t>(spec.tokens_per_doc));
    for (int t = 0; t < spec.tokens_per_doc; ++t) {
      const bool noise =
          present.empty() || rng.uniform() < spec.noise_token_fraction;
      if (noise) {
        doc.tokens.push_back(noise_word(static_cast<int>(
            rng.index(static_cast<std::size_t>(noise_count)))));
      } else {
        const int label = present[rng.index(present.size())];
        doc.tokens.push_back(signal_word(
            label, static_cast<int>(
                       rng.index(static_cast<std::size_t>(spec.tokens_per_label)))));
      }
    }
    std::ostringstream id;
    id << id_prefix << "-" << d;
    doc.id = id.str();
    std::ostringstream text;
    for (std::size_t t = 0; t < doc.tokens.size(); ++t) {
      if (t > 0) text << ' ';
      text << doc.tokens[t];
    }
    doc.text = text.str();
    corpus.docs.push_back(std::move(doc));
  }
  for (Index l = 0; l < L; ++l) {
    std::int64_t c = 0;
    for (const auto& doc : corpus.docs) c += doc.labels[l];
    corpus.labels.set_count(l, c);
  }
  return corpus;
}

Mat analytic_cooccurrence(const SyntheticSpec& spec, bool test_split) {
  const int L = spec.label_count;
  const Scalar base = spec.base_label_prob;
  Mat m = Mat::Constant(L, L, base > 0.0 ? base : 0.0);
  for (int i = 0; i < L; ++i) m(i, i) = base > 0.0 ? 1.0 : 0.0;
  for (const auto& pair : spec.shortcut_pairs) {
    const Scalar cond = test_split ? pair.test_prob : pair.train_prob;
    // Marginals are preserved, so the conditional is symmetric by Bayes.
    m(pair.second, pair.first) = cond;
    m(pair.first, pair.second) = cond;
  }
  return m;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (label_count < 2) throw InfeasibleSpec("label_count must be >= 2");
  if (docs_train < 1 || docs_test < 1) {
    throw InfeasibleSpec("docs_train and docs_test must be >= 1");
  }
  if (tokens_per_doc < 1) throw InfeasibleSpec("tokens_per_doc must be >= 1");
  if (tokens_per_label < 1) throw InfeasibleSpec("tokens_per_label must be >= 1");
  if (base_label_prob < 0.0 || base_label_prob > 1.0) {
    throw InfeasibleSpec("base_label_prob outside [0,1]");
  }
  if (noise_token_fraction < 0.0 || noise_token_fraction >= 1.0) {
    throw InfeasibleSpec("noise_token_fraction outside [0,1)");
  }
  if (vocab_size <= label_count * tokens_per_label) {
    throw InfeasibleSpec(
        "vocab_size must exceed label_count * tokens_per_label to leave room "
        "for noise words");
  }
  std::set<int> used;
  for (const auto& pair : shortcut_pairs) {
    if (pair.first < 0 || pair.first >= label_count || pair.second < 0 ||
        pair.second >= label_count) {
      throw InfeasibleSpec("shortcut pair label index out of range");
    }
    if (pair.first == pair.second) {
      throw InfeasibleSpec("shortcut pair must name two distinct labels");
    }
    if (!used.insert(pair.first).second || !used.insert(pair.second).second) {
      throw InfeasibleSpec("a label may appear in at most one shortcut pair");
    }
    check_pair_feasible(*this, pair, pair.train_prob, "train");
    check_pair_feasible(*this, pair, pair.test_prob, "test");
  }
}

SyntheticSpec SyntheticSpec::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open synthetic spec: " + path.string());
  SyntheticSpec spec;
  spec.shortcut_pairs.clear();
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line) blank = blank && std::isspace(static_cast<unsigned char>(c));
      if (blank) continue;
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected key=value");
    }
    auto strip = [](std::string s) {
      std::size_t b = 0, e = s.size();
      while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
      while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
      return s.substr(b, e - b);
    };
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    seen.insert(key);
    try {
      if (key == "label_count") spec.label_count = std::stoi(value);
      else if (key == "vocab_size") spec.vocab_size = std::stoi(value);
      else if (key == "docs_train") spec.docs_train = std::stoi(value);
      else if (key == "docs_test") spec.docs_test = std::stoi(value);
      else if (key == "tokens_per_doc") spec.tokens_per_doc = std::stoi(value);
      else if (key == "base_label_prob") spec.base_label_prob = std::stod(value);
      else if (key == "tokens_per_label") spec.tokens_per_label = std::stoi(value);
      else if (key == "noise_token_fraction") spec.noise_token_fraction = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "shortcut_pairs") {
        // Format: first:second:train_prob:test_prob[;first:second:...]
        std::stringstream pairs(value);
        std::string item;
        while (std::getline(pairs, item, ';')) {
          item = strip(item);
          if (item.empty()) continue;
          std::stringstream fields(item);
          std::string f;
          std::vector<std::string> parts;
          while (std::getline(fields, f, ':')) parts.push_back(strip(f));
          if (parts.size() != 4) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": shortcut pair needs first:second:train_prob:test_prob");
          }
          ShortcutPair pair;
          pair.first = std::stoi(parts[0]);
          pair.second = std::stoi(parts[1]);
          pair.train_prob = std::stod(parts[2]);
          pair.test_prob = std::stod(parts[3]);
          spec.shortcut_pairs.push_back(pair);
        }
      } else {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": unknown key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": bad value for " + key);
    } catch (const std::out_of_range&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": value out of range for " + key);
    }
  }
  static const char* required[] = {
      "label_count", "vocab_size",       "docs_train",
      "docs_test",   "tokens_per_doc",   "shortcut_pairs",
      "base_label_prob", "tokens_per_label", "noise_token_fraction"};
  for (const char* key : required) {
    if (seen.find(key) == seen.end()) {
      throw ParseError(path.string() + ": missing required key: " + key);
    }
  }
  return spec;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(spec.label_count));
  for (int l = 0; l < spec.label_count; ++l) {
    names.push_back("L" + std::to_string(l));
  }
  LabelSpace labels(std::move(names));

  SyntheticData data;
  data.train = generate_split(spec, labels, spec.docs_train, false, "train",
                              derive_seed(spec.seed, "synth-train"));
  data.test = generate_split(spec, labels, spec.docs_test, true, "test",
                             derive_seed(spec.seed, "synth-test"));
  data.true_train_cooccurrence = analytic_cooccurrence(spec, false);
  data.true_test_cooccurrence = analytic_cooccurrence(spec, true);
  return data;
}

}  // namespace cftc
