#include "cftc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cftc/errors.hpp"
#include "cftc/hash.hpp"
#include "cftc/text.hpp"

namespace cftc {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_labels(std::string_view field) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= field.size()) {
    std::size_t comma = field.find(',', start);
    if (comma == std::string_view::npos) comma = field.size();
    std::string name = trim(field.substr(start, comma - start));
    if (!name.empty()) out.push_back(std::move(name));
    start = comma + 1;
  }
  return out;
}

}  // namespace

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
  counts_.assign(names_.size(), 0);
  for (std::size_t i = 0; i < names_.size(); ++i) {
    auto [it, fresh] = index_.emplace(names_[i], static_cast<Index>(i));
    if (!fresh) throw ContractViolation("duplicate label name: " + names_[i]);
  }
}

LabelSpace LabelSpace::from_records(const std::vector<RawRecord>& records) {
  std::vector<std::string> names;
  std::unordered_map<std::string, Index> seen;
  for (const auto& rec : records) {
    for (const auto& name : rec.labels) {
      if (seen.emplace(name, static_cast<Index>(names.size())).second) {
        names.push_back(name);
      }
    }
  }
  LabelSpace space(std::move(names));
  for (const auto& rec : records) {
    for (const auto& name : rec.labels) {
      auto idx = space.index_of(name);
      space.counts_[static_cast<std::size_t>(*idx)] += 1;
    }
  }
  return space;
}

std::optional<Index> LabelSpace::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t LabelSpace::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& n : names_) {
    h = fnv1a(n, h);
    h = fnv1a("\n", h);
  }
  return h;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  words_.reserve(words.size() + 2);
  words_.push_back("<pad>");
  words_.push_back("<unk>");
  for (auto& w : words) words_.push_back(std::move(w));
  for (std::size_t i = 0; i < words_.size(); ++i) {
    index_.emplace(words_[i], static_cast<Index>(i));
  }
}

Vocabulary Vocabulary::build(const std::vector<Document>& docs,
                             std::int64_t min_freq, std::size_t max_size) {
  std::unordered_map<std::string, std::int64_t> freq;
  for (const auto& doc : docs) {
    for (const auto& tok : doc.tokens) freq[tok] += 1;
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked;
  ranked.reserve(freq.size());
  for (auto& kv : freq) {
    if (kv.second >= min_freq) ranked.emplace_back(kv.first, kv.second);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (max_size > 0 && ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> words;
  words.reserve(ranked.size());
  for (auto& kv : ranked) words.push_back(std::move(kv.first));
  return Vocabulary(std::move(words));
}

Index Vocabulary::index_of(std::string_view w) const {
  auto it = index_.find(std::string(w));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens,
                                    std::size_t max_len) const {
  std::size_t n = tokens.size();
  if (max_len > 0) n = std::min(n, max_len);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<int>(index_of(tokens[i]));
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& w : words_) {
    h = fnv1a(w, h);
    h = fnv1a("\n", h);
  }
  return h;
}

std::vector<RawRecord> read_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path.string());
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected <text><TAB><labels>");
    }
    RawRecord rec;
    rec.text = line.substr(0, tab);
    if (trim(rec.text).empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": empty text field");
    }
    rec.labels = split_labels(std::string_view(line).substr(tab + 1));
    rec.line = line_no;
    records.push_back(std::move(rec));
  }
  if (records.empty()) {
    throw ParseError("empty dataset file: " + path.string());
  }
  return records;
}

void write_dataset_file(const std::filesystem::path& path,
                        const std::vector<RawRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write dataset file: " + path.string());
  for (const auto& rec : records) {
    out << rec.text << '\t';
    for (std::size_t i = 0; i < rec.labels.size(); ++i) {
      if (i > 0) out << ',';
      out << rec.labels[i];
    }
    out << '\n';
  }
}

void write_dataset_file(const std::filesystem::path& path, const Corpus& corpus) {
  std::vector<RawRecord> records;
  records.reserve(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    RawRecord rec;
    rec.text = doc.text;
    for (Index i = 0; i < doc.labels.size(); ++i) {
      if (doc.labels[i] != 0) rec.labels.push_back(corpus.labels.name(i));
    }
    records.push_back(std::move(rec));
  }
  write_dataset_file(path, records);
}

Corpus make_corpus(const std::vector<RawRecord>& records, const LabelSpace& labels,
                   Split split, const CorpusOptions& options,
                   std::vector<std::string>* warnings) {
  Corpus corpus;
  corpus.labels = labels;
  corpus.docs.reserve(records.size());
  const Index label_count = labels.size();
  for (const auto& rec : records) {
    Document doc;
    doc.text = rec.text;
    doc.tokens = tokenize(rec.text);
    if (options.max_tokens > 0 && doc.tokens.size() > options.max_tokens) {
      doc.tokens.resize(options.max_tokens);
    }
    if (doc.tokens.empty()) {
      throw ParseError("line " + std::to_string(rec.line) +
                       ": text produced no tokens");
    }
    doc.labels = IntVec::Zero(label_count);
    for (const auto& name : rec.labels) {
      auto idx = labels.index_of(name);
      if (idx.has_value()) {
        doc.labels[*idx] = 1;
      } else if (split == Split::test) {
        if (warnings != nullptr) {
          warnings->push_back("line " + std::to_string(rec.line) +
                              ": dropping label absent from training: " + name);
        }
      } else {
        throw ContractViolation("train label missing from label space: " + name);
      }
    }
    if (options.drop_unlabeled && doc.labels.sum() == 0) continue;
    doc.id = "doc-" + std::to_string(rec.line);
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

Corpus load_dataset(const std::filesystem::path& path, Split split,
                    const LabelSpace* train_labels, const CorpusOptions& options,
                    std::vector<std::string>* warnings) {
  auto records = read_dataset_file(path);
  if (split == Split::train) {
    LabelSpace labels = LabelSpace::from_records(records);
    if (labels.size() < 2) {
      throw ParseError("training split must define at least 2 labels, got " +
                       std::to_string(labels.size()));
    }
    return make_corpus(records, labels, split, options, warnings);
  }
  if (train_labels == nullptr) {
    throw ContractViolation("test split requires the training label space");
  }
  return make_corpus(records, *train_labels, split, options, warnings);
}

}  // namespace cftc
