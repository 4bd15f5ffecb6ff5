#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cftc/types.hpp"

namespace cftc {

enum class Split { train, test };

// One line of a dataset file: raw text plus label names, before any
// tokenization or label-space resolution.
struct RawRecord {
  std::string text;
  std::vector<std::string> labels;
  std::size_t line = 0;
};

struct Document {
  std::vector<std::string> tokens;
  IntVec labels;  // 0/1 per label, length = label space size
  std::string id;
  std::string text;  // raw text as read, kept for lossless re-export
};

// Bijective label-name <-> index map with per-label training counts.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> names);

  static LabelSpace from_records(const std::vector<RawRecord>& records);

  Index size() const { return static_cast<Index>(names_.size()); }
  const std::string& name(Index i) const { return names_[static_cast<std::size_t>(i)]; }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<Index> index_of(std::string_view name) const;

  const std::vector<std::int64_t>& counts() const { return counts_; }
  void set_count(Index i, std::int64_t c) { counts_[static_cast<std::size_t>(i)] = c; }

  std::uint64_t hash() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Index> index_;
  std::vector<std::int64_t> counts_;
};

// Word <-> index map with reserved padding (0) and unknown (1) slots.
class Vocabulary {
 public:
  static constexpr Index kPad = 0;
  static constexpr Index kUnk = 1;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> words);  // without specials

  // Keeps words with frequency >= min_freq, ranked by frequency (ties broken
  // lexicographically), truncated to max_size retained words (0 = unbounded).
  static Vocabulary build(const std::vector<Document>& docs,
                          std::int64_t min_freq, std::size_t max_size);

  Index size() const { return static_cast<Index>(words_.size()); }
  const std::string& word(Index i) const { return words_[static_cast<std::size_t>(i)]; }
  Index index_of(std::string_view w) const;  // kUnk when absent

  // Token strings -> indices, truncated to max_len (0 = no truncation).
  std::vector<int> encode(const std::vector<std::string>& tokens,
                          std::size_t max_len) const;

  std::uint64_t hash() const;

 private:
  std::vector<std::string> words_;  // includes specials at 0 and 1
  std::unordered_map<std::string, Index> index_;
};

struct Corpus {
  std::vector<Document> docs;
  LabelSpace labels;

  std::size_t size() const { return docs.size(); }
  Index label_count() const { return labels.size(); }
};

struct CorpusOptions {
  std::size_t max_tokens = 256;   // per-document truncation at tokenize time
  bool drop_unlabeled = false;    // drop documents with empty label sets
};

// Reads `<text>\t<comma-separated labels>` lines. Throws ParseError with the
// offending line number; an empty file is an error.
std::vector<RawRecord> read_dataset_file(const std::filesystem::path& path);

void write_dataset_file(const std::filesystem::path& path,
                        const std::vector<RawRecord>& records);
void write_dataset_file(const std::filesystem::path& path, const Corpus& corpus);

// Resolves records against a label space. For test splits, labels missing
// from the space are dropped and a warning is recorded.
Corpus make_corpus(const std::vector<RawRecord>& records, const LabelSpace& labels,
                   Split split, const CorpusOptions& options = {},
                   std::vector<std::string>* warnings = nullptr);

// Train split: builds the label space from the file. Test split requires the
// training label space.
Corpus load_dataset(const std::filesystem::path& path, Split split,
                    const LabelSpace* train_labels = nullptr,
                    const CorpusOptions& options = {},
                    std::vector<std::string>* warnings = nullptr);

}  // namespace cftc
