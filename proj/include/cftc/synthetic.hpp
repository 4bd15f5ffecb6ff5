#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cftc/corpus.hpp"
#include "cftc/types.hpp"

namespace cftc {

// A planted pairwise dependency: in the named split, the conditional
// probability P(second present | first present) is forced to the given
// value while both marginals stay at base_label_prob.
struct ShortcutPair {
  int first = 0;
  int second = 1;
  Scalar train_prob = 0.9;
  Scalar test_prob = 0.1;
};

struct SyntheticSpec {
  int label_count = 10;
  int vocab_size = 200;
  int docs_train = 5000;
  int docs_test = 1000;
  int tokens_per_doc = 12;
  std::vector<ShortcutPair> shortcut_pairs;
  Scalar base_label_prob = 0.3;
  int tokens_per_label = 3;
  Scalar noise_token_fraction = 0.4;
  std::uint64_t seed = 0;

  // Throws InfeasibleSpec when the marginals cannot support a pair target
  // or the structural constraints fail.
  void validate() const;

  static SyntheticSpec from_file(const std::filesystem::path& path);
};

struct SyntheticData {
  Corpus train;
  Corpus test;
  Mat true_train_cooccurrence;  // analytic conditional co-occurrence
  Mat true_test_cooccurrence;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace cftc
