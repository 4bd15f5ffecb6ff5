#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cftc/corpus.hpp"
#include "cftc/types.hpp"

namespace cftc {

// Label co-occurrence statistics. raw(i, j) is the conditional probability
// that label i is present given label j is present, estimated from training
// counts. normalized is the symmetric degree rescaling used as the graph
// adjacency: normalized(i, j) = raw(i, j) / sqrt(d_i * d_j) with d_i the
// i-th row sum of raw, floored at kDegreeFloor.
struct CooccurrenceMatrix {
  Mat raw;
  Mat normalized;
  Vec degree;
};

inline constexpr Scalar kDegreeFloor = 1e-6;

Mat compute_cooccurrence(const Corpus& corpus);
Mat normalize_cooccurrence(const Mat& raw);
CooccurrenceMatrix build_cooccurrence(const Corpus& corpus);

// CSV with label names on the header row and first column, full precision.
void write_matrix_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& labels, const Mat& m);
Mat read_matrix_csv(const std::filesystem::path& path);

}  // namespace cftc
