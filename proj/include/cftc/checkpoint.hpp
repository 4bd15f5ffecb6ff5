#pragma once

#include <filesystem>

#include "cftc/train.hpp"

namespace cftc {

// Single-file binary archive: metadata (sizes, threshold, vocabulary and
// label-space hashes), vocabulary, label space, co-occurrence statistics,
// training config, training log, and every parameter tensor keyed by its
// canonical name. A trailing checksum guards against truncation; loading
// validates every tensor shape against the metadata.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);

TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace cftc
