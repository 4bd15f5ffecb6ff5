#pragma once

#include <vector>

#include "cftc/types.hpp"

namespace cftc {

// One direction of the recurrent encoder. Gate rows are stacked
// [input; forget; cell; output], so W is (4H x in_dim), U is (4H x H).
struct LstmParams {
  Mat W;
  Mat U;
  Vec b;
};

// Per-step activations kept for backpropagation through time. Inputs and
// states are column-per-sequence matrices so a batch is one GEMM per step.
struct LstmCache {
  std::vector<Mat> x;      // in_dim x B
  std::vector<Mat> gates;  // 4H x B, post-activation
  std::vector<Mat> c;      // H x B
  std::vector<Mat> h;      // H x B
};

// Runs the cell over `inputs` (one matrix per step). Returns hidden states
// per step; fills `cache` when non-null.
std::vector<Mat> lstm_forward(const LstmParams& params,
                              const std::vector<Mat>& inputs, LstmCache* cache);

// dh_out[t] is dLoss/dh_t injected from above (H x B). Accumulates weight
// gradients into `grads` and returns dLoss/dx_t per step.
std::vector<Mat> lstm_backward(const LstmParams& params, const LstmCache& cache,
                               const std::vector<Mat>& dh_out, LstmParams& grads);

}  // namespace cftc
