#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wqoe/nn.hpp"
#include "wqoe/tensor.hpp"

namespace wqoe {

struct LstmConfig {
  int input_features = 4;
  int hidden_size = 32;
};

/// Single recurrent layer plus a dense head to a scalar. Gate blocks are
/// ordered input, forget, cell, output; the recurrence is computed strictly
/// sequentially over time.
struct LstmParams {
  LstmConfig config;
  Tensor w_input;   // [4H, input_features]
  Tensor w_hidden;  // [4H, H]
  Tensor bias;      // [4H]; forget block initialized to 1.0
  Tensor head_w;    // [H]
  Tensor head_b;    // [1]
  Tensor w_input_grad, w_hidden_grad, bias_grad, head_w_grad, head_b_grad;

  std::vector<nn::ParamRef> param_refs();
  std::size_t param_count() const;
};

LstmParams lstm_init(const LstmConfig& config, std::uint64_t seed);

/// Full-sequence pass: features [input_features, T] -> one prediction per
/// timestep, state starting at zero.
std::vector<double> lstm_forward(LstmParams& params, const Tensor& features);

/// Saved forward intermediates for one window batch, consumed by the
/// backward pass.
struct LstmWindowCache {
  Tensor input;       // [in, w, B]
  Tensor gates;       // [w, 4H, B], post-activation (i, f, g, o)
  Tensor cells;       // [w, H, B]
  Tensor tanh_cells;  // [w, H, B]
  Tensor hidden;      // [w, H, B]
  std::vector<double> pred;  // [B], head over the final hidden state
};

/// Runs the recurrence over a batch of windows [in, w, B]; the prediction of
/// each window is the head applied to its last hidden state.
std::vector<double> lstm_window_forward(LstmParams& params, Tensor windows,
                                        LstmWindowCache& cache);

/// Backpropagation through time over the cached window batch. Accumulates
/// into the *_grad tensors; callers zero them first.
void lstm_window_backward(LstmParams& params, const LstmWindowCache& cache,
                          std::span<const double> pred_grad);

}  // namespace wqoe
