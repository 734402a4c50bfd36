#pragma once

#include <cstdint>
#include <vector>

#include "wqoe/nn.hpp"
#include "wqoe/tensor.hpp"

namespace wqoe {

/// Lag span reachable by the final layer alone: d^(L-1) * k.
int receptive_field(int filter_size, int dilation_base, int num_layers);

/// True dependency span of the stacked network:
/// 1 + (k-1) * sum_{l=0}^{L-1} d^l. Coincides with receptive_field when
/// k = d = 2.
int effective_receptive_field(int filter_size, int dilation_base, int num_layers);

struct WaveNetConfig {
  int filter_size = 2;    // k
  int num_filters = 32;   // n, residual/skip channel width
  int dilation_base = 2;  // d; layer l dilates by d^l
  int num_layers = 3;     // L
  int input_features = 4;

  int receptive_field() const {
    return wqoe::receptive_field(filter_size, dilation_base, num_layers);
  }
  int effective_receptive_field() const {
    return wqoe::effective_receptive_field(filter_size, dilation_base, num_layers);
  }
};

/// Stack of gated residual blocks with skip connections and a two-stage
/// rectified head emitting one scalar per timestep.
struct WaveNetParams {
  WaveNetConfig config;
  nn::PointwiseParams input_proj;  // input_features -> n
  struct Block {
    nn::ConvLayerParams filter_conv;  // n -> n, size k, dilation d^l
    nn::ConvLayerParams gate_conv;
    nn::PointwiseParams residual;     // n -> n
    nn::PointwiseParams skip;         // n -> n
  };
  std::vector<Block> blocks;
  nn::PointwiseParams head1;  // n -> n
  nn::PointwiseParams head2;  // n -> 1

  /// Learnable tensors in declaration order (also the serialization order).
  std::vector<nn::ParamRef> param_refs();
  std::size_t param_count() const;
};

/// Uniform [-a, a] init with a = sqrt(1/fan_in); biases start at zero.
WaveNetParams wavenet_init(const WaveNetConfig& config, std::uint64_t seed);

/// Full-sequence pass: normalized features [input_features, T] to one
/// prediction per timestep (normalized units). Output at time t depends
/// only on inputs at times <= t.
std::vector<double> wavenet_forward(WaveNetParams& params, const Tensor& features);

/// Records the full-sequence pass on an existing tape and returns the head
/// node [1, T]. wavenet_forward is this plus a private tape; building on a
/// caller-owned tape gives access to gradients and the tape's MAC counter.
nn::Tape::ValueId wavenet_sequence_graph(nn::Tape& tape, WaveNetParams& params,
                                         Tensor features);

/// Records the training pass over a batch of windows [features, w, B] and
/// returns the node holding the last-timestep prediction of every window,
/// shaped [1, 1, B].
///
/// When k = d = 2 and w = 2^L only the positions the last timestep actually
/// depends on are evaluated: each block becomes a stride-2 convolution that
/// halves the packed time axis. The arithmetic per retained position is
/// identical to the full pass, so the two routes agree bit for bit.
nn::Tape::ValueId wavenet_window_graph(nn::Tape& tape, WaveNetParams& params,
                                       Tensor windows);

}  // namespace wqoe
