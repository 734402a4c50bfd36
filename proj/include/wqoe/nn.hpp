#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wqoe/tensor.hpp"

namespace wqoe::nn {

/// Causal dilated 1-D convolution. Weight tap j reads the input at lag
/// j*dilation; tap 0 is the current timestep. Inputs before the start of
/// the sequence are treated as zero.
struct ConvLayerParams {
  Tensor weights;  // [out_channels, in_channels, filter_size]
  Tensor bias;     // [out_channels]
  int dilation = 1;
  int filter_size = 1;
  Tensor weights_grad;
  Tensor bias_grad;

  ConvLayerParams() = default;
  ConvLayerParams(int out_channels, int in_channels, int filter_size, int dilation);

  std::size_t out_channels() const { return weights.shape[0]; }
  std::size_t in_channels() const { return weights.shape[1]; }
};

/// 1x1 convolution: a per-timestep affine map across channels.
struct PointwiseParams {
  Tensor weights;  // [out_channels, in_channels]
  Tensor bias;     // [out_channels]
  Tensor weights_grad;
  Tensor bias_grad;

  PointwiseParams() = default;
  PointwiseParams(int out_channels, int in_channels);

  std::size_t out_channels() const { return weights.shape[0]; }
  std::size_t in_channels() const { return weights.shape[1]; }
};

// Pure forward ops over [channels, time] or [channels, time, batch] tensors.
Tensor causal_conv1d(const Tensor& input, const ConvLayerParams& params);
Tensor gated_activation(const Tensor& filter_path, const Tensor& gate_path);
Tensor pointwise_conv(const Tensor& input, const PointwiseParams& params);

double mse_loss(std::span<const double> pred, std::span<const double> target);
std::vector<double> mse_loss_gradient(std::span<const double> pred,
                                      std::span<const double> target);

/// Named view of one learnable tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// Records every executed op so gradients can be pushed back through the
/// exact computation that ran. Each tape is self-contained state, so several
/// models can train in one process without interfering.
///
/// Ops validate shapes up front and keep whatever intermediate values their
/// backward pass needs. backward() accumulates into the *_grad tensors of the
/// parameter structs the ops were called with; callers zero those first.
class Tape {
 public:
  using ValueId = std::int32_t;

  ValueId input(Tensor value);
  /// stride > 1 evaluates the convolution only at input positions
  /// stride*q + stride-1 (used by the training fast path, where it packs the
  /// time axis); dilation_override replaces params.dilation when >= 1.
  ValueId causal_conv(ValueId input, ConvLayerParams& params, int stride = 1,
                      int dilation_override = -1);
  ValueId pointwise(ValueId input, PointwiseParams& params);
  ValueId gated(ValueId filter_path, ValueId gate_path);
  ValueId add(ValueId a, ValueId b);
  ValueId relu(ValueId input);
  /// Keeps time columns stride-1, 2*stride-1, ... (time extent must divide).
  ValueId stride_cols(ValueId input, int stride);
  /// [C, T(, B)] -> [C, 1(, B)], the final time column.
  ValueId last_col(ValueId input);
  /// Mean squared error against a constant target with the same element
  /// count; produces a scalar node.
  ValueId mse(ValueId pred, Tensor target);

  const Tensor& value(ValueId id) const;
  double scalar(ValueId id) const;

  /// Reverse pass from `loss` (a scalar node), seeding dLoss/dloss = seed.
  /// Throws if no forward pass has been recorded or the id is not a node.
  void backward(ValueId loss, double seed = 1.0);

  /// Multiply-accumulate count of all recorded conv/pointwise ops, derived
  /// from shapes (left-padding zeros are counted as work).
  std::uint64_t mac_count() const { return macs_; }

  std::size_t size() const { return nodes_.size(); }
  void reset();

 private:
  enum class Op : std::uint8_t {
    input, conv, pointwise, gated, add, relu, stride_cols, last_col, mse
  };
  struct Node {
    Op op;
    ValueId a = -1, b = -1;
    ConvLayerParams* conv = nullptr;
    PointwiseParams* pw = nullptr;
    int stride = 1;
    int dilation = 1;
    Tensor value;
    Tensor aux1, aux2;  // gated: tanh/sigmoid caches; mse: target
    Tensor grad;
  };

  ValueId push(Node n);
  Tensor& grad_of(ValueId id);
  const Node& node(ValueId id) const;

  std::vector<Node> nodes_;
  std::uint64_t macs_ = 0;
};

struct AdamState {
  std::vector<Tensor> first_moment;   // zero before the first update
  std::vector<Tensor> second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(std::span<const ParamRef> params, double learning_rate);

/// One Adam update with bias correction. Rejects non-finite gradients,
/// naming the offending parameter.
void adam_step(std::span<const ParamRef> params, AdamState& state);

void zero_gradients(std::span<const ParamRef> params);

}  // namespace wqoe::nn
