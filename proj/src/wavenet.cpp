#include "wqoe/wavenet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "wqoe/rng.hpp"

namespace wqoe {

namespace {

void check_rf_args(int k, int d, int L) {
  if (k < 1 || d < 1 || L < 1) {
    throw std::invalid_argument(
        "receptive field: filter_size, dilation_base and num_layers must be >= 1 (got " +
        std::to_string(k) + ", " + std::to_string(d) + ", " + std::to_string(L) + ")");
  }
}

void init_uniform(Tensor& t, std::size_t fan_in, SplitMix64& rng) {
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-a, a);
}

void check_features(const Tensor& features, const WaveNetConfig& cfg,
                    const char* what) {
  if (features.rank() < 2 ||
      features.shape[0] != static_cast<std::size_t>(cfg.input_features)) {
    throw std::invalid_argument(
        std::string(what) + ": expected " + std::to_string(cfg.input_features) +
        " feature rows, got shape " + features.shape_str());
  }
}

}  // namespace

namespace {

constexpr long long kMaxReceptiveField = 1LL << 30;

}  // namespace

int receptive_field(int k, int d, int L) {
  check_rf_args(k, d, L);
  long long r = k;
  for (int l = 0; l < L - 1; ++l) {
    r *= d;
    if (r > kMaxReceptiveField) {
      throw std::invalid_argument("receptive_field: span overflows for these arguments");
    }
  }
  return static_cast<int>(r);
}

int effective_receptive_field(int k, int d, int L) {
  check_rf_args(k, d, L);
  long long span = 0;
  long long dil = 1;
  for (int l = 0; l < L; ++l) {
    span += dil;
    dil *= d;
    if (span > kMaxReceptiveField || dil > kMaxReceptiveField) {
      throw std::invalid_argument(
          "effective_receptive_field: span overflows for these arguments");
    }
  }
  return static_cast<int>(1 + static_cast<long long>(k - 1) * span);
}

std::vector<nn::ParamRef> WaveNetParams::param_refs() {
  std::vector<nn::ParamRef> refs;
  refs.push_back({"input_proj.weights", &input_proj.weights, &input_proj.weights_grad});
  refs.push_back({"input_proj.bias", &input_proj.bias, &input_proj.bias_grad});
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    Block& b = blocks[l];
    const std::string p = "block" + std::to_string(l) + ".";
    refs.push_back({p + "filter.weights", &b.filter_conv.weights, &b.filter_conv.weights_grad});
    refs.push_back({p + "filter.bias", &b.filter_conv.bias, &b.filter_conv.bias_grad});
    refs.push_back({p + "gate.weights", &b.gate_conv.weights, &b.gate_conv.weights_grad});
    refs.push_back({p + "gate.bias", &b.gate_conv.bias, &b.gate_conv.bias_grad});
    refs.push_back({p + "residual.weights", &b.residual.weights, &b.residual.weights_grad});
    refs.push_back({p + "residual.bias", &b.residual.bias, &b.residual.bias_grad});
    refs.push_back({p + "skip.weights", &b.skip.weights, &b.skip.weights_grad});
    refs.push_back({p + "skip.bias", &b.skip.bias, &b.skip.bias_grad});
  }
  refs.push_back({"head1.weights", &head1.weights, &head1.weights_grad});
  refs.push_back({"head1.bias", &head1.bias, &head1.bias_grad});
  refs.push_back({"head2.weights", &head2.weights, &head2.weights_grad});
  refs.push_back({"head2.bias", &head2.bias, &head2.bias_grad});
  return refs;
}

std::size_t WaveNetParams::param_count() const {
  std::size_t n = input_proj.weights.numel() + input_proj.bias.numel();
  for (const Block& b : blocks) {
    n += b.filter_conv.weights.numel() + b.filter_conv.bias.numel();
    n += b.gate_conv.weights.numel() + b.gate_conv.bias.numel();
    n += b.residual.weights.numel() + b.residual.bias.numel();
    n += b.skip.weights.numel() + b.skip.bias.numel();
  }
  n += head1.weights.numel() + head1.bias.numel();
  n += head2.weights.numel() + head2.bias.numel();
  return n;
}

WaveNetParams wavenet_init(const WaveNetConfig& config, std::uint64_t seed) {
  if (config.filter_size < 1 || config.num_filters < 1 ||
      config.dilation_base < 1 || config.num_layers < 1 ||
      config.input_features < 1) {
    throw std::invalid_argument("wavenet_init: all config extents must be >= 1");
  }
  const int n = config.num_filters;
  WaveNetParams p;
  p.config = config;
  p.input_proj = nn::PointwiseParams(n, config.input_features);
  long long dil = 1;
  for (int l = 0; l < config.num_layers; ++l) {
    if (dil > (1 << 24)) {
      throw std::invalid_argument("wavenet_init: dilation " + std::to_string(dil) +
                                  " at layer " + std::to_string(l) + " is implausible");
    }
    WaveNetParams::Block b;
    b.filter_conv = nn::ConvLayerParams(n, n, config.filter_size, static_cast<int>(dil));
    b.gate_conv = nn::ConvLayerParams(n, n, config.filter_size, static_cast<int>(dil));
    b.residual = nn::PointwiseParams(n, n);
    b.skip = nn::PointwiseParams(n, n);
    p.blocks.push_back(std::move(b));
    dil *= config.dilation_base;
  }
  p.head1 = nn::PointwiseParams(n, n);
  p.head2 = nn::PointwiseParams(1, n);

  SplitMix64 rng(seed);
  init_uniform(p.input_proj.weights, static_cast<std::size_t>(config.input_features), rng);
  const std::size_t conv_fan = static_cast<std::size_t>(n) * config.filter_size;
  for (WaveNetParams::Block& b : p.blocks) {
    init_uniform(b.filter_conv.weights, conv_fan, rng);
    init_uniform(b.gate_conv.weights, conv_fan, rng);
    init_uniform(b.residual.weights, static_cast<std::size_t>(n), rng);
    init_uniform(b.skip.weights, static_cast<std::size_t>(n), rng);
  }
  init_uniform(p.head1.weights, static_cast<std::size_t>(n), rng);
  init_uniform(p.head2.weights, static_cast<std::size_t>(n), rng);
  return p;
}

nn::Tape::ValueId wavenet_sequence_graph(nn::Tape& tape, WaveNetParams& params,
                                         Tensor features) {
  check_features(features, params.config, "wavenet_forward");
  if (features.rank() != 2) {
    throw std::invalid_argument("wavenet_forward: expected a [features, T] tensor, got " +
                                features.shape_str());
  }
  auto x = tape.input(std::move(features));
  x = tape.pointwise(x, params.input_proj);
  nn::Tape::ValueId skip_sum = -1;
  for (WaveNetParams::Block& b : params.blocks) {
    auto f = tape.causal_conv(x, b.filter_conv);
    auto g = tape.causal_conv(x, b.gate_conv);
    auto u = tape.gated(f, g);
    x = tape.add(x, tape.pointwise(u, b.residual));
    auto s = tape.pointwise(u, b.skip);
    skip_sum = skip_sum < 0 ? s : tape.add(skip_sum, s);
  }
  auto h = tape.relu(skip_sum);
  h = tape.pointwise(h, params.head1);
  h = tape.relu(h);
  return tape.pointwise(h, params.head2);  // [1, T]
}

std::vector<double> wavenet_forward(WaveNetParams& params, const Tensor& features) {
  nn::Tape tape;
  auto h = wavenet_sequence_graph(tape, params, features);
  return tape.value(h).data;
}

nn::Tape::ValueId wavenet_window_graph(nn::Tape& tape, WaveNetParams& params,
                                       Tensor windows) {
  check_features(windows, params.config, "wavenet_window_graph");
  const WaveNetConfig& cfg = params.config;
  const std::size_t w = windows.shape[1];
  const bool tree = cfg.filter_size == 2 && cfg.dilation_base == 2 &&
                    w == (std::size_t{1} << cfg.num_layers);

  auto x = tape.input(std::move(windows));
  x = tape.pointwise(x, params.input_proj);
  nn::Tape::ValueId skip_sum = -1;

  if (tree) {
    // Stride-2 evaluation: layer l's dilation 2^l becomes adjacent taps on
    // the packed axis, and only positions feeding the last timestep survive.
    for (std::size_t l = 0; l < params.blocks.size(); ++l) {
      WaveNetParams::Block& b = params.blocks[l];
      auto f = tape.causal_conv(x, b.filter_conv, /*stride=*/2, /*dilation=*/1);
      auto g = tape.causal_conv(x, b.gate_conv, /*stride=*/2, /*dilation=*/1);
      auto u = tape.gated(f, g);
      if (l + 1 < params.blocks.size()) {
        x = tape.add(tape.stride_cols(x, 2), tape.pointwise(u, b.residual));
      }
      auto s = tape.pointwise(tape.last_col(u), b.skip);
      skip_sum = skip_sum < 0 ? s : tape.add(skip_sum, s);
    }
  } else {
    for (WaveNetParams::Block& b : params.blocks) {
      auto f = tape.causal_conv(x, b.filter_conv);
      auto g = tape.causal_conv(x, b.gate_conv);
      auto u = tape.gated(f, g);
      x = tape.add(x, tape.pointwise(u, b.residual));
      auto s = tape.pointwise(tape.last_col(u), b.skip);
      skip_sum = skip_sum < 0 ? s : tape.add(skip_sum, s);
    }
  }

  auto h = tape.relu(skip_sum);
  h = tape.pointwise(h, params.head1);
  h = tape.relu(h);
  return tape.pointwise(h, params.head2);  // [1, 1, B]
}

}  // namespace wqoe
