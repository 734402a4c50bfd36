#include "wqoe/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "kernel_util.hpp"
#include "wqoe/errors.hpp"

namespace wqoe::nn {

namespace {

struct Dims {
  std::size_t channels, time, batch;
};

Dims dims_of(const Tensor& t, const char* what) {
  if (t.rank() == 2) return {t.shape[0], t.shape[1], 1};
  if (t.rank() == 3) return {t.shape[0], t.shape[1], t.shape[2]};
  throw std::invalid_argument(std::string(what) +
                              " expects a [channels, time(, batch)] tensor, got " +
                              t.shape_str());
}

std::vector<std::size_t> like_shape(const Tensor& ref, std::size_t channels,
                                    std::size_t time) {
  if (ref.rank() == 2) return {channels, time};
  return {channels, time, ref.shape[2]};
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

using detail::dot4;
using detail::sum4;

// out[co, q, b] = bias[co] + sum_{ci, j} w[co, ci, j] * x[ci, p, b]
// with p = stride*q + stride-1 - j*dilation, negative p reading zero.
// Accumulation order is fixed (bias, then ci ascending, taps ascending) so
// the strided training path is bit-identical to the full-sequence pass.
void conv_forward(const double* __restrict x, Dims in, const double* __restrict w,
                  const double* __restrict bias, std::size_t cout, std::size_t k,
                  std::size_t dil, std::size_t stride, double* __restrict y,
                  std::size_t tout) {
  const std::size_t B = in.batch;
  if (B == 1) {
    // Single-window path: scalar accumulation, contiguous in w. The k = 2
    // body groups both taps exactly like the batched path below so every
    // route produces bit-identical values.
    for (std::size_t co = 0; co < cout; ++co) {
      const double* wrow = w + co * in.channels * k;
      for (std::size_t q = 0; q < tout; ++q) {
        const std::ptrdiff_t base =
            static_cast<std::ptrdiff_t>(stride * q + stride - 1);
        double acc = bias[co];
        if (k == 2 && base >= static_cast<std::ptrdiff_t>(dil)) {
          const std::size_t p0 = static_cast<std::size_t>(base);
          const std::size_t p1 = p0 - dil;
          const double* wr = wrow;
          for (std::size_t ci = 0; ci < in.channels; ++ci, wr += 2) {
            const double* xc = x + ci * in.time;
            acc += wr[0] * xc[p0] + wr[1] * xc[p1];
          }
        } else {
          const double* wr = wrow;
          for (std::size_t ci = 0; ci < in.channels; ++ci, wr += k) {
            const double* xc = x + ci * in.time;
            for (std::size_t j = 0; j < k; ++j) {
              const std::ptrdiff_t p = base - static_cast<std::ptrdiff_t>(j * dil);
              if (p >= 0) acc += wr[j] * xc[p];
            }
          }
        }
        y[co * tout + q] = acc;
      }
    }
    return;
  }
  std::vector<double> accbuf(B);
  double* __restrict acc = accbuf.data();
  for (std::size_t co = 0; co < cout; ++co) {
    const double* wrow = w + co * in.channels * k;
    for (std::size_t q = 0; q < tout; ++q) {
      for (std::size_t b = 0; b < B; ++b) acc[b] = bias[co];
      const std::ptrdiff_t base =
          static_cast<std::ptrdiff_t>(stride * q + stride - 1);
      if (k == 2 && base >= static_cast<std::ptrdiff_t>(dil)) {
        // Both taps valid: one pass over acc per channel.
        const std::size_t p0 = static_cast<std::size_t>(base);
        const std::size_t p1 = p0 - dil;
        for (std::size_t ci = 0; ci < in.channels; ++ci) {
          const double w0 = wrow[ci * 2];
          const double w1 = wrow[ci * 2 + 1];
          const double* __restrict x0 = x + (ci * in.time + p0) * B;
          const double* __restrict x1 = x + (ci * in.time + p1) * B;
          for (std::size_t b = 0; b < B; ++b) acc[b] += w0 * x0[b] + w1 * x1[b];
        }
      } else {
        for (std::size_t ci = 0; ci < in.channels; ++ci) {
          const double* wr = wrow + ci * k;
          const double* xc = x + ci * in.time * B;
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t p = base - static_cast<std::ptrdiff_t>(j * dil);
            if (p < 0) continue;
            const double wv = wr[j];
            const double* __restrict xp = xc + static_cast<std::size_t>(p) * B;
            for (std::size_t b = 0; b < B; ++b) acc[b] += wv * xp[b];
          }
        }
      }
      double* yp = y + (co * tout + q) * B;
      for (std::size_t b = 0; b < B; ++b) yp[b] = acc[b];
    }
  }
}

// Accumulates into dw/db and, when dx is non-null, into dx.
//
// dw/db reduce over the batch per (co, q, ci, j); dx runs as a separate
// transposed pass per (q, j) so each dx row is written once with the whole
// channel sum held in registers instead of a load-add-store per co.
void conv_backward(const double* __restrict x, Dims in, const double* __restrict w,
                   std::size_t cout, std::size_t k, std::size_t dil,
                   std::size_t stride, const double* __restrict dy,
                   std::size_t tout, double* __restrict dw, double* __restrict db,
                   double* __restrict dx) {
  const std::size_t B = in.batch;
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t q = 0; q < tout; ++q) {
      const double* dyp = dy + (co * tout + q) * B;
      db[co] += sum4(dyp, B);
      const std::ptrdiff_t base =
          static_cast<std::ptrdiff_t>(stride * q + stride - 1);
      if (k == 2 && base >= static_cast<std::ptrdiff_t>(dil)) {
        const std::size_t p0 = static_cast<std::size_t>(base);
        const std::size_t p1 = p0 - dil;
        for (std::size_t ci = 0; ci < in.channels; ++ci) {
          const double* x0 = x + (ci * in.time + p0) * B;
          const double* x1 = x + (ci * in.time + p1) * B;
          double* dwr = dw + (co * in.channels + ci) * 2;
          dwr[0] += dot4(dyp, x0, B);
          dwr[1] += dot4(dyp, x1, B);
        }
      } else {
        for (std::size_t ci = 0; ci < in.channels; ++ci) {
          double* dwr = dw + (co * in.channels + ci) * k;
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t p = base - static_cast<std::ptrdiff_t>(j * dil);
            if (p < 0) continue;
            const double* xp = x + (ci * in.time + static_cast<std::size_t>(p)) * B;
            dwr[j] += dot4(dyp, xp, B);
          }
        }
      }
    }
  }
  if (!dx) return;

  constexpr std::size_t kTile = 64;
  double acc[kTile];
  for (std::size_t q = 0; q < tout; ++q) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(stride * q + stride - 1);
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t p = base - static_cast<std::ptrdiff_t>(j * dil);
      if (p < 0) continue;
      for (std::size_t b0 = 0; b0 < B; b0 += kTile) {
        const std::size_t nb = std::min(kTile, B - b0);
        for (std::size_t ci = 0; ci < in.channels; ++ci) {
          for (std::size_t b = 0; b < nb; ++b) acc[b] = 0.0;
          const double* wcol = w + ci * k + j;
          for (std::size_t co = 0; co < cout; ++co) {
            const double wv = wcol[co * in.channels * k];
            const double* __restrict dyp = dy + (co * tout + q) * B + b0;
            for (std::size_t b = 0; b < nb; ++b) acc[b] += wv * dyp[b];
          }
          double* __restrict dxp =
              dx + (ci * in.time + static_cast<std::size_t>(p)) * B + b0;
          for (std::size_t b = 0; b < nb; ++b) dxp[b] += acc[b];
        }
      }
    }
  }
}

// Pointwise ops fuse time and batch into one contiguous axis of length m.
void pointwise_forward(const double* __restrict x, std::size_t cin, std::size_t m,
                       const double* __restrict w, const double* __restrict bias,
                       std::size_t cout, double* __restrict y) {
  for (std::size_t co = 0; co < cout; ++co) {
    double* yp = y + co * m;
    const double bv = bias[co];
    for (std::size_t i = 0; i < m; ++i) yp[i] = bv;
    const double* wr = w + co * cin;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double wv = wr[ci];
      const double* __restrict xp = x + ci * m;
      for (std::size_t i = 0; i < m; ++i) yp[i] += wv * xp[i];
    }
  }
}

void pointwise_backward(const double* __restrict x, std::size_t cin, std::size_t m,
                        const double* __restrict w, std::size_t cout,
                        const double* __restrict dy, double* __restrict dw,
                        double* __restrict db, double* __restrict dx) {
  for (std::size_t co = 0; co < cout; ++co) {
    const double* dyp = dy + co * m;
    db[co] += sum4(dyp, m);
    double* dwr = dw + co * cin;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      dwr[ci] += dot4(dyp, x + ci * m, m);
    }
  }
  if (!dx) return;

  constexpr std::size_t kTile = 64;
  double acc[kTile];
  for (std::size_t i0 = 0; i0 < m; i0 += kTile) {
    const std::size_t ni = std::min(kTile, m - i0);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t i = 0; i < ni; ++i) acc[i] = 0.0;
      for (std::size_t co = 0; co < cout; ++co) {
        const double wv = w[co * cin + ci];
        const double* __restrict dyp = dy + co * m + i0;
        for (std::size_t i = 0; i < ni; ++i) acc[i] += wv * dyp[i];
      }
      double* __restrict dxp = dx + ci * m + i0;
      for (std::size_t i = 0; i < ni; ++i) dxp[i] += acc[i];
    }
  }
}

void check_conv_input(const Tensor& input, const ConvLayerParams& p) {
  Dims in = dims_of(input, "causal_conv1d");
  if (in.channels != p.in_channels()) {
    throw std::invalid_argument(
        "causal_conv1d: input shape " + input.shape_str() +
        " has " + std::to_string(in.channels) +
        " channels but the layer weights are shaped " + p.weights.shape_str());
  }
  if (p.dilation < 1 || p.filter_size < 1) {
    throw std::invalid_argument("causal_conv1d: dilation and filter_size must be >= 1");
  }
  if (p.weights.shape[2] != static_cast<std::size_t>(p.filter_size)) {
    throw std::invalid_argument("causal_conv1d: weights shaped " +
                                p.weights.shape_str() + " disagree with filter_size " +
                                std::to_string(p.filter_size));
  }
}

}  // namespace

ConvLayerParams::ConvLayerParams(int out_ch, int in_ch, int k, int d)
    : weights(Tensor::zeros({static_cast<std::size_t>(out_ch),
                             static_cast<std::size_t>(in_ch),
                             static_cast<std::size_t>(k)})),
      bias(Tensor::zeros({static_cast<std::size_t>(out_ch)})),
      dilation(d),
      filter_size(k),
      weights_grad(Tensor::zeros(weights.shape)),
      bias_grad(Tensor::zeros(bias.shape)) {
  if (out_ch < 1 || in_ch < 1 || k < 1 || d < 1) {
    throw std::invalid_argument("conv layer extents and dilation must be >= 1");
  }
}

PointwiseParams::PointwiseParams(int out_ch, int in_ch)
    : weights(Tensor::zeros({static_cast<std::size_t>(out_ch),
                             static_cast<std::size_t>(in_ch)})),
      bias(Tensor::zeros({static_cast<std::size_t>(out_ch)})),
      weights_grad(Tensor::zeros(weights.shape)),
      bias_grad(Tensor::zeros(bias.shape)) {
  if (out_ch < 1 || in_ch < 1) {
    throw std::invalid_argument("pointwise layer extents must be >= 1");
  }
}

Tensor causal_conv1d(const Tensor& input, const ConvLayerParams& params) {
  check_conv_input(input, params);
  Dims in = dims_of(input, "causal_conv1d");
  Tensor out(like_shape(input, params.out_channels(), in.time));
  conv_forward(input.data.data(), in, params.weights.data.data(),
               params.bias.data.data(), params.out_channels(),
               static_cast<std::size_t>(params.filter_size),
               static_cast<std::size_t>(params.dilation), 1, out.data.data(),
               in.time);
  return out;
}

Tensor gated_activation(const Tensor& filter_path, const Tensor& gate_path) {
  if (!filter_path.same_shape(gate_path)) {
    throw std::invalid_argument("gated_activation: shape mismatch " +
                                filter_path.shape_str() + " vs " +
                                gate_path.shape_str());
  }
  Tensor out(filter_path.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.data[i] = std::tanh(filter_path.data[i]) * sigmoid(gate_path.data[i]);
  }
  return out;
}

Tensor pointwise_conv(const Tensor& input, const PointwiseParams& params) {
  Dims in = dims_of(input, "pointwise_conv");
  if (in.channels != params.in_channels()) {
    throw std::invalid_argument(
        "pointwise_conv: input shape " + input.shape_str() + " has " +
        std::to_string(in.channels) + " channels but weights are shaped " +
        params.weights.shape_str());
  }
  Tensor out(like_shape(input, params.out_channels(), in.time));
  pointwise_forward(input.data.data(), in.channels, in.time * in.batch,
                    params.weights.data.data(), params.bias.data.data(),
                    params.out_channels(), out.data.data());
  return out;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("mse_loss: length mismatch " +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(target.size()));
  }
  if (pred.empty()) throw std::invalid_argument("mse_loss: empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

std::vector<double> mse_loss_gradient(std::span<const double> pred,
                                      std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw std::invalid_argument("mse_loss_gradient: bad lengths");
  }
  std::vector<double> g(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    g[i] = scale * (pred[i] - target[i]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Tape

Tape::ValueId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<ValueId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(ValueId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw std::invalid_argument("tape: invalid node id " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

Tensor& Tape::grad_of(ValueId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

const Tensor& Tape::value(ValueId id) const { return node(id).value; }

double Tape::scalar(ValueId id) const {
  const Tensor& v = node(id).value;
  if (v.numel() != 1) {
    throw std::invalid_argument("tape: node " + std::to_string(id) +
                                " is not a scalar");
  }
  return v.data[0];
}

void Tape::reset() {
  nodes_.clear();
  macs_ = 0;
}

Tape::ValueId Tape::input(Tensor value) {
  Node n;
  n.op = Op::input;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::ValueId Tape::causal_conv(ValueId input, ConvLayerParams& params,
                                int stride, int dilation_override) {
  const Tensor& x = node(input).value;
  check_conv_input(x, params);
  if (stride < 1) throw std::invalid_argument("causal_conv: stride must be >= 1");
  Dims in = dims_of(x, "causal_conv1d");
  if (in.time % static_cast<std::size_t>(stride) != 0) {
    throw std::invalid_argument("causal_conv: stride must divide the time extent");
  }
  const int dil = dilation_override >= 1 ? dilation_override : params.dilation;
  const std::size_t tout = in.time / static_cast<std::size_t>(stride);

  Node n;
  n.op = Op::conv;
  n.a = input;
  n.conv = &params;
  n.stride = stride;
  n.dilation = dil;
  n.value = Tensor(like_shape(x, params.out_channels(), tout));
  conv_forward(x.data.data(), in, params.weights.data.data(),
               params.bias.data.data(), params.out_channels(),
               static_cast<std::size_t>(params.filter_size),
               static_cast<std::size_t>(dil), static_cast<std::size_t>(stride),
               n.value.data.data(), tout);
  macs_ += static_cast<std::uint64_t>(params.out_channels()) * in.channels *
           static_cast<std::uint64_t>(params.filter_size) * tout * in.batch;
  return push(std::move(n));
}

Tape::ValueId Tape::pointwise(ValueId input, PointwiseParams& params) {
  const Tensor& x = node(input).value;
  Dims in = dims_of(x, "pointwise_conv");
  if (in.channels != params.in_channels()) {
    throw std::invalid_argument(
        "pointwise_conv: input shape " + x.shape_str() + " has " +
        std::to_string(in.channels) + " channels but weights are shaped " +
        params.weights.shape_str());
  }
  Node n;
  n.op = Op::pointwise;
  n.a = input;
  n.pw = &params;
  n.value = Tensor(like_shape(x, params.out_channels(), in.time));
  pointwise_forward(x.data.data(), in.channels, in.time * in.batch,
                    params.weights.data.data(), params.bias.data.data(),
                    params.out_channels(), n.value.data.data());
  macs_ += static_cast<std::uint64_t>(params.out_channels()) * in.channels *
           in.time * in.batch;
  return push(std::move(n));
}

Tape::ValueId Tape::gated(ValueId filter_path, ValueId gate_path) {
  const Tensor& f = node(filter_path).value;
  const Tensor& g = node(gate_path).value;
  if (!f.same_shape(g)) {
    throw std::invalid_argument("gated_activation: shape mismatch " +
                                f.shape_str() + " vs " + g.shape_str());
  }
  Node n;
  n.op = Op::gated;
  n.a = filter_path;
  n.b = gate_path;
  n.aux1 = Tensor(f.shape);  // tanh(filter)
  n.aux2 = Tensor(f.shape);  // sigmoid(gate)
  n.value = Tensor(f.shape);
  for (std::size_t i = 0; i < f.numel(); ++i) {
    const double th = std::tanh(f.data[i]);
    const double sg = sigmoid(g.data[i]);
    n.aux1.data[i] = th;
    n.aux2.data[i] = sg;
    n.value.data[i] = th * sg;
  }
  return push(std::move(n));
}

Tape::ValueId Tape::add(ValueId a, ValueId b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (!ta.same_shape(tb)) {
    throw std::invalid_argument("add: shape mismatch " + ta.shape_str() +
                                " vs " + tb.shape_str());
  }
  Node n;
  n.op = Op::add;
  n.a = a;
  n.b = b;
  n.value = Tensor(ta.shape);
  for (std::size_t i = 0; i < ta.numel(); ++i) {
    n.value.data[i] = ta.data[i] + tb.data[i];
  }
  return push(std::move(n));
}

Tape::ValueId Tape::relu(ValueId input) {
  const Tensor& x = node(input).value;
  Node n;
  n.op = Op::relu;
  n.a = input;
  n.value = Tensor(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    n.value.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  }
  return push(std::move(n));
}

Tape::ValueId Tape::stride_cols(ValueId input, int stride) {
  const Tensor& x = node(input).value;
  Dims in = dims_of(x, "stride_cols");
  if (stride < 1 || in.time % static_cast<std::size_t>(stride) != 0) {
    throw std::invalid_argument("stride_cols: stride must divide the time extent");
  }
  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t tout = in.time / s;
  Node n;
  n.op = Op::stride_cols;
  n.a = input;
  n.stride = stride;
  n.value = Tensor(like_shape(x, in.channels, tout));
  const std::size_t B = in.batch;
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t q = 0; q < tout; ++q) {
      const double* src = x.data.data() + (c * in.time + (s * q + s - 1)) * B;
      double* dst = n.value.data.data() + (c * tout + q) * B;
      std::memcpy(dst, src, B * sizeof(double));
    }
  }
  return push(std::move(n));
}

Tape::ValueId Tape::last_col(ValueId input) {
  const Tensor& x = node(input).value;
  Dims in = dims_of(x, "last_col");
  Node n;
  n.op = Op::last_col;
  n.a = input;
  n.value = Tensor(like_shape(x, in.channels, 1));
  const std::size_t B = in.batch;
  for (std::size_t c = 0; c < in.channels; ++c) {
    const double* src = x.data.data() + (c * in.time + (in.time - 1)) * B;
    std::memcpy(n.value.data.data() + c * B, src, B * sizeof(double));
  }
  return push(std::move(n));
}

Tape::ValueId Tape::mse(ValueId pred, Tensor target) {
  const Tensor& p = node(pred).value;
  if (p.numel() != target.numel() || p.numel() == 0) {
    throw std::invalid_argument("mse: prediction " + p.shape_str() +
                                " vs target " + target.shape_str());
  }
  Node n;
  n.op = Op::mse;
  n.a = pred;
  n.aux1 = std::move(target);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double d = p.data[i] - n.aux1.data[i];
    acc += d * d;
  }
  n.value = Tensor({1}, {acc / static_cast<double>(p.numel())});
  return push(std::move(n));
}

void Tape::backward(ValueId loss, double seed) {
  if (nodes_.empty()) {
    throw std::logic_error("tape: backward called before any forward op");
  }
  const Node& top = node(loss);
  if (top.value.numel() != 1) {
    throw std::invalid_argument("tape: backward needs a scalar loss node");
  }
  grad_of(loss).data[0] = seed;

  for (ValueId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.numel() == 0) continue;  // not on the path to the loss
    const double* dy = n.grad.data.data();
    switch (n.op) {
      case Op::input:
        break;
      case Op::conv: {
        const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
        Dims in = dims_of(x, "conv");
        const bool need_dx = nodes_[static_cast<std::size_t>(n.a)].op != Op::input;
        double* dx = need_dx ? grad_of(n.a).data.data() : nullptr;
        conv_backward(x.data.data(), in, n.conv->weights.data.data(),
                      n.conv->out_channels(),
                      static_cast<std::size_t>(n.conv->filter_size),
                      static_cast<std::size_t>(n.dilation),
                      static_cast<std::size_t>(n.stride), dy,
                      n.value.shape[1], n.conv->weights_grad.data.data(),
                      n.conv->bias_grad.data.data(), dx);
        break;
      }
      case Op::pointwise: {
        const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
        Dims in = dims_of(x, "pointwise");
        const bool need_dx = nodes_[static_cast<std::size_t>(n.a)].op != Op::input;
        double* dx = need_dx ? grad_of(n.a).data.data() : nullptr;
        pointwise_backward(x.data.data(), in.channels, in.time * in.batch,
                           n.pw->weights.data.data(), n.pw->out_channels(), dy,
                           n.pw->weights_grad.data.data(),
                           n.pw->bias_grad.data.data(), dx);
        break;
      }
      case Op::gated: {
        double* df = grad_of(n.a).data.data();
        double* dg = grad_of(n.b).data.data();
        const double* th = n.aux1.data.data();
        const double* sg = n.aux2.data.data();
        for (std::size_t i = 0; i < n.value.numel(); ++i) {
          df[i] += dy[i] * (1.0 - th[i] * th[i]) * sg[i];
          dg[i] += dy[i] * th[i] * sg[i] * (1.0 - sg[i]);
        }
        break;
      }
      case Op::add: {
        double* da = grad_of(n.a).data.data();
        double* db = grad_of(n.b).data.data();
        for (std::size_t i = 0; i < n.value.numel(); ++i) {
          da[i] += dy[i];
          db[i] += dy[i];
        }
        break;
      }
      case Op::relu: {
        double* da = grad_of(n.a).data.data();
        const double* y = n.value.data.data();
        for (std::size_t i = 0; i < n.value.numel(); ++i) {
          if (y[i] > 0.0) da[i] += dy[i];
        }
        break;
      }
      case Op::stride_cols: {
        Tensor& gx = grad_of(n.a);
        Dims in = dims_of(nodes_[static_cast<std::size_t>(n.a)].value, "stride_cols");
        const std::size_t s = static_cast<std::size_t>(n.stride);
        const std::size_t tout = n.value.shape[1];
        const std::size_t B = in.batch;
        for (std::size_t c = 0; c < in.channels; ++c) {
          for (std::size_t q = 0; q < tout; ++q) {
            double* dst = gx.data.data() + (c * in.time + (s * q + s - 1)) * B;
            const double* src = dy + (c * tout + q) * B;
            for (std::size_t b = 0; b < B; ++b) dst[b] += src[b];
          }
        }
        break;
      }
      case Op::last_col: {
        Tensor& gx = grad_of(n.a);
        Dims in = dims_of(nodes_[static_cast<std::size_t>(n.a)].value, "last_col");
        const std::size_t B = in.batch;
        for (std::size_t c = 0; c < in.channels; ++c) {
          double* dst = gx.data.data() + (c * in.time + (in.time - 1)) * B;
          const double* src = dy + c * B;
          for (std::size_t b = 0; b < B; ++b) dst[b] += src[b];
        }
        break;
      }
      case Op::mse: {
        Tensor& gp = grad_of(n.a);
        const Tensor& p = nodes_[static_cast<std::size_t>(n.a)].value;
        const double scale =
            dy[0] * 2.0 / static_cast<double>(p.numel());
        for (std::size_t i = 0; i < p.numel(); ++i) {
          gp.data[i] += scale * (p.data[i] - n.aux1.data[i]);
        }
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Adam

AdamState make_adam_state(std::span<const ParamRef> params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment.reserve(params.size());
  s.second_moment.reserve(params.size());
  for (const ParamRef& p : params) {
    s.first_moment.push_back(Tensor::zeros(p.value->shape));
    s.second_moment.push_back(Tensor::zeros(p.value->shape));
  }
  return s;
}

void adam_step(std::span<const ParamRef> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: state holds " +
                                std::to_string(state.first_moment.size()) +
                                " moment tensors for " +
                                std::to_string(params.size()) + " parameters");
  }
  for (const ParamRef& p : params) {
    // x - x is 0 for finite values and NaN otherwise; the sum stays packed.
    const double* g = p.grad->data.data();
    double probe = 0.0;
    for (std::size_t j = 0; j < p.grad->numel(); ++j) probe += g[j] - g[j];
    if (!(probe == 0.0)) {
      throw NumericError("adam_step: non-finite gradient in parameter '" +
                         p.name + "'");
    }
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  const double lr = state.learning_rate;
  const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamRef& p = params[i];
    if (!p.value->same_shape(state.first_moment[i])) {
      throw std::invalid_argument("adam_step: parameter '" + p.name +
                                  "' shape changed since the state was built");
    }
    double* __restrict v = p.value->data.data();
    const double* __restrict g = p.grad->data.data();
    double* __restrict m1 = state.first_moment[i].data.data();
    double* __restrict m2 = state.second_moment[i].data.data();
    const std::size_t n = p.value->numel();
    for (std::size_t j = 0; j < n; ++j) {
      m1[j] = b1 * m1[j] + (1.0 - b1) * g[j];
      m2[j] = b2 * m2[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m1[j] / bc1;
      const double vhat = m2[j] / bc2;
      v[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void zero_gradients(std::span<const ParamRef> params) {
  for (const ParamRef& p : params) p.grad->fill(0.0);
}

}  // namespace wqoe::nn
