#include "wqoe/lstm.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "kernel_util.hpp"
#include "wqoe/rng.hpp"

namespace wqoe {

namespace {

using detail::dot4;
using detail::sum4;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_input(const Tensor& x, const LstmConfig& cfg, const char* what) {
  if (x.rank() < 2 || x.shape[0] != static_cast<std::size_t>(cfg.input_features)) {
    throw std::invalid_argument(std::string(what) + ": expected " +
                                std::to_string(cfg.input_features) +
                                " feature rows, got shape " + x.shape_str());
  }
}

// One forward step over the batch: pre-activations, gate nonlinearities,
// cell/hidden update. x_t is [in, B] strided inside the window tensor.
void lstm_step(const LstmParams& p, const double* x, std::size_t x_col_stride,
               std::size_t t, std::size_t in, std::size_t B,
               const double* h_prev, const double* c_prev, double* gates,
               double* c, double* tc, double* h, std::vector<double>& acc) {
  const std::size_t H = static_cast<std::size_t>(p.config.hidden_size);
  const std::size_t G = 4 * H;
  for (std::size_t u = 0; u < G; ++u) {
    for (std::size_t b = 0; b < B; ++b) acc[b] = p.bias.data[u];
    const double* wx = p.w_input.data.data() + u * in;
    for (std::size_t ci = 0; ci < in; ++ci) {
      const double wv = wx[ci];
      const double* xp = x + (ci * x_col_stride + t) * B;
      for (std::size_t b = 0; b < B; ++b) acc[b] += wv * xp[b];
    }
    if (h_prev) {
      const double* wh = p.w_hidden.data.data() + u * H;
      for (std::size_t j = 0; j < H; ++j) {
        const double wv = wh[j];
        const double* hp = h_prev + j * B;
        for (std::size_t b = 0; b < B; ++b) acc[b] += wv * hp[b];
      }
    }
    double* gp = gates + u * B;
    if (u < 2 * H || u >= 3 * H) {
      for (std::size_t b = 0; b < B; ++b) gp[b] = sigmoid(acc[b]);
    } else {
      for (std::size_t b = 0; b < B; ++b) gp[b] = std::tanh(acc[b]);
    }
  }
  const double* gi = gates;
  const double* gf = gates + H * B;
  const double* gg = gates + 2 * H * B;
  const double* go = gates + 3 * H * B;
  for (std::size_t j = 0; j < H; ++j) {
    const double* cp = c_prev ? c_prev + j * B : nullptr;
    double* cj = c + j * B;
    double* tcj = tc + j * B;
    double* hj = h + j * B;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t i = j * B + b;
      const double prev = cp ? cp[b] : 0.0;
      cj[b] = gf[i] * prev + gi[i] * gg[i];
      tcj[b] = std::tanh(cj[b]);
      hj[b] = go[i] * tcj[b];
    }
  }
}

}  // namespace

std::vector<nn::ParamRef> LstmParams::param_refs() {
  return {
      {"lstm.w_input", &w_input, &w_input_grad},
      {"lstm.w_hidden", &w_hidden, &w_hidden_grad},
      {"lstm.bias", &bias, &bias_grad},
      {"lstm.head_w", &head_w, &head_w_grad},
      {"lstm.head_b", &head_b, &head_b_grad},
  };
}

std::size_t LstmParams::param_count() const {
  return w_input.numel() + w_hidden.numel() + bias.numel() + head_w.numel() +
         head_b.numel();
}

LstmParams lstm_init(const LstmConfig& config, std::uint64_t seed) {
  if (config.input_features < 1 || config.hidden_size < 1) {
    throw std::invalid_argument("lstm_init: extents must be >= 1");
  }
  const std::size_t H = static_cast<std::size_t>(config.hidden_size);
  const std::size_t in = static_cast<std::size_t>(config.input_features);
  LstmParams p;
  p.config = config;
  p.w_input = Tensor::zeros({4 * H, in});
  p.w_hidden = Tensor::zeros({4 * H, H});
  p.bias = Tensor::zeros({4 * H});
  p.head_w = Tensor::zeros({H});
  p.head_b = Tensor::zeros({1});
  p.w_input_grad = Tensor::zeros(p.w_input.shape);
  p.w_hidden_grad = Tensor::zeros(p.w_hidden.shape);
  p.bias_grad = Tensor::zeros(p.bias.shape);
  p.head_w_grad = Tensor::zeros(p.head_w.shape);
  p.head_b_grad = Tensor::zeros(p.head_b.shape);

  SplitMix64 rng(seed);
  const double ax = std::sqrt(1.0 / static_cast<double>(in));
  for (double& v : p.w_input.data) v = rng.uniform(-ax, ax);
  const double ah = std::sqrt(1.0 / static_cast<double>(H));
  for (double& v : p.w_hidden.data) v = rng.uniform(-ah, ah);
  for (double& v : p.head_w.data) v = rng.uniform(-ah, ah);
  for (std::size_t u = H; u < 2 * H; ++u) p.bias.data[u] = 1.0;  // forget gate
  return p;
}

std::vector<double> lstm_forward(LstmParams& params, const Tensor& features) {
  check_input(features, params.config, "lstm_forward");
  if (features.rank() != 2) {
    throw std::invalid_argument("lstm_forward: expected a [features, T] tensor, got " +
                                features.shape_str());
  }
  const std::size_t in = features.shape[0];
  const std::size_t T = features.shape[1];
  const std::size_t H = static_cast<std::size_t>(params.config.hidden_size);
  std::vector<double> gates(4 * H), c(H), tc(H), h(H), c_prev(H), h_prev(H);
  std::vector<double> acc(1), out(T);
  bool first = true;
  for (std::size_t t = 0; t < T; ++t) {
    lstm_step(params, features.data.data(), T, t, in, 1,
              first ? nullptr : h_prev.data(), first ? nullptr : c_prev.data(),
              gates.data(), c.data(), tc.data(), h.data(), acc);
    double y = params.head_b.data[0];
    for (std::size_t j = 0; j < H; ++j) y += params.head_w.data[j] * h[j];
    out[t] = y;
    h_prev = h;
    c_prev = c;
    first = false;
  }
  return out;
}

std::vector<double> lstm_window_forward(LstmParams& params, Tensor windows,
                                        LstmWindowCache& cache) {
  check_input(windows, params.config, "lstm_window_forward");
  const std::size_t in = windows.shape[0];
  const std::size_t w = windows.shape[1];
  const std::size_t B = windows.rank() == 3 ? windows.shape[2] : 1;
  const std::size_t H = static_cast<std::size_t>(params.config.hidden_size);

  cache.input = std::move(windows);
  cache.gates = Tensor::zeros({w, 4 * H, B});
  cache.cells = Tensor::zeros({w, H, B});
  cache.tanh_cells = Tensor::zeros({w, H, B});
  cache.hidden = Tensor::zeros({w, H, B});

  std::vector<double> acc(B);
  for (std::size_t t = 0; t < w; ++t) {
    const double* h_prev = t ? cache.hidden.data.data() + (t - 1) * H * B : nullptr;
    const double* c_prev = t ? cache.cells.data.data() + (t - 1) * H * B : nullptr;
    lstm_step(params, cache.input.data.data(), w, t, in, B, h_prev, c_prev,
              cache.gates.data.data() + t * 4 * H * B,
              cache.cells.data.data() + t * H * B,
              cache.tanh_cells.data.data() + t * H * B,
              cache.hidden.data.data() + t * H * B, acc);
  }
  cache.pred.assign(B, 0.0);
  const double* h_last = cache.hidden.data.data() + (w - 1) * H * B;
  for (std::size_t b = 0; b < B; ++b) cache.pred[b] = params.head_b.data[0];
  for (std::size_t j = 0; j < H; ++j) {
    const double wv = params.head_w.data[j];
    const double* hp = h_last + j * B;
    for (std::size_t b = 0; b < B; ++b) cache.pred[b] += wv * hp[b];
  }
  return cache.pred;
}

void lstm_window_backward(LstmParams& params, const LstmWindowCache& cache,
                          std::span<const double> pred_grad) {
  const std::size_t in = cache.input.shape[0];
  const std::size_t w = cache.input.shape[1];
  const std::size_t B = cache.input.rank() == 3 ? cache.input.shape[2] : 1;
  const std::size_t H = static_cast<std::size_t>(params.config.hidden_size);
  if (pred_grad.size() != B) {
    throw std::invalid_argument("lstm_window_backward: gradient length " +
                                std::to_string(pred_grad.size()) +
                                " does not match batch " + std::to_string(B));
  }

  std::vector<double> dh(H * B, 0.0), dc(H * B, 0.0), da(4 * H * B);
  std::vector<double> dh_prev(H * B);

  // Head: pred[b] = head_b + sum_j head_w[j] * h_last[j, b]
  const double* h_last = cache.hidden.data.data() + (w - 1) * H * B;
  params.head_b_grad.data[0] += sum4(pred_grad.data(), B);
  for (std::size_t j = 0; j < H; ++j) {
    const double* hp = h_last + j * B;
    params.head_w_grad.data[j] += dot4(pred_grad.data(), hp, B);
    double* dhj = dh.data() + j * B;
    const double wv = params.head_w.data[j];
    for (std::size_t b = 0; b < B; ++b) dhj[b] = wv * pred_grad[b];
  }

  for (std::size_t t = w; t-- > 0;) {
    const double* gates = cache.gates.data.data() + t * 4 * H * B;
    const double* gi = gates;
    const double* gf = gates + H * B;
    const double* gg = gates + 2 * H * B;
    const double* go = gates + 3 * H * B;
    const double* tc = cache.tanh_cells.data.data() + t * H * B;
    const double* c_prev = t ? cache.cells.data.data() + (t - 1) * H * B : nullptr;

    // dc += dh * o * (1 - tanh(c)^2); gate pre-activation gradients.
    for (std::size_t i = 0; i < H * B; ++i) {
      dc[i] += dh[i] * go[i] * (1.0 - tc[i] * tc[i]);
      const double prev = c_prev ? c_prev[i] : 0.0;
      da[i] = dc[i] * gg[i] * gi[i] * (1.0 - gi[i]);                   // input gate
      da[H * B + i] = dc[i] * prev * gf[i] * (1.0 - gf[i]);            // forget gate
      da[2 * H * B + i] = dc[i] * gi[i] * (1.0 - gg[i] * gg[i]);       // cell gate
      da[3 * H * B + i] = dh[i] * tc[i] * go[i] * (1.0 - go[i]);       // output gate
    }

    const double* h_prev = t ? cache.hidden.data.data() + (t - 1) * H * B : nullptr;

    for (std::size_t u = 0; u < 4 * H; ++u) {
      const double* dau = da.data() + u * B;
      params.bias_grad.data[u] += sum4(dau, B);
      double* dwx = params.w_input_grad.data.data() + u * in;
      for (std::size_t ci = 0; ci < in; ++ci) {
        const double* xp = cache.input.data.data() + (ci * w + t) * B;
        dwx[ci] += dot4(dau, xp, B);
      }
      if (h_prev) {
        double* dwh = params.w_hidden_grad.data.data() + u * H;
        for (std::size_t j = 0; j < H; ++j) {
          dwh[j] += dot4(dau, h_prev + j * B, B);
        }
      }
    }

    // dh_prev = w_hidden^T * da, each row summed in registers.
    if (t) {
      constexpr std::size_t kTile = 64;
      double acc[kTile];
      const double* wh = params.w_hidden.data.data();
      for (std::size_t b0 = 0; b0 < B; b0 += kTile) {
        const std::size_t nb = std::min(kTile, B - b0);
        for (std::size_t j = 0; j < H; ++j) {
          for (std::size_t b = 0; b < nb; ++b) acc[b] = 0.0;
          for (std::size_t u = 0; u < 4 * H; ++u) {
            const double wv = wh[u * H + j];
            const double* __restrict dau = da.data() + u * B + b0;
            for (std::size_t b = 0; b < nb; ++b) acc[b] += wv * dau[b];
          }
          double* __restrict dhp = dh_prev.data() + j * B + b0;
          for (std::size_t b = 0; b < nb; ++b) dhp[b] = acc[b];
        }
      }
      // Carry state gradients to step t-1.
      for (std::size_t i = 0; i < H * B; ++i) {
        dc[i] *= gf[i];
        dh[i] = dh_prev[i];
      }
    }
  }
}

}  // namespace wqoe
