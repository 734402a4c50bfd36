#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "wqoe/errors.hpp"
#include "wqoe/lstm.hpp"
#include "wqoe/model_io.hpp"
#include "wqoe/rng.hpp"
#include "wqoe/wavenet.hpp"

using namespace wqoe;

namespace {

Tensor randomized(std::vector<std::size_t> shape, SplitMix64& rng, double a = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-a, a);
  return t;
}

Model make_model(WaveNetParams params) {
  Model m;
  m.params = std::move(params);
  m.window_len = std::get<WaveNetParams>(m.params).config.receptive_field();
  m.norm.feature_std = {1, 1, 1, 1};
  m.norm.qoe_std = 1.0;
  return m;
}

}  // namespace

TEST_CASE("receptive_field golden values") {
  CHECK(receptive_field(2, 2, 3) == 8);
  CHECK(receptive_field(1, 5, 1) == 1);
  CHECK(receptive_field(3, 2, 4) == 24);
  CHECK_THROWS_AS(receptive_field(0, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(receptive_field(2, 2, -1), std::invalid_argument);
}

TEST_CASE("effective_receptive_field golden values") {
  CHECK(effective_receptive_field(2, 2, 3) == 8);
  CHECK(effective_receptive_field(1, 2, 10) == 1);
  CHECK(effective_receptive_field(3, 2, 4) == 31);
  CHECK_THROWS_AS(effective_receptive_field(2, 0, 1), std::invalid_argument);
}

TEST_CASE("both receptive field formulas agree when k = d = 2") {
  for (int L = 1; L <= 10; ++L) {
    CHECK(receptive_field(2, 2, L) == effective_receptive_field(2, 2, L));
  }
  CHECK(WaveNetConfig{}.receptive_field() == 8);
}

TEST_CASE("default parameter counts") {
  WaveNetParams wn = wavenet_init(WaveNetConfig{}, 1);
  // in: 4*32+32; per block: 2*(32*32*2+32) + 2*(32*32+32); head: 32*32+32 + 32+1
  CHECK(wn.param_count() == 20065);
  CHECK(wn.param_refs().size() == 2 + 3 * 8 + 4);

  LstmParams lstm = lstm_init(LstmConfig{}, 1);
  // 128*4 + 128*32 + 128 + 32 + 1
  CHECK(lstm.param_count() == 4769);
}

TEST_CASE("parameter count is a pure function of k, n, L") {
  SplitMix64 rng(271);
  for (int trial = 0; trial < 25; ++trial) {
    WaveNetConfig cfg;
    cfg.filter_size = 1 + static_cast<int>(rng.below(4));
    cfg.num_filters = 1 + static_cast<int>(rng.below(40));
    cfg.num_layers = 1 + static_cast<int>(rng.below(5));
    cfg.dilation_base = 1 + static_cast<int>(rng.below(3));
    const std::size_t n = static_cast<std::size_t>(cfg.num_filters);
    const std::size_t k = static_cast<std::size_t>(cfg.filter_size);
    const std::size_t L = static_cast<std::size_t>(cfg.num_layers);
    const std::size_t expected = (4 * n + n) +                        // input proj
                                 L * (2 * (n * n * k + n) +           // filter + gate
                                      2 * (n * n + n)) +              // residual + skip
                                 (n * n + n) + (n + 1);               // head
    WaveNetParams p = wavenet_init(cfg, rng.next());
    CHECK(p.param_count() == expected);

    // Serialization round-trips bitwise for arbitrary configs too.
    Model m;
    m.params = std::move(p);
    m.norm.feature_std = {1, 1, 1, 1};
    const auto bytes = serialize_model(m);
    CHECK(serialize_model(deserialize_model(bytes)) == bytes);
  }
}

TEST_CASE("wavenet constant output floor through the head bias") {
  WaveNetConfig cfg;
  cfg.num_filters = 8;
  WaveNetParams p = wavenet_init(cfg, 7);
  for (auto ref : p.param_refs()) ref.value->fill(0.0);
  p.head2.bias.data[0] = 3.25;
  const Tensor x = Tensor::zeros({4, 10});
  for (double v : wavenet_forward(p, x)) CHECK(v == 3.25);
}

TEST_CASE("wavenet rejects wrong feature count") {
  WaveNetParams p = wavenet_init(WaveNetConfig{}, 3);
  CHECK_THROWS_AS(wavenet_forward(p, Tensor::zeros({3, 10})), std::invalid_argument);
}

TEST_CASE("wavenet causality and receptive field bound by perturbation") {
  SplitMix64 rng(101);
  const std::size_t T = 20;
  WaveNetParams p = wavenet_init(WaveNetConfig{}, rng.next());
  const int erf = p.config.effective_receptive_field();
  REQUIRE(erf == 8);
  const Tensor x = randomized({4, T}, rng);
  const auto base = wavenet_forward(p, x);

  for (std::size_t tp = 0; tp < T; ++tp) {
    Tensor moved = x;
    for (std::size_t r = 0; r < 4; ++r) moved.at(r, tp) += 0.75;
    const auto out = wavenet_forward(p, moved);
    for (std::size_t t = 0; t < T; ++t) {
      if (t < tp || t >= tp + static_cast<std::size_t>(erf)) {
        // Strictly before the edit, or old enough to fall out of range.
        CHECK(std::memcmp(&base[t], &out[t], sizeof(double)) == 0);
      }
    }
    // The perturbed timestep itself must matter somewhere.
    CHECK(out[tp] != base[tp]);
  }
}

TEST_CASE("window graph equals the full pass at the last timestep") {
  SplitMix64 rng(202);

  SUBCASE("tree route (k = d = 2, w = 2^L)") {
    WaveNetParams p = wavenet_init(WaveNetConfig{}, rng.next());
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor window = randomized({4, 8}, rng);
      const auto full = wavenet_forward(p, window);
      nn::Tape tape;
      auto pred = wavenet_window_graph(tape, p, window);
      CHECK(tape.value(pred).data[0] == full.back());
    }
  }

  SUBCASE("general route (k = 3)") {
    WaveNetConfig cfg;
    cfg.filter_size = 3;
    cfg.num_filters = 6;
    cfg.num_layers = 2;
    WaveNetParams p = wavenet_init(cfg, rng.next());
    const Tensor window = randomized({4, 9}, rng);
    const auto full = wavenet_forward(p, window);
    nn::Tape tape;
    auto pred = wavenet_window_graph(tape, p, window);
    CHECK(tape.value(pred).data[0] == doctest::Approx(full.back()).epsilon(1e-12));
  }

  SUBCASE("batched tree route matches per-window evaluation") {
    WaveNetParams p = wavenet_init(WaveNetConfig{}, rng.next());
    const std::size_t B = 5;
    Tensor batch = Tensor::zeros({4, 8, B});
    std::vector<Tensor> windows;
    for (std::size_t b = 0; b < B; ++b) windows.push_back(randomized({4, 8}, rng));
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t t = 0; t < 8; ++t) {
        for (std::size_t b = 0; b < B; ++b) batch.at(r, t, b) = windows[b].at(r, t);
      }
    }
    nn::Tape tape;
    auto pred = wavenet_window_graph(tape, p, batch);
    for (std::size_t b = 0; b < B; ++b) {
      const auto full = wavenet_forward(p, windows[b]);
      CHECK(tape.value(pred).data[b] == doctest::Approx(full.back()).epsilon(1e-13));
    }
  }
}

TEST_CASE("wavenet full-model gradients match finite differences") {
  SplitMix64 rng(303);
  WaveNetConfig cfg;
  cfg.num_filters = 6;
  WaveNetParams p = wavenet_init(cfg, rng.next());
  auto refs = p.param_refs();
  oracles::randomize_params(refs, rng);
  const Tensor batch = randomized({4, 8, 3}, rng);
  const Tensor targets = randomized({3}, rng);

  auto loss = [&] {
    nn::Tape tape;
    auto pred = wavenet_window_graph(tape, p, batch);
    return tape.scalar(tape.mse(pred, targets));
  };
  auto grads = [&] {
    nn::Tape tape;
    auto pred = wavenet_window_graph(tape, p, batch);
    auto l = tape.mse(pred, targets);
    nn::zero_gradients(refs);
    tape.backward(l);
  };
  CHECK(oracles::max_grad_rel_error(refs, loss, grads) <= 1e-4);
}

TEST_CASE("lstm constant output floor and causality") {
  LstmConfig cfg;
  cfg.hidden_size = 6;
  LstmParams p = lstm_init(cfg, 5);
  for (auto ref : p.param_refs()) ref.value->fill(0.0);
  p.head_b.data[0] = -1.5;
  const auto out = lstm_forward(p, Tensor::zeros({4, 7}));
  for (double v : out) CHECK(v == doctest::Approx(-1.5).epsilon(1e-12));

  SplitMix64 rng(404);
  LstmParams q = lstm_init(cfg, rng.next());
  const Tensor x = randomized({4, 6}, rng);
  const auto base = lstm_forward(q, x);
  Tensor moved = x;
  moved.at(2, 1) += 1.0;  // perturb t = 1
  const auto shifted = lstm_forward(q, moved);
  CHECK(shifted[0] == base[0]);  // t = 0 depends only on features at t = 0
  CHECK(shifted[1] != base[1]);
}

TEST_CASE("lstm rejects wrong feature count") {
  LstmParams p = lstm_init(LstmConfig{}, 3);
  CHECK_THROWS_AS(lstm_forward(p, Tensor::zeros({5, 10})), std::invalid_argument);
}

TEST_CASE("lstm forget gate bias starts at one") {
  LstmParams p = lstm_init(LstmConfig{}, 9);
  const std::size_t H = static_cast<std::size_t>(p.config.hidden_size);
  for (std::size_t u = 0; u < 4 * H; ++u) {
    CHECK(p.bias.data[u] == (u >= H && u < 2 * H ? 1.0 : 0.0));
  }
}

TEST_CASE("lstm window forward equals lstm_forward at the last step") {
  SplitMix64 rng(505);
  LstmParams p = lstm_init(LstmConfig{}, rng.next());
  const Tensor window = randomized({4, 8}, rng);
  const auto series = lstm_forward(p, window);
  LstmWindowCache cache;
  const auto pred = lstm_window_forward(p, window, cache);
  CHECK(pred.size() == 1);
  CHECK(pred[0] == doctest::Approx(series.back()).epsilon(1e-13));
}

TEST_CASE("lstm gradients through 8 timesteps match finite differences") {
  SplitMix64 rng(606);
  LstmConfig cfg;
  cfg.hidden_size = 5;
  LstmParams p = lstm_init(cfg, rng.next());
  auto refs = p.param_refs();
  oracles::randomize_params(refs, rng);
  const Tensor batch = randomized({4, 8, 3}, rng);
  const std::vector<double> targets{0.3, -0.2, 0.9};

  auto loss = [&] {
    LstmWindowCache cache;
    const auto pred = lstm_window_forward(p, batch, cache);
    return nn::mse_loss(pred, targets);
  };
  auto grads = [&] {
    LstmWindowCache cache;
    const auto pred = lstm_window_forward(p, batch, cache);
    nn::zero_gradients(refs);
    lstm_window_backward(p, cache, nn::mse_loss_gradient(pred, targets));
  };
  CHECK(oracles::max_grad_rel_error(refs, loss, grads) <= 1e-4);
}

TEST_CASE("model serialization round trip") {
  SplitMix64 rng(707);
  Model m = make_model(wavenet_init(WaveNetConfig{}, rng.next()));
  m.seed = 1234;
  m.norm.feature_mean = {50, 0.1, 2, 30};
  m.norm.feature_std = {20, 0.3, 1.5, 25};
  m.norm.qoe_mean = 60;
  m.norm.qoe_std = 15;

  const auto bytes = serialize_model(m);
  Model loaded = deserialize_model(bytes);
  const auto bytes2 = serialize_model(loaded);
  CHECK(bytes == bytes2);  // save -> load -> save is byte identical
  CHECK(loaded.seed == 1234);
  CHECK(loaded.window_len == 8);

  const Tensor x = randomized({4, 12}, rng);
  auto& orig = std::get<WaveNetParams>(m.params);
  auto& copy = std::get<WaveNetParams>(loaded.params);
  const auto y1 = wavenet_forward(orig, x);
  const auto y2 = wavenet_forward(copy, x);
  for (std::size_t i = 0; i < y1.size(); ++i) {
    CHECK(std::abs(y1[i] - y2[i]) <= 1e-15);
  }
}

TEST_CASE("model deserialization failure modes are distinct") {
  SplitMix64 rng(808);
  Model m = make_model(wavenet_init(WaveNetConfig{}, rng.next()));
  auto bytes = serialize_model(m);

  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(deserialize_model(bad), doctest::Contains("magic"),
                         SerializationError);
  }
  SUBCASE("unsupported version") {
    auto bad = bytes;
    bad[4] = 99;
    CHECK_THROWS_WITH_AS(deserialize_model(bad), doctest::Contains("version"),
                         SerializationError);
  }
  SUBCASE("truncated stream") {
    auto bad = bytes;
    bad.resize(bytes.size() / 2);
    CHECK_THROWS_WITH_AS(deserialize_model(bad), doctest::Contains("truncated"),
                         SerializationError);
  }
  SUBCASE("checksum mismatch") {
    auto bad = bytes;
    bad[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_WITH_AS(deserialize_model(bad), doctest::Contains("checksum"),
                         SerializationError);
  }
}

TEST_CASE("lstm model serialization round trip") {
  Model m;
  m.params = lstm_init(LstmConfig{}, 99);
  m.window_len = 8;
  m.norm.feature_std = {1, 1, 1, 1};
  const auto bytes = serialize_model(m);
  Model loaded = deserialize_model(bytes);
  CHECK(loaded.kind() == ModelKind::lstm);
  CHECK(serialize_model(loaded) == bytes);
}
