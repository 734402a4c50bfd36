#include <doctest.h>

#include <cstring>

#include "wqoe/errors.hpp"
#include "wqoe/features.hpp"
#include "wqoe/rng.hpp"
#include "wqoe/synthetic.hpp"
#include "wqoe/train.hpp"

using namespace wqoe;

namespace {

std::vector<const SessionTrace*> pointers(const std::vector<SessionTrace>& v) {
  std::vector<const SessionTrace*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.wavenet.num_filters = 8;
  cfg.lstm.hidden_size = 8;
  cfg.max_epochs = 5;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("make_windows counts and contents") {
  Tensor features = Tensor::zeros({4, 120});
  for (std::size_t t = 0; t < 120; ++t) features.at(kStsq, t) = static_cast<double>(t);
  std::vector<double> targets(120);
  for (std::size_t t = 0; t < 120; ++t) targets[t] = 1000.0 + t;

  auto windows = make_windows(features, targets, 8);
  CHECK(windows.size() == 113);  // 120 - 8 + 1

  // The first window ends at t = 7 and covers 0..7 in order.
  CHECK(windows[0].target == 1007.0);
  for (std::size_t i = 0; i < 8; ++i) CHECK(windows[0].features.at(kStsq, i) == i);

  Tensor exact = Tensor::zeros({4, 8});
  std::vector<double> t8(8, 0.0);
  CHECK(make_windows(exact, t8, 8).size() == 1);

  Tensor shorter = Tensor::zeros({4, 5});
  std::vector<double> t5(5, 0.0);
  CHECK(make_windows(shorter, t5, 8).empty());  // skipped, not fatal
}

TEST_CASE("training is deterministic per seed") {
  SyntheticConfig gen;
  gen.seed = 42;
  gen.num_sessions = 6;
  gen.duration_s = 40;
  gen.stall_intensity = 0.3;
  const auto sessions = generate_synthetic(gen);

  for (ModelKind kind : {ModelKind::wavenet, ModelKind::lstm}) {
    TrainConfig cfg = small_config();
    cfg.kind = kind;
    TrainResult a = train(pointers(sessions), cfg);
    TrainResult b = train(pointers(sessions), cfg);
    auto ra = a.model.param_refs();
    auto rb = b.model.param_refs();
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
      REQUIRE(ra[i].value->numel() == rb[i].value->numel());
      CHECK(std::memcmp(ra[i].value->data.data(), rb[i].value->data.data(),
                        ra[i].value->numel() * sizeof(double)) == 0);
    }
    CHECK(serialize_model(a.model) == serialize_model(b.model));
  }
}

TEST_CASE("zero learning rate leaves the initial weights untouched") {
  SyntheticConfig gen;
  gen.seed = 11;
  gen.num_sessions = 3;
  gen.duration_s = 40;
  const auto sessions = generate_synthetic(gen);

  TrainConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 3;
  TrainResult r = train(pointers(sessions), cfg);

  SplitMix64 rng(cfg.seed);
  WaveNetConfig wcfg = cfg.wavenet;
  WaveNetParams fresh = wavenet_init(wcfg, rng.next());
  auto got = r.model.param_refs();
  auto want = fresh.param_refs();
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].value->data == want[i].value->data);
  }
}

TEST_CASE("constant-target dataset converges to near-zero validation loss") {
  // Constant labels: the affine head floor alone can fit them.
  SessionTrace t;
  t.session_id = "flat";
  SplitMix64 rng(31);
  for (int i = 0; i < 200; ++i) {
    t.samples.push_back({i, 40.0 + 20.0 * rng.uniform(), 0, 70.0});
  }
  TrainConfig cfg = small_config();
  cfg.max_epochs = 20;
  cfg.learning_rate = 0.01;
  std::vector<const SessionTrace*> sessions{&t};
  TrainResult r = train(sessions, cfg);
  REQUIRE_FALSE(r.log.empty());
  double best = r.log.front().val_mse;
  for (const auto& e : r.log) best = std::min(best, e.val_mse);
  CHECK(best <= 1e-3);  // normalized units
}

TEST_CASE("training loss mostly decreases over the first epochs") {
  SyntheticConfig gen;
  gen.seed = 4242;
  gen.num_sessions = 8;
  gen.duration_s = 60;
  gen.stall_intensity = 0.3;
  const auto sessions = generate_synthetic(gen);

  TrainConfig cfg = small_config();
  cfg.max_epochs = 5;
  TrainResult r = train(pointers(sessions), cfg);
  REQUIRE(r.log.size() == 5);
  int drops = 0;
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    if (r.log[i].train_mse <= r.log[i - 1].train_mse) ++drops;
  }
  CHECK(drops >= 4);
}

TEST_CASE("training rejects unusable inputs") {
  TrainConfig cfg = small_config();
  std::vector<const SessionTrace*> none;
  CHECK_THROWS_AS(train(none, cfg), DataError);

  SessionTrace unlabeled;
  unlabeled.session_id = "u";
  for (int i = 0; i < 40; ++i) unlabeled.samples.push_back({i, 50.0, 0, std::nullopt});
  std::vector<const SessionTrace*> only{&unlabeled};
  CHECK_THROWS_AS(train(only, cfg), DataError);
}

TEST_CASE("epoch log carries positive wall-clock times") {
  SyntheticConfig gen;
  gen.seed = 5;
  gen.num_sessions = 3;
  gen.duration_s = 35;
  const auto sessions = generate_synthetic(gen);
  TrainConfig cfg = small_config();
  cfg.max_epochs = 2;
  TrainResult r = train(pointers(sessions), cfg);
  for (const auto& e : r.log) {
    CHECK(e.epoch_seconds > 0.0);
    CHECK(e.train_mse >= 0.0);
    CHECK(e.val_mse >= 0.0);
  }
  CHECK(r.best_epoch >= 1);
}
