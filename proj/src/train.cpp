#include "wqoe/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "wqoe/errors.hpp"
#include "wqoe/features.hpp"
#include "wqoe/rng.hpp"

namespace wqoe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Gathers a mini-batch of windows into the batched [4, w, B] layout.
void assemble_batch(std::span<const TrainingWindow> all,
                    std::span<const std::size_t> idx, Tensor& batch,
                    std::vector<double>& targets) {
  const std::size_t B = idx.size();
  const std::size_t w = all[idx[0]].features.shape[1];
  batch = Tensor::zeros({kNumFeatures, w, B});
  targets.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    const TrainingWindow& win = all[idx[b]];
    targets[b] = win.target;
    for (std::size_t r = 0; r < kNumFeatures; ++r) {
      for (std::size_t t = 0; t < w; ++t) {
        batch.at(r, t, b) = win.features.at(r, t);
      }
    }
  }
}

struct Batcher {
  std::span<const TrainingWindow> windows;
  std::span<const std::size_t> order;
  std::size_t batch_size;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    Tensor batch;
    std::vector<double> targets;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t count = std::min(batch_size, order.size() - start);
      assemble_batch(windows, order.subspan(start, count), batch, targets);
      fn(batch, targets);
    }
  }
};

}  // namespace

std::vector<TrainingWindow> make_windows(const Tensor& features,
                                         std::span<const double> targets,
                                         int window_len) {
  if (window_len < 1) throw std::invalid_argument("make_windows: window_len must be >= 1");
  if (features.rank() != 2 || features.shape[0] != kNumFeatures) {
    throw std::invalid_argument("make_windows: expected a [4, T] feature tensor, got " +
                                features.shape_str());
  }
  const std::size_t T = features.shape[1];
  if (targets.size() != T) {
    throw std::invalid_argument("make_windows: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(T) + " timesteps");
  }
  const std::size_t w = static_cast<std::size_t>(window_len);
  std::vector<TrainingWindow> out;
  if (T < w) return out;  // caller skips the session with a warning
  out.reserve(T - w + 1);
  for (std::size_t t = w - 1; t < T; ++t) {
    TrainingWindow win{Tensor::zeros({kNumFeatures, w}), targets[t]};
    for (std::size_t r = 0; r < kNumFeatures; ++r) {
      for (std::size_t i = 0; i < w; ++i) {
        win.features.at(r, i) = features.at(r, t - w + 1 + i);
      }
    }
    out.push_back(std::move(win));
  }
  return out;
}

TrainResult train(const std::vector<const SessionTrace*>& sessions,
                  const TrainConfig& config) {
  if (config.window_len < 1 || config.batch_size < 1 || config.max_epochs < 1) {
    throw std::invalid_argument("train: window_len, batch_size and max_epochs must be >= 1");
  }

  // Features and labels, normalized with statistics from these sessions only.
  std::vector<FeatureMatrix> raw;
  std::vector<std::vector<double>> targets;
  int skipped = 0;
  for (const SessionTrace* s : sessions) {
    if (!s->labeled()) {
      std::cerr << "train: skipping unlabeled session '" << s->session_id << "'\n";
      ++skipped;
      continue;
    }
    raw.push_back(derive_features(*s));
    targets.push_back(qoe_targets(*s));
  }
  if (raw.empty()) throw DataError("train: no labeled training sessions");
  const NormStats stats = compute_norm_stats(raw, targets);

  std::vector<TrainingWindow> windows;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    FeatureMatrix normed = normalize(raw[i], stats);
    std::vector<double> norm_targets(targets[i].size());
    for (std::size_t t = 0; t < targets[i].size(); ++t) {
      norm_targets[t] = normalize_qoe(targets[i][t], stats);
    }
    auto w = make_windows(normed.values, norm_targets, config.window_len);
    if (w.empty()) {
      std::cerr << "train: session shorter than the window, skipped\n";
      ++skipped;
      continue;
    }
    windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                   std::make_move_iterator(w.end()));
  }
  if (windows.empty()) throw DataError("train: no training windows");

  SplitMix64 rng(config.seed);
  Model model;
  if (config.kind == ModelKind::wavenet) {
    model.params = wavenet_init(config.wavenet, rng.next());
  } else {
    model.params = lstm_init(config.lstm, rng.next());
  }
  model.norm = stats;
  model.window_len = config.window_len;
  model.seed = config.seed;

  // Validation split at window granularity: 10% (at least one window) of a
  // seeded shuffle is held out.
  std::vector<std::size_t> perm(windows.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  const std::size_t n_val = std::max<std::size_t>(1, windows.size() / 10);
  std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  if (train_idx.empty()) throw DataError("train: not enough windows to split off validation");

  auto refs = model.param_refs();
  nn::AdamState adam = nn::make_adam_state(refs, config.learning_rate);
  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);

  WaveNetParams* wn = std::get_if<WaveNetParams>(&model.params);
  LstmParams* lstm = std::get_if<LstmParams>(&model.params);

  auto run_batch = [&](const Tensor& batch, const std::vector<double>& batch_targets,
                       bool update) -> double {
    double loss;
    if (wn) {
      nn::Tape tape;
      auto pred = wavenet_window_graph(tape, *wn, batch);
      auto l = tape.mse(pred, Tensor::row(batch_targets));
      loss = tape.scalar(l);
      if (update) {
        nn::zero_gradients(refs);
        tape.backward(l);
      }
    } else {
      LstmWindowCache cache;
      std::vector<double> pred = lstm_window_forward(*lstm, batch, cache);
      loss = nn::mse_loss(pred, batch_targets);
      if (update) {
        nn::zero_gradients(refs);
        lstm_window_backward(*lstm, cache, nn::mse_loss_gradient(pred, batch_targets));
      }
    }
    return loss;
  };

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_weights;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(train_idx);
    const auto t0 = Clock::now();
    double train_sq_sum = 0.0;
    std::size_t seen = 0;
    int batch_index = 0;
    Batcher{windows, train_idx, batch_size}.for_each(
        [&](const Tensor& batch, const std::vector<double>& batch_targets) {
          const double loss = run_batch(batch, batch_targets, /*update=*/true);
          if (!std::isfinite(loss)) {
            throw NumericError("train: non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(batch_index));
          }
          try {
            nn::adam_step(refs, adam);
          } catch (const NumericError& e) {
            throw NumericError("train: epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch_index) + ": " + e.what());
          }
          train_sq_sum += loss * static_cast<double>(batch_targets.size());
          seen += batch_targets.size();
          ++batch_index;
        });
    const double epoch_seconds = seconds_since(t0);

    double val_sq_sum = 0.0;
    Batcher{windows, val_idx, batch_size}.for_each(
        [&](const Tensor& batch, const std::vector<double>& batch_targets) {
          val_sq_sum += run_batch(batch, batch_targets, /*update=*/false) *
                        static_cast<double>(batch_targets.size());
        });
    const double train_mse = train_sq_sum / static_cast<double>(seen);
    const double val_mse = val_sq_sum / static_cast<double>(val_idx.size());
    result.log.push_back({epoch, train_mse, val_mse, epoch_seconds});

    if (val_mse < best_val) {
      best_val = val_mse;
      best_epoch = epoch;
      best_weights.clear();
      for (const nn::ParamRef& r : refs) best_weights.push_back(r.value->data);
    } else if (epoch - best_epoch >= config.early_stop_patience) {
      break;
    }
  }

  if (!best_weights.empty()) {
    for (std::size_t i = 0; i < refs.size(); ++i) refs[i].value->data = best_weights[i];
  }
  result.best_epoch = best_epoch;
  result.skipped_sessions = skipped;
  result.model = std::move(model);
  return result;
}

TrainResult train(const std::vector<SessionTrace>& pool,
                  const std::vector<std::string>& session_ids,
                  const TrainConfig& config) {
  std::map<std::string, const SessionTrace*> by_id;
  for (const SessionTrace& s : pool) by_id[s.session_id] = &s;
  std::vector<const SessionTrace*> selected;
  for (const std::string& id : session_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("train: unknown session id '" + id + "'");
    selected.push_back(it->second);
  }
  return train(selected, config);
}

void write_train_log_csv(const std::vector<EpochLog>& log, const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write training log '" + path + "'");
  for (const auto& [k, v] : header) out << "# " << k << " = " << v << "\n";
  out << "epoch,train_mse,val_mse,epoch_seconds\n";
  for (const EpochLog& e : log) {
    out << e.epoch << ',' << format_double(e.train_mse) << ','
        << format_double(e.val_mse) << ',' << format_double(e.epoch_seconds) << "\n";
  }
}

}  // namespace wqoe
