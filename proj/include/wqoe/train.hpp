#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wqoe/lstm.hpp"
#include "wqoe/model_io.hpp"
#include "wqoe/tensor.hpp"
#include "wqoe/trace.hpp"
#include "wqoe/wavenet.hpp"

namespace wqoe {

struct TrainConfig {
  int window_len = 8;  // matches the default receptive field
  int batch_size = 32;
  int max_epochs = 100;
  double learning_rate = 1e-3;
  int early_stop_patience = 10;
  std::uint64_t seed = 42;
  ModelKind kind = ModelKind::wavenet;
  WaveNetConfig wavenet;
  LstmConfig lstm;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double epoch_seconds = 0.0;  // optimization pass only, monotonic clock
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  int best_epoch = 0;  // epoch whose weights were kept
  int skipped_sessions = 0;
};

/// One training example: a feature window [4, w] and the label at its last
/// timestep.
struct TrainingWindow {
  Tensor features;
  double target;
};

/// Sliding windows over a (normalized) sequence: one window per
/// t in [window_len-1, T-1], covering t-w+1..t, labeled with targets[t].
/// Returns no windows when the sequence is shorter than window_len.
std::vector<TrainingWindow> make_windows(const Tensor& features,
                                         std::span<const double> targets,
                                         int window_len);

/// Windowed mini-batch training with Adam, seeded shuffling, a 10% held-out
/// validation split at window granularity and early stopping. The weights of
/// the best validation epoch are kept. Deterministic per seed
/// (single-threaded).
TrainResult train(const std::vector<const SessionTrace*>& sessions,
                  const TrainConfig& config);

/// Convenience overload selecting sessions by id from a pool.
TrainResult train(const std::vector<SessionTrace>& pool,
                  const std::vector<std::string>& session_ids,
                  const TrainConfig& config);

void write_train_log_csv(const std::vector<EpochLog>& log, const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>& header);

}  // namespace wqoe
