#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wqoe/train.hpp"

namespace wqoe {

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
};

struct BenchRow {
  std::string model;
  std::size_t params = 0;
  double epoch_s_median = 0.0;
  LatencyStats inference;
};

struct BenchReport {
  BenchRow wavenet;
  BenchRow lstm;
  double train_speedup = 0.0;      // LSTM / WaveNet epoch time
  double inference_speedup = 0.0;  // LSTM / WaveNet mean latency
  std::string environment_note;
};

/// Trains both models on identical windows for exactly `epochs` epochs
/// (early stopping disabled) and records the median epoch wall time,
/// monotonic clock, single-threaded. Rejects epochs < 5.
BenchReport bench_training(const std::vector<const SessionTrace*>& sessions,
                           const TrainConfig& base_config, int epochs);

/// Latency distribution over `n` single-window predictions per model on
/// fresh seeded windows; the first 10% are warmup and excluded from the
/// statistics. Rejects n < 1000.
void bench_inference(Model& wavenet_model, Model& lstm_model, int n,
                     std::uint64_t seed, BenchReport& report);

/// Median wall time of one call, in microseconds, over `iters` calls.
double time_closure_median_us(const std::function<void()>& fn, int iters);

/// Tells the allocator to keep freed pages mapped. The per-batch working
/// set is released and reacquired thousands of times per epoch; without
/// this the heap shrinks and regrows across batches and the page faults
/// dominate kernel time. Called once by the CLI and the harnesses.
void retain_heap_pages();

/// Multiply-accumulate count of one full-sequence forward timestep,
/// matching Tape::mac_count: input projection 4n, per layer two k-tap
/// convolutions plus residual and skip projections, then the two head
/// stages.
std::uint64_t wavenet_macs_per_timestep(const WaveNetConfig& config);

void write_bench_csv(const BenchReport& report, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& header);
std::string render_bench_markdown(const BenchReport& report);

}  // namespace wqoe
