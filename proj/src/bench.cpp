#include "wqoe/bench.hpp"

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "wqoe/errors.hpp"
#include "wqoe/features.hpp"
#include "wqoe/rng.hpp"

namespace wqoe {

namespace {

using Clock = std::chrono::steady_clock;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Nearest-rank percentile on a sorted sample.
double percentile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (rank == 0) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

LatencyStats latency_stats(std::vector<double> ms) {
  LatencyStats s;
  double sum = 0.0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  s.p50_ms = percentile(ms, 0.50);
  s.p95_ms = percentile(ms, 0.95);
  s.p99_ms = percentile(ms, 0.99);
  return s;
}

}  // namespace

void retain_heap_pages() {
#ifdef M_TRIM_THRESHOLD
  mallopt(M_TRIM_THRESHOLD, -1);
  mallopt(M_MMAP_MAX, 0);
#endif
}

std::uint64_t wavenet_macs_per_timestep(const WaveNetConfig& config) {
  const std::uint64_t n = static_cast<std::uint64_t>(config.num_filters);
  const std::uint64_t k = static_cast<std::uint64_t>(config.filter_size);
  const std::uint64_t L = static_cast<std::uint64_t>(config.num_layers);
  const std::uint64_t in = static_cast<std::uint64_t>(config.input_features);
  return in * n + L * (2 * k * n * n + 2 * n * n) + (n * n + n);
}

BenchReport bench_training(const std::vector<const SessionTrace*>& sessions,
                           const TrainConfig& base_config, int epochs) {
  if (epochs < 5) {
    throw std::invalid_argument("bench_training: need at least 5 epochs for a stable "
                                "median, got " + std::to_string(epochs));
  }
  BenchReport report;
  report.environment_note =
      "single-threaded reference condition; medians over " + std::to_string(epochs) +
      " epochs, first-10% inference warmup discarded";

  for (ModelKind kind : {ModelKind::wavenet, ModelKind::lstm}) {
    TrainConfig cfg = base_config;
    cfg.kind = kind;
    cfg.max_epochs = epochs;
    cfg.early_stop_patience = epochs + 1;  // never stops early
    TrainResult r = train(sessions, cfg);
    std::vector<double> times;
    for (const EpochLog& e : r.log) times.push_back(e.epoch_seconds);
    BenchRow& row = kind == ModelKind::wavenet ? report.wavenet : report.lstm;
    row.model = model_kind_name(kind);
    row.params = r.model.param_count();
    row.epoch_s_median = median_of(times);
  }
  report.train_speedup = report.lstm.epoch_s_median / report.wavenet.epoch_s_median;
  return report;
}

void bench_inference(Model& wavenet_model, Model& lstm_model, int n,
                     std::uint64_t seed, BenchReport& report) {
  if (n < 1000) {
    throw std::invalid_argument("bench_inference: need at least 1000 predictions, got " +
                                std::to_string(n));
  }
  // A pool of fresh normalized windows, cycled through.
  SplitMix64 rng(seed);
  const std::size_t w = static_cast<std::size_t>(wavenet_model.window_len);
  std::vector<Tensor> windows;
  for (int i = 0; i < 64; ++i) {
    Tensor t = Tensor::zeros({kNumFeatures, w});
    for (double& v : t.data) v = rng.uniform(-2.0, 2.0);
    windows.push_back(std::move(t));
  }

  const int warmup = n / 10;
  double sink = 0.0;
  for (auto [model, row] : {std::pair{&wavenet_model, &report.wavenet},
                            std::pair{&lstm_model, &report.lstm}}) {
    std::vector<double> ms;
    ms.reserve(static_cast<std::size_t>(n - warmup));
    for (int i = 0; i < n; ++i) {
      const Tensor& win = windows[static_cast<std::size_t>(i) % windows.size()];
      const auto t0 = Clock::now();
      sink += model->predict_window(win);
      const auto t1 = Clock::now();
      if (i >= warmup) {
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
    }
    row->inference = latency_stats(std::move(ms));
  }
  if (!std::isfinite(sink)) throw NumericError("bench_inference: non-finite prediction");
  report.inference_speedup =
      report.lstm.inference.mean_ms / report.wavenet.inference.mean_ms;
}

double time_closure_median_us(const std::function<void()>& fn, int iters) {
  std::vector<double> us;
  us.reserve(static_cast<std::size_t>(iters));
  for (int i = 0; i < iters; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  return median_of(std::move(us));
}

void write_bench_csv(const BenchReport& report, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write bench report '" + path + "'");
  for (const auto& [k, v] : header) out << "# " << k << " = " << v << "\n";
  out << "# note = " << report.environment_note << "\n";
  out << "model,params,epoch_s_median,inf_ms_mean,inf_ms_p50,inf_ms_p95,inf_ms_p99\n";
  for (const BenchRow* r : {&report.wavenet, &report.lstm}) {
    out << r->model << ',' << r->params << ',' << format_double(r->epoch_s_median)
        << ',' << format_double(r->inference.mean_ms) << ','
        << format_double(r->inference.p50_ms) << ','
        << format_double(r->inference.p95_ms) << ','
        << format_double(r->inference.p99_ms) << "\n";
  }
}

std::string render_bench_markdown(const BenchReport& report) {
  char buf[256];
  std::string s;
  s += "| model   | params | training (s/epoch, median) | inference (ms, mean) |\n";
  s += "|---------|--------|-----------------------------|-----------------------|\n";
  for (const BenchRow* r : {&report.wavenet, &report.lstm}) {
    std::snprintf(buf, sizeof(buf), "| %-7s | %6zu | %27.6f | %21.6f |\n",
                  r->model.c_str(), r->params, r->epoch_s_median,
                  r->inference.mean_ms);
    s += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "\ntraining speedup (LSTM/WaveNet): %.2fx; inference speedup: %.2fx\n",
                report.train_speedup, report.inference_speedup);
  s += buf;
  s += "note: " + report.environment_note + "\n";
  return s;
}

}  // namespace wqoe
