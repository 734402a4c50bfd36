#include "wqoe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "wqoe/errors.hpp"
#include "wqoe/features.hpp"
#include "wqoe/rng.hpp"

namespace wqoe {

namespace {

constexpr double kAlpha = 0.8;
constexpr double kStallPenalty = 40.0;
constexpr double kRecencyPenalty = 20.0;
constexpr double kRecencyTau = 15.0;

constexpr double kStsqMin = 20.0;
constexpr double kStsqMax = 95.0;
constexpr double kLevelShiftProb = 0.03;
constexpr double kWalkStep = 1.5;
constexpr double kStallStartRate = 0.05;  // times stall_intensity, per second

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace

std::vector<double> synthetic_qoe_oracle(std::span<const double> stsq,
                                         std::span<const int> pi) {
  if (stsq.size() != pi.size() || stsq.empty()) {
    throw std::invalid_argument("synthetic_qoe_oracle: stsq and pi must be equal, non-empty");
  }
  // Tr comes from the same derivation rule the feature pipeline uses.
  SessionTrace tmp;
  tmp.session_id = "oracle";
  tmp.samples.resize(stsq.size());
  for (std::size_t t = 0; t < stsq.size(); ++t) {
    tmp.samples[t] = {static_cast<int>(t), clamp(stsq[t], 0.0, 100.0), pi[t], std::nullopt};
  }
  FeatureMatrix fm = derive_features(tmp);

  std::vector<double> qoe(stsq.size());
  qoe[0] = clamp(stsq[0], 0.0, 100.0);
  for (std::size_t t = 1; t < stsq.size(); ++t) {
    const double tr = fm.values.at(kTr, t);
    const double instant = stsq[t] - kStallPenalty * pi[t] -
                           kRecencyPenalty * std::max(0.0, 1.0 - tr / kRecencyTau);
    qoe[t] = clamp(kAlpha * qoe[t - 1] + (1.0 - kAlpha) * instant, 0.0, 100.0);
  }
  return qoe;
}

std::vector<SessionTrace> generate_synthetic(const SyntheticConfig& config) {
  if (config.num_sessions < 1) {
    throw DataError("generate_synthetic: num_sessions must be >= 1");
  }
  if (config.duration_s < 30) {
    throw DataError("generate_synthetic: duration must be >= 30 s, got " +
                    std::to_string(config.duration_s));
  }
  if (!(config.stall_intensity >= 0.0 && config.stall_intensity <= 1.0)) {
    throw DataError("generate_synthetic: stall_intensity must be in [0, 1]");
  }

  const int grid = static_cast<int>(
      std::ceil(std::sqrt(static_cast<double>(config.num_sessions))));
  const std::size_t T = static_cast<std::size_t>(config.duration_s);
  const double start_prob = kStallStartRate * config.stall_intensity;

  SplitMix64 rng(config.seed);
  std::vector<SessionTrace> traces;
  traces.reserve(static_cast<std::size_t>(config.num_sessions));

  for (int s = 0; s < config.num_sessions; ++s) {
    std::vector<double> stsq(T);
    double level = rng.uniform(40.0, 80.0);
    stsq[0] = level;
    for (std::size_t t = 1; t < T; ++t) {
      if (rng.uniform() < kLevelShiftProb) {
        level = clamp(level + rng.uniform(-25.0, 25.0), kStsqMin, kStsqMax);
        stsq[t] = level;
      } else {
        stsq[t] = clamp(stsq[t - 1] + rng.uniform(-kWalkStep, kWalkStep),
                        kStsqMin, kStsqMax);
      }
    }

    std::vector<int> pi(T, 0);
    std::size_t t = 0;
    while (t < T) {
      if (rng.uniform() < start_prob) {
        const std::size_t len = 1 + static_cast<std::size_t>(rng.below(8));
        const std::size_t end = std::min(T, t + len);
        for (std::size_t u = t; u < end; ++u) pi[u] = 1;
        t = end + 1;  // at least one normal second between runs
      } else {
        ++t;
      }
    }

    std::vector<double> qoe = synthetic_qoe_oracle(stsq, pi);

    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "s%05d", s);
    SessionTrace trace;
    trace.session_id = idbuf;
    trace.content_id = "c" + std::to_string(s % grid);
    trace.pattern_id = "p" + std::to_string(s / grid);
    trace.samples.resize(T);
    for (std::size_t u = 0; u < T; ++u) {
      trace.samples[u] = {static_cast<int>(u), stsq[u], pi[u], qoe[u]};
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

}  // namespace wqoe
