#include "wqoe/features.hpp"

#include <cmath>

#include "wqoe/errors.hpp"

namespace wqoe {

FeatureMatrix derive_features(const SessionTrace& trace) {
  trace.validate();
  const std::size_t T = trace.length();
  FeatureMatrix fm{Tensor::zeros({kNumFeatures, T})};

  bool in_stall = false;
  double events = 0.0;
  // Index of the last second of the most recently completed run; -1 before
  // any rebuffering, which makes Tr = t - last_end = t + 1 at session start.
  int last_end = -1;
  for (std::size_t t = 0; t < T; ++t) {
    const TraceSample& s = trace.samples[t];
    if (s.pi == 1) {
      if (!in_stall) {
        in_stall = true;
        events += 1.0;  // an event "happens" at the first stalled second
      }
    } else if (in_stall) {
      in_stall = false;
      last_end = static_cast<int>(t) - 1;
    }
    fm.values.at(kStsq, t) = s.stsq;
    fm.values.at(kPi, t) = static_cast<double>(s.pi);
    fm.values.at(kNr, t) = events;
    fm.values.at(kTr, t) =
        s.pi == 1 ? 0.0 : static_cast<double>(static_cast<int>(t) - last_end);
  }
  return fm;
}

NormStats compute_norm_stats(std::span<const FeatureMatrix> features,
                             std::span<const std::vector<double>> targets) {
  NormStats stats;
  for (std::size_t r = 0; r < kNumFeatures; ++r) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (const FeatureMatrix& fm : features) {
      const std::size_t T = fm.length();
      for (std::size_t t = 0; t < T; ++t) {
        const double v = fm.values.at(r, t);
        sum += v;
        sumsq += v * v;
      }
      n += T;
    }
    if (n == 0) throw DataError("compute_norm_stats: no feature data");
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    stats.feature_mean[r] = mean;
    stats.feature_std[r] = std::max(1e-6, std::sqrt(var));
  }

  double sum = 0.0, sumsq = 0.0;
  std::size_t n = 0;
  for (const std::vector<double>& tv : targets) {
    for (double v : tv) {
      sum += v;
      sumsq += v * v;
    }
    n += tv.size();
  }
  if (n > 0) {
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    stats.qoe_mean = mean;
    stats.qoe_std = std::max(1e-6, std::sqrt(var));
  }
  return stats;
}

namespace {

void check_stats(const NormStats& stats) {
  for (std::size_t r = 0; r < kNumFeatures; ++r) {
    if (!std::isfinite(stats.feature_mean[r]) || !std::isfinite(stats.feature_std[r]) ||
        stats.feature_std[r] <= 0.0) {
      throw DataError("normalization stats contain non-finite or non-positive entries");
    }
  }
  if (!std::isfinite(stats.qoe_mean) || !std::isfinite(stats.qoe_std) ||
      stats.qoe_std <= 0.0) {
    throw DataError("normalization stats contain non-finite or non-positive entries");
  }
}

}  // namespace

FeatureMatrix normalize(const FeatureMatrix& features, const NormStats& stats) {
  check_stats(stats);
  FeatureMatrix out{Tensor(features.values.shape)};
  const std::size_t T = features.length();
  for (std::size_t r = 0; r < kNumFeatures; ++r) {
    const double mean = stats.feature_mean[r];
    const double inv = 1.0 / stats.feature_std[r];
    for (std::size_t t = 0; t < T; ++t) {
      out.values.at(r, t) = (features.values.at(r, t) - mean) * inv;
    }
  }
  return out;
}

double normalize_qoe(double qoe, const NormStats& stats) {
  return (qoe - stats.qoe_mean) / stats.qoe_std;
}

double denormalize_qoe(double value, const NormStats& stats) {
  return value * stats.qoe_std + stats.qoe_mean;
}

std::vector<double> qoe_targets(const SessionTrace& trace) {
  if (!trace.labeled()) {
    throw DataError("trace '" + trace.session_id + "' has no subjective labels");
  }
  std::vector<double> out(trace.length());
  for (std::size_t t = 0; t < trace.length(); ++t) out[t] = *trace.samples[t].qoe;
  return out;
}

}  // namespace wqoe
