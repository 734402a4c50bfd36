#pragma once

#include <array>
#include <span>
#include <vector>

#include "wqoe/tensor.hpp"
#include "wqoe/trace.hpp"

namespace wqoe {

/// Row indices of the model input matrix.
enum FeatureRow : std::size_t { kStsq = 0, kPi = 1, kNr = 2, kTr = 3 };
inline constexpr std::size_t kNumFeatures = 4;

/// [4, T] matrix ordered (STSQ, PI, NR, Tr).
struct FeatureMatrix {
  Tensor values;
  std::size_t length() const { return values.shape[1]; }
};

/// Derives the rebuffering features from a trace:
///  - PI copied as-is;
///  - NR[t] counts rebuffering runs that started at or before t;
///  - Tr[t] is 0 while pi = 1, otherwise seconds since the most recent run
///    ended; before any rebuffering it counts seconds since session start,
///    so Tr[t] = t + 1.
FeatureMatrix derive_features(const SessionTrace& trace);

/// Per-feature and target normalization statistics, captured on training
/// data only.
struct NormStats {
  std::array<double, kNumFeatures> feature_mean{};
  std::array<double, kNumFeatures> feature_std{};
  double qoe_mean = 0.0;
  double qoe_std = 1.0;
};

/// Population mean/std per feature row over all matrices, and over the
/// concatenated targets. Standard deviations are floored at 1e-6.
NormStats compute_norm_stats(std::span<const FeatureMatrix> features,
                             std::span<const std::vector<double>> targets);

/// Z-scores every feature row. Rejects non-finite statistics.
FeatureMatrix normalize(const FeatureMatrix& features, const NormStats& stats);

double normalize_qoe(double qoe, const NormStats& stats);
double denormalize_qoe(double value, const NormStats& stats);

/// Ground-truth labels of a labeled trace.
std::vector<double> qoe_targets(const SessionTrace& trace);

}  // namespace wqoe
