#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wqoe/trace.hpp"

namespace wqoe {

struct SyntheticConfig {
  std::uint64_t seed = 42;
  int num_sessions = 10;
  int duration_s = 120;          // must be >= 30
  double stall_intensity = 0.3;  // in [0, 1]; 0 produces no rebuffering
};

/// Seeded playback sessions: STSQ follows a piecewise-smooth random walk in
/// [20, 95] with occasional level shifts; rebuffering runs of 1..8 s arrive
/// with per-second start probability 0.05 * stall_intensity. Ground truth
/// comes from synthetic_qoe_oracle. Content/pattern metadata is assigned on
/// a ceil(sqrt(N)) grid so leave-one-out layouts are constructible.
///
/// All randomness flows through one SplitMix64 stream, so a seed pins every
/// byte of the output.
std::vector<SessionTrace> generate_synthetic(const SyntheticConfig& config);

/// The recursive scoring rule used to label synthetic traces:
///   qoe_0 = stsq_0
///   qoe_t = clamp(a*qoe_{t-1} + (1-a)*(stsq_t - P*pi_t - R*max(0, 1 - Tr_t/tau)))
/// with a = 0.8, P = 40, R = 20, tau = 15, clamped to [0, 100]. Tr is the
/// derived time-since-last-rebuffering feature.
std::vector<double> synthetic_qoe_oracle(std::span<const double> stsq,
                                         std::span<const int> pi);

}  // namespace wqoe
