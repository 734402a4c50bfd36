#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wqoe/trace.hpp"

namespace wqoe {

enum class SplitProtocol {
  /// One plan entry per session; the training set excludes every session
  /// that shares the test session's content id or playout-pattern id.
  lfovia_loo,
  /// One plan entry per session; the training set is a seeded random 80%
  /// (rounded down) of the remaining sessions.
  live_random80,
  /// Single shared split: the last `test_count` sessions (by sorted id) are
  /// test entries, all earlier sessions form one common training list.
  holdout,
};

SplitProtocol parse_protocol(const std::string& name);
std::string protocol_name(SplitProtocol protocol);

struct SplitEntry {
  std::string test_session;
  std::vector<std::string> train_sessions;  // sorted; never contains the test id
};

struct SplitPlan {
  SplitProtocol protocol;
  std::uint64_t seed = 0;
  std::vector<SplitEntry> entries;  // sorted by test session id
};

/// Builds the train/test plan. Rejects degenerate splits (empty training
/// lists) and, for lfovia_loo, sessions without content/pattern metadata.
SplitPlan build_split_plan(const std::vector<SessionTrace>& sessions,
                           SplitProtocol protocol, std::uint64_t seed,
                           int holdout_test_count = 0);

}  // namespace wqoe
