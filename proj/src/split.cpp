#include "wqoe/split.hpp"

#include <algorithm>

#include "wqoe/errors.hpp"
#include "wqoe/rng.hpp"

namespace wqoe {

SplitProtocol parse_protocol(const std::string& name) {
  if (name == "lfovia-loo") return SplitProtocol::lfovia_loo;
  if (name == "live-random80") return SplitProtocol::live_random80;
  if (name == "holdout") return SplitProtocol::holdout;
  throw DataError("unknown split protocol '" + name +
                  "' (expected lfovia-loo, live-random80 or holdout)");
}

std::string protocol_name(SplitProtocol protocol) {
  switch (protocol) {
    case SplitProtocol::lfovia_loo: return "lfovia-loo";
    case SplitProtocol::live_random80: return "live-random80";
    case SplitProtocol::holdout: return "holdout";
  }
  return "?";
}

SplitPlan build_split_plan(const std::vector<SessionTrace>& sessions,
                           SplitProtocol protocol, std::uint64_t seed,
                           int holdout_test_count) {
  if (sessions.size() < 2) {
    throw DataError("split plan needs at least 2 sessions, got " +
                    std::to_string(sessions.size()));
  }
  std::vector<const SessionTrace*> sorted;
  sorted.reserve(sessions.size());
  for (const SessionTrace& s : sessions) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(),
            [](const SessionTrace* a, const SessionTrace* b) {
              return a->session_id < b->session_id;
            });

  SplitPlan plan;
  plan.protocol = protocol;
  plan.seed = seed;

  switch (protocol) {
    case SplitProtocol::lfovia_loo: {
      for (const SessionTrace* s : sorted) {
        if (s->content_id.empty() || s->pattern_id.empty()) {
          throw DataError("lfovia-loo protocol requires content and pattern ids; "
                          "session '" + s->session_id + "' lacks them");
        }
      }
      for (const SessionTrace* test : sorted) {
        SplitEntry e;
        e.test_session = test->session_id;
        for (const SessionTrace* other : sorted) {
          if (other == test) continue;
          if (other->content_id == test->content_id) continue;
          if (other->pattern_id == test->pattern_id) continue;
          e.train_sessions.push_back(other->session_id);
        }
        if (e.train_sessions.empty()) {
          throw DataError("degenerate lfovia-loo split: no training sessions left "
                          "for test session '" + test->session_id + "'");
        }
        plan.entries.push_back(std::move(e));
      }
      break;
    }
    case SplitProtocol::live_random80: {
      SplitMix64 rng(seed);
      const std::size_t train_count =
          static_cast<std::size_t>(0.8 * static_cast<double>(sorted.size() - 1));
      if (train_count == 0) {
        throw DataError("degenerate live-random80 split: floor(0.8 * " +
                        std::to_string(sorted.size() - 1) +
                        ") training sessions is zero");
      }
      for (const SessionTrace* test : sorted) {
        std::vector<std::string> pool;
        for (const SessionTrace* other : sorted) {
          if (other != test) pool.push_back(other->session_id);
        }
        rng.shuffle(pool);
        pool.resize(train_count);
        std::sort(pool.begin(), pool.end());
        plan.entries.push_back({test->session_id, std::move(pool)});
      }
      break;
    }
    case SplitProtocol::holdout: {
      const int n = static_cast<int>(sorted.size());
      int k = holdout_test_count;
      if (k <= 0) k = std::max(1, n / 5);  // default: last 20% of sessions
      if (k >= n) {
        throw DataError("holdout split: test count " + std::to_string(k) +
                        " must be smaller than the session count " + std::to_string(n));
      }
      std::vector<std::string> train;
      for (int i = 0; i < n - k; ++i) train.push_back(sorted[static_cast<std::size_t>(i)]->session_id);
      for (int i = n - k; i < n; ++i) {
        plan.entries.push_back({sorted[static_cast<std::size_t>(i)]->session_id, train});
      }
      break;
    }
  }
  return plan;
}

}  // namespace wqoe
