#pragma once

#include <optional>
#include <string>
#include <vector>

namespace wqoe {

struct TraceSample {
  int t = 0;           // seconds from session start, step 1
  double stsq = 0.0;   // short-time subjective quality, 0..100
  int pi = 0;          // 1 while rebuffering, 0 during normal playback
  std::optional<double> qoe;  // subjective score 0..100 when labeled
};

/// One playback session sampled at 1-second granularity.
struct SessionTrace {
  std::string session_id;
  std::string content_id;   // may be empty for user data without metadata
  std::string pattern_id;
  std::vector<TraceSample> samples;

  std::size_t length() const { return samples.size(); }
  /// A session is labeled when every sample carries a subjective score.
  bool labeled() const;
  /// Throws DataError on timestamp gaps or out-of-range values.
  void validate() const;
};

/// CSV with header session_id,content_id,pattern_id,t,stsq,pi,qoe; one row
/// per second, qoe column may be empty. Diagnostics carry line numbers.
SessionTrace load_trace_csv(const std::string& path);
void save_trace_csv(const SessionTrace& trace, const std::string& path);

/// Loads every *.csv in a directory, sorted by session id.
std::vector<SessionTrace> load_trace_dir(const std::string& dir);

/// "%.17g" rendering, enough digits to round-trip a double exactly.
std::string format_double(double v);

}  // namespace wqoe
