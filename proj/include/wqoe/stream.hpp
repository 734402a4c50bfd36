#pragma once

#include "wqoe/model_io.hpp"
#include "wqoe/tensor.hpp"

namespace wqoe {

/// Per-session online inference state: the last window_len normalized
/// feature vectors (zero-initialized) plus the running rebuffering counters
/// needed to derive NR and Tr incrementally. Memory is O(window_len) per
/// session; one push never recomputes more than one window.
///
/// States are independent; a single state must not be pushed concurrently.
class StreamState {
 public:
  explicit StreamState(const Model& model);

  struct Output {
    double qoe_pred = 0.0;  // denormalized, 0-100 scale
    bool warmup = false;    // fewer than window_len real samples in the window
  };

  int samples_seen() const { return samples_seen_; }

 private:
  friend Output push_sample(StreamState& state, double stsq, int pi, Model& model);

  NormStats norm_;
  Tensor window_;  // [4, window_len], normalized, shifted left per push
  int window_len_;
  int samples_seen_ = 0;
  bool in_stall_ = false;
  double stall_events_ = 0.0;
  int last_stall_end_ = -1;
};

/// Derives NR/Tr incrementally (identical to the batch derivation), appends
/// the normalized feature vector to the ring and predicts from the current
/// window. Rejects non-finite or out-of-range inputs without touching the
/// state.
StreamState::Output push_sample(StreamState& state, double stsq, int pi,
                                Model& model);

}  // namespace wqoe
