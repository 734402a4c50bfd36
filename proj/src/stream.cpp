#include "wqoe/stream.hpp"

#include <cmath>
#include <cstring>

#include "wqoe/errors.hpp"

namespace wqoe {

StreamState::StreamState(const Model& model)
    : norm_(model.norm),
      window_(Tensor::zeros({kNumFeatures, static_cast<std::size_t>(model.window_len)})),
      window_len_(model.window_len) {}

StreamState::Output push_sample(StreamState& state, double stsq, int pi,
                                Model& model) {
  if (!std::isfinite(stsq) || stsq < 0.0 || stsq > 100.0) {
    throw DataError("push_sample: stsq must be finite and in [0, 100]");
  }
  if (pi != 0 && pi != 1) {
    throw DataError("push_sample: pi must be 0 or 1");
  }

  const int t = state.samples_seen_;
  if (pi == 1) {
    if (!state.in_stall_) {
      state.in_stall_ = true;
      state.stall_events_ += 1.0;
    }
  } else if (state.in_stall_) {
    state.in_stall_ = false;
    state.last_stall_end_ = t - 1;
  }
  const double nr = state.stall_events_;
  const double tr = pi == 1 ? 0.0 : static_cast<double>(t - state.last_stall_end_);

  const std::size_t w = static_cast<std::size_t>(state.window_len_);
  double* data = state.window_.data.data();
  for (std::size_t r = 0; r < kNumFeatures; ++r) {
    std::memmove(data + r * w, data + r * w + 1, (w - 1) * sizeof(double));
  }
  const double raw[kNumFeatures] = {stsq, static_cast<double>(pi), nr, tr};
  for (std::size_t r = 0; r < kNumFeatures; ++r) {
    data[r * w + (w - 1)] =
        (raw[r] - state.norm_.feature_mean[r]) / state.norm_.feature_std[r];
  }
  state.samples_seen_ = t + 1;

  StreamState::Output out;
  out.warmup = t < state.window_len_ - 1;
  out.qoe_pred = model.predict_window(state.window_);
  return out;
}

}  // namespace wqoe
