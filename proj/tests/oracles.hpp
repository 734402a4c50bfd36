// Test-only reference implementations, kept independent of the library
// code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wqoe/nn.hpp"
#include "wqoe/rng.hpp"

namespace oracles {

/// Central finite differences over every parameter against analytic
/// gradients. `loss` recomputes the scalar loss from current parameter
/// values; `grads` runs the analytic backward pass into the *_grad tensors.
/// Returns the max relative error with denominators guarded at 1e-8.
///
/// A mismatch is re-measured once with a 8x smaller step: a rectifier kink
/// inside the stencil makes the quotient step-dependent and the refinement
/// resolves it, while a genuinely wrong analytic gradient stays wrong at
/// every step size.
inline double max_grad_rel_error(std::span<const wqoe::nn::ParamRef> refs,
                                 const std::function<double()>& loss,
                                 const std::function<void()>& grads) {
  grads();
  std::vector<std::vector<double>> analytic;
  for (const auto& r : refs) analytic.push_back(r.grad->data);

  double worst = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    wqoe::Tensor& value = *refs[i].value;
    for (std::size_t j = 0; j < value.numel(); ++j) {
      const double saved = value.data[j];
      const double a = analytic[i][j];
      auto rel_at = [&](double h) {
        value.data[j] = saved + h;
        const double up = loss();
        value.data[j] = saved - h;
        const double down = loss();
        value.data[j] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({1e-8, std::abs(a), std::abs(numeric)});
        return std::abs(a - numeric) / denom;
      };
      const double h = 1e-5 * std::max(1.0, std::abs(saved));
      double rel = rel_at(h);
      if (rel > 1e-4) rel = rel_at(h / 8.0);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

/// Generic evaluation point for gradient checks: every learnable tensor,
/// biases included, drawn uniformly so no rectifier sits exactly on its kink.
inline void randomize_params(std::span<const wqoe::nn::ParamRef> refs,
                             wqoe::SplitMix64& rng, double amplitude = 0.8) {
  for (const auto& r : refs) {
    for (double& v : r.value->data) v = rng.uniform(-amplitude, amplitude);
  }
}

/// Direct-formula Pearson correlation in extended precision.
inline double pcc_ref(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return static_cast<double>(sxy / sqrtl(sxx * syy));
}

/// O(n^2) average ranks: 1 + (#smaller) + (#equal - 1) / 2.
inline std::vector<double> ranks_ref(std::span<const double> x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t smaller = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) ++smaller;
      if (x[j] == x[i]) ++equal;
    }
    r[i] = 1.0 + static_cast<double>(smaller) +
           (static_cast<double>(equal) - 1.0) / 2.0;
  }
  return r;
}

inline double srocc_ref(std::span<const double> x, std::span<const double> y) {
  const std::vector<double> rx = ranks_ref(x);
  const std::vector<double> ry = ranks_ref(y);
  return pcc_ref(rx, ry);
}

inline double rmse_ref(std::span<const double> x, std::span<const double> y) {
  long double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += (long double)(x[i] - y[i]) * (x[i] - y[i]);
  }
  return static_cast<double>(sqrtl(acc / x.size()));
}

/// Naive per-timestep recount of the rebuffering features: rescans the
/// whole prefix for every t.
struct RecountedFeatures {
  std::vector<double> nr, tr;
};

inline RecountedFeatures recount_features(std::span<const int> pi) {
  RecountedFeatures out;
  const std::size_t T = pi.size();
  out.nr.resize(T);
  out.tr.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    int events = 0;
    for (std::size_t u = 0; u <= t; ++u) {
      if (pi[u] == 1 && (u == 0 || pi[u - 1] == 0)) ++events;
    }
    out.nr[t] = events;
    if (pi[t] == 1) {
      out.tr[t] = 0.0;
    } else {
      // Walk back to the end of the most recent completed run.
      std::ptrdiff_t end = -1;
      for (std::ptrdiff_t u = static_cast<std::ptrdiff_t>(t) - 1; u >= 0; --u) {
        if (pi[static_cast<std::size_t>(u)] == 1) {
          end = u;
          break;
        }
      }
      out.tr[t] = static_cast<double>(static_cast<std::ptrdiff_t>(t) - end);
    }
  }
  return out;
}

}  // namespace oracles
