#include "wqoe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wqoe {

namespace {

void check_lengths(std::span<const double> x, std::span<const double> y,
                   std::size_t min_len, const char* what) {
  if (x.size() != y.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch " +
                                std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()));
  }
  if (x.size() < min_len) {
    throw std::invalid_argument(std::string(what) + ": needs at least " +
                                std::to_string(min_len) + " samples, got " +
                                std::to_string(x.size()));
  }
}

}  // namespace

Correlation pcc(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y, 2, "pcc");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  const double r = sxy / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), false};
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

Correlation srocc(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y, 2, "srocc");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pcc(rx, ry);
}

double rmse(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y, 1, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace wqoe
