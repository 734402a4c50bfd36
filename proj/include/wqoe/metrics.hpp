#pragma once

#include <span>
#include <vector>

namespace wqoe {

/// Correlation value with a degeneracy flag: a constant input has no
/// defined correlation, which is reported as 0 with the flag set so that
/// aggregates stay finite.
struct Correlation {
  double value = 0.0;
  bool degenerate = false;
};

/// Pearson (linear) correlation coefficient. Requires length >= 2.
Correlation pcc(std::span<const double> x, std::span<const double> y);

/// Spearman rank-order correlation: Pearson correlation of average ranks,
/// ties receiving the mean of their rank span. Requires length >= 2.
Correlation srocc(std::span<const double> x, std::span<const double> y);

/// Root mean squared error. Requires equal lengths >= 1.
double rmse(std::span<const double> x, std::span<const double> y);

/// Average ranks (1-based; ties share the mean of their span).
std::vector<double> average_ranks(std::span<const double> x);

}  // namespace wqoe
