#pragma once

#include <span>

namespace etrace::stats {

double mean(std::span<const double> xs);

/// Linear-interpolation quantile (the "type 7" rule), q in [0, 1].
/// Throws std::invalid_argument on an empty sample.
double quantile(std::span<const double> xs, double q);
double median(std::span<const double> xs);

struct MannWhitney {
  double u = 0.0;        // U statistic of the first sample
  double p_value = 1.0;  // one-sided, alternative: first sample tends larger
  bool exact = false;
};

/// One-sided Mann-Whitney U test. Exact null distribution when there are no
/// ties and both samples are small; normal approximation with tie and
/// continuity correction otherwise.
MannWhitney mann_whitney_greater(std::span<const double> first, std::span<const double> second);

}  // namespace etrace::stats
