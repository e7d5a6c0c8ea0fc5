#pragma once

#include <span>
#include <vector>

namespace psyosr::stats {

/// Linear-interpolation quantile between order statistics (R's type 7).
/// `p` is clamped to [0, 1]. Throws on empty input.
double quantile(std::span<const double> values, double p);

/// Quantiles for several probabilities with a single sort.
std::vector<double> quantiles(std::span<const double> values, std::span<const double> probs);

/// Even counts take the mean of the two central order statistics.
double median(std::span<const double> values);

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

/// Standard error of the mean: sample stddev / sqrt(n).
double standard_error(std::span<const double> values);

}  // namespace psyosr::stats
