#include "psyosr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psyosr/error.hpp"

namespace psyosr::stats {

namespace {

double sorted_quantile(const std::vector<double>& sorted, double p) {
  p = std::clamp(p, 0.0, 1.0);
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double quantile(std::span<const double> values, double p) {
  const double probs[] = {p};
  return quantiles(values, probs).front();
}

std::vector<double> quantiles(std::span<const double> values, std::span<const double> probs) {
  if (values.empty()) {
    throw Error(ErrorKind::kParameter, "quantile of an empty sample");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(sorted_quantile(sorted, p));
  return out;
}

double median(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorKind::kParameter, "median of an empty sample");
  }
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mean(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorKind::kParameter, "mean of an empty sample");
  }
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double standard_error(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return sample_stddev(values) / std::sqrt(static_cast<double>(values.size()));
}

}  // namespace psyosr::stats
