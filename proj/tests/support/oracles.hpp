#pragma once

// Test-only reference computations. These deliberately avoid the library's
// own helpers so they stay an independent check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

/// Sort, then index the middle (mean of the two middles for even n).
inline double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Outcome of one test sample under the written decision table:
/// walk exits; first exit with score > threshold decides; known samples
/// exiting with the right label are K1, wrong label K2, no exit K3; unknown
/// samples exiting are U2, else U1.
inline std::string decision_table(const std::vector<std::vector<double>>& probs,
                                  const std::vector<double>& thresholds,
                                  std::optional<int> y_true) {
  for (std::size_t k = 0; k < probs.size(); ++k) {
    int best = 0;
    for (std::size_t c = 1; c < probs[k].size(); ++c) {
      if (probs[k][c] > probs[k][static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    }
    if (probs[k][static_cast<std::size_t>(best)] > thresholds[k]) {
      if (!y_true) return "U2";
      return best == *y_true ? "K1" : "K2";
    }
  }
  return y_true ? "K3" : "U1";
}

}  // namespace oracle
