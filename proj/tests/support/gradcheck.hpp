#pragma once

// Central finite differences over every network parameter.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "psyosr/multiexit_model.hpp"

namespace oracle {

inline std::vector<double> numeric_gradient(
    const psyosr::model::MultiExitNetwork& net,
    const std::function<double(const psyosr::model::MultiExitNetwork&)>& loss, double h = 1e-4) {
  auto probe = net;
  const auto theta = net.parameters().flatten();
  std::vector<double> g(theta.size());
  auto shifted = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    shifted[i] = theta[i] + h;
    probe.parameters().assign(shifted);
    const double up = loss(probe);
    shifted[i] = theta[i] - h;
    probe.parameters().assign(shifted);
    const double down = loss(probe);
    shifted[i] = theta[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

struct GradCompare {
  double max_rel_error = 0.0;
  std::size_t worst = 0;
};

/// |a - n| / max(|a|, |n|), entries where both vanish (below 1e-10) count as 0.
inline GradCompare compare(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  GradCompare c;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (scale < 1e-10) continue;
    const double rel = std::abs(analytic[i] - numeric[i]) / scale;
    if (rel > c.max_rel_error) {
      c.max_rel_error = rel;
      c.worst = i;
    }
  }
  return c;
}

}  // namespace oracle
