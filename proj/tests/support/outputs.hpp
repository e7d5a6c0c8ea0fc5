#pragma once

#include <vector>

#include "psyosr/multiexit_model.hpp"

namespace fixture {

/// ExitOutputs carrying the given probability vectors (logits = log probs).
inline psyosr::model::ExitOutputs outputs(const std::vector<std::vector<double>>& probs) {
  psyosr::model::ExitOutputs out;
  for (const auto& p : probs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) v(static_cast<Eigen::Index>(i)) = p[i];
    out.probs.push_back(v);
    out.logits.push_back(v.array().max(1e-300).log().matrix());
  }
  return out;
}

/// Two-class probability vector whose max score is `s` on class `winner`.
inline std::vector<double> two_class(double s, int winner) {
  return winner == 0 ? std::vector<double>{s, 1.0 - s} : std::vector<double>{1.0 - s, s};
}

}  // namespace fixture
