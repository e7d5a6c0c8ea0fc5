#pragma once

// Reaction-time conditioned training loss: cross-entropy plus a performance
// term (normalized complement of the image's mean human RT) plus an exit term
// (distance between the RT-derived target exit and the exit the model took).

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "psyosr/multiexit_model.hpp"

namespace psyosr::loss {

inline constexpr double kProbEpsilon = 1e-12;

struct LossWeights {
  double w_c = 1.0;
  double w_p = 1.0;
  double w_e = 1.0;
};

struct SampleAnnotation {
  int label = 0;
  std::optional<double> mean_rt_seconds;
  std::optional<int> target_exit;  // present iff mean_rt_seconds is
};

/// -sum p(y) ln q(y), with q clamped below at kProbEpsilon.
double cross_entropy(std::span<const double> p, std::span<const double> q);
double cross_entropy(int label, const Eigen::VectorXd& q);

/// (r_max - R_x) / r_max, or 0 without an RT. Throws kOutOfRange if R_x > r_max
/// or R_x <= 0.
double performance_loss(const SampleAnnotation& ann, double r_max);

/// |target_exit - predicted_exit|, or 0 without an RT. Exits are 1-based.
double exit_loss(const SampleAnnotation& ann, int predicted_exit);

double combined_loss(double ce, double perf, double exit, const LossWeights& w);

/// |target - sum_k k * P(exit = k)| for a distribution over 1-based exits.
double soft_exit_loss(const SampleAnnotation& ann, std::span<const double> exit_probs);

/// P(exit = k) = softmax_k(max_score_k / temperature).
Eigen::VectorXd exit_distribution(const model::ExitOutputs& out, double temperature);

enum class CeMode { kMeanOverExits, kFinalExitOnly };
enum class Coupling { kAdditive, kMultiplicative };

CeMode ce_mode_from_string(std::string_view s);
Coupling coupling_from_string(std::string_view s);
std::string_view to_string(CeMode m);
std::string_view to_string(Coupling c);

struct LossConfig {
  LossWeights weights;
  CeMode ce_mode = CeMode::kMeanOverExits;
  /// Extension: replace the hard exit term with the differentiable surrogate.
  bool soft_exit = false;
  double soft_exit_temperature = 0.1;
  /// Extension: scale CE by (1 + w_p * L_P) instead of adding w_p * L_P.
  Coupling coupling = Coupling::kAdditive;
  double r_max_seconds = 28.0;
};

struct LossBreakdown {
  double ce = 0.0;
  double perf = 0.0;
  double exit = 0.0;  // the exit term actually used (hard or soft)
  double total = 0.0;
};

/// Per-sample loss. `predicted_exit` feeds the hard exit term.
LossBreakdown sample_loss(const model::ExitOutputs& out, const SampleAnnotation& ann,
                          int predicted_exit, const LossConfig& cfg);

/// dL/dz_k for every exit's logits. The hard performance and exit terms are
/// constant in the parameters and contribute nothing.
std::vector<Eigen::VectorXd> logit_gradients(const model::ExitOutputs& out,
                                             const SampleAnnotation& ann,
                                             const LossConfig& cfg);

}  // namespace psyosr::loss
