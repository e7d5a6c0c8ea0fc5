#pragma once

#include <span>
#include <string>
#include <vector>

#include "psyosr/multiexit_model.hpp"

namespace psyosr::thresholds {

enum class Kind { kTraining, kInference };

struct ThresholdSet {
  std::vector<double> values;  // one per exit, in [0, 1]
  Kind kind = Kind::kTraining;
  int epoch = 0;

  bool operator==(const ThresholdSet&) const = default;
};

/// What training_exit_of reports when no exit qualifies.
enum class NoExitConvention {
  kFinalExit,       // E: the sample physically leaves at the last head
  kPastFinalExit,   // E + 1: extra penalty in the exit term
};

inline constexpr int kDefaultUpdatePeriod = 5;

ThresholdSet init_training_thresholds(int n_exits);

/// Per exit, the median over samples of that exit's maximum softmax score.
/// Throws kCalibration when `outputs` is empty.
std::vector<double> median_max_scores(std::span<const model::ExitOutputs> outputs);

/// Training thresholds from the validation set. `epoch` must be a multiple of
/// `period`; otherwise kCalibration.
ThresholdSet update_training_thresholds(const model::MultiExitNetwork& net,
                                        std::span<const std::vector<double>> validation,
                                        int epoch, int period = kDefaultUpdatePeriod);

/// Same median rule, applied once to the selected best model.
ThresholdSet compute_inference_thresholds(const model::MultiExitNetwork& best,
                                          std::span<const std::vector<double>> validation,
                                          int epoch = 0);

/// Smallest 1-based exit whose max score is strictly above its threshold and
/// whose argmax equals y_true.
int training_exit_of(const model::ExitOutputs& out, int y_true, const ThresholdSet& t,
                     NoExitConvention convention = NoExitConvention::kFinalExit);
int training_exit_of(const model::MultiExitNetwork& net, std::span<const double> x, int y_true,
                     const ThresholdSet& t,
                     NoExitConvention convention = NoExitConvention::kFinalExit);

// {"kind": "training"|"inference", "epoch": n, "values": [...]}
std::string to_json(const ThresholdSet& t);
ThresholdSet from_json(const std::string& text);
void save(const ThresholdSet& t, const std::string& path);
ThresholdSet load(const std::string& path);

}  // namespace psyosr::thresholds
