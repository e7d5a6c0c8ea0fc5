#pragma once

// Test-time early exiting and open-set accounting. Known samples end in one
// of K1 (exited, correct), K2 (exited, wrong label) or K3 (never exited: a
// false negative); unknown samples in U1 (never exited) or U2 (exited: a
// false positive). "Known" is the positive detection class.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "psyosr/multiexit_model.hpp"
#include "psyosr/thresholds.hpp"

namespace psyosr::osr {

enum class CaseTag { kK1, kK2, kK3, kU1, kU2 };
std::string_view to_string(CaseTag tag);

struct OSRVerdict {
  std::optional<int> exit_index;  // 1-based; empty when no exit fired
  std::optional<int> predicted;   // empty means UNKNOWN
  double max_score_at_exit = 0.0; // final exit's score when nothing fired
  std::optional<CaseTag> case_tag;

  bool is_unknown() const { return !predicted.has_value(); }
  bool operator==(const OSRVerdict&) const = default;
};

struct DetectionConfusion {
  long long tp = 0;
  long long tn = 0;
  long long fp = 0;
  long long fn = 0;

  DetectionConfusion& operator+=(const DetectionConfusion& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const DetectionConfusion&) const = default;
};

/// Walks exits in order and stops at the first whose max score is strictly
/// above its inference threshold. Never looks at ground truth.
/// Throws kParameter when `t` is not an inference threshold set.
OSRVerdict infer(const model::ExitOutputs& out, const thresholds::ThresholdSet& t);
OSRVerdict infer(const model::MultiExitNetwork& net, std::span<const double> x,
                 const thresholds::ThresholdSet& t);

struct Scored {
  CaseTag tag;
  DetectionConfusion increment;
};

Scored score_known(const OSRVerdict& verdict, int y_true);
Scored score_unknown(const OSRVerdict& verdict);

/// 2tp / (2tp + fp + fn); empty when the denominator is zero.
std::optional<double> f1(const DetectionConfusion& c);

struct MccResult {
  double value = 0.0;
  bool degenerate = false;  // a marginal was zero and value was set to 0
};

/// Matthews correlation with exact integer cross products.
MccResult mcc(const DetectionConfusion& c);

struct KnownRecord {
  int y_true = 0;
  OSRVerdict verdict;
  Eigen::VectorXd probs;  // at the exit taken, or the final exit for K3
};

/// Percentage of known samples that exited with y_true among the k largest
/// scores. Throws kParameter when k is outside 1..n_classes.
double topk_known_accuracy(std::span<const KnownRecord> records, int k);

/// tn / (tn + fp) * 100. Throws kUndefined without unknown samples.
double unknown_accuracy(const DetectionConfusion& c);

struct LabeledSample {
  std::string sample_id;
  std::vector<double> features;
  std::optional<int> label;  // empty for unknown-class samples
};

struct MetricsReport {
  DetectionConfusion confusion;
  std::optional<double> f1;
  MccResult mcc;
  std::optional<double> unknown_acc;
  std::optional<double> known_top1;
  std::optional<double> known_top3;
  std::optional<double> known_top5;
};

struct VerdictRow {
  std::string sample_id;
  std::optional<int> true_label;
  OSRVerdict verdict;
};

struct Evaluation {
  std::vector<VerdictRow> rows;
  MetricsReport report;
};

/// Runs inference over known and unknown test samples and tallies every metric.
Evaluation evaluate(const model::MultiExitNetwork& net, std::span<const LabeledSample> test_known,
                    std::span<const LabeledSample> test_unknown,
                    const thresholds::ThresholdSet& inference_thresholds);

/// Metrics from confusion counts and known-sample records.
MetricsReport make_report(const DetectionConfusion& c, std::span<const KnownRecord> known,
                          int n_classes);

std::string report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const std::string& text);

/// sample_id,true_label_or_UNKNOWN,exit_index_or_none,predicted,case_tag,max_score_at_exit
void write_verdicts_csv(std::ostream& out, std::span<const VerdictRow> rows);

}  // namespace psyosr::osr
