#pragma once

// Human reaction-time ingestion: submission validity, per-image aggregation
// and the RT-quantile binning that assigns each annotated image a target exit.

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace psyosr::rt {

/// RTs at or above this many seconds are treated as inattentive responses.
inline constexpr double kDefaultRMaxSeconds = 28.0;
inline constexpr int kNotPresentOption = 6;
inline constexpr int kControlsPerSurvey = 5;
/// A submission with this many wrong control answers (or more) is rejected.
inline constexpr int kRejectWrongControls = 3;

struct RTMeasurement {
  std::string subject_id;
  std::string survey_id;
  std::string question_id;
  std::string image_id;  // known image the RT is attributed to; empty for "not present" questions
  int chosen_option = 0;   // 1..6
  int correct_option = 0;  // 1..6
  bool is_control = false;
  double rt_seconds = 0.0;

  bool answered_correctly() const { return chosen_option == correct_option; }
  bool operator==(const RTMeasurement&) const = default;
};

struct ImageRT {
  std::string image_id;
  double mean_rt_seconds = 0.0;
  int n_measurements = 0;

  bool operator==(const ImageRT&) const = default;
};

struct RTDataset {
  std::vector<RTMeasurement> measurements;
  double r_max_seconds = kDefaultRMaxSeconds;
};

/// Bins (0, c1], (c1, c2], ..., (c_{E-1}, r_max]; exits are 1-based.
struct ExitBinning {
  std::vector<double> cutoffs;
  int n_exits = 5;

  bool operator==(const ExitBinning&) const = default;
};

struct SubmissionVerdict {
  bool accepted = false;
  int wrong_controls = 0;
  std::string reason;
};

/// Applies the control-question rule to one subject's survey submission.
/// Throws kStructural when the submission is malformed (mixed subject/survey,
/// control count other than 5, or a repeated question_id).
SubmissionVerdict validate_submission(std::span<const RTMeasurement> responses);

/// Keeps measurements that come from accepted submissions, are not control
/// questions, do not have "not present" as the answer, were answered
/// correctly, and have rt_seconds < r_max. Malformed submissions are dropped.
std::vector<RTMeasurement> filter_valid_measurements(const RTDataset& ds);

/// One record per image_id, ordered by first appearance.
std::vector<ImageRT> aggregate_mean_rt(std::span<const RTMeasurement> valid);

/// Cutoffs at the k/n_exits quantiles of the per-image mean RTs.
/// Throws kDegenerateBinning when the data cannot support n_exits bins.
ExitBinning compute_quintile_binning(std::span<const ImageRT> rts, int n_exits = 5);

/// 1-based exit for a mean RT. Throws kOutOfRange outside (0, r_max].
int target_exit(const ExitBinning& binning, double mean_rt,
                double r_max_seconds = kDefaultRMaxSeconds);

struct PairStats {
  double min = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double max = 0.0;
  int count = 0;
};

using ClassPair = std::pair<std::string, std::string>;  // (reference, distractor)

/// Box-plot statistics per (reference class, distractor class). The
/// reference class is looked up from the measurement's image; the
/// distractor class from its question. Unknown ids throw kLookup.
std::map<ClassPair, PairStats> summarize_by_class_pair(
    std::span<const RTMeasurement> valid,
    const std::function<std::optional<std::string>(const std::string&)>& class_of_image,
    const std::function<std::optional<std::string>(const std::string&)>& distractor_of_question);

// rt_raw CSV: subject_id,survey_id,question_id,image_id,chosen_option,
// correct_option,is_control,rt_seconds
void write_rt_raw(std::ostream& out, std::span<const RTMeasurement> rows);
std::vector<RTMeasurement> read_rt_raw(std::istream& in);

// rt_agg CSV: image_id,mean_rt_seconds,n_measurements
void write_rt_agg(std::ostream& out, std::span<const ImageRT> rows);
std::vector<ImageRT> read_rt_agg(std::istream& in);

// binning JSON: {"n_exits": int, "cutoffs": [real, ...]}
std::string binning_to_json(const ExitBinning& binning);
ExitBinning binning_from_json(const std::string& text);

}  // namespace psyosr::rt
