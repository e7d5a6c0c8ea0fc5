#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psyosr/multiexit_model.hpp"
#include "psyosr/osr_eval.hpp"
#include "psyosr/psyphy_loss.hpp"
#include "psyosr/rt_data.hpp"
#include "psyosr/thresholds.hpp"

namespace psyosr::pipeline {

enum class Split { kTrain, kValid, kTestKnown, kTestUnknown };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct ManifestEntry {
  std::string sample_id;
  std::vector<double> features;
  int label = 0;
  Split split = Split::kTrain;
  std::optional<double> mean_rt_seconds;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  /// Known classes are labels seen in train, valid or test_known; they must
  /// be 0..K-1. Throws kManifest if an unknown-test class also appears in
  /// train/valid/test_known, if RTs sit on test samples, or if feature
  /// dimensions disagree.
  void validate() const;
  int n_known_classes() const;
  int feature_dim() const;
  std::vector<const ManifestEntry*> of_split(Split s) const;
  bool operator==(const DatasetManifest&) const = default;
};

/// CSV: sample_id,split,label,mean_rt_seconds,f0,f1,...  (empty RT = none).
void write_manifest(std::ostream& out, const DatasetManifest& m);
DatasetManifest read_manifest(std::istream& in);
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

/// Re-splits the train+valid pool per class: round(ratio * n) to train, the
/// rest to valid. RT-annotated samples are split by the same ratio on their
/// own and merged back. Test entries are untouched. Throws kSplit when a
/// class has fewer than two samples.
DatasetManifest split_train_valid(const DatasetManifest& m, double ratio, std::uint64_t seed);

struct SyntheticConfig {
  int n_known = 20;
  int n_unknown = 5;
  int samples_per_class = 50;  // known-class train/valid pool size
  int test_per_class = 50;
  int dim = 16;
  double center_scale = 2.0;  // std of class centers; lower = more overlap
  double noise = 1.0;         // within-class std
  double annotated_fraction = 0.5;  // share of known classes carrying RTs
  int subjects_per_image = 5;
  double r_base = 1.5;
  double r_slope = 10.0;
  double rt_noise = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  DatasetManifest manifest;
  std::vector<rt::ImageRT> rt_agg;
};

/// Margin of x for its own class in [0, 1]:
/// clamp((d_nearest_other - d_own) / (d_nearest_other + d_own), 0, 1).
double class_margin(std::span<const double> x, const std::vector<std::vector<double>>& centers,
                    int own);

/// One simulated response: r_base + r_slope * (1 - margin) + noise, clipped to
/// [kMinSyntheticRt, 28].
double synthetic_rt(double margin, double noise_draw, const SyntheticConfig& cfg);
inline constexpr double kMinSyntheticRt = 0.1;

/// Gaussian class clusters plus per-image mean RTs for annotated known
/// classes. Known pool samples are emitted with split = train.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

struct TrainConfig {
  model::ModelConfig model;
  loss::LossConfig loss;
  int epochs = 200;
  int batch_size = 16;
  model::SgdOptions sgd{0.1, 0.9, 1e-4};
  double lr_decay = 1.0;     // step decay factor; 1 = constant rate
  int lr_decay_every = 0;    // epochs between decays; 0 = never
  int threshold_period = thresholds::kDefaultUpdatePeriod;
  thresholds::NoExitConvention no_exit = thresholds::NoExitConvention::kFinalExit;
  std::uint64_t shuffle_seed = 0;
  bool keep_checkpoints = true;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double ce = 0.0;
  double perf = 0.0;
  double exit = 0.0;
  double total = 0.0;
  double train_accuracy = 0.0;
  double valid_accuracy = 0.0;
};

struct TrainResult {
  std::vector<model::Checkpoint> checkpoints;
  std::vector<EpochLog> log;
  std::vector<thresholds::ThresholdSet> threshold_history;  // starts with the zero init
  std::optional<rt::ExitBinning> binning;
  model::Checkpoint last;
};

using EpochCallback = std::function<void(const model::Checkpoint&, const EpochLog&,
                                         const thresholds::ThresholdSet&)>;

/// Builds the per-sample annotation (label, RT, target exit) for training.
loss::SampleAnnotation annotate(const ManifestEntry& e, const std::optional<rt::ExitBinning>& b,
                                double r_max);

/// Minibatch SGD over the train split. Thresholds start at zero and are
/// refreshed from the valid split after every `threshold_period` epochs; the
/// exit term uses training_exit_of against the current thresholds. The RT
/// binning comes from the annotated train samples. Accuracies are top-1 at
/// the final exit. Throws kDivergence on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const DatasetManifest& m,
                  const EpochCallback& on_epoch = {});

/// Highest valid accuracy; ties go to the earliest epoch.
std::size_t select_best_model(std::span<const model::Checkpoint> checkpoints);

/// "epoch,mean_ce,mean_lp,mean_le,mean_lomega" lines.
void write_loss_log(std::ostream& out, std::span<const EpochLog> log);

std::vector<std::vector<double>> features_of(const DatasetManifest& m, Split s);
std::vector<osr::LabeledSample> labeled_of(const DatasetManifest& m, Split s);

struct EvalResult {
  thresholds::ThresholdSet inference_thresholds;
  osr::Evaluation evaluation;
};

/// Inference thresholds from the valid split, then test_known/test_unknown.
/// Throws kManifest if a needed split is empty.
EvalResult evaluate(const model::MultiExitNetwork& best, const DatasetManifest& m);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

struct AggregateReport {
  std::vector<osr::MetricsReport> runs;
  MeanSe f1, mcc, unknown_acc, known_top1, known_top3, known_top5;
  MeanSe tp, tn, fp, fn;
};

/// Mean and sample-stddev/sqrt(n) standard error over runs; absent metrics
/// are skipped.
AggregateReport aggregate(std::span<const osr::MetricsReport> runs);
std::string aggregate_to_json(const AggregateReport& a);

/// Documented seeds used for the repeated-run protocol.
inline constexpr std::uint64_t kDefaultSeeds[] = {11, 23, 37, 53, 71};

struct ExperimentConfig {
  TrainConfig train;
  double split_ratio = 0.7;
  std::vector<std::uint64_t> seeds{std::begin(kDefaultSeeds), std::end(kDefaultSeeds)};

  void validate() const;
};

struct ExperimentRun {
  std::uint64_t seed = 0;
  std::size_t best_index = 0;
  int best_epoch = 0;
  EvalResult eval;
};

struct ExperimentResult {
  std::vector<ExperimentRun> runs;
  AggregateReport report;
};

/// For each seed: split, train (model init and shuffling seeded), select the
/// best checkpoint, calibrate and evaluate.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetManifest& m);

}  // namespace psyosr::pipeline
