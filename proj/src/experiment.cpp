#include <nlohmann/json.hpp>

#include "psyosr/error.hpp"
#include "psyosr/pipeline.hpp"
#include "psyosr/stats.hpp"

namespace psyosr::pipeline {

EvalResult evaluate(const model::MultiExitNetwork& best, const DatasetManifest& m) {
  m.validate();
  const auto valid = features_of(m, Split::kValid);
  const auto known = labeled_of(m, Split::kTestKnown);
  const auto unknown = labeled_of(m, Split::kTestUnknown);
  if (valid.empty()) throw Error(ErrorKind::kManifest, "manifest has no valid split");
  if (known.empty()) throw Error(ErrorKind::kManifest, "manifest has no test_known split");
  if (unknown.empty()) throw Error(ErrorKind::kManifest, "manifest has no test_unknown split");
  EvalResult r;
  r.inference_thresholds = thresholds::compute_inference_thresholds(best, valid);
  r.evaluation = osr::evaluate(best, known, unknown, r.inference_thresholds);
  return r;
}

namespace {

MeanSe summarize(std::span<const osr::MetricsReport> runs,
                 const std::function<std::optional<double>(const osr::MetricsReport&)>& get) {
  std::vector<double> v;
  for (const auto& r : runs) {
    if (auto x = get(r)) v.push_back(*x);
  }
  if (v.empty()) return {};
  return {stats::mean(v), stats::standard_error(v)};
}

nlohmann::ordered_json to_json(const MeanSe& m) {
  return {{"mean", m.mean}, {"se", m.se}};
}

}  // namespace

AggregateReport aggregate(std::span<const osr::MetricsReport> runs) {
  AggregateReport a;
  a.runs.assign(runs.begin(), runs.end());
  using R = osr::MetricsReport;
  a.f1 = summarize(runs, [](const R& r) { return r.f1; });
  a.mcc = summarize(runs, [](const R& r) { return std::optional<double>(r.mcc.value); });
  a.unknown_acc = summarize(runs, [](const R& r) { return r.unknown_acc; });
  a.known_top1 = summarize(runs, [](const R& r) { return r.known_top1; });
  a.known_top3 = summarize(runs, [](const R& r) { return r.known_top3; });
  a.known_top5 = summarize(runs, [](const R& r) { return r.known_top5; });
  a.tp = summarize(runs, [](const R& r) { return std::optional<double>(r.confusion.tp); });
  a.tn = summarize(runs, [](const R& r) { return std::optional<double>(r.confusion.tn); });
  a.fp = summarize(runs, [](const R& r) { return std::optional<double>(r.confusion.fp); });
  a.fn = summarize(runs, [](const R& r) { return std::optional<double>(r.confusion.fn); });
  return a;
}

std::string aggregate_to_json(const AggregateReport& a) {
  nlohmann::ordered_json j;
  j["n_runs"] = a.runs.size();
  j["tp"] = to_json(a.tp);
  j["tn"] = to_json(a.tn);
  j["fp"] = to_json(a.fp);
  j["fn"] = to_json(a.fn);
  j["f1"] = to_json(a.f1);
  j["mcc"] = to_json(a.mcc);
  j["unknown_acc"] = to_json(a.unknown_acc);
  j["known_top1"] = to_json(a.known_top1);
  j["known_top3"] = to_json(a.known_top3);
  j["known_top5"] = to_json(a.known_top5);
  return j.dump(2);
}

void ExperimentConfig::validate() const {
  train.validate();
  if (seeds.empty()) throw Error(ErrorKind::kConfig, "at least one seed is required");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw Error(ErrorKind::kConfig, "split ratio must be in (0, 1)");
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetManifest& m) {
  cfg.validate();
  ExperimentResult result;
  std::vector<osr::MetricsReport> reports;
  for (auto seed : cfg.seeds) {
    const auto split = split_train_valid(m, cfg.split_ratio, seed);
    TrainConfig tc = cfg.train;
    tc.model.rng_seed = seed;
    tc.shuffle_seed = seed;
    tc.keep_checkpoints = true;
    const auto trained = train(tc, split);
    ExperimentRun run;
    run.seed = seed;
    run.best_index = select_best_model(trained.checkpoints);
    const auto& best = trained.checkpoints[run.best_index];
    run.best_epoch = best.epoch;
    run.eval = evaluate(best.network(), split);
    reports.push_back(run.eval.evaluation.report);
    result.runs.push_back(std::move(run));
  }
  result.report = aggregate(reports);
  return result;
}

}  // namespace psyosr::pipeline
