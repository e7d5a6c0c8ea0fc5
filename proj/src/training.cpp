#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "psyosr/csv.hpp"
#include "psyosr/error.hpp"
#include "psyosr/pipeline.hpp"

namespace psyosr::pipeline {

namespace {

double final_exit_accuracy(const model::MultiExitNetwork& net,
                           const std::vector<const ManifestEntry*>& samples) {
  if (samples.empty()) return 0.0;
  const int last = net.config().n_exits - 1;
  std::size_t hits = 0;
  for (const auto* e : samples) {
    if (net.forward(e->features).argmax(last) == e->label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::optional<rt::ExitBinning> binning_from_train(const std::vector<const ManifestEntry*>& train,
                                                  int n_exits) {
  std::vector<rt::ImageRT> rts;
  for (const auto* e : train) {
    if (e->mean_rt_seconds) rts.push_back({e->sample_id, *e->mean_rt_seconds, 1});
  }
  if (rts.empty()) return std::nullopt;
  return rt::compute_quintile_binning(rts, n_exits);
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw Error(ErrorKind::kConfig, "epochs must be positive");
  if (batch_size < 1) throw Error(ErrorKind::kConfig, "batch_size must be positive");
  if (threshold_period < 1) throw Error(ErrorKind::kConfig, "threshold_period must be at least 1");
  if (!(sgd.lr >= 0.0) || !(sgd.momentum >= 0.0) || !(sgd.weight_decay >= 0.0)) {
    throw Error(ErrorKind::kConfig, "lr, momentum and weight_decay must be nonnegative");
  }
  if (!(loss.r_max_seconds > 0.0)) throw Error(ErrorKind::kConfig, "r_max must be positive");
  if (!std::isfinite(loss.weights.w_c) || !std::isfinite(loss.weights.w_p) ||
      !std::isfinite(loss.weights.w_e)) {
    throw Error(ErrorKind::kConfig, "loss weights must be finite");
  }
}

loss::SampleAnnotation annotate(const ManifestEntry& e, const std::optional<rt::ExitBinning>& b,
                                double r_max) {
  loss::SampleAnnotation a;
  a.label = e.label;
  if (e.mean_rt_seconds && b) {
    a.mean_rt_seconds = e.mean_rt_seconds;
    a.target_exit = rt::target_exit(*b, *e.mean_rt_seconds, r_max);
  }
  return a;
}

TrainResult train(const TrainConfig& cfg, const DatasetManifest& m, const EpochCallback& on_epoch) {
  cfg.validate();
  m.validate();
  const auto train_set = m.of_split(Split::kTrain);
  const auto valid_set = m.of_split(Split::kValid);
  if (train_set.empty()) throw Error(ErrorKind::kManifest, "manifest has no train samples");
  if (valid_set.empty()) throw Error(ErrorKind::kManifest, "manifest has no valid samples");
  if (m.feature_dim() != cfg.model.input_dim) {
    throw Error(ErrorKind::kConfig, "model input_dim does not match manifest features");
  }
  if (m.n_known_classes() > cfg.model.n_classes) {
    throw Error(ErrorKind::kConfig, "model has fewer classes than the manifest");
  }

  TrainResult result;
  result.binning = binning_from_train(train_set, cfg.model.n_exits);
  std::vector<loss::SampleAnnotation> ann;
  ann.reserve(train_set.size());
  for (const auto* e : train_set) ann.push_back(annotate(*e, result.binning, cfg.loss.r_max_seconds));
  const auto valid_features = features_of(m, Split::kValid);

  model::MultiExitNetwork net(cfg.model);
  model::SgdOptimizer opt(cfg.sgd);
  auto th = thresholds::init_training_thresholds(cfg.model.n_exits);
  result.threshold_history.push_back(th);

  std::mt19937_64 rng(cfg.shuffle_seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lr_decay_every > 0 && epoch > 1 && (epoch - 1) % cfg.lr_decay_every == 0) {
      opt.set_lr(opt.options().lr * cfg.lr_decay);
    }
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      model::Parameters grad = net.parameters().zeros_like();
      for (std::size_t i = start; i < end; ++i) {
        const auto idx = order[i];
        const auto cache = net.forward_cached(train_set[idx]->features);
        const int predicted_exit =
            thresholds::training_exit_of(cache.outputs, ann[idx].label, th, cfg.no_exit);
        const auto b = loss::sample_loss(cache.outputs, ann[idx], predicted_exit, cfg.loss);
        if (!std::isfinite(b.total)) {
          throw Error(ErrorKind::kDivergence, "non-finite loss at epoch " + std::to_string(epoch) +
                                                  " on sample " + train_set[idx]->sample_id);
        }
        log.ce += b.ce;
        log.perf += b.perf;
        log.exit += b.exit;
        log.total += b.total;
        const auto lg = loss::logit_gradients(cache.outputs, ann[idx], cfg.loss);
        grad += model::backward(net, cache, lg);
      }
      grad *= 1.0 / static_cast<double>(end - start);
      opt.step(net, grad);
    }
    const double n = static_cast<double>(order.size());
    log.ce /= n;
    log.perf /= n;
    log.exit /= n;
    log.total /= n;
    log.train_accuracy = final_exit_accuracy(net, train_set);
    log.valid_accuracy = final_exit_accuracy(net, valid_set);

    if (epoch % cfg.threshold_period == 0) {
      th = thresholds::update_training_thresholds(net, valid_features, epoch, cfg.threshold_period);
      result.threshold_history.push_back(th);
    }
    auto ckpt = model::make_checkpoint(net, epoch, log.train_accuracy, log.valid_accuracy);
    if (on_epoch) on_epoch(ckpt, log, th);
    result.log.push_back(log);
    if (cfg.keep_checkpoints) result.checkpoints.push_back(ckpt);
    result.last = std::move(ckpt);
  }
  return result;
}

std::size_t select_best_model(std::span<const model::Checkpoint> checkpoints) {
  if (checkpoints.empty()) throw Error(ErrorKind::kParameter, "no checkpoints to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    const auto& c = checkpoints[i];
    const auto& b = checkpoints[best];
    if (c.valid_accuracy > b.valid_accuracy ||
        (c.valid_accuracy == b.valid_accuracy && c.epoch < b.epoch)) {
      best = i;
    }
  }
  return best;
}

void write_loss_log(std::ostream& out, std::span<const EpochLog> log) {
  csv::write_row(out, {"epoch", "mean_ce", "mean_lp", "mean_le", "mean_lomega"});
  for (const auto& l : log) {
    csv::write_row(out, {std::to_string(l.epoch), csv::format_double(l.ce),
                         csv::format_double(l.perf), csv::format_double(l.exit),
                         csv::format_double(l.total)});
  }
}

}  // namespace psyosr::pipeline
