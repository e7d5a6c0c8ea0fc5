#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "psyosr/error.hpp"
#include "psyosr/pipeline.hpp"

namespace psyosr::pipeline {

void SyntheticConfig::validate() const {
  if (n_known < 2) throw Error(ErrorKind::kConfig, "n_known must be at least 2");
  if (n_unknown < 1) throw Error(ErrorKind::kConfig, "n_unknown must be at least 1");
  if (samples_per_class < 2) throw Error(ErrorKind::kConfig, "samples_per_class must be at least 2");
  if (test_per_class < 0) throw Error(ErrorKind::kConfig, "test_per_class must be nonnegative");
  if (dim < 1) throw Error(ErrorKind::kConfig, "dim must be positive");
  if (!(center_scale > 0.0) || !(noise >= 0.0)) {
    throw Error(ErrorKind::kConfig, "center_scale must be positive and noise nonnegative");
  }
  if (!(annotated_fraction >= 0.0 && annotated_fraction <= 1.0)) {
    throw Error(ErrorKind::kConfig, "annotated_fraction must be in [0, 1]");
  }
  if (subjects_per_image < 1) throw Error(ErrorKind::kConfig, "subjects_per_image must be positive");
  if (!(r_base > 0.0) || r_base > rt::kDefaultRMaxSeconds || !(r_slope >= 0.0) || !(rt_noise >= 0.0)) {
    throw Error(ErrorKind::kConfig, "RT model needs 0 < r_base <= 28, r_slope >= 0, rt_noise >= 0");
  }
}

double class_margin(std::span<const double> x, const std::vector<std::vector<double>>& centers,
                    int own) {
  const auto dist = [&](const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    return std::sqrt(s);
  };
  const double d_own = dist(centers[static_cast<std::size_t>(own)]);
  double d_other = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (static_cast<int>(c) != own) d_other = std::min(d_other, dist(centers[c]));
  }
  if (d_own + d_other == 0.0) return 0.0;
  return std::clamp((d_other - d_own) / (d_other + d_own), 0.0, 1.0);
}

double synthetic_rt(double margin, double noise_draw, const SyntheticConfig& cfg) {
  const double rt = cfg.r_base + cfg.r_slope * (1.0 - margin) + noise_draw;
  return std::clamp(rt, kMinSyntheticRt, rt::kDefaultRMaxSeconds);
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n_total = cfg.n_known + cfg.n_unknown;

  std::vector<std::vector<double>> centers(static_cast<std::size_t>(n_total),
                                           std::vector<double>(static_cast<std::size_t>(cfg.dim)));
  for (auto& c : centers) {
    for (auto& v : c) v = cfg.center_scale * gauss(rng);
  }
  const std::vector<std::vector<double>> known_centers(centers.begin(), centers.begin() + cfg.n_known);

  // Annotated classes: a seeded random subset of the known classes.
  std::vector<int> order(static_cast<std::size_t>(cfg.n_known));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_annotated =
      static_cast<std::size_t>(std::lround(cfg.annotated_fraction * cfg.n_known));
  std::vector<bool> annotated(static_cast<std::size_t>(cfg.n_known), false);
  for (std::size_t i = 0; i < n_annotated; ++i) annotated[static_cast<std::size_t>(order[i])] = true;

  const auto draw = [&](int cls) {
    std::vector<double> x(static_cast<std::size_t>(cfg.dim));
    for (int d = 0; d < cfg.dim; ++d) x[d] = centers[cls][d] + cfg.noise * gauss(rng);
    return x;
  };

  SyntheticData out;
  auto& entries = out.manifest.entries;
  for (int c = 0; c < cfg.n_known; ++c) {
    for (int i = 0; i < cfg.samples_per_class; ++i) {
      ManifestEntry e;
      e.sample_id = "k" + std::to_string(c) + "_" + std::to_string(i);
      e.features = draw(c);
      e.label = c;
      e.split = Split::kTrain;
      if (annotated[c]) {
        const double margin = class_margin(e.features, known_centers, c);
        double sum = 0.0;
        for (int s = 0; s < cfg.subjects_per_image; ++s) {
          sum += synthetic_rt(margin, cfg.rt_noise * gauss(rng), cfg);
        }
        e.mean_rt_seconds = sum / cfg.subjects_per_image;
        out.rt_agg.push_back({e.sample_id, *e.mean_rt_seconds, cfg.subjects_per_image});
      }
      entries.push_back(std::move(e));
    }
    for (int i = 0; i < cfg.test_per_class; ++i) {
      entries.push_back({"kt" + std::to_string(c) + "_" + std::to_string(i), draw(c), c,
                         Split::kTestKnown, std::nullopt});
    }
  }
  for (int c = cfg.n_known; c < n_total; ++c) {
    for (int i = 0; i < cfg.test_per_class; ++i) {
      entries.push_back({"u" + std::to_string(c) + "_" + std::to_string(i), draw(c), c,
                         Split::kTestUnknown, std::nullopt});
    }
  }
  return out;
}

}  // namespace psyosr::pipeline
