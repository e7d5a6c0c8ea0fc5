#include "psyosr/psyphy_loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "psyosr/error.hpp"

namespace psyosr::loss {

double cross_entropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorKind::kShape, "cross_entropy: p and q differ in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != 0.0) sum -= p[i] * std::log(std::max(q[i], kProbEpsilon));
  }
  return sum;
}

double cross_entropy(int label, const Eigen::VectorXd& q) {
  return -std::log(std::max(q(label), kProbEpsilon));
}

double performance_loss(const SampleAnnotation& ann, double r_max) {
  if (!(r_max > 0.0)) throw Error(ErrorKind::kParameter, "r_max must be positive");
  if (!ann.mean_rt_seconds) return 0.0;
  const double rx = *ann.mean_rt_seconds;
  if (rx > r_max || !(rx > 0.0)) {
    throw Error(ErrorKind::kOutOfRange,
                "mean RT " + std::to_string(rx) + " s outside (0, r_max]");
  }
  return (r_max - rx) / r_max;
}

double exit_loss(const SampleAnnotation& ann, int predicted_exit) {
  if (!ann.target_exit) return 0.0;
  return std::abs(*ann.target_exit - predicted_exit);
}

double combined_loss(double ce, double perf, double exit, const LossWeights& w) {
  return w.w_c * ce + w.w_p * perf + w.w_e * exit;
}

double soft_exit_loss(const SampleAnnotation& ann, std::span<const double> exit_probs) {
  if (!ann.target_exit) return 0.0;
  double expected = 0.0;
  for (std::size_t k = 0; k < exit_probs.size(); ++k) {
    expected += static_cast<double>(k + 1) * exit_probs[k];
  }
  return std::abs(*ann.target_exit - expected);
}

Eigen::VectorXd exit_distribution(const model::ExitOutputs& out, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::kParameter, "temperature must be positive");
  Eigen::VectorXd s(out.n_exits());
  for (int k = 0; k < out.n_exits(); ++k) s(k) = out.max_score(k) / temperature;
  return model::softmax(s);
}

CeMode ce_mode_from_string(std::string_view s) {
  if (s == "mean") return CeMode::kMeanOverExits;
  if (s == "final") return CeMode::kFinalExitOnly;
  throw Error(ErrorKind::kConfig, "ce_mode must be 'mean' or 'final'");
}

Coupling coupling_from_string(std::string_view s) {
  if (s == "additive") return Coupling::kAdditive;
  if (s == "multiplicative") return Coupling::kMultiplicative;
  throw Error(ErrorKind::kConfig, "coupling must be 'additive' or 'multiplicative'");
}

std::string_view to_string(CeMode m) {
  return m == CeMode::kMeanOverExits ? "mean" : "final";
}

std::string_view to_string(Coupling c) {
  return c == Coupling::kAdditive ? "additive" : "multiplicative";
}

namespace {

double ce_term(const model::ExitOutputs& out, int label, CeMode mode) {
  const int n = out.n_exits();
  if (mode == CeMode::kFinalExitOnly) return cross_entropy(label, out.probs[n - 1]);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += cross_entropy(label, out.probs[k]);
  return sum / n;
}

}  // namespace

LossBreakdown sample_loss(const model::ExitOutputs& out, const SampleAnnotation& ann,
                          int predicted_exit, const LossConfig& cfg) {
  LossBreakdown b;
  b.ce = ce_term(out, ann.label, cfg.ce_mode);
  b.perf = performance_loss(ann, cfg.r_max_seconds);
  if (cfg.soft_exit) {
    const Eigen::VectorXd p = exit_distribution(out, cfg.soft_exit_temperature);
    b.exit = soft_exit_loss(ann, {p.data(), static_cast<std::size_t>(p.size())});
  } else {
    b.exit = exit_loss(ann, predicted_exit);
  }
  const auto& w = cfg.weights;
  if (cfg.coupling == Coupling::kMultiplicative) {
    b.total = w.w_c * b.ce * (1.0 + w.w_p * b.perf) + w.w_e * b.exit;
  } else {
    b.total = combined_loss(b.ce, b.perf, b.exit, w);
  }
  return b;
}

std::vector<Eigen::VectorXd> logit_gradients(const model::ExitOutputs& out,
                                             const SampleAnnotation& ann,
                                             const LossConfig& cfg) {
  const int n = out.n_exits();
  std::vector<Eigen::VectorXd> grads;
  grads.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) grads.push_back(Eigen::VectorXd::Zero(out.probs[k].size()));

  double ce_scale = cfg.weights.w_c;
  if (cfg.coupling == Coupling::kMultiplicative) {
    ce_scale *= 1.0 + cfg.weights.w_p * performance_loss(ann, cfg.r_max_seconds);
  }
  // d CE / dz = q - onehot(label). The epsilon clamp is ignored here; it only
  // matters when q(label) underflows.
  const auto add_ce = [&](int k, double scale) {
    grads[k] += scale * out.probs[k];
    grads[k](ann.label) -= scale;
  };
  if (cfg.ce_mode == CeMode::kFinalExitOnly) {
    add_ce(n - 1, ce_scale);
  } else {
    for (int k = 0; k < n; ++k) add_ce(k, ce_scale / n);
  }

  if (cfg.soft_exit && ann.target_exit && cfg.weights.w_e != 0.0) {
    const double t = cfg.soft_exit_temperature;
    const Eigen::VectorXd p = exit_distribution(out, t);
    double expected = 0.0;
    for (int k = 0; k < n; ++k) expected += (k + 1) * p(k);
    const double diff = expected - *ann.target_exit;
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    for (int k = 0; k < n; ++k) {
      // dE/ds_k for s_k = max score at exit k.
      const double d_score = cfg.weights.w_e * sign * p(k) * ((k + 1) - expected) / t;
      const int j = out.argmax(k);
      const Eigen::VectorXd& q = out.probs[k];
      // d max_softmax / dz_c = q_j (delta_cj - q_c)
      Eigen::VectorXd ds_dz = -q(j) * q;
      ds_dz(j) += q(j);
      grads[k] += d_score * ds_dz;
    }
  }
  return grads;
}

}  // namespace psyosr::loss
