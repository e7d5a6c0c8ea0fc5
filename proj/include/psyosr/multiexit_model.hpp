#pragma once

// Feedforward classifier with one softmax exit head after every hidden block.
// Exit k reads the representation produced by block k, so later exits see
// strictly more computation than earlier ones.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace psyosr::model {

enum class Activation { kRelu, kTanh, kIdentity };

Activation activation_from_string(std::string_view name);
std::string_view to_string(Activation a);

struct ModelConfig {
  int input_dim = 0;
  std::vector<int> block_widths;  // one hidden width per exit
  int n_exits = 5;
  int n_classes = 0;
  Activation activation = Activation::kRelu;
  std::uint64_t rng_seed = 0;

  /// Throws kConfig when the invariants do not hold.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct Affine {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Every trainable tensor of a network; also the shape of its gradients.
struct Parameters {
  std::vector<Affine> blocks;
  std::vector<Affine> heads;

  /// Same shapes, all zeros.
  Parameters zeros_like() const;
  std::size_t size() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool all_finite() const;
  Parameters& operator+=(const Parameters& other);
  Parameters& operator*=(double scale);
};

struct ExitOutputs {
  std::vector<Eigen::VectorXd> logits;
  std::vector<Eigen::VectorXd> probs;  // softmax of logits, one vector per exit

  int n_exits() const { return static_cast<int>(probs.size()); }
  double max_score(int exit) const { return probs[static_cast<std::size_t>(exit)].maxCoeff(); }
  int argmax(int exit) const;
};

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  Eigen::VectorXd input;
  std::vector<Eigen::VectorXd> pre;     // block pre-activations
  std::vector<Eigen::VectorXd> hidden;  // block outputs
  ExitOutputs outputs;
};

class MultiExitNetwork {
 public:
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from config.rng_seed, zero biases.
  explicit MultiExitNetwork(ModelConfig config);
  MultiExitNetwork(ModelConfig config, Parameters params);

  const ModelConfig& config() const { return config_; }
  const Parameters& parameters() const { return params_; }
  Parameters& parameters() { return params_; }

  /// Throws kShape when x has the wrong dimension.
  ExitOutputs forward(std::span<const double> x) const;
  ForwardCache forward_cached(std::span<const double> x) const;

  void zero_exit_heads();

 private:
  ModelConfig config_;
  Parameters params_;
};

/// Softmax with max-subtraction.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Backpropagates per-exit logit gradients (dL/dz_k, one per exit) through
/// the network and returns dL/dθ for every parameter.
Parameters backward(const MultiExitNetwork& net, const ForwardCache& cache,
                    std::span<const Eigen::VectorXd> logit_grads);

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// Classical SGD with momentum; weight decay is added to the gradient before
/// the velocity update: v <- m*v + (g + wd*w), w <- w - lr*v.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdOptions options) : options_(options) {}

  /// Throws kDivergence (leaving the network untouched) on a non-finite gradient.
  void step(MultiExitNetwork& net, const Parameters& grads);

  const SgdOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

 private:
  SgdOptions options_;
  Parameters velocity_;
  bool has_velocity_ = false;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<double> parameters;  // Parameters::flatten() order
  int epoch = 0;
  double train_accuracy = 0.0;
  double valid_accuracy = 0.0;

  MultiExitNetwork network() const;
};

Checkpoint make_checkpoint(const MultiExitNetwork& net, int epoch, double train_acc,
                           double valid_acc);

/// JSON container; doubles are written in shortest round-trip form so a
/// reload reproduces every parameter bit for bit.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace psyosr::model
