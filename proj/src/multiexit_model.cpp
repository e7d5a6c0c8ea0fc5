#include "psyosr/multiexit_model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "psyosr/error.hpp"

namespace psyosr::model {

namespace {

Eigen::VectorXd activate(Activation a, const Eigen::VectorXd& v) {
  switch (a) {
    case Activation::kRelu: return v.cwiseMax(0.0);
    case Activation::kTanh: return v.array().tanh().matrix();
    case Activation::kIdentity: return v;
  }
  return v;
}

// Derivative evaluated from the pre-activation.
Eigen::VectorXd activate_grad(Activation a, const Eigen::VectorXd& pre) {
  switch (a) {
    case Activation::kRelu:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: {
      const Eigen::ArrayXd t = pre.array().tanh();
      return (1.0 - t * t).matrix();
    }
    case Activation::kIdentity: return Eigen::VectorXd::Ones(pre.size());
  }
  return Eigen::VectorXd::Ones(pre.size());
}

Affine random_affine(int out, int in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Affine a{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) a.weight(r, c) = dist(rng);
  }
  return a;
}

template <typename Fn>
void for_each_tensor(Parameters& p, Fn&& fn) {
  for (auto& a : p.blocks) {
    fn(a.weight);
    fn(a.bias);
  }
  for (auto& a : p.heads) {
    fn(a.weight);
    fn(a.bias);
  }
}

template <typename Fn>
void for_each_tensor(const Parameters& p, Fn&& fn) {
  for (const auto& a : p.blocks) {
    fn(a.weight);
    fn(a.bias);
  }
  for (const auto& a : p.heads) {
    fn(a.weight);
    fn(a.bias);
  }
}

// Zips two same-shaped parameter sets, tensor by tensor.
template <typename Fn>
void zip_tensors(Parameters& dst, const Parameters& src, Fn&& fn) {
  for (std::size_t i = 0; i < dst.blocks.size(); ++i) {
    fn(dst.blocks[i].weight, src.blocks[i].weight);
    fn(dst.blocks[i].bias, src.blocks[i].bias);
  }
  for (std::size_t i = 0; i < dst.heads.size(); ++i) {
    fn(dst.heads[i].weight, src.heads[i].weight);
    fn(dst.heads[i].bias, src.heads[i].bias);
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

}  // namespace

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw Error(ErrorKind::kConfig, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "relu";
}

void ModelConfig::validate() const {
  if (input_dim < 1) throw Error(ErrorKind::kConfig, "input_dim must be positive");
  if (n_exits < 2) throw Error(ErrorKind::kConfig, "n_exits must be at least 2");
  if (n_classes < 2) throw Error(ErrorKind::kConfig, "n_classes must be at least 2");
  if (static_cast<int>(block_widths.size()) != n_exits) {
    throw Error(ErrorKind::kConfig, "block_widths needs one width per exit (" +
                                        std::to_string(n_exits) + "), got " +
                                        std::to_string(block_widths.size()));
  }
  for (int w : block_widths) {
    if (w < 1) throw Error(ErrorKind::kConfig, "block widths must be positive");
  }
}

Parameters Parameters::zeros_like() const {
  Parameters z = *this;
  for_each_tensor(z, [](auto& t) { t.setZero(); });
  return z;
}

std::size_t Parameters::size() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

std::vector<double> Parameters::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for_each_tensor(*this, [&](const auto& t) {
    // Row-major traversal independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) out.push_back(t(r, c));
    }
  });
  return out;
}

void Parameters::assign(std::span<const double> flat) {
  if (flat.size() != size()) {
    throw Error(ErrorKind::kShape, "parameter vector has " + std::to_string(flat.size()) +
                                       " entries, expected " + std::to_string(size()));
  }
  std::size_t i = 0;
  for_each_tensor(*this, [&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = flat[i++];
    }
  });
}

bool Parameters::all_finite() const {
  bool ok = true;
  for_each_tensor(*this, [&](const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

Parameters& Parameters::operator+=(const Parameters& other) {
  zip_tensors(*this, other, [](auto& a, const auto& b) { a += b; });
  return *this;
}

Parameters& Parameters::operator*=(double scale) {
  for_each_tensor(*this, [&](auto& t) { t *= scale; });
  return *this;
}

int ExitOutputs::argmax(int exit) const {
  Eigen::Index idx = 0;
  probs[static_cast<std::size_t>(exit)].maxCoeff(&idx);
  return static_cast<int>(idx);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

MultiExitNetwork::MultiExitNetwork(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.rng_seed);
  int in = config_.input_dim;
  for (int w : config_.block_widths) {
    params_.blocks.push_back(random_affine(w, in, rng));
    in = w;
  }
  for (int w : config_.block_widths) {
    params_.heads.push_back(random_affine(config_.n_classes, w, rng));
  }
}

MultiExitNetwork::MultiExitNetwork(ModelConfig config, Parameters params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
}

void MultiExitNetwork::zero_exit_heads() {
  for (auto& h : params_.heads) {
    h.weight.setZero();
    h.bias.setZero();
  }
}

ForwardCache MultiExitNetwork::forward_cached(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != config_.input_dim) {
    throw Error(ErrorKind::kShape, "input has dimension " + std::to_string(x.size()) +
                                       ", expected " + std::to_string(config_.input_dim));
  }
  ForwardCache c;
  c.input = as_vector(x);
  const Eigen::VectorXd* h = &c.input;
  for (std::size_t k = 0; k < params_.blocks.size(); ++k) {
    const auto& blk = params_.blocks[k];
    c.pre.push_back(blk.weight * *h + blk.bias);
    c.hidden.push_back(activate(config_.activation, c.pre.back()));
    h = &c.hidden.back();
  }
  for (std::size_t k = 0; k < params_.heads.size(); ++k) {
    const auto& head = params_.heads[k];
    c.outputs.logits.push_back(head.weight * c.hidden[k] + head.bias);
    c.outputs.probs.push_back(softmax(c.outputs.logits.back()));
  }
  return c;
}

ExitOutputs MultiExitNetwork::forward(std::span<const double> x) const {
  return forward_cached(x).outputs;
}

Parameters backward(const MultiExitNetwork& net, const ForwardCache& cache,
                    std::span<const Eigen::VectorXd> logit_grads) {
  const auto& p = net.parameters();
  const std::size_t n = p.blocks.size();
  if (logit_grads.size() != n) {
    throw Error(ErrorKind::kShape, "need one logit gradient per exit");
  }
  Parameters g = p.zeros_like();
  Eigen::VectorXd d_pre_next;  // dL/da_{k+1}
  for (std::size_t k = n; k-- > 0;) {
    const auto& hk = cache.hidden[k];
    g.heads[k].weight.noalias() = logit_grads[k] * hk.transpose();
    g.heads[k].bias = logit_grads[k];
    Eigen::VectorXd d_hidden = p.heads[k].weight.transpose() * logit_grads[k];
    if (k + 1 < n) d_hidden.noalias() += p.blocks[k + 1].weight.transpose() * d_pre_next;
    Eigen::VectorXd d_pre =
        d_hidden.cwiseProduct(activate_grad(net.config().activation, cache.pre[k]));
    const Eigen::VectorXd& below = k == 0 ? cache.input : cache.hidden[k - 1];
    g.blocks[k].weight.noalias() = d_pre * below.transpose();
    g.blocks[k].bias = d_pre;
    d_pre_next = std::move(d_pre);
  }
  return g;
}

void SgdOptimizer::step(MultiExitNetwork& net, const Parameters& grads) {
  if (!grads.all_finite()) {
    throw Error(ErrorKind::kDivergence, "non-finite gradient");
  }
  auto& params = net.parameters();
  if (!has_velocity_) {
    velocity_ = params.zeros_like();
    has_velocity_ = true;
  }
  Parameters effective = grads;
  if (options_.weight_decay != 0.0) {
    zip_tensors(effective, params, [&](auto& g, const auto& w) { g += options_.weight_decay * w; });
  }
  zip_tensors(velocity_, effective, [&](auto& v, const auto& g) { v = options_.momentum * v + g; });
  zip_tensors(params, velocity_, [&](auto& w, const auto& v) { w -= options_.lr * v; });
}

MultiExitNetwork Checkpoint::network() const {
  MultiExitNetwork net(config);
  net.parameters().assign(parameters);
  return net;
}

Checkpoint make_checkpoint(const MultiExitNetwork& net, int epoch, double train_acc,
                           double valid_acc) {
  return {net.config(), net.parameters().flatten(), epoch, train_acc, valid_acc};
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "psyosr-checkpoint-v1";
  j["config"] = {
      {"input_dim", ckpt.config.input_dim},
      {"block_widths", ckpt.config.block_widths},
      {"n_exits", ckpt.config.n_exits},
      {"n_classes", ckpt.config.n_classes},
      {"activation", std::string(to_string(ckpt.config.activation))},
      {"rng_seed", ckpt.config.rng_seed},
  };
  j["epoch"] = ckpt.epoch;
  j["train_accuracy"] = ckpt.train_accuracy;
  j["valid_accuracy"] = ckpt.valid_accuracy;
  j["parameters"] = ckpt.parameters;
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint ckpt;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& c = j.at("config");
    ckpt.config.input_dim = c.at("input_dim").get<int>();
    ckpt.config.block_widths = c.at("block_widths").get<std::vector<int>>();
    ckpt.config.n_exits = c.at("n_exits").get<int>();
    ckpt.config.n_classes = c.at("n_classes").get<int>();
    ckpt.config.activation = activation_from_string(c.at("activation").get<std::string>());
    ckpt.config.rng_seed = c.at("rng_seed").get<std::uint64_t>();
    ckpt.epoch = j.at("epoch").get<int>();
    ckpt.train_accuracy = j.at("train_accuracy").get<double>();
    ckpt.valid_accuracy = j.at("valid_accuracy").get<double>();
    ckpt.parameters = j.at("parameters").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("checkpoint JSON: ") + e.what());
  }
  ckpt.config.validate();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << checkpoint_to_json(ckpt);
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace psyosr::model
