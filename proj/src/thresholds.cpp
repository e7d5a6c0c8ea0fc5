#include "psyosr/thresholds.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "psyosr/error.hpp"
#include "psyosr/stats.hpp"

namespace psyosr::thresholds {

namespace {

std::vector<model::ExitOutputs> run_all(const model::MultiExitNetwork& net,
                                        std::span<const std::vector<double>> samples) {
  std::vector<model::ExitOutputs> outs;
  outs.reserve(samples.size());
  for (const auto& x : samples) outs.push_back(net.forward(x));
  return outs;
}

}  // namespace

ThresholdSet init_training_thresholds(int n_exits) {
  if (n_exits < 2) throw Error(ErrorKind::kParameter, "n_exits must be at least 2");
  return {std::vector<double>(static_cast<std::size_t>(n_exits), 0.0), Kind::kTraining, 0};
}

std::vector<double> median_max_scores(std::span<const model::ExitOutputs> outputs) {
  if (outputs.empty()) {
    throw Error(ErrorKind::kCalibration, "threshold calibration needs a nonempty validation set");
  }
  const int n_exits = outputs.front().n_exits();
  std::vector<double> medians;
  std::vector<double> scores(outputs.size());
  for (int k = 0; k < n_exits; ++k) {
    for (std::size_t i = 0; i < outputs.size(); ++i) scores[i] = outputs[i].max_score(k);
    medians.push_back(stats::median(scores));
  }
  return medians;
}

ThresholdSet update_training_thresholds(const model::MultiExitNetwork& net,
                                        std::span<const std::vector<double>> validation,
                                        int epoch, int period) {
  if (period < 1 || epoch < 0 || epoch % period != 0) {
    throw Error(ErrorKind::kCalibration, "training thresholds update only every " +
                                             std::to_string(period) + " epochs (got epoch " +
                                             std::to_string(epoch) + ")");
  }
  const auto outs = run_all(net, validation);
  return {median_max_scores(outs), Kind::kTraining, epoch};
}

ThresholdSet compute_inference_thresholds(const model::MultiExitNetwork& best,
                                          std::span<const std::vector<double>> validation,
                                          int epoch) {
  const auto outs = run_all(best, validation);
  return {median_max_scores(outs), Kind::kInference, epoch};
}

int training_exit_of(const model::ExitOutputs& out, int y_true, const ThresholdSet& t,
                     NoExitConvention convention) {
  const int n = out.n_exits();
  if (static_cast<int>(t.values.size()) != n) {
    throw Error(ErrorKind::kShape, "threshold count does not match exit count");
  }
  for (int k = 0; k < n; ++k) {
    if (out.max_score(k) > t.values[k] && out.argmax(k) == y_true) return k + 1;
  }
  return convention == NoExitConvention::kFinalExit ? n : n + 1;
}

int training_exit_of(const model::MultiExitNetwork& net, std::span<const double> x, int y_true,
                     const ThresholdSet& t, NoExitConvention convention) {
  return training_exit_of(net.forward(x), y_true, t, convention);
}

std::string to_json(const ThresholdSet& t) {
  nlohmann::json j;
  j["kind"] = t.kind == Kind::kTraining ? "training" : "inference";
  j["epoch"] = t.epoch;
  j["values"] = t.values;
  return j.dump();
}

ThresholdSet from_json(const std::string& text) {
  ThresholdSet t;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "training") {
      t.kind = Kind::kTraining;
    } else if (kind == "inference") {
      t.kind = Kind::kInference;
    } else {
      throw Error(ErrorKind::kParse, "thresholds kind must be training or inference");
    }
    t.epoch = j.at("epoch").get<int>();
    t.values = j.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("thresholds JSON: ") + e.what());
  }
  for (double v : t.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::kParse, "threshold outside [0, 1]");
  }
  return t;
}

void save(const ThresholdSet& t, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << to_json(t) << '\n';
}

ThresholdSet load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace psyosr::thresholds
