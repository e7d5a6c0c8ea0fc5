#include <fstream>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "psyosr/error.hpp"
#include "psyosr/multiexit_model.hpp"
#include "psyosr/osr_eval.hpp"
#include "psyosr/pipeline.hpp"
#include "psyosr/psyphy_loss.hpp"
#include "psyosr/rt_data.hpp"
#include "psyosr/thresholds.hpp"

namespace py = pybind11;
using namespace psyosr;

namespace {

osr::DetectionConfusion confusion(long long tp, long long tn, long long fp, long long fn) {
  return {tp, tn, fp, fn};
}

model::ExitOutputs outputs_from(const std::vector<Eigen::VectorXd>& probs) {
  model::ExitOutputs out;
  for (const auto& p : probs) {
    out.probs.push_back(p);
    out.logits.push_back(p.array().max(1e-300).log().matrix());
  }
  return out;
}

py::dict verdict_dict(const osr::OSRVerdict& v) {
  py::dict d;
  d["exit_index"] = v.exit_index ? py::cast(*v.exit_index) : py::none();
  d["predicted"] = v.predicted ? py::cast(*v.predicted) : py::none();
  d["max_score_at_exit"] = v.max_score_at_exit;
  return d;
}

std::vector<rt::RTMeasurement> read_raw_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return rt::read_rt_raw(in);
}

pipeline::SyntheticConfig synthetic_config(const py::dict& d) {
  pipeline::SyntheticConfig c;
  for (auto [key, value] : d) {
    const auto k = key.cast<std::string>();
    if (k == "n_known") c.n_known = value.cast<int>();
    else if (k == "n_unknown") c.n_unknown = value.cast<int>();
    else if (k == "samples_per_class") c.samples_per_class = value.cast<int>();
    else if (k == "test_per_class") c.test_per_class = value.cast<int>();
    else if (k == "dim") c.dim = value.cast<int>();
    else if (k == "center_scale") c.center_scale = value.cast<double>();
    else if (k == "noise") c.noise = value.cast<double>();
    else if (k == "seed") c.seed = value.cast<std::uint64_t>();
    else throw Error(ErrorKind::kConfig, "unknown synthetic option " + k);
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reaction-time conditioned multi-exit open-set recognition";

  static py::exception<Error> error_type(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(py::str(e.what()));
      inst.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  // Metrics
  m.def("f1", [](long long tp, long long tn, long long fp, long long fn) {
        return osr::f1(confusion(tp, tn, fp, fn));
      }, py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));
  m.def("mcc", [](long long tp, long long tn, long long fp, long long fn) {
        const auto r = osr::mcc(confusion(tp, tn, fp, fn));
        return py::make_tuple(r.value, r.degenerate);
      }, py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"),
      "Returns (value, degenerate).");
  m.def("unknown_accuracy", [](long long tn, long long fp) {
        return osr::unknown_accuracy(confusion(0, tn, fp, 0));
      }, py::arg("tn"), py::arg("fp"));

  // Losses
  m.def("cross_entropy", [](int label, const Eigen::VectorXd& q) { return loss::cross_entropy(label, q); },
        py::arg("label"), py::arg("probs"));
  m.def("performance_loss", [](std::optional<double> rt, double r_max) {
        return loss::performance_loss({0, rt, rt ? std::optional<int>(1) : std::nullopt}, r_max);
      }, py::arg("mean_rt"), py::arg("r_max") = rt::kDefaultRMaxSeconds);
  m.def("exit_loss", [](std::optional<int> target, int predicted) {
        return loss::exit_loss({0, target ? std::optional<double>(1.0) : std::nullopt, target}, predicted);
      }, py::arg("target_exit"), py::arg("predicted_exit"));
  m.def("combined_loss", [](double ce, double perf, double exit, double w_c, double w_p, double w_e) {
        return loss::combined_loss(ce, perf, exit, {w_c, w_p, w_e});
      }, py::arg("ce"), py::arg("perf"), py::arg("exit"), py::arg("w_c") = 1.0, py::arg("w_p") = 1.0,
      py::arg("w_e") = 1.0);

  // RT data
  m.def("aggregate_rt_file", [](const std::string& path, double r_max) {
        const auto valid = rt::filter_valid_measurements({read_raw_file(path), r_max});
        std::vector<std::tuple<std::string, double, int>> out;
        for (const auto& a : rt::aggregate_mean_rt(valid)) {
          out.emplace_back(a.image_id, a.mean_rt_seconds, a.n_measurements);
        }
        return out;
      }, py::arg("path"), py::arg("r_max") = rt::kDefaultRMaxSeconds,
      "Filters a raw RT CSV and returns (image_id, mean_rt, n) per image.");
  m.def("quintile_cutoffs", [](const std::vector<double>& mean_rts, int n_exits) {
        std::vector<rt::ImageRT> rows;
        for (std::size_t i = 0; i < mean_rts.size(); ++i) rows.push_back({std::to_string(i), mean_rts[i], 1});
        return rt::compute_quintile_binning(rows, n_exits).cutoffs;
      }, py::arg("mean_rts"), py::arg("n_exits") = 5);
  m.def("target_exit", [](const std::vector<double>& cutoffs, double mean_rt, double r_max) {
        return rt::target_exit({cutoffs, static_cast<int>(cutoffs.size()) + 1}, mean_rt, r_max);
      }, py::arg("cutoffs"), py::arg("mean_rt"), py::arg("r_max") = rt::kDefaultRMaxSeconds);

  // Thresholds and inference
  m.def("median_max_scores", [](const std::vector<std::vector<Eigen::VectorXd>>& samples) {
        std::vector<model::ExitOutputs> outs;
        for (const auto& s : samples) outs.push_back(outputs_from(s));
        return thresholds::median_max_scores(outs);
      }, py::arg("samples"), "samples[i][k] is the probability vector of sample i at exit k.");
  m.def("infer", [](const std::vector<Eigen::VectorXd>& probs, const std::vector<double>& t) {
        return verdict_dict(osr::infer(outputs_from(probs), {t, thresholds::Kind::kInference, 0}));
      }, py::arg("probs"), py::arg("thresholds"));

  py::class_<model::MultiExitNetwork>(m, "MultiExitNetwork")
      .def(py::init([](int input_dim, std::vector<int> widths, int n_classes, const std::string& act,
                       std::uint64_t seed) {
             const int exits = static_cast<int>(widths.size());
             return model::MultiExitNetwork(
                 {input_dim, std::move(widths), exits, n_classes, model::activation_from_string(act), seed});
           }),
           py::arg("input_dim"), py::arg("block_widths"), py::arg("n_classes"),
           py::arg("activation") = "relu", py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return model::load_checkpoint(path).network(); })
      .def_property_readonly("n_exits", [](const model::MultiExitNetwork& n) { return n.config().n_exits; })
      .def_property_readonly("n_classes", [](const model::MultiExitNetwork& n) { return n.config().n_classes; })
      .def("forward", [](const model::MultiExitNetwork& n, const std::vector<double>& x) {
        return n.forward(x).probs;
      }, py::arg("x"), "Per-exit softmax vectors.")
      .def("infer", [](const model::MultiExitNetwork& n, const std::vector<double>& x,
                       const std::vector<double>& t) {
        return verdict_dict(osr::infer(n, x, {t, thresholds::Kind::kInference, 0}));
      }, py::arg("x"), py::arg("thresholds"))
      .def("save", [](const model::MultiExitNetwork& n, const std::string& path) {
        model::save_checkpoint(model::make_checkpoint(n, 0, 0.0, 0.0), path);
      }, py::arg("path"));

  m.def("run_synthetic_experiment",
        [](const py::dict& data, std::vector<std::uint64_t> seeds, int epochs, int width, int n_exits,
           double lr, double w_c, double w_p, double w_e, bool soft_exit) {
          const auto manifest = pipeline::generate_synthetic(synthetic_config(data)).manifest;
          pipeline::ExperimentConfig ec;
          ec.seeds = std::move(seeds);
          auto& tc = ec.train;
          tc.model.input_dim = manifest.feature_dim();
          tc.model.n_classes = manifest.n_known_classes();
          tc.model.n_exits = n_exits;
          tc.model.block_widths.assign(static_cast<std::size_t>(n_exits), width);
          tc.epochs = epochs;
          tc.sgd.lr = lr;
          tc.loss.weights = {w_c, w_p, w_e};
          tc.loss.soft_exit = soft_exit;
          py::gil_scoped_release release;
          return pipeline::aggregate_to_json(pipeline::run_experiment(ec, manifest).report);
        },
        py::arg("data") = py::dict(), py::arg("seeds") = std::vector<std::uint64_t>{11},
        py::arg("epochs") = 20, py::arg("width") = 32, py::arg("n_exits") = 5, py::arg("lr") = 0.05,
        py::arg("w_c") = 1.0, py::arg("w_p") = 1.0, py::arg("w_e") = 1.0, py::arg("soft_exit") = false,
        "Generates synthetic data, trains per seed and returns the aggregate report as JSON.");
}
