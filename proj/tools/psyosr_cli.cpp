// psyosr: data generation, training, calibration, evaluation, RT processing
// and survey collection from the command line.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "psyosr/csv.hpp"
#include "psyosr/error.hpp"
#include "psyosr/pipeline.hpp"
#include "psyosr/rt_data.hpp"
#include "psyosr/survey.hpp"
#include "psyosr/survey_http.hpp"
#include "psyosr/survey_service.hpp"

namespace fs = std::filesystem;
using namespace psyosr;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << text;
}

std::ofstream open_out(const std::string& path) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  return out;
}

std::string epoch_name(const std::string& prefix, int epoch) {
  std::ostringstream s;
  s << prefix << std::setw(4) << std::setfill('0') << epoch << ".json";
  return s.str();
}

// Attaches per-image mean RTs (keyed by sample_id) to train/valid entries.
void attach_rts(pipeline::DatasetManifest& m, const std::string& rt_agg_path) {
  std::ifstream in(rt_agg_path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + rt_agg_path);
  std::map<std::string, double> by_id;
  for (const auto& r : rt::read_rt_agg(in)) by_id[r.image_id] = r.mean_rt_seconds;
  for (auto& e : m.entries) {
    if (e.split != pipeline::Split::kTrain && e.split != pipeline::Split::kValid) continue;
    if (auto it = by_id.find(e.sample_id); it != by_id.end()) e.mean_rt_seconds = it->second;
  }
}

struct TrainArgs {
  std::string manifest;
  std::string rt_agg;
  std::string out_dir = "run";
  int exits = 5;
  std::vector<int> block_widths;
  int width = 64;
  std::string activation = "relu";
  std::uint64_t seed = 11;
  int epochs = 200;
  int batch = 16;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_decay = 1.0;
  int lr_decay_every = 0;
  double w_c = 1.0, w_p = 1.0, w_e = 1.0;
  std::string ce_mode = "mean";
  bool soft_exit = false;
  double soft_exit_temperature = 0.1;
  std::string coupling = "additive";
  int threshold_period = thresholds::kDefaultUpdatePeriod;
  std::string no_exit = "final";
  double r_max = rt::kDefaultRMaxSeconds;
};

pipeline::TrainConfig make_train_config(const TrainArgs& a, const pipeline::DatasetManifest& m) {
  pipeline::TrainConfig tc;
  tc.model.input_dim = m.feature_dim();
  tc.model.n_classes = m.n_known_classes();
  tc.model.n_exits = a.exits;
  tc.model.block_widths =
      a.block_widths.empty() ? std::vector<int>(static_cast<std::size_t>(a.exits), a.width) : a.block_widths;
  tc.model.activation = model::activation_from_string(a.activation);
  tc.model.rng_seed = a.seed;
  tc.shuffle_seed = a.seed;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.sgd = {a.lr, a.momentum, a.weight_decay};
  tc.lr_decay = a.lr_decay;
  tc.lr_decay_every = a.lr_decay_every;
  tc.loss.weights = {a.w_c, a.w_p, a.w_e};
  tc.loss.ce_mode = loss::ce_mode_from_string(a.ce_mode);
  tc.loss.soft_exit = a.soft_exit;
  tc.loss.soft_exit_temperature = a.soft_exit_temperature;
  tc.loss.coupling = loss::coupling_from_string(a.coupling);
  tc.loss.r_max_seconds = a.r_max;
  tc.threshold_period = a.threshold_period;
  if (a.no_exit == "final") {
    tc.no_exit = thresholds::NoExitConvention::kFinalExit;
  } else if (a.no_exit == "past-final") {
    tc.no_exit = thresholds::NoExitConvention::kPastFinalExit;
  } else {
    throw Error(ErrorKind::kConfig, "no-exit must be 'final' or 'past-final'");
  }
  tc.keep_checkpoints = false;
  return tc;
}

void run_train(const TrainArgs& a) {
  auto m = pipeline::load_manifest(a.manifest);
  if (!a.rt_agg.empty()) attach_rts(m, a.rt_agg);
  const auto tc = make_train_config(a, m);
  const fs::path out(a.out_dir);
  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "thresholds");
  int last_threshold_epoch = -1;
  const auto result = pipeline::train(tc, m, [&](const model::Checkpoint& c, const pipeline::EpochLog&,
                                                 const thresholds::ThresholdSet& t) {
    model::save_checkpoint(c, (out / "checkpoints" / epoch_name("epoch_", c.epoch)).string());
    if (t.epoch != last_threshold_epoch) {
      thresholds::save(t, (out / "thresholds" / epoch_name("training_", t.epoch)).string());
      last_threshold_epoch = t.epoch;
    }
  });
  {
    auto log = open_out((out / "loss_log.csv").string());
    pipeline::write_loss_log(log, result.log);
  }
  if (result.binning) write_text((out / "binning.json").string(), rt::binning_to_json(*result.binning) + "\n");
  std::cout << nlohmann::json{{"epochs", result.log.size()},
                              {"out_dir", a.out_dir},
                              {"final_valid_accuracy", result.last.valid_accuracy}}
                   .dump()
            << "\n";
}

void run_calibrate(const std::string& checkpoints_dir, const std::string& manifest_path,
                   const std::string& out_dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(checkpoints_dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  if (files.empty()) throw Error(ErrorKind::kNotFound, "no checkpoints in " + checkpoints_dir);
  std::vector<model::Checkpoint> ckpts;
  for (const auto& f : files) ckpts.push_back(model::load_checkpoint(f.string()));
  std::sort(ckpts.begin(), ckpts.end(), [](const auto& a, const auto& b) { return a.epoch < b.epoch; });
  const auto& best = ckpts[pipeline::select_best_model(ckpts)];
  const auto m = pipeline::load_manifest(manifest_path);
  const auto valid = pipeline::features_of(m, pipeline::Split::kValid);
  const auto t = thresholds::compute_inference_thresholds(best.network(), valid, best.epoch);
  fs::create_directories(out_dir);
  model::save_checkpoint(best, (fs::path(out_dir) / "best.json").string());
  thresholds::save(t, (fs::path(out_dir) / "inference_thresholds.json").string());
  std::cout << nlohmann::json{{"best_epoch", best.epoch}, {"valid_accuracy", best.valid_accuracy},
                              {"thresholds", t.values}}
                   .dump()
            << "\n";
}

void run_evaluate(const std::string& ckpt_path, const std::string& thresholds_path,
                  const std::string& manifest_path, const std::string& report_path,
                  const std::string& verdicts_path) {
  const auto net = model::load_checkpoint(ckpt_path).network();
  const auto t = thresholds::load(thresholds_path);
  const auto m = pipeline::load_manifest(manifest_path);
  const auto known = pipeline::labeled_of(m, pipeline::Split::kTestKnown);
  const auto unknown = pipeline::labeled_of(m, pipeline::Split::kTestUnknown);
  if (known.empty() || unknown.empty()) {
    throw Error(ErrorKind::kManifest, "manifest needs test_known and test_unknown samples");
  }
  const auto ev = osr::evaluate(net, known, unknown, t);
  const auto json = osr::report_to_json(ev.report);
  if (!report_path.empty()) write_text(report_path, json + "\n");
  if (!verdicts_path.empty()) {
    auto out = open_out(verdicts_path);
    osr::write_verdicts_csv(out, ev.rows);
  }
  std::cout << json << "\n";
}

void run_report(const std::vector<std::string>& runs, const std::string& out_path) {
  std::vector<osr::MetricsReport> reports;
  for (const auto& r : runs) reports.push_back(osr::report_from_json(read_text(r)));
  const auto json = pipeline::aggregate_to_json(pipeline::aggregate(reports));
  if (!out_path.empty()) write_text(out_path, json + "\n");
  std::cout << json << "\n";
}

void run_rt_aggregate(const std::string& raw_path, const std::string& out_path, double r_max) {
  std::ifstream in(raw_path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + raw_path);
  rt::RTDataset ds{rt::read_rt_raw(in), r_max};
  const auto valid = rt::filter_valid_measurements(ds);
  const auto agg = rt::aggregate_mean_rt(valid);
  auto out = open_out(out_path);
  rt::write_rt_agg(out, agg);
  std::cout << nlohmann::json{{"raw", ds.measurements.size()}, {"valid", valid.size()}, {"images", agg.size()}}
                   .dump()
            << "\n";
}

void run_rt_bins(const std::string& agg_path, int exits, const std::string& out_path) {
  std::ifstream in(agg_path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + agg_path);
  const auto b = rt::compute_quintile_binning(rt::read_rt_agg(in), exits);
  const auto json = rt::binning_to_json(b);
  if (!out_path.empty()) write_text(out_path, json + "\n");
  std::cout << json << "\n";
}


void run_survey_serve(const std::string& surveys_path, const std::string& images, const std::string& host,
                      int port, int quorum, const std::string& log_path) {
  survey::SurveyService service(survey::load_surveys(surveys_path), {quorum});
  std::ofstream log;
  if (!log_path.empty()) {
    std::vector<survey::Event> events;
    if (std::ifstream in(log_path); in) {
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) events.push_back(survey::event_from_json(line));
      }
    }
    service.replay(events);
    log.open(log_path, std::ios::app);
    if (!log) throw Error(ErrorKind::kIo, "cannot append to " + log_path);
    service.set_event_sink([&log](const survey::Event& e) { log << survey::event_to_json(e) << '\n' << std::flush; });
  }
  std::cerr << "serving on " << host << ":" << port << "\n";
  survey::serve(service, images, host, port);
}

int fail(const std::string& message, std::string_view kind, int code) {
  std::cerr << nlohmann::json{{"error", message}, {"kind", kind}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Psychophysically conditioned open-set recognition toolkit"};
  app.set_config("--config", "", "key=value configuration file; [section] headers select subcommands");
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Synthetic Gaussian classes with simulated RTs");
  pipeline::SyntheticConfig sc;
  std::string gen_manifest = "manifest.csv", gen_rt = "rt_agg.csv";
  gen->add_option("--out-manifest", gen_manifest, "Manifest CSV to write")->capture_default_str();
  gen->add_option("--out-rt", gen_rt, "rt_agg CSV to write")->capture_default_str();
  gen->add_option("--n-known", sc.n_known)->capture_default_str();
  gen->add_option("--n-unknown", sc.n_unknown)->capture_default_str();
  gen->add_option("--samples-per-class", sc.samples_per_class)->capture_default_str();
  gen->add_option("--test-per-class", sc.test_per_class)->capture_default_str();
  gen->add_option("--dim", sc.dim)->capture_default_str();
  gen->add_option("--center-scale", sc.center_scale)->capture_default_str();
  gen->add_option("--noise", sc.noise)->capture_default_str();
  gen->add_option("--annotated-fraction", sc.annotated_fraction)->capture_default_str();
  gen->add_option("--subjects-per-image", sc.subjects_per_image)->capture_default_str();
  gen->add_option("--r-base", sc.r_base)->capture_default_str();
  gen->add_option("--r-slope", sc.r_slope)->capture_default_str();
  gen->add_option("--rt-noise", sc.rt_noise)->capture_default_str();
  gen->add_option("--seed", sc.seed)->capture_default_str();

  // split
  auto* split = app.add_subcommand("split", "Per-class train/valid split of the known pool");
  std::string split_in, split_out, split_rt;
  double split_ratio = 0.7;
  std::uint64_t split_seed = 11;
  split->add_option("--manifest", split_in)->required();
  split->add_option("--out", split_out)->required();
  split->add_option("--rt-agg", split_rt, "Attach per-sample mean RTs before splitting");
  split->add_option("--ratio", split_ratio)->capture_default_str();
  split->add_option("--seed", split_seed)->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train a multi-exit network");
  TrainArgs ta;
  tr->add_option("--manifest", ta.manifest)->required();
  tr->add_option("--rt-agg", ta.rt_agg, "Attach per-sample mean RTs from an rt_agg CSV");
  tr->add_option("--out-dir", ta.out_dir)->capture_default_str();
  tr->add_option("--exits", ta.exits)->capture_default_str();
  tr->add_option("--width", ta.width, "Hidden width of every block")->capture_default_str();
  tr->add_option("--block-widths", ta.block_widths, "One width per exit (overrides --width)");
  tr->add_option("--activation", ta.activation)->capture_default_str();
  tr->add_option("--seed", ta.seed)->capture_default_str();
  tr->add_option("--epochs", ta.epochs)->capture_default_str();
  tr->add_option("--batch-size", ta.batch)->capture_default_str();
  tr->add_option("--lr", ta.lr)->capture_default_str();
  tr->add_option("--momentum", ta.momentum)->capture_default_str();
  tr->add_option("--weight-decay", ta.weight_decay)->capture_default_str();
  tr->add_option("--lr-decay", ta.lr_decay)->capture_default_str();
  tr->add_option("--lr-decay-every", ta.lr_decay_every)->capture_default_str();
  tr->add_option("--w-c", ta.w_c)->capture_default_str();
  tr->add_option("--w-p", ta.w_p)->capture_default_str();
  tr->add_option("--w-e", ta.w_e)->capture_default_str();
  tr->add_option("--ce-mode", ta.ce_mode, "mean | final")->capture_default_str();
  tr->add_flag("--soft-exit", ta.soft_exit, "Differentiable exit term (extension)");
  tr->add_option("--soft-exit-temperature", ta.soft_exit_temperature)->capture_default_str();
  tr->add_option("--coupling", ta.coupling, "additive | multiplicative")->capture_default_str();
  tr->add_option("--threshold-period", ta.threshold_period)->capture_default_str();
  tr->add_option("--no-exit", ta.no_exit, "final | past-final")->capture_default_str();
  tr->add_option("--r-max", ta.r_max)->capture_default_str();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Select the best checkpoint and compute inference thresholds");
  std::string cal_ckpts, cal_manifest, cal_out = "calibrated";
  cal->add_option("--checkpoints", cal_ckpts, "Directory of per-epoch checkpoints")->required();
  cal->add_option("--manifest", cal_manifest)->required();
  cal->add_option("--out-dir", cal_out)->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Open-set evaluation on test_known/test_unknown");
  std::string ev_ckpt, ev_thr, ev_manifest, ev_report, ev_verdicts;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--thresholds", ev_thr)->required();
  ev->add_option("--manifest", ev_manifest)->required();
  ev->add_option("--out-report", ev_report);
  ev->add_option("--out-verdicts", ev_verdicts);

  // report
  auto* rep = app.add_subcommand("report", "Mean and standard error over per-seed reports");
  std::vector<std::string> rep_runs;
  std::string rep_out;
  rep->add_option("runs", rep_runs, "Metrics report JSON files")->required();
  rep->add_option("--out", rep_out);

  // rt
  auto* rt_cmd = app.add_subcommand("rt", "Reaction-time processing");
  rt_cmd->require_subcommand(1);
  auto* rt_agg = rt_cmd->add_subcommand("aggregate", "Filter raw RTs and average per image");
  std::string agg_raw, agg_out = "rt_agg.csv";
  double agg_rmax = rt::kDefaultRMaxSeconds;
  rt_agg->add_option("--raw", agg_raw)->required();
  rt_agg->add_option("--out", agg_out)->capture_default_str();
  rt_agg->add_option("--r-max", agg_rmax)->capture_default_str();
  auto* rt_bins = rt_cmd->add_subcommand("bins", "Quantile exit binning from rt_agg");
  std::string bins_agg, bins_out;
  int bins_exits = 5;
  rt_bins->add_option("--agg", bins_agg)->required();
  rt_bins->add_option("--exits", bins_exits)->capture_default_str();
  rt_bins->add_option("--out", bins_out);

  // survey
  auto* sv = app.add_subcommand("survey", "Survey generation and collection");
  sv->require_subcommand(1);
  auto* sv_gen = sv->add_subcommand("gen", "Generate the survey sets");
  std::string sg_classes, sg_out = "surveys.json";
  std::uint64_t sg_seed = 1;
  double sg_not_present = 0.2;
  sv_gen->add_option("--classes", sg_classes, "Class manifest CSV (class,image_id)")->required();
  sv_gen->add_option("--seed", sg_seed)->capture_default_str();
  sv_gen->add_option("--out", sg_out)->capture_default_str();
  sv_gen->add_option("--not-present-share", sg_not_present)->capture_default_str();
  auto* sv_serve = sv->add_subcommand("serve", "Serve the collection HTTP API");
  std::string ss_surveys, ss_images = ".", ss_host = "127.0.0.1", ss_log;
  int ss_port = 8080, ss_quorum = 5;
  sv_serve->add_option("--surveys", ss_surveys)->required();
  sv_serve->add_option("--images", ss_images)->capture_default_str();
  sv_serve->add_option("--host", ss_host)->capture_default_str();
  sv_serve->add_option("--port", ss_port)->capture_default_str();
  sv_serve->add_option("--quorum", ss_quorum)->capture_default_str();
  sv_serve->add_option("--log", ss_log, "JSONL event log; replayed on start, appended while serving");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(e.what(), "usage", 2);
  }

  try {
    if (*gen) {
      const auto data = pipeline::generate_synthetic(sc);
      pipeline::save_manifest(data.manifest, gen_manifest);
      auto out = open_out(gen_rt);
      rt::write_rt_agg(out, data.rt_agg);
      std::cout << nlohmann::json{{"samples", data.manifest.entries.size()}, {"annotated", data.rt_agg.size()}}.dump()
                << "\n";
    } else if (*split) {
      auto m = pipeline::load_manifest(split_in);
      if (!split_rt.empty()) attach_rts(m, split_rt);
      pipeline::save_manifest(pipeline::split_train_valid(m, split_ratio, split_seed), split_out);
    } else if (*tr) {
      run_train(ta);
    } else if (*cal) {
      run_calibrate(cal_ckpts, cal_manifest, cal_out);
    } else if (*ev) {
      run_evaluate(ev_ckpt, ev_thr, ev_manifest, ev_report, ev_verdicts);
    } else if (*rep) {
      run_report(rep_runs, rep_out);
    } else if (*rt_agg) {
      run_rt_aggregate(agg_raw, agg_out, agg_rmax);
    } else if (*rt_bins) {
      run_rt_bins(bins_agg, bins_exits, bins_out);
    } else if (*sv_gen) {
      const auto cm = survey::load_class_manifest(sg_classes);
      survey::GenerationOptions opt;
      opt.not_present_share = sg_not_present;
      const auto surveys = survey::generate_survey_sets(cm.classes, cm.pool, sg_seed, opt);
      survey::save_surveys(surveys, sg_out);
      std::cout << nlohmann::json{{"surveys", surveys.size()}}.dump() << "\n";
    } else if (*sv_serve) {
      run_survey_serve(ss_surveys, ss_images, ss_host, ss_port, ss_quorum, ss_log);
    }
  } catch (const Error& e) {
    return fail(e.what(), to_string(e.kind()), 1);
  } catch (const std::exception& e) {
    return fail(e.what(), "internal", 1);
  }
  return 0;
}
