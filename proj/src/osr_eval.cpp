#include "psyosr/osr_eval.hpp"

#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "psyosr/csv.hpp"
#include "psyosr/error.hpp"

namespace psyosr::osr {

std::string_view to_string(CaseTag tag) {
  switch (tag) {
    case CaseTag::kK1: return "K1";
    case CaseTag::kK2: return "K2";
    case CaseTag::kK3: return "K3";
    case CaseTag::kU1: return "U1";
    case CaseTag::kU2: return "U2";
  }
  return "?";
}

OSRVerdict infer(const model::ExitOutputs& out, const thresholds::ThresholdSet& t) {
  if (t.kind != thresholds::Kind::kInference) {
    throw Error(ErrorKind::kParameter, "inference needs inference thresholds");
  }
  const int n = out.n_exits();
  if (static_cast<int>(t.values.size()) != n) {
    throw Error(ErrorKind::kShape, "threshold count does not match exit count");
  }
  OSRVerdict v;
  for (int k = 0; k < n; ++k) {
    const double s = out.max_score(k);
    if (s > t.values[k]) {
      v.exit_index = k + 1;
      v.predicted = out.argmax(k);
      v.max_score_at_exit = s;
      return v;
    }
  }
  v.max_score_at_exit = out.max_score(n - 1);
  return v;
}

OSRVerdict infer(const model::MultiExitNetwork& net, std::span<const double> x,
                 const thresholds::ThresholdSet& t) {
  return infer(net.forward(x), t);
}

Scored score_known(const OSRVerdict& verdict, int y_true) {
  if (verdict.is_unknown()) return {CaseTag::kK3, {0, 0, 0, 1}};
  return {*verdict.predicted == y_true ? CaseTag::kK1 : CaseTag::kK2, {1, 0, 0, 0}};
}

Scored score_unknown(const OSRVerdict& verdict) {
  if (verdict.is_unknown()) return {CaseTag::kU1, {0, 1, 0, 0}};
  return {CaseTag::kU2, {0, 0, 1, 0}};
}

std::optional<double> f1(const DetectionConfusion& c) {
  const long long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

MccResult mcc(const DetectionConfusion& c) {
  const long long a = c.tp + c.fp;
  const long long b = c.tp + c.fn;
  const long long d = c.tn + c.fp;
  const long long e = c.tn + c.fn;
  if (a == 0 || b == 0 || d == 0 || e == 0) return {0.0, true};
  const __int128 num = static_cast<__int128>(c.tp) * c.tn - static_cast<__int128>(c.fp) * c.fn;
  const long double den = std::sqrt(static_cast<long double>(a) * b) *
                          std::sqrt(static_cast<long double>(d) * e);
  return {static_cast<double>(static_cast<long double>(num) / den), false};
}

double topk_known_accuracy(std::span<const KnownRecord> records, int k) {
  if (records.empty()) throw Error(ErrorKind::kUndefined, "no known samples");
  const auto n_classes = records.front().probs.size();
  if (k < 1 || k > n_classes) {
    throw Error(ErrorKind::kParameter, "top-k needs 1 <= k <= n_classes");
  }
  long long hits = 0;
  for (const auto& r : records) {
    if (r.verdict.is_unknown()) continue;
    const double truth = r.probs(r.y_true);
    int rank = 0;  // classes scoring strictly higher than the true class
    for (Eigen::Index c = 0; c < r.probs.size(); ++c) {
      if (r.probs(c) > truth) ++rank;
    }
    if (rank < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

double unknown_accuracy(const DetectionConfusion& c) {
  if (c.tn + c.fp == 0) throw Error(ErrorKind::kUndefined, "no unknown samples");
  return 100.0 * static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

MetricsReport make_report(const DetectionConfusion& c, std::span<const KnownRecord> known,
                          int n_classes) {
  MetricsReport r;
  r.confusion = c;
  r.f1 = f1(c);
  r.mcc = mcc(c);
  if (c.tn + c.fp > 0) r.unknown_acc = unknown_accuracy(c);
  if (!known.empty()) {
    r.known_top1 = topk_known_accuracy(known, 1);
    if (n_classes >= 3) r.known_top3 = topk_known_accuracy(known, 3);
    if (n_classes >= 5) r.known_top5 = topk_known_accuracy(known, 5);
  }
  return r;
}

Evaluation evaluate(const model::MultiExitNetwork& net, std::span<const LabeledSample> test_known,
                    std::span<const LabeledSample> test_unknown,
                    const thresholds::ThresholdSet& inference_thresholds) {
  Evaluation ev;
  DetectionConfusion c;
  std::vector<KnownRecord> known;
  known.reserve(test_known.size());
  for (const auto& s : test_known) {
    if (!s.label) throw Error(ErrorKind::kManifest, "known test sample without label: " + s.sample_id);
    const auto out = net.forward(s.features);
    auto v = infer(out, inference_thresholds);
    const auto scored = score_known(v, *s.label);
    v.case_tag = scored.tag;
    c += scored.increment;
    const int exit0 = v.exit_index ? *v.exit_index - 1 : out.n_exits() - 1;
    known.push_back({*s.label, v, out.probs[exit0]});
    ev.rows.push_back({s.sample_id, s.label, v});
  }
  for (const auto& s : test_unknown) {
    auto v = infer(net, s.features, inference_thresholds);
    const auto scored = score_unknown(v);
    v.case_tag = scored.tag;
    c += scored.increment;
    ev.rows.push_back({s.sample_id, std::nullopt, v});
  }
  ev.report = make_report(c, known, net.config().n_classes);
  return ev;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["tp"] = r.confusion.tp;
  j["tn"] = r.confusion.tn;
  j["fp"] = r.confusion.fp;
  j["fn"] = r.confusion.fn;
  j["f1"] = opt(r.f1);
  j["mcc"] = r.mcc.value;
  j["mcc_degenerate"] = r.mcc.degenerate;
  j["unknown_acc"] = opt(r.unknown_acc);
  j["known_top1"] = opt(r.known_top1);
  j["known_top3"] = opt(r.known_top3);
  j["known_top5"] = opt(r.known_top5);
  return j.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
  MetricsReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.confusion = {j.at("tp").get<long long>(), j.at("tn").get<long long>(),
                   j.at("fp").get<long long>(), j.at("fn").get<long long>()};
    r.f1 = get_opt(j, "f1");
    r.mcc.value = j.at("mcc").get<double>();
    r.mcc.degenerate = j.value("mcc_degenerate", false);
    r.unknown_acc = get_opt(j, "unknown_acc");
    r.known_top1 = get_opt(j, "known_top1");
    r.known_top3 = get_opt(j, "known_top3");
    r.known_top5 = get_opt(j, "known_top5");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("metrics JSON: ") + e.what());
  }
  return r;
}

void write_verdicts_csv(std::ostream& out, std::span<const VerdictRow> rows) {
  csv::write_row(out, {"sample_id", "true_label_or_UNKNOWN", "exit_index_or_none", "predicted",
                       "case_tag", "max_score_at_exit"});
  for (const auto& r : rows) {
    const auto& v = r.verdict;
    csv::write_row(out, {r.sample_id, r.true_label ? std::to_string(*r.true_label) : "UNKNOWN",
                         v.exit_index ? std::to_string(*v.exit_index) : "none",
                         v.predicted ? std::to_string(*v.predicted) : "UNKNOWN",
                         v.case_tag ? std::string(to_string(*v.case_tag)) : "",
                         csv::format_double(v.max_score_at_exit)});
  }
}

}  // namespace psyosr::osr
