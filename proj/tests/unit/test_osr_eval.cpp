#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "psyosr/csv.hpp"
#include "psyosr/error.hpp"
#include "psyosr/osr_eval.hpp"
#include "support/decision_cases.hpp"
#include "support/oracles.hpp"
#include "support/outputs.hpp"
#include "support/published_rows.hpp"

using namespace psyosr;
using osr::CaseTag;
using osr::DetectionConfusion;

namespace {

thresholds::ThresholdSet inference(std::vector<double> v) {
  return {std::move(v), thresholds::Kind::kInference, 0};
}

// Straight from the definitions, in long double, without integer tricks.
double f1_oracle(const DetectionConfusion& c) {
  return static_cast<double>(2.0L * c.tp / (2.0L * c.tp + c.fp + c.fn));
}
double mcc_oracle(const DetectionConfusion& c) {
  const long double tp = c.tp, tn = c.tn, fp = c.fp, fn = c.fn;
  return static_cast<double>((tp * tn - fp * fn) /
                             std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)));
}

osr::KnownRecord record(int y, std::vector<double> probs, bool exited) {
  osr::KnownRecord r;
  r.y_true = y;
  r.probs = Eigen::Map<Eigen::VectorXd>(probs.data(), static_cast<Eigen::Index>(probs.size()));
  if (exited) {
    r.verdict.exit_index = 1;
    Eigen::Index am;
    r.probs.maxCoeff(&am);
    r.verdict.predicted = static_cast<int>(am);
  }
  return r;
}

}  // namespace

TEST(Infer, Examples) {
  const auto out = fixture::outputs({{0.9, 0.1}, {0.2, 0.8}});
  auto v = osr::infer(out, inference({0.5, 0.5}));
  EXPECT_EQ(v.exit_index, 1);
  EXPECT_EQ(v.predicted, 0);
  EXPECT_DOUBLE_EQ(v.max_score_at_exit, 0.9);

  v = osr::infer(out, inference({0.95, 0.95}));
  EXPECT_TRUE(v.is_unknown());
  EXPECT_FALSE(v.exit_index);
  EXPECT_DOUBLE_EQ(v.max_score_at_exit, 0.8);

  v = osr::infer(out, inference({0.95, 0.7}));
  EXPECT_EQ(v.exit_index, 2);
  EXPECT_EQ(v.predicted, 1);

  EXPECT_EQ(osr::infer(out, inference({0.0, 0.0})).exit_index, 1);
  EXPECT_TRUE(osr::infer(out, inference({1.0, 1.0})).is_unknown());

  thresholds::ThresholdSet training{{0.5, 0.5}, thresholds::Kind::kTraining, 0};
  EXPECT_THROW(osr::infer(out, training), Error);
}

TEST(Scoring, CaseTags) {
  osr::OSRVerdict exited;
  exited.exit_index = 2;
  exited.predicted = 3;
  const osr::OSRVerdict none;
  EXPECT_EQ(osr::score_known(exited, 3).tag, CaseTag::kK1);
  EXPECT_EQ(osr::score_known(exited, 3).increment, (DetectionConfusion{1, 0, 0, 0}));
  EXPECT_EQ(osr::score_known(exited, 1).tag, CaseTag::kK2);
  EXPECT_EQ(osr::score_known(exited, 1).increment, (DetectionConfusion{1, 0, 0, 0}));
  EXPECT_EQ(osr::score_known(none, 1).tag, CaseTag::kK3);
  EXPECT_EQ(osr::score_known(none, 1).increment, (DetectionConfusion{0, 0, 0, 1}));
  EXPECT_EQ(osr::score_unknown(none).tag, CaseTag::kU1);
  EXPECT_EQ(osr::score_unknown(none).increment, (DetectionConfusion{0, 1, 0, 0}));
  EXPECT_EQ(osr::score_unknown(exited).tag, CaseTag::kU2);
  EXPECT_EQ(osr::score_unknown(exited).increment, (DetectionConfusion{0, 0, 1, 0}));
}

TEST(DecisionRule, ExhaustiveAgainstTable) {
  long long mismatches = 0;
  const long long n = oracle::for_each_decision_case([&](const oracle::DecisionCase& c) {
    const auto v = osr::infer(fixture::outputs(c.probs), inference(c.thresholds));
    const auto scored = c.label ? osr::score_known(v, *c.label) : osr::score_unknown(v);
    const auto& inc = scored.increment;
    EXPECT_EQ(inc.tp + inc.tn + inc.fp + inc.fn, 1);
    if (std::string(osr::to_string(scored.tag)) != oracle::decision_table(c.probs, c.thresholds, c.label)) {
      ++mismatches;
    }
  });
  EXPECT_GT(n, 10000);
  EXPECT_EQ(mismatches, 0);
}

TEST(Metrics, F1) {
  EXPECT_NEAR(*osr::f1({335580, 26071, 21996, 868}), 0.9671, 5e-5);
  EXPECT_NEAR(*osr::f1({335811, 10121, 37943, 626}), 0.9457, 5e-5);
  EXPECT_EQ(*osr::f1({10, 4, 0, 0}), 1.0);
  EXPECT_FALSE(osr::f1({0, 12, 0, 0}).has_value());
}

TEST(Metrics, Mcc) {
  EXPECT_NEAR(osr::mcc({335580, 26071, 21996, 868}).value, 0.6994, 5e-5);
  const DetectionConfusion c{40, 30, 10, 20};
  const DetectionConfusion swapped{10, 20, 40, 30};
  EXPECT_NEAR(osr::mcc(swapped).value, -osr::mcc(c).value, 1e-15);
  EXPECT_EQ(osr::mcc({1, 1, 1, 1}).value, 0.0);
  EXPECT_EQ(osr::mcc({5, 5, 0, 0}).value, 1.0);
  const auto deg = osr::mcc({5, 0, 0, 3});
  EXPECT_TRUE(deg.degenerate);
  EXPECT_EQ(deg.value, 0.0);
  EXPECT_FALSE(osr::mcc(c).degenerate);
}

TEST(Metrics, PublishedRowsMatchIndependentOracle) {
  for (const auto& row : fixture::kPublishedRows) {
    const DetectionConfusion c{row.tp, row.tn, row.fp, row.fn};
    EXPECT_NEAR(*osr::f1(c), f1_oracle(c), 1e-14) << row.method;
    const auto m = osr::mcc(c);
    if (m.degenerate) {
      EXPECT_EQ(m.value, 0.0) << row.method;
    } else {
      EXPECT_NEAR(m.value, mcc_oracle(c), 1e-14) << row.method;
    }
  }
}

TEST(Metrics, OverflowSafeAtScale) {
  const long long big = 3'000'000'000LL;
  const DetectionConfusion c{big, big, big / 3, big / 7};
  EXPECT_NEAR(osr::mcc(c).value, mcc_oracle(c), 1e-12);
}

TEST(Metrics, UnknownAccuracy) {
  const double acc = osr::unknown_accuracy({0, 26071, 21996, 0});
  EXPECT_GE(acc, 54.23);
  EXPECT_LT(acc, 54.24);
  EXPECT_EQ(osr::unknown_accuracy({3, 9, 0, 1}), 100.0);
  EXPECT_EQ(osr::unknown_accuracy({3, 0, 9, 1}), 0.0);
  EXPECT_THROW(osr::unknown_accuracy({3, 0, 0, 1}), Error);
}

TEST(TopK, Examples) {
  std::vector<osr::KnownRecord> all_k1{record(0, {0.7, 0.2, 0.1}, true), record(2, {0.1, 0.2, 0.7}, true)};
  EXPECT_EQ(osr::topk_known_accuracy(all_k1, 1), 100.0);
  std::vector<osr::KnownRecord> with_k3{record(0, {0.7, 0.2, 0.1}, true), record(0, {0.9, 0.05, 0.05}, false)};
  EXPECT_EQ(osr::topk_known_accuracy(with_k3, 1), 50.0);
  EXPECT_EQ(osr::topk_known_accuracy(with_k3, 3), 50.0);
  EXPECT_THROW(osr::topk_known_accuracy(with_k3, 4), Error);
  EXPECT_THROW(osr::topk_known_accuracy(with_k3, 0), Error);
  EXPECT_THROW(osr::topk_known_accuracy({}, 1), Error);
}

TEST(TopK, TwentySampleRecount) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<osr::KnownRecord> recs;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> p(6);
    for (auto& v : p) v = u(rng);
    recs.push_back(record(static_cast<int>(rng() % 6), p, i % 4 != 0));
  }
  for (int k = 1; k <= 6; ++k) {
    int hits = 0;
    for (const auto& r : recs) {
      if (!r.verdict.exit_index) continue;
      // Sort class indices by descending score and look for y in the first k.
      std::vector<int> order(6);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r.probs(a) > r.probs(b); });
      if (std::find(order.begin(), order.begin() + k, r.y_true) != order.begin() + k) ++hits;
    }
    EXPECT_DOUBLE_EQ(osr::topk_known_accuracy(recs, k), 100.0 * hits / 20.0) << k;
  }
}

TEST(Evaluate, PartitionAndExtremeThresholds) {
  model::ModelConfig cfg{3, {6, 6, 6}, 3, 4, model::Activation::kRelu, 5};
  const model::MultiExitNetwork net(cfg);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<osr::LabeledSample> known, unknown;
  for (int i = 0; i < 40; ++i) {
    known.push_back({"k" + std::to_string(i), {n(rng), n(rng), n(rng)}, static_cast<int>(rng() % 4)});
    if (i < 15) unknown.push_back({"u" + std::to_string(i), {n(rng), n(rng), n(rng)}, std::nullopt});
  }
  std::map<std::string, std::vector<double>> features;
  for (const auto& s : known) features[s.sample_id] = s.features;
  for (const auto& s : unknown) features[s.sample_id] = s.features;
  const auto ev = osr::evaluate(net, known, unknown, inference({0.3, 0.35, 0.4}));
  std::map<std::string, int> tags;
  for (const auto& row : ev.rows) {
    ASSERT_TRUE(row.verdict.case_tag);
    ++tags[std::string(osr::to_string(*row.verdict.case_tag))];
    const auto out = net.forward(features.at(row.sample_id));
    std::vector<std::vector<double>> p;
    for (const auto& v : out.probs) p.emplace_back(v.data(), v.data() + v.size());
    const auto expected = oracle::decision_table(p, {0.3, 0.35, 0.4}, row.true_label);
    EXPECT_EQ(osr::to_string(*row.verdict.case_tag), expected);
  }
  const auto& c = ev.report.confusion;
  EXPECT_EQ(c.tp, tags["K1"] + tags["K2"]);
  EXPECT_EQ(c.fn, tags["K3"]);
  EXPECT_EQ(c.tn, tags["U1"]);
  EXPECT_EQ(c.fp, tags["U2"]);
  EXPECT_EQ(c.tp + c.fn, 40);
  EXPECT_EQ(c.tn + c.fp, 15);
  EXPECT_TRUE(ev.report.known_top3);
  EXPECT_FALSE(ev.report.known_top5);

  const auto closed = osr::evaluate(net, known, unknown, inference({1.0, 1.0, 1.0}));
  EXPECT_EQ(closed.report.confusion, (DetectionConfusion{0, 15, 0, 40}));
  const auto open = osr::evaluate(net, known, unknown, inference({0.0, 0.0, 0.0}));
  EXPECT_EQ(open.report.confusion, (DetectionConfusion{40, 0, 15, 0}));
}

TEST(Evaluate, RaisingThresholdsNeverLowersTn) {
  model::ModelConfig cfg{3, {8, 8, 8}, 3, 3, model::Activation::kTanh, 17};
  const model::MultiExitNetwork net(cfg);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<osr::LabeledSample> known, unknown;
  for (int i = 0; i < 30; ++i) {
    known.push_back({"k", {n(rng), n(rng), n(rng)}, static_cast<int>(rng() % 3)});
    unknown.push_back({"u", {n(rng), n(rng), n(rng)}, std::nullopt});
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> t{u(rng) * 0.7 + 0.3, u(rng) * 0.7 + 0.3, u(rng) * 0.7 + 0.3};
    auto raised = t;
    const auto k = static_cast<std::size_t>(rng() % 3);
    raised[k] = std::min(1.0, t[k] + u(rng) * 0.3);
    const auto a = osr::evaluate(net, known, unknown, inference(t)).report.confusion;
    const auto b = osr::evaluate(net, known, unknown, inference(raised)).report.confusion;
    EXPECT_GE(b.tn, a.tn);
    EXPECT_LE(b.fp, a.fp);
  }
}

TEST(Evaluate, OrderIndependent) {
  model::ModelConfig cfg{2, {5, 5}, 2, 3, model::Activation::kRelu, 2};
  const model::MultiExitNetwork net(cfg);
  std::vector<osr::LabeledSample> known{{"a", {1, 2}, 0}, {"b", {-1, 0.5}, 1}, {"c", {0.2, -3}, 2}};
  std::vector<osr::LabeledSample> unknown{{"u1", {4, 4}, {}}, {"u2", {-2, -2}, {}}};
  const auto t = inference({0.4, 0.4});
  const auto a = osr::evaluate(net, known, unknown, t);
  std::reverse(known.begin(), known.end());
  std::reverse(unknown.begin(), unknown.end());
  const auto b = osr::evaluate(net, known, unknown, t);
  EXPECT_EQ(a.report.confusion, b.report.confusion);
  EXPECT_EQ(a.report.known_top1, b.report.known_top1);
}

TEST(Report, JsonAndVerdictCsv) {
  osr::MetricsReport r = osr::make_report({10, 5, 2, 1}, {}, 3);
  r.known_top1 = 42.5;
  const auto back = osr::report_from_json(osr::report_to_json(r));
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.f1, r.f1);
  EXPECT_EQ(back.mcc.value, r.mcc.value);
  EXPECT_EQ(back.known_top1, 42.5);
  EXPECT_FALSE(back.known_top5);
  const auto text = osr::report_to_json(r);
  EXPECT_LT(text.find("\"tp\""), text.find("\"f1\""));
  EXPECT_LT(text.find("\"unknown_acc\""), text.find("\"known_top1\""));

  osr::VerdictRow k{"s1", 2, {}};
  k.verdict.exit_index = 3;
  k.verdict.predicted = 2;
  k.verdict.max_score_at_exit = 0.75;
  k.verdict.case_tag = CaseTag::kK1;
  osr::VerdictRow u{"s2", std::nullopt, {}};
  u.verdict.max_score_at_exit = 0.25;
  u.verdict.case_tag = CaseTag::kU1;
  std::ostringstream out;
  osr::write_verdicts_csv(out, std::vector<osr::VerdictRow>{k, u});
  EXPECT_EQ(out.str(),
            "sample_id,true_label_or_UNKNOWN,exit_index_or_none,predicted,case_tag,max_score_at_exit\n"
            "s1,2,3,2,K1,0.75\n"
            "s2,UNKNOWN,none,UNKNOWN,U1,0.25\n");
}
