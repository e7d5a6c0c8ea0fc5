#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "psyosr/error.hpp"
#include "psyosr/rt_data.hpp"
#include "support/oracles.hpp"

using namespace psyosr;
using rt::RTMeasurement;

namespace {

// 20 task rows + 5 controls, `wrong` of the controls answered incorrectly.
std::vector<RTMeasurement> submission(const std::string& subject, const std::string& survey,
                                      int wrong, double rt = 5.0) {
  std::vector<RTMeasurement> rows;
  for (int i = 0; i < 25; ++i) {
    RTMeasurement m;
    m.subject_id = subject;
    m.survey_id = survey;
    m.question_id = survey + "-Q" + std::to_string(i);
    m.image_id = survey + "-img" + std::to_string(i % 10);
    m.is_control = i < 5;
    m.correct_option = 1 + i % 5;
    m.chosen_option = (m.is_control && i < wrong) ? (m.correct_option % 5) + 1 : m.correct_option;
    m.rt_seconds = rt + 0.1 * i;
    rows.push_back(m);
  }
  return rows;
}

int error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return static_cast<int>(e.kind());
  }
  return -1;
}

}  // namespace

TEST(ValidateSubmission, ControlRule) {
  EXPECT_TRUE(rt::validate_submission(submission("a", "S1", 0)).accepted);
  EXPECT_TRUE(rt::validate_submission(submission("a", "S1", 2)).accepted);
  const auto v = rt::validate_submission(submission("a", "S1", 3));
  EXPECT_FALSE(v.accepted);
  EXPECT_EQ(v.wrong_controls, 3);
  EXPECT_FALSE(rt::validate_submission(submission("a", "S1", 5)).accepted);
}

TEST(ValidateSubmission, MalformedIsStructuralNotRejection) {
  auto rows = submission("a", "S1", 0);
  rows[10].is_control = true;  // six controls
  EXPECT_EQ(error_kind([&] { rt::validate_submission(rows); }), static_cast<int>(ErrorKind::kStructural));

  rows = submission("a", "S1", 0);
  rows[12].question_id = rows[11].question_id;
  EXPECT_EQ(error_kind([&] { rt::validate_submission(rows); }), static_cast<int>(ErrorKind::kStructural));

  rows = submission("a", "S1", 0);
  rows[3].subject_id = "b";
  EXPECT_EQ(error_kind([&] { rt::validate_submission(rows); }), static_cast<int>(ErrorKind::kStructural));
}

TEST(FilterValid, AppliesEveryRule) {
  rt::RTDataset ds;
  auto good = submission("a", "S1", 0);
  good[5].rt_seconds = 28.5;   // too slow
  good[6].rt_seconds = 28.0;   // bound is exclusive
  good[7].correct_option = 6;  // not-present question answered correctly
  good[7].chosen_option = 6;
  good[8].chosen_option = good[8].correct_option % 5 + 1;  // wrong answer
  good[9].rt_seconds = 5.0;
  ds.measurements = good;
  auto rejected = submission("b", "S2", 3);
  ds.measurements.insert(ds.measurements.end(), rejected.begin(), rejected.end());

  const auto kept = rt::filter_valid_measurements(ds);
  std::set<std::string> ids;
  for (const auto& m : kept) ids.insert(m.question_id);
  EXPECT_EQ(kept.size(), 20u - 4u);
  EXPECT_FALSE(ids.contains("S1-Q5"));
  EXPECT_FALSE(ids.contains("S1-Q6"));
  EXPECT_FALSE(ids.contains("S1-Q7"));
  EXPECT_FALSE(ids.contains("S1-Q8"));
  EXPECT_TRUE(ids.contains("S1-Q9"));
  for (const auto& m : kept) {
    EXPECT_EQ(m.subject_id, "a");
    EXPECT_FALSE(m.is_control);
    EXPECT_NE(m.correct_option, 6);
    EXPECT_EQ(m.chosen_option, m.correct_option);
    EXPECT_LT(m.rt_seconds, 28.0);
  }
}

TEST(FilterValid, MalformedSubmissionDropped) {
  rt::RTDataset ds;
  auto rows = submission("a", "S1", 0);
  rows.pop_back();
  rows[0].is_control = false;  // four controls
  ds.measurements = rows;
  EXPECT_TRUE(rt::filter_valid_measurements(ds).empty());
}

TEST(FilterValid, MonotoneUnderAddedSubmissions) {
  std::mt19937 rng(3);
  rt::RTDataset ds;
  std::vector<RTMeasurement> previous;
  for (int s = 0; s < 30; ++s) {
    std::uniform_int_distribution<int> wrong(0, 5);
    std::uniform_real_distribution<double> rt(0.5, 35.0);
    auto rows = submission("subj" + std::to_string(s % 7), "S" + std::to_string(s), wrong(rng), rt(rng));
    ds.measurements.insert(ds.measurements.end(), rows.begin(), rows.end());
    const auto now = rt::filter_valid_measurements(ds);
    for (const auto& m : previous) {
      EXPECT_NE(std::find(now.begin(), now.end(), m), now.end());
    }
    previous = now;
  }
}

TEST(AggregateMeanRt, Basic) {
  std::vector<RTMeasurement> v(3);
  v[0].image_id = "A";
  v[0].rt_seconds = 2.0;
  v[1].image_id = "B";
  v[1].rt_seconds = 7.0;
  v[2].image_id = "A";
  v[2].rt_seconds = 4.0;
  const auto agg = rt::aggregate_mean_rt(v);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].image_id, "A");
  EXPECT_DOUBLE_EQ(agg[0].mean_rt_seconds, 3.0);
  EXPECT_EQ(agg[0].n_measurements, 2);
  EXPECT_DOUBLE_EQ(agg[1].mean_rt_seconds, 7.0);
  EXPECT_EQ(agg[1].n_measurements, 1);
  EXPECT_TRUE(rt::aggregate_mean_rt({}).empty());
}

TEST(AggregateMeanRt, MatchesSpreadsheetRecomputation) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> rt(0.3, 27.9);
  std::vector<RTMeasurement> rows;
  for (int rep = 0; rep < 5; ++rep) {
    for (int img = 0; img < 10; ++img) {
      RTMeasurement m;
      m.image_id = "img" + std::to_string(img);
      m.rt_seconds = rt(rng);
      rows.push_back(m);
    }
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto agg = rt::aggregate_mean_rt(rows);
  ASSERT_EQ(agg.size(), 10u);
  for (const auto& a : agg) {
    double sum = 0.0, lo = 1e9, hi = -1e9;
    int n = 0;
    for (const auto& r : rows) {
      if (r.image_id != a.image_id) continue;
      sum += r.rt_seconds;
      lo = std::min(lo, r.rt_seconds);
      hi = std::max(hi, r.rt_seconds);
      ++n;
    }
    EXPECT_EQ(a.n_measurements, n);
    EXPECT_NEAR(a.mean_rt_seconds, sum / n, 1e-12);
    EXPECT_GE(a.mean_rt_seconds, lo);
    EXPECT_LE(a.mean_rt_seconds, hi);
  }
}

TEST(QuintileBinning, FivePoints) {
  std::vector<rt::ImageRT> v;
  for (int i = 1; i <= 5; ++i) v.push_back({"i" + std::to_string(i), double(i), 1});
  const auto b = rt::compute_quintile_binning(v, 5);
  ASSERT_EQ(b.cutoffs.size(), 4u);
  // Type-7 quantiles of {1..5} at 0.2, 0.4, 0.6, 0.8.
  EXPECT_NEAR(b.cutoffs[0], 1.8, 1e-12);
  EXPECT_NEAR(b.cutoffs[1], 2.6, 1e-12);
  EXPECT_NEAR(b.cutoffs[2], 3.4, 1e-12);
  EXPECT_NEAR(b.cutoffs[3], 4.2, 1e-12);
  for (int i = 1; i <= 5; ++i) EXPECT_EQ(rt::target_exit(b, i), i);
}

TEST(QuintileBinning, TwoExitsIsMedian) {
  std::vector<rt::ImageRT> v{{"a", 1.0, 1}, {"b", 9.0, 1}, {"c", 4.0, 1}, {"d", 2.0, 1}};
  const auto b = rt::compute_quintile_binning(v, 2);
  ASSERT_EQ(b.cutoffs.size(), 1u);
  EXPECT_DOUBLE_EQ(b.cutoffs[0], oracle::sorted_median({1, 9, 4, 2}));
}

TEST(QuintileBinning, UniformThousandGivesEvenBins) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 28.0);
  std::vector<rt::ImageRT> v;
  for (int i = 0; i < 1000; ++i) v.push_back({"i" + std::to_string(i), u(rng), 1});
  const auto b = rt::compute_quintile_binning(v, 5);
  std::vector<int> counts(5, 0);
  for (const auto& r : v) ++counts[rt::target_exit(b, r.mean_rt_seconds) - 1];
  for (int c : counts) EXPECT_NEAR(c, 200, 1);
}

TEST(QuintileBinning, Degenerate) {
  std::vector<rt::ImageRT> v{{"a", 1.0, 1}, {"b", 1.0, 1}, {"c", 2.0, 1}, {"d", 3.0, 1}, {"e", 4.0, 1}};
  EXPECT_EQ(error_kind([&] { rt::compute_quintile_binning(v, 5); }),
            static_cast<int>(ErrorKind::kDegenerateBinning));
  // Enough distinct values but heavy ties collapse two cutoffs.
  std::vector<rt::ImageRT> tied;
  for (int i = 0; i < 10; ++i) tied.push_back({"t" + std::to_string(i), 1.0, 1});
  for (int i = 2; i <= 5; ++i) tied.push_back({"u" + std::to_string(i), double(i), 1});
  EXPECT_EQ(error_kind([&] { rt::compute_quintile_binning(tied, 5); }),
            static_cast<int>(ErrorKind::kDegenerateBinning));
}

TEST(TargetExit, DocumentedCutoffFixture) {
  // Fixture cutoffs placing 5.5 s in the second bin.
  const rt::ExitBinning b{{3.0, 6.0, 9.0, 14.0}, 5};
  EXPECT_EQ(rt::target_exit(b, 5.5), 2);
  EXPECT_EQ(rt::target_exit(b, 1.0), 1);
  EXPECT_EQ(rt::target_exit(b, 3.0), 1);  // right-closed: tie goes to the lower exit
  EXPECT_EQ(rt::target_exit(b, 28.0), 5);
  EXPECT_EQ(error_kind([&] { rt::target_exit(b, 0.0); }), static_cast<int>(ErrorKind::kOutOfRange));
  EXPECT_EQ(error_kind([&] { rt::target_exit(b, 28.01); }), static_cast<int>(ErrorKind::kOutOfRange));
}

TEST(TargetExit, MonotoneInRt) {
  const rt::ExitBinning b{{2.5, 4.0, 7.5, 12.0}, 5};
  int prev = 1;
  for (double t = 0.01; t <= 28.0; t += 0.01) {
    const int e = rt::target_exit(b, t);
    EXPECT_GE(e, prev);
    prev = e;
  }
}

TEST(ClassPairs, StatsAndGroupBy) {
  std::vector<RTMeasurement> v;
  for (double t : {1.0, 2.0, 3.0}) {
    RTMeasurement m;
    m.image_id = "cat1";
    m.question_id = "q-dog";
    m.rt_seconds = t;
    v.push_back(m);
  }
  const std::map<std::string, std::string> img{{"cat1", "cat"}};
  const std::map<std::string, std::string> qs{{"q-dog", "dog"}, {"q-fox", "fox"}};
  auto lookup = [](const auto& map) {
    return [&map](const std::string& k) -> std::optional<std::string> {
      auto it = map.find(k);
      return it == map.end() ? std::nullopt : std::optional<std::string>(it->second);
    };
  };
  const auto s = rt::summarize_by_class_pair(v, lookup(img), lookup(qs));
  ASSERT_EQ(s.size(), 1u);  // (cat, fox) has no measurements
  const auto& st = s.at({"cat", "dog"});
  EXPECT_EQ(st.min, 1.0);
  EXPECT_EQ(st.median, 2.0);
  EXPECT_EQ(st.max, 3.0);
  EXPECT_EQ(st.count, 3);

  v[0].image_id = "ghost";
  EXPECT_EQ(error_kind([&] { rt::summarize_by_class_pair(v, lookup(img), lookup(qs)); }),
            static_cast<int>(ErrorKind::kLookup));
}

TEST(ClassPairs, NineGroupsMatchBruteForce) {
  const std::vector<std::string> classes{"a", "b", "c"};
  std::map<std::string, std::string> img, qs;
  std::vector<RTMeasurement> v;
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.5, 20.0);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int i = 0; i < 200; ++i) {
    const auto& ref = classes[pick(rng)];
    const auto& other = classes[pick(rng)];
    RTMeasurement m;
    m.image_id = ref + std::to_string(i);
    m.question_id = "q" + std::to_string(i);
    m.rt_seconds = u(rng);
    img[m.image_id] = ref;
    qs[m.question_id] = other;
    v.push_back(m);
  }
  const auto find = [](const std::map<std::string, std::string>& map) {
    return [&map](const std::string& k) -> std::optional<std::string> { return map.at(k); };
  };
  const auto s = rt::summarize_by_class_pair(v, find(img), find(qs));
  for (const auto& r : classes) {
    for (const auto& o : classes) {
      std::vector<double> xs;
      for (const auto& m : v) {
        if (img[m.image_id] == r && qs[m.question_id] == o) xs.push_back(m.rt_seconds);
      }
      if (xs.empty()) {
        EXPECT_FALSE(s.contains({r, o}));
        continue;
      }
      const auto& st = s.at({r, o});
      EXPECT_EQ(st.count, static_cast<int>(xs.size()));
      EXPECT_EQ(st.min, *std::min_element(xs.begin(), xs.end()));
      EXPECT_EQ(st.max, *std::max_element(xs.begin(), xs.end()));
      EXPECT_NEAR(st.median, oracle::sorted_median(xs), 1e-12);
      EXPECT_NEAR(st.mean, std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size(), 1e-12);
    }
  }
}

TEST(RtCsv, RawRoundTripPreservesRows) {
  const auto rows = submission("subject,with comma", "S1", 1, 3.25);
  std::stringstream ss;
  rt::write_rt_raw(ss, rows);
  EXPECT_EQ(rt::read_rt_raw(ss), rows);

  std::stringstream agg;
  const std::vector<rt::ImageRT> a{{"x", 1.5, 3}, {"y", 0.1 + 0.2, 1}};
  rt::write_rt_agg(agg, a);
  EXPECT_EQ(rt::read_rt_agg(agg), a);
}

TEST(RtCsv, HeaderOnlyAndBadRows) {
  std::stringstream ss;
  rt::write_rt_raw(ss, {});
  EXPECT_EQ(ss.str(),
            "subject_id,survey_id,question_id,image_id,chosen_option,correct_option,is_control,rt_seconds\n");
  EXPECT_TRUE(rt::read_rt_raw(ss).empty());
  std::stringstream bad(
      "subject_id,survey_id,question_id,image_id,chosen_option,correct_option,is_control,rt_seconds\n"
      "a,b,c,d,7,1,false,1.0\n");
  EXPECT_THROW(rt::read_rt_raw(bad), Error);
}

TEST(BinningJson, RoundTripAndValidation) {
  const rt::ExitBinning b{{1.5, 2.25, 4.0, 9.125}, 5};
  EXPECT_EQ(rt::binning_from_json(rt::binning_to_json(b)), b);
  EXPECT_THROW(rt::binning_from_json(R"({"n_exits": 5, "cutoffs": [1, 2, 2, 3]})"), Error);
  EXPECT_THROW(rt::binning_from_json(R"({"n_exits": 3, "cutoffs": [1]})"), Error);
}
