#include "psyosr/rt_data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "psyosr/csv.hpp"
#include "psyosr/error.hpp"
#include "psyosr/stats.hpp"

namespace psyosr::rt {

SubmissionVerdict validate_submission(std::span<const RTMeasurement> responses) {
  if (responses.empty()) {
    throw Error(ErrorKind::kStructural, "empty submission");
  }
  const auto& first = responses.front();
  std::unordered_set<std::string> seen;
  int controls = 0;
  int wrong = 0;
  for (const auto& r : responses) {
    if (r.subject_id != first.subject_id || r.survey_id != first.survey_id) {
      throw Error(ErrorKind::kStructural, "submission mixes subjects or surveys");
    }
    if (!seen.insert(r.question_id).second) {
      throw Error(ErrorKind::kStructural, "duplicate question_id " + r.question_id);
    }
    if (r.is_control) {
      ++controls;
      if (!r.answered_correctly()) ++wrong;
    }
  }
  if (controls != kControlsPerSurvey) {
    throw Error(ErrorKind::kStructural, "submission has " + std::to_string(controls) +
                                            " control questions, expected " +
                                            std::to_string(kControlsPerSurvey));
  }
  SubmissionVerdict v;
  v.wrong_controls = wrong;
  v.accepted = wrong < kRejectWrongControls;
  v.reason = v.accepted ? "ok"
                        : std::to_string(wrong) + " of " + std::to_string(controls) +
                              " control questions answered incorrectly";
  return v;
}

std::vector<RTMeasurement> filter_valid_measurements(const RTDataset& ds) {
  // Group by submission, preserving input order inside each group.
  std::map<std::pair<std::string, std::string>, std::vector<RTMeasurement>> submissions;
  for (const auto& m : ds.measurements) {
    submissions[{m.subject_id, m.survey_id}].push_back(m);
  }
  std::set<std::pair<std::string, std::string>> accepted;
  for (const auto& [key, rows] : submissions) {
    try {
      if (validate_submission(rows).accepted) accepted.insert(key);
    } catch (const Error&) {
      // malformed submissions contribute nothing
    }
  }
  std::vector<RTMeasurement> out;
  for (const auto& m : ds.measurements) {
    if (!accepted.contains({m.subject_id, m.survey_id})) continue;
    if (m.is_control) continue;
    if (m.correct_option == kNotPresentOption) continue;
    if (!m.answered_correctly()) continue;
    if (!(m.rt_seconds < ds.r_max_seconds)) continue;
    out.push_back(m);
  }
  return out;
}

std::vector<ImageRT> aggregate_mean_rt(std::span<const RTMeasurement> valid) {
  std::vector<ImageRT> out;
  std::vector<double> sums;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& m : valid) {
    auto [it, inserted] = index.try_emplace(m.image_id, out.size());
    if (inserted) {
      out.push_back({m.image_id, 0.0, 0});
      sums.push_back(0.0);
    }
    sums[it->second] += m.rt_seconds;
    ++out[it->second].n_measurements;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].mean_rt_seconds = sums[i] / out[i].n_measurements;
  }
  return out;
}

ExitBinning compute_quintile_binning(std::span<const ImageRT> rts, int n_exits) {
  if (n_exits < 2) {
    throw Error(ErrorKind::kParameter, "n_exits must be at least 2");
  }
  if (rts.empty()) {
    throw Error(ErrorKind::kDegenerateBinning, "no RT values to bin");
  }
  std::vector<double> values;
  values.reserve(rts.size());
  for (const auto& r : rts) values.push_back(r.mean_rt_seconds);
  const std::set<double> distinct(values.begin(), values.end());
  if (static_cast<int>(distinct.size()) < n_exits) {
    throw Error(ErrorKind::kDegenerateBinning,
                std::to_string(distinct.size()) + " distinct RT values cannot fill " +
                    std::to_string(n_exits) + " bins");
  }
  std::vector<double> probs;
  for (int k = 1; k < n_exits; ++k) probs.push_back(static_cast<double>(k) / n_exits);
  ExitBinning b;
  b.n_exits = n_exits;
  b.cutoffs = stats::quantiles(values, probs);
  for (std::size_t i = 1; i < b.cutoffs.size(); ++i) {
    if (!(b.cutoffs[i] > b.cutoffs[i - 1])) {
      throw Error(ErrorKind::kDegenerateBinning, "tied RT values collapse adjacent bins");
    }
  }
  return b;
}

int target_exit(const ExitBinning& binning, double mean_rt, double r_max_seconds) {
  if (!(mean_rt > 0.0) || mean_rt > r_max_seconds) {
    throw Error(ErrorKind::kOutOfRange, "mean RT " + csv::format_double(mean_rt) +
                                            " s is outside (0, " +
                                            csv::format_double(r_max_seconds) + "]");
  }
  // First cutoff >= RT gives the right-closed bin.
  auto it = std::lower_bound(binning.cutoffs.begin(), binning.cutoffs.end(), mean_rt);
  return static_cast<int>(it - binning.cutoffs.begin()) + 1;
}

std::map<ClassPair, PairStats> summarize_by_class_pair(
    std::span<const RTMeasurement> valid,
    const std::function<std::optional<std::string>(const std::string&)>& class_of_image,
    const std::function<std::optional<std::string>(const std::string&)>& distractor_of_question) {
  std::map<ClassPair, std::vector<double>> groups;
  for (const auto& m : valid) {
    auto ref = class_of_image(m.image_id);
    if (!ref) throw Error(ErrorKind::kLookup, "unknown image_id " + m.image_id);
    auto other = distractor_of_question(m.question_id);
    if (!other) throw Error(ErrorKind::kLookup, "unknown question_id " + m.question_id);
    groups[{*ref, *other}].push_back(m.rt_seconds);
  }
  std::map<ClassPair, PairStats> out;
  for (const auto& [pair, v] : groups) {
    PairStats s;
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    s.median = stats::median(v);
    s.mean = stats::mean(v);
    s.count = static_cast<int>(v.size());
    out.emplace(pair, s);
  }
  return out;
}

void write_rt_raw(std::ostream& out, std::span<const RTMeasurement> rows) {
  csv::write_row(out, {"subject_id", "survey_id", "question_id", "image_id", "chosen_option",
                       "correct_option", "is_control", "rt_seconds"});
  for (const auto& m : rows) {
    csv::write_row(out, {m.subject_id, m.survey_id, m.question_id, m.image_id,
                         std::to_string(m.chosen_option), std::to_string(m.correct_option),
                         m.is_control ? "true" : "false", csv::format_double(m.rt_seconds)});
  }
}

std::vector<RTMeasurement> read_rt_raw(std::istream& in) {
  const auto t = csv::read(in);
  const auto c_subject = t.column("subject_id");
  const auto c_survey = t.column("survey_id");
  const auto c_question = t.column("question_id");
  const auto c_image = t.column("image_id");
  const auto c_chosen = t.column("chosen_option");
  const auto c_correct = t.column("correct_option");
  const auto c_control = t.column("is_control");
  const auto c_rt = t.column("rt_seconds");
  std::vector<RTMeasurement> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    RTMeasurement m;
    m.subject_id = row[c_subject];
    m.survey_id = row[c_survey];
    m.question_id = row[c_question];
    m.image_id = row[c_image];
    m.chosen_option = static_cast<int>(csv::parse_int(row[c_chosen], "chosen_option"));
    m.correct_option = static_cast<int>(csv::parse_int(row[c_correct], "correct_option"));
    m.is_control = csv::parse_bool(row[c_control], "is_control");
    m.rt_seconds = csv::parse_double(row[c_rt], "rt_seconds");
    if (m.chosen_option < 1 || m.chosen_option > 6 || m.correct_option < 1 ||
        m.correct_option > 6) {
      throw Error(ErrorKind::kParse, "answer option outside 1..6 in question " + m.question_id);
    }
    if (!(m.rt_seconds >= 0.0)) {
      throw Error(ErrorKind::kParse, "negative rt_seconds in question " + m.question_id);
    }
    out.push_back(std::move(m));
  }
  return out;
}

void write_rt_agg(std::ostream& out, std::span<const ImageRT> rows) {
  csv::write_row(out, {"image_id", "mean_rt_seconds", "n_measurements"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.image_id, csv::format_double(r.mean_rt_seconds),
                         std::to_string(r.n_measurements)});
  }
}

std::vector<ImageRT> read_rt_agg(std::istream& in) {
  const auto t = csv::read(in);
  const auto c_image = t.column("image_id");
  const auto c_mean = t.column("mean_rt_seconds");
  const auto c_n = t.column("n_measurements");
  std::vector<ImageRT> out;
  for (const auto& row : t.rows) {
    ImageRT r{row[c_image], csv::parse_double(row[c_mean], "mean_rt_seconds"),
              static_cast<int>(csv::parse_int(row[c_n], "n_measurements"))};
    if (!(r.mean_rt_seconds > 0.0) || r.n_measurements < 1) {
      throw Error(ErrorKind::kParse, "invalid aggregate for image " + r.image_id);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string binning_to_json(const ExitBinning& binning) {
  nlohmann::json j;
  j["n_exits"] = binning.n_exits;
  j["cutoffs"] = binning.cutoffs;
  return j.dump();
}

ExitBinning binning_from_json(const std::string& text) {
  ExitBinning b;
  try {
    const auto j = nlohmann::json::parse(text);
    b.n_exits = j.at("n_exits").get<int>();
    b.cutoffs = j.at("cutoffs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("binning JSON: ") + e.what());
  }
  if (b.n_exits < 2 || static_cast<int>(b.cutoffs.size()) != b.n_exits - 1 ||
      !std::is_sorted(b.cutoffs.begin(), b.cutoffs.end(), std::less_equal<>())) {
    throw Error(ErrorKind::kParse, "binning JSON needs n_exits-1 strictly ascending cutoffs");
  }
  return b;
}

}  // namespace psyosr::rt
