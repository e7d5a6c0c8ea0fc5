#include "psyosr/survey.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "psyosr/csv.hpp"
#include "psyosr/error.hpp"

namespace psyosr::survey {

namespace {

std::vector<std::string> pick(const std::vector<std::string>& from, std::size_t n,
                              std::mt19937_64& rng) {
  std::vector<std::string> copy = from;
  std::shuffle(copy.begin(), copy.end(), rng);
  copy.resize(n);
  return copy;
}

// Reference row plus a candidate row with the reference-class image (if any)
// at `correct_option`.
SurveyQuestion make_question(std::string id, const std::string& ref, const std::string& other,
                             int correct_option, bool control, const ImagePool& pool,
                             std::mt19937_64& rng) {
  SurveyQuestion q;
  q.question_id = std::move(id);
  q.reference_class = ref;
  q.distractor_class = other;
  q.correct_option = correct_option;
  q.is_control = control;
  const bool present = correct_option <= kImagesPerRow;
  auto ref_imgs = pick(pool.at(ref), kImagesPerRow + (present ? 1 : 0), rng);
  q.reference_images.assign(ref_imgs.begin(), ref_imgs.begin() + kImagesPerRow);
  q.candidate_images = pick(pool.at(other), present ? kImagesPerRow - 1 : kImagesPerRow, rng);
  if (present) {
    q.target_image_id = ref_imgs.back();
    q.candidate_images.insert(q.candidate_images.begin() + (correct_option - 1), ref_imgs.back());
  }
  return q;
}

std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

}  // namespace

std::vector<Survey> generate_survey_sets(const std::vector<std::string>& classes,
                                         const ImagePool& pool, std::uint64_t seed,
                                         const GenerationOptions& options) {
  const std::size_t n = classes.size();
  if (n < 2) throw Error(ErrorKind::kGeneration, "survey generation needs at least 2 classes");
  if (std::set<std::string>(classes.begin(), classes.end()).size() != n) {
    throw Error(ErrorKind::kGeneration, "duplicate class labels");
  }
  for (const auto& c : classes) {
    auto it = pool.find(c);
    if (it == pool.end() || it->second.size() < kMinImagesPerClass ||
        std::set<std::string>(it->second.begin(), it->second.end()).size() != it->second.size()) {
      throw Error(ErrorKind::kGeneration,
                  "class '" + c + "' needs at least " + std::to_string(kMinImagesPerClass) +
                      " distinct images");
    }
  }
  if (!(options.not_present_share >= 0.0 && options.not_present_share < 1.0)) {
    throw Error(ErrorKind::kGeneration, "not_present_share must be in [0, 1)");
  }
  for (const auto& [ref, partner] : options.control_partner) {
    if (!pool.contains(partner) || partner == ref) {
      throw Error(ErrorKind::kGeneration, "invalid control partner for class '" + ref + "'");
    }
  }
  const int n_not_present = static_cast<int>(std::lround(options.not_present_share * kTaskQuestionsPerPair));
  const int width = static_cast<int>(std::to_string(n * n).size());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> position(1, kImagesPerRow);
  std::vector<Survey> out;
  out.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ref = classes[i];
    auto partner_it = options.control_partner.find(ref);
    const std::string& control_other =
        partner_it != options.control_partner.end() ? partner_it->second : classes[(i + n / 2) % n];
    for (std::size_t j = 0; j < n; ++j) {
      Survey s;
      s.survey_id = "S" + zero_pad(out.size() + 1, width);
      s.pair_reference = ref;
      s.pair_other = classes[j];
      const std::string& distractor = i == j ? classes[(j + 1) % n] : classes[j];

      // Which task slots ask "not present", and where controls are inserted.
      std::vector<int> answers(kTaskQuestionsPerPair);
      for (int t = 0; t < kTaskQuestionsPerPair; ++t) {
        answers[t] = t < n_not_present ? kNotPresentOption : position(rng);
      }
      std::shuffle(answers.begin(), answers.end(), rng);
      std::vector<bool> is_control(kQuestionsPerSurvey, false);
      std::fill(is_control.begin(), is_control.begin() + kControlQuestions, true);
      std::shuffle(is_control.begin(), is_control.end(), rng);

      int task = 0;
      for (int qi = 0; qi < kQuestionsPerSurvey; ++qi) {
        std::string qid = s.survey_id + "-Q" + zero_pad(static_cast<std::size_t>(qi + 1), 2);
        if (is_control[qi]) {
          s.questions.push_back(make_question(std::move(qid), ref, control_other, position(rng),
                                              true, pool, rng));
        } else {
          s.questions.push_back(
              make_question(std::move(qid), ref, distractor, answers[task++], false, pool, rng));
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::string check_question(const SurveyQuestion& q,
                           const std::map<std::string, std::string>& class_of_image) {
  const auto cls = [&](const std::string& img) -> std::string {
    auto it = class_of_image.find(img);
    return it == class_of_image.end() ? std::string() : it->second;
  };
  if (q.reference_images.size() != kImagesPerRow || q.candidate_images.size() != kImagesPerRow) {
    return "rows must hold 5 images";
  }
  if (q.correct_option < 1 || q.correct_option > kNotPresentOption) return "correct_option outside 1..6";
  for (const auto& img : q.reference_images) {
    if (cls(img) != q.reference_class) return "reference image " + img + " not of reference class";
  }
  std::set<std::string> classes_shown{q.reference_class};
  for (int k = 1; k <= kImagesPerRow; ++k) {
    const auto& img = q.candidate_images[static_cast<std::size_t>(k - 1)];
    const auto c = cls(img);
    classes_shown.insert(c);
    if (k == q.correct_option) {
      if (c != q.reference_class) return "correct candidate is not of reference class";
      if (q.target_image_id != img) return "target_image_id does not match the correct candidate";
    } else if (c != q.distractor_class || c == q.reference_class) {
      return "candidate " + std::to_string(k) + " is not of the distractor class";
    }
  }
  if (q.correct_option == kNotPresentOption && q.target_image_id) {
    return "not-present question carries a target image";
  }
  if (classes_shown.size() != 2) return "question must show exactly two classes";
  return {};
}

std::string surveys_to_json(const std::vector<Survey>& surveys) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : surveys) {
    nlohmann::json js;
    js["survey_id"] = s.survey_id;
    js["pair"] = {s.pair_reference, s.pair_other};
    js["questions"] = nlohmann::json::array();
    for (const auto& q : s.questions) {
      nlohmann::json jq;
      jq["question_id"] = q.question_id;
      jq["reference_class"] = q.reference_class;
      jq["distractor_class"] = q.distractor_class;
      jq["reference_images"] = q.reference_images;
      jq["candidate_images"] = q.candidate_images;
      jq["correct_option"] = q.correct_option;
      jq["is_control"] = q.is_control;
      jq["target_image_id"] = q.target_image_id ? nlohmann::json(*q.target_image_id) : nlohmann::json(nullptr);
      js["questions"].push_back(std::move(jq));
    }
    arr.push_back(std::move(js));
  }
  return nlohmann::json{{"surveys", arr}}.dump();
}

std::vector<Survey> surveys_from_json(const std::string& text) {
  std::vector<Survey> out;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& js : j.at("surveys")) {
      Survey s;
      s.survey_id = js.at("survey_id").get<std::string>();
      const auto pair = js.at("pair").get<std::vector<std::string>>();
      if (pair.size() != 2) throw Error(ErrorKind::kParse, "survey pair must have two classes");
      s.pair_reference = pair[0];
      s.pair_other = pair[1];
      for (const auto& jq : js.at("questions")) {
        SurveyQuestion q;
        q.question_id = jq.at("question_id").get<std::string>();
        q.reference_class = jq.at("reference_class").get<std::string>();
        q.distractor_class = jq.at("distractor_class").get<std::string>();
        q.reference_images = jq.at("reference_images").get<std::vector<std::string>>();
        q.candidate_images = jq.at("candidate_images").get<std::vector<std::string>>();
        q.correct_option = jq.at("correct_option").get<int>();
        q.is_control = jq.at("is_control").get<bool>();
        if (!jq.at("target_image_id").is_null()) q.target_image_id = jq.at("target_image_id").get<std::string>();
        s.questions.push_back(std::move(q));
      }
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("surveys JSON: ") + e.what());
  }
  return out;
}

void save_surveys(const std::vector<Survey>& surveys, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << surveys_to_json(surveys) << '\n';
}

std::vector<Survey> load_surveys(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return surveys_from_json(ss.str());
}

ClassManifest read_class_manifest(std::istream& in) {
  const auto t = csv::read(in);
  const auto c_class = t.column("class");
  const auto c_image = t.column("image_id");
  ClassManifest m;
  for (const auto& row : t.rows) {
    const auto& cls = row[c_class];
    if (!m.pool.contains(cls)) m.classes.push_back(cls);
    m.pool[cls].push_back(row[c_image]);
  }
  return m;
}

ClassManifest load_class_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return read_class_manifest(in);
}

}  // namespace psyosr::survey
