#pragma once

// Two-row stimulus surveys: 5 reference images of one class on top, 5
// candidates below, and a sixth "not present" answer. Each ordered class
// pair yields one survey set of 20 task questions plus 5 control questions.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace psyosr::survey {

inline constexpr int kImagesPerRow = 5;
inline constexpr int kNotPresentOption = 6;
inline constexpr int kTaskQuestionsPerPair = 20;
inline constexpr int kControlQuestions = 5;
inline constexpr int kQuestionsPerSurvey = kTaskQuestionsPerPair + kControlQuestions;
inline constexpr int kMinImagesPerClass = 10;

struct SurveyQuestion {
  std::string question_id;
  std::string reference_class;
  std::string distractor_class;
  std::vector<std::string> reference_images;  // 5, all reference_class
  std::vector<std::string> candidate_images;  // 5
  int correct_option = 0;                      // 1..6
  bool is_control = false;
  std::optional<std::string> target_image_id;  // candidate at correct_option, if <= 5

  bool operator==(const SurveyQuestion&) const = default;
};

struct Survey {
  std::string survey_id;
  std::string pair_reference;
  std::string pair_other;
  std::vector<SurveyQuestion> questions;

  bool operator==(const Survey&) const = default;
};

using ImagePool = std::map<std::string, std::vector<std::string>>;  // class -> image ids

struct GenerationOptions {
  /// Share of task questions whose answer is "not present".
  double not_present_share = 0.2;
  /// Control pairing: reference class -> dissimilar class. Classes missing
  /// here pair with the class half-way around the class list.
  std::map<std::string, std::string> control_partner;
};

/// One survey set per ordered pair (reference, other), n^2 in total. A
/// self-pair takes its distractors from the next class in list order so that
/// every question still shows exactly two classes. Deterministic in `seed`.
/// Throws kGeneration naming the first class with fewer than 10 images.
std::vector<Survey> generate_survey_sets(const std::vector<std::string>& classes,
                                         const ImagePool& pool, std::uint64_t seed,
                                         const GenerationOptions& options = {});

/// Checks the per-question invariants against an image -> class map.
/// Returns an empty string when valid, else a description.
std::string check_question(const SurveyQuestion& q,
                           const std::map<std::string, std::string>& class_of_image);

std::string surveys_to_json(const std::vector<Survey>& surveys);
std::vector<Survey> surveys_from_json(const std::string& text);
void save_surveys(const std::vector<Survey>& surveys, const std::string& path);
std::vector<Survey> load_surveys(const std::string& path);

/// Class manifest CSV with columns class,image_id. Class order follows first
/// appearance.
struct ClassManifest {
  std::vector<std::string> classes;
  ImagePool pool;
};
ClassManifest read_class_manifest(std::istream& in);
ClassManifest load_class_manifest(const std::string& path);

}  // namespace psyosr::survey
