#include "psyosr/survey_service.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "psyosr/error.hpp"

namespace psyosr::survey {

std::string event_to_json(const Event& e) {
  nlohmann::ordered_json j;
  j["session_id"] = e.session_id;
  if (e.type == Event::Type::kSessionCreated) {
    j["type"] = "session";
    j["subject_id"] = e.subject_id;
    j["survey_id"] = e.survey_id;
  } else {
    j["type"] = "response";
    j["question_id"] = e.response.question_id;
    j["chosen_option"] = e.response.chosen_option;
    j["rt_ms"] = e.response.rt_ms;
    if (e.response.server_delta_ms) j["server_delta_ms"] = *e.response.server_delta_ms;
  }
  return j.dump();
}

Event event_from_json(const std::string& line) {
  Event e;
  try {
    const auto j = nlohmann::json::parse(line);
    e.session_id = j.at("session_id").get<std::string>();
    const auto type = j.at("type").get<std::string>();
    if (type == "session") {
      e.type = Event::Type::kSessionCreated;
      e.subject_id = j.at("subject_id").get<std::string>();
      e.survey_id = j.at("survey_id").get<std::string>();
    } else if (type == "response") {
      e.type = Event::Type::kResponseRecorded;
      e.response.question_id = j.at("question_id").get<std::string>();
      e.response.chosen_option = j.at("chosen_option").get<int>();
      e.response.rt_ms = j.at("rt_ms").get<std::int64_t>();
      if (j.contains("server_delta_ms")) e.response.server_delta_ms = j.at("server_delta_ms").get<std::int64_t>();
    } else {
      throw Error(ErrorKind::kParse, "unknown event type " + type);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::kParse, std::string("event log: ") + ex.what());
  }
  return e;
}

SurveyService::SurveyService(std::vector<Survey> surveys, ServiceOptions options)
    : surveys_(std::move(surveys)), options_(options) {
  if (options_.quorum < 1) throw Error(ErrorKind::kParameter, "quorum must be positive");
  std::set<std::string> question_ids;
  for (std::size_t i = 0; i < surveys_.size(); ++i) {
    const auto& s = surveys_[i];
    if (!survey_index_.emplace(s.survey_id, i).second) {
      throw Error(ErrorKind::kStructural, "duplicate survey_id " + s.survey_id);
    }
    int controls = 0;
    for (const auto& q : s.questions) {
      if (!question_ids.insert(q.question_id).second) {
        throw Error(ErrorKind::kStructural, "duplicate question_id " + q.question_id);
      }
      controls += q.is_control ? 1 : 0;
    }
    if (s.questions.size() != kQuestionsPerSurvey || controls != kControlQuestions) {
      throw Error(ErrorKind::kStructural,
                  "survey " + s.survey_id + " must have 25 questions with 5 controls");
    }
    slots_[s.survey_id] = options_.quorum;
  }
}

const Survey& SurveyService::survey_of(const Session& s) const {
  return surveys_[survey_index_.at(s.survey_id)];
}

void SurveyService::apply(const Event& e) {
  if (e.type == Event::Type::kSessionCreated) {
    Session s{e.session_id, e.subject_id, e.survey_id, 0, {}};
    --slots_[e.survey_id];
    assigned_[e.subject_id].insert(e.survey_id);
    session_order_.push_back(e.session_id);
    sessions_.emplace(e.session_id, std::move(s));
  } else {
    auto& s = sessions_.at(e.session_id);
    s.responses.push_back(e.response);
    ++s.cursor;
    answered_[s.subject_id].insert(e.response.question_id);
  }
  events_.push_back(e);
  if (sink_) sink_(e);
}

void SurveyService::replay(const std::vector<Event>& events) {
  std::lock_guard lock(mu_);
  if (!events_.empty()) throw Error(ErrorKind::kSequencing, "replay needs a fresh service");
  for (const auto& e : events) {
    if (e.type == Event::Type::kSessionCreated) {
      if (!survey_index_.contains(e.survey_id) || sessions_.contains(e.session_id)) {
        throw Error(ErrorKind::kParse, "event log does not match the survey file");
      }
    } else {
      auto it = sessions_.find(e.session_id);
      if (it == sessions_.end()) throw Error(ErrorKind::kParse, "event for unknown session");
      const auto& qs = survey_of(it->second).questions;
      if (it->second.cursor >= static_cast<int>(qs.size()) ||
          qs[static_cast<std::size_t>(it->second.cursor)].question_id != e.response.question_id) {
        throw Error(ErrorKind::kParse, "event log response out of order");
      }
    }
    apply(e);
  }
}

SessionInfo SurveyService::assign_survey(const std::string& subject_id) {
  std::lock_guard lock(mu_);
  const auto& mine = assigned_[subject_id];
  const auto& answered = answered_[subject_id];
  for (const auto& s : surveys_) {
    if (slots_[s.survey_id] <= 0 || mine.contains(s.survey_id)) continue;
    bool seen = false;
    for (const auto& q : s.questions) seen = seen || answered.contains(q.question_id);
    if (seen) continue;
    Event e;
    e.type = Event::Type::kSessionCreated;
    std::ostringstream id;
    id << "sess-" << (sessions_.size() + 1);
    e.session_id = id.str();
    e.subject_id = subject_id;
    e.survey_id = s.survey_id;
    apply(e);
    return {e.session_id, s.survey_id, static_cast<int>(s.questions.size())};
  }
  throw Error(ErrorKind::kExhausted, "no eligible survey left for subject " + subject_id);
}

std::optional<QuestionView> SurveyService::next_question(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorKind::kNotFound, "unknown session " + session_id);
  const auto& qs = survey_of(it->second).questions;
  const int cursor = it->second.cursor;
  if (cursor >= static_cast<int>(qs.size())) return std::nullopt;
  const auto& q = qs[static_cast<std::size_t>(cursor)];
  served_at_[session_id] = std::chrono::steady_clock::now();
  return QuestionView{q.question_id, cursor, q.reference_images, q.candidate_images};
}

Ack SurveyService::record_response(const std::string& session_id, const std::string& question_id,
                                   int chosen_option, std::int64_t rt_ms) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorKind::kNotFound, "unknown session " + session_id);
  if (chosen_option < 1 || chosen_option > kNotPresentOption) {
    throw Error(ErrorKind::kParameter, "chosen_option must be in 1..6");
  }
  if (rt_ms < 0) throw Error(ErrorKind::kParameter, "rt_ms must be nonnegative");
  const auto& session = it->second;
  for (const auto& r : session.responses) {
    if (r.question_id != question_id) continue;
    if (r.chosen_option == chosen_option && r.rt_ms == rt_ms) return {false};
    throw Error(ErrorKind::kSequencing, "question " + question_id + " was already answered");
  }
  const auto& qs = survey_of(session).questions;
  if (session.cursor >= static_cast<int>(qs.size())) {
    throw Error(ErrorKind::kSequencing, "session " + session_id + " is complete");
  }
  if (qs[static_cast<std::size_t>(session.cursor)].question_id != question_id) {
    throw Error(ErrorKind::kSequencing, "question " + question_id + " is not the current question");
  }
  Event e;
  e.type = Event::Type::kResponseRecorded;
  e.session_id = session_id;
  e.response = {question_id, chosen_option, rt_ms, std::nullopt};
  if (auto served = served_at_.find(session_id); served != served_at_.end()) {
    e.response.server_delta_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - served->second)
                                     .count();
  }
  apply(e);
  return {true};
}

std::vector<rt::RTMeasurement> SurveyService::completed_measurements() const {
  std::lock_guard lock(mu_);
  std::vector<rt::RTMeasurement> out;
  for (const auto& id : session_order_) {
    const auto& s = sessions_.at(id);
    const auto& qs = survey_of(s).questions;
    if (s.cursor < static_cast<int>(qs.size())) continue;
    for (std::size_t i = 0; i < s.responses.size(); ++i) {
      const auto& q = qs[i];
      const auto& r = s.responses[i];
      out.push_back({s.subject_id, s.survey_id, q.question_id, q.target_image_id.value_or(""),
                     r.chosen_option, q.correct_option, q.is_control,
                     static_cast<double>(r.rt_ms) / 1000.0});
    }
  }
  return out;
}

std::string SurveyService::export_rt_raw() const {
  const auto rows = completed_measurements();
  std::ostringstream out;
  rt::write_rt_raw(out, rows);
  return out.str();
}

std::vector<Session> SurveyService::sessions() const {
  std::lock_guard lock(mu_);
  std::vector<Session> out;
  for (const auto& id : session_order_) out.push_back(sessions_.at(id));
  return out;
}

std::vector<Event> SurveyService::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

int SurveyService::remaining_slots(const std::string& survey_id) const {
  std::lock_guard lock(mu_);
  auto it = slots_.find(survey_id);
  if (it == slots_.end()) throw Error(ErrorKind::kNotFound, "unknown survey " + survey_id);
  return it->second;
}

void SurveyService::set_event_sink(std::function<void(const Event&)> sink) {
  std::lock_guard lock(mu_);
  sink_ = std::move(sink);
}

}  // namespace psyosr::survey
