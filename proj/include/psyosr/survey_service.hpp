#pragma once

// Session bookkeeping for timed survey collection. All state changes are
// appended to an event log; replaying the log rebuilds the same state.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "psyosr/rt_data.hpp"
#include "psyosr/survey.hpp"

namespace psyosr::survey {

struct ServiceOptions {
  /// Distinct subjects required per question.
  int quorum = 5;
};

struct Response {
  std::string question_id;
  int chosen_option = 0;
  std::int64_t rt_ms = 0;
  /// Server-side serve-to-receive delta, audit only; never replaces rt_ms.
  std::optional<std::int64_t> server_delta_ms;

  bool operator==(const Response&) const = default;
};

struct Session {
  std::string session_id;
  std::string subject_id;
  std::string survey_id;
  int cursor = 0;
  std::vector<Response> responses;

  bool operator==(const Session&) const = default;
};

struct Event {
  enum class Type { kSessionCreated, kResponseRecorded } type = Type::kSessionCreated;
  std::string session_id;
  std::string subject_id;  // session events
  std::string survey_id;   // session events
  Response response;       // response events

  bool operator==(const Event&) const = default;
};

std::string event_to_json(const Event& e);
Event event_from_json(const std::string& line);

struct SessionInfo {
  std::string session_id;
  std::string survey_id;
  int n_questions = 0;
};

struct QuestionView {
  std::string question_id;
  int index = 0;
  std::vector<std::string> reference_images;
  std::vector<std::string> candidate_images;
};

struct Ack {
  bool stored = false;  // false for an exact duplicate resend
};

class SurveyService {
 public:
  explicit SurveyService(std::vector<Survey> surveys, ServiceOptions options = {});

  /// Applies logged events in order to a service that has no events yet.
  /// Throws kSequencing if the service already holds state.
  void replay(const std::vector<Event>& events);

  /// Binds the subject to the first survey with open quorum slots that it has
  /// never been assigned. Throws kExhausted when none is left.
  SessionInfo assign_survey(const std::string& subject_id);

  /// Current question, or empty once all questions are answered.
  /// Throws kNotFound for an unknown session.
  std::optional<QuestionView> next_question(const std::string& session_id);

  /// Accepts the answer to the session's current question (rt_seconds =
  /// rt_ms / 1000). An exact resend of an answered question is acknowledged
  /// without storing. Other out-of-order answers throw kSequencing.
  Ack record_response(const std::string& session_id, const std::string& question_id,
                      int chosen_option, std::int64_t rt_ms);

  /// rt_raw CSV of every completed session, from a consistent snapshot.
  std::string export_rt_raw() const;
  std::vector<rt::RTMeasurement> completed_measurements() const;

  std::vector<Session> sessions() const;
  std::vector<Event> events() const;
  int remaining_slots(const std::string& survey_id) const;

  /// Called under the service lock after each appended event.
  void set_event_sink(std::function<void(const Event&)> sink);

 private:
  void apply(const Event& e);
  const Survey& survey_of(const Session& s) const;

  mutable std::mutex mu_;
  std::vector<Survey> surveys_;
  std::map<std::string, std::size_t> survey_index_;
  ServiceOptions options_;
  std::map<std::string, int> slots_;
  std::map<std::string, std::set<std::string>> assigned_;   // subject -> surveys
  std::map<std::string, std::set<std::string>> answered_;   // subject -> questions
  std::vector<std::string> session_order_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::chrono::steady_clock::time_point> served_at_;
  std::vector<Event> events_;
  std::function<void(const Event&)> sink_;
};

}  // namespace psyosr::survey
