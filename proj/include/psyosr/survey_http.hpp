#pragma once

#include <string>

#include "psyosr/survey_service.hpp"

namespace httplib {
class Server;
}

namespace psyosr::survey {

/// JSON API plus image serving:
///   POST /api/sessions                  {subject_id}
///   GET  /api/sessions/{id}/next
///   POST /api/sessions/{id}/responses   {question_id, chosen_option, rt_ms}
///   GET  /api/export/rt_raw
///   GET  /static/images/{image_id}      file <images_dir>/<image_id>
/// Failures answer {"error": message, "kind": kind} with a 4xx status.
void install_routes(httplib::Server& server, SurveyService& service, std::string images_dir);

/// Blocks serving on host:port until the server is stopped.
void serve(SurveyService& service, const std::string& images_dir, const std::string& host, int port);

}  // namespace psyosr::survey
