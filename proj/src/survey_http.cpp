#include "psyosr/survey_http.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "psyosr/error.hpp"

namespace psyosr::survey {

namespace {

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kSequencing:
    case ErrorKind::kExhausted: return 409;
    default: return 400;
  }
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& msg) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", msg}, {"kind", kind}}.dump(), "application/json");
}

// Runs a handler and turns library errors into JSON error replies.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "parse", e.what());
    }
  };
}

std::string image_url(const std::string& id) { return "/static/images/" + id; }

std::string content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

}  // namespace

void install_routes(httplib::Server& server, SurveyService& service, std::string images_dir) {
  server.Post("/api/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const auto info = service.assign_survey(body.at("subject_id").get<std::string>());
    res.set_content(nlohmann::json{{"session_id", info.session_id},
                                   {"survey_id", info.survey_id},
                                   {"n_questions", info.n_questions}}
                        .dump(),
                    "application/json");
  }));

  server.Get(R"(/api/sessions/([^/]+)/next)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const auto view = service.next_question(req.matches[1]);
               nlohmann::json j;
               if (!view) {
                 j["done"] = true;
               } else {
                 std::vector<std::string> refs, cands;
                 for (const auto& id : view->reference_images) refs.push_back(image_url(id));
                 for (const auto& id : view->candidate_images) cands.push_back(image_url(id));
                 j = {{"question_id", view->question_id},
                      {"index", view->index},
                      {"reference_images", refs},
                      {"candidate_images", cands},
                      {"allow_not_present", true}};
               }
               res.set_content(j.dump(), "application/json");
             }));

  server.Post(R"(/api/sessions/([^/]+)/responses)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto body = nlohmann::json::parse(req.body);
                service.record_response(req.matches[1], body.at("question_id").get<std::string>(),
                                        body.at("chosen_option").get<int>(),
                                        body.at("rt_ms").get<std::int64_t>());
                res.set_content(nlohmann::json{{"ok", true}}.dump(), "application/json");
              }));

  server.Get("/api/export/rt_raw", guarded([&service](const httplib::Request&, httplib::Response& res) {
    res.set_content(service.export_rt_raw(), "text/csv; charset=utf-8");
  }));

  server.Get(R"(/static/images/([^/]+))",
             guarded([dir = std::move(images_dir)](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               if (id.find("..") != std::string::npos || id.find('\\') != std::string::npos) {
                 throw Error(ErrorKind::kParameter, "invalid image id");
               }
               const std::filesystem::path path = std::filesystem::path(dir) / id;
               std::ifstream in(path, std::ios::binary);
               if (!in) throw Error(ErrorKind::kNotFound, "no image " + id);
               std::ostringstream bytes;
               bytes << in.rdbuf();
               res.set_content(bytes.str(), content_type_for(path));
             }));
}

void serve(SurveyService& service, const std::string& images_dir, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, service, images_dir);
  if (!server.listen(host, port)) {
    throw Error(ErrorKind::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace psyosr::survey
