#pragma once

#include <functional>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "tutor/service.hpp"

namespace tutor {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kUnauthorized: return 401;
    case ErrorCode::kForbidden: return 403;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kUnavailable: return 409;
    case ErrorCode::kValidation: return 422;
    case ErrorCode::kIo:
    case ErrorCode::kInternal: return 500;
  }
  return 500;
}

inline nlohmann::json error_body(std::string_view code, std::string_view message) {
  return nlohmann::json{{"code", code}, {"message", message}};
}

namespace detail {

struct ApiRequest {
  const httplib::Request& http;
  Principal who;

  const std::string& param(const char* name) const { return http.path_params.at(name); }

  nlohmann::json body() const {
    if (http.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(http.body);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object");
    return j;
  }
};

using ApiHandler = std::function<nlohmann::json(const ApiRequest&, int& status)>;

inline std::string bearer_token(const httplib::Request& req) {
  auto h = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (h.size() <= kPrefix.size() || h.compare(0, kPrefix.size(), kPrefix) != 0) return {};
  return h.substr(kPrefix.size());
}

inline std::vector<std::string> string_list(const nlohmann::json& body, const char* key, bool required) {
  if (!body.contains(key)) {
    if (required) throw Error(ErrorCode::kInvalidArgument, std::string("missing '") + key + "'");
    return {};
  }
  return body.at(key).get<std::vector<std::string>>();
}

}  // namespace detail

// Registers the JSON API on `server`. Every route needs a bearer token;
// failures are {code, message} with the matching status.
inline void install_routes(httplib::Server& server, Service& svc, const Credentials& creds) {
  auto wrap = [&creds](detail::ApiHandler handler) {
    return [&creds, handler](const httplib::Request& req, httplib::Response& res) {
      int status = 200;
      nlohmann::json out;
      try {
        auto who = creds.authenticate(detail::bearer_token(req));
        if (!who) throw Error(ErrorCode::kUnauthorized, "missing or invalid bearer token");
        out = handler(detail::ApiRequest{req, *who}, status);
      } catch (const Error& e) {
        status = http_status(e.code());
        out = error_body(to_string(e.code()), e.what());
      } catch (const nlohmann::json::exception& e) {
        status = 400;
        out = error_body(to_string(ErrorCode::kInvalidArgument), e.what());
      } catch (const std::exception& e) {
        status = 500;
        out = error_body(to_string(ErrorCode::kInternal), e.what());
      }
      res.status = status;
      res.set_content(out.dump(), "application/json");
    };
  };

  server.set_payload_max_length(4u << 20);
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    auto code = res.status == 404 ? ErrorCode::kNotFound : ErrorCode::kInvalidArgument;
    res.set_content(error_body(to_string(code), "no such endpoint").dump(), "application/json");
  });

  server.Post("/classes", wrap([&svc](const detail::ApiRequest& r, int& status) {
    auto b = r.body();
    auto cls = svc.create_class(r.who, b.at("name").get<std::string>(), b.at("subject").get<std::string>(),
                                detail::string_list(b, "roster", false));
    status = 201;
    return nlohmann::json(cls);
  }));

  server.Post("/classes/:id/questions", wrap([&svc](const detail::ApiRequest& r, int& status) {
    auto b = r.body();
    auto created = svc.create_question(r.who, r.param("id"), b.at("title").get<std::string>(),
                                       detail::string_list(b, "sources", true));
    status = 201;
    return nlohmann::json(created);
  }));

  server.Get("/classes/:id/questions", wrap([&svc](const detail::ApiRequest& r, int&) {
    std::string role = r.http.has_param("role") ? r.http.get_param_value("role")
                       : r.who.role == Role::kTeacher ? "teacher"
                                                      : "student";
    if (role != "teacher" && role != "student") throw Error(ErrorCode::kInvalidArgument, "role must be teacher or student");
    return nlohmann::json(svc.list_questions(r.who, r.param("id"), role == "student"));
  }));

  server.Put("/questions/:id/concepts", wrap([&svc](const detail::ApiRequest& r, int&) {
    auto b = r.body();
    std::vector<ConceptEdit> edits;
    for (const auto& e : b.at("edits")) edits.push_back(e.get<ConceptEdit>());
    return nlohmann::json(svc.update_concepts(r.who, r.param("id"), edits));
  }));

  server.Post("/questions/:id/approve", wrap([&svc](const detail::ApiRequest& r, int&) {
    auto b = r.body();
    std::vector<std::size_t> drafts;
    if (b.contains("drafts")) drafts = b.at("drafts").get<std::vector<std::size_t>>();
    return nlohmann::json(svc.approve(r.who, r.param("id"), drafts));
  }));

  server.Post("/questions/:id/answers", wrap([&svc](const detail::ApiRequest& r, int&) {
    auto b = r.body();
    return nlohmann::json(svc.submit_answer(r.who, r.param("id"), b.at("transcript").get<std::string>()));
  }));

  server.Get("/questions/:id/recommendations", wrap([&svc](const detail::ApiRequest& r, int&) {
    return nlohmann::json{{"recommendations", svc.recommendations(r.who, r.param("id"))}};
  }));

  server.Get("/classes/:id/stats", wrap([&svc](const detail::ApiRequest& r, int&) {
    return nlohmann::json(svc.get_stats(r.who, r.param("id")));
  }));

  server.Post("/selfstudy/questions", wrap([&svc](const detail::ApiRequest& r, int& status) {
    auto b = r.body();
    auto created = svc.self_study_create(r.who, b.at("title").get<std::string>(),
                                         detail::string_list(b, "sources", true), b.value("subject", std::string()));
    status = 201;
    return nlohmann::json(created);
  }));
}

}  // namespace tutor
