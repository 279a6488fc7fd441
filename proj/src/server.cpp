#include "semloop/server.hpp"

#include <httplib.h>

#include <iostream>

#include "semloop/error.hpp"

namespace semloop {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, 200, fn(req));
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, to_string(ErrorCode::SchemaError), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

nlohmann::json parse_body(const httplib::Request& req) {
  auto body = nlohmann::json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw Error(ErrorCode::SchemaError, "request body is not valid JSON");
  return body;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::WrongPhase: return 409;
    case ErrorCode::SchemaError:
    case ErrorCode::ParseError: return 400;
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidLambda:
    case ErrorCode::UnknownFormat:
    case ErrorCode::ClassTooSmall:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::Io: return 422;
    default: return 500;
  }
}

void register_routes(httplib::Server& server, SessionManager& sessions) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/v1/health", guarded([](const httplib::Request&) {
               return nlohmann::json{{"api_version", kApiVersion}, {"status", "ok"}};
             }));
  server.Post("/v1/sessions", guarded([&sessions](const httplib::Request& req) {
                return sessions.create(parse_body(req));
              }));
  server.Get(R"(/v1/sessions/([^/]+))", guarded([&sessions](const httplib::Request& req) {
               return sessions.state(req.matches[1]);
             }));
  server.Get(R"(/v1/sessions/([^/]+)/query)", guarded([&sessions](const httplib::Request& req) {
               return sessions.query(req.matches[1]);
             }));
  server.Post(R"(/v1/sessions/([^/]+)/correction)", guarded([&sessions](const httplib::Request& req) {
                return sessions.correct(req.matches[1], parse_body(req));
              }));
  server.Get(R"(/v1/sessions/([^/]+)/metrics)", guarded([&sessions](const httplib::Request& req) {
               return sessions.metrics(req.matches[1]);
             }));
  server.Get(R"(/v1/sessions/([^/]+)/records)", guarded([&sessions](const httplib::Request& req) {
               return sessions.records(req.matches[1]);
             }));
  server.Get(R"(/v1/sessions/([^/]+)/gold_standard)", guarded([&sessions](const httplib::Request& req) {
               const std::string kind = req.has_param("kind") ? req.get_param_value("kind") : "word";
               return sessions.gold_standard(req.matches[1], kind);
             }));
}

bool serve(SessionManager& sessions, const ServeOptions& options) {
  httplib::Server server;
  register_routes(server, sessions);
  if (options.ui_dir && !server.set_mount_point("/", options.ui_dir->string())) {
    std::cerr << "ui directory not found: " << options.ui_dir->string() << "\n";
    return false;
  }
  std::cerr << "listening on http://" << options.host << ":" << options.port << "/v1\n";
  return server.listen(options.host, options.port);
}

}  // namespace semloop
