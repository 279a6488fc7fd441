#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "semloop/error.hpp"
#include "semloop/session.hpp"

namespace httplib {
class Server;
}

namespace semloop {

/// HTTP status for a library error code.
int http_status(ErrorCode code);

/// Mounts the /v1 routes on `server`. The manager must outlive it.
void register_routes(httplib::Server& server, SessionManager& sessions);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> ui_dir;  // served at /
};

/// Blocks until the server stops. Returns false if the socket cannot bind.
bool serve(SessionManager& sessions, const ServeOptions& options);

}  // namespace semloop
