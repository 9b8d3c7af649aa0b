#pragma once

#include <memory>
#include <optional>
#include <string>

#include "fairelicit/session.hpp"

namespace httplib {
class Server;
}

namespace fairelicit {

class PortBusy : public Error {
 public:
  using Error::Error;
};

/// JSON-over-HTTP front end for a SessionManager.
class HttpService {
 public:
  explicit HttpService(SessionManager& sessions, std::optional<std::string> static_dir = std::nullopt);
  ~HttpService();

  /// Port 0 picks a free port. Returns the bound port; throws PortBusy.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  SessionManager& sessions_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace fairelicit
