#include "fairelicit/http_service.hpp"

#include <httplib.h>

namespace fairelicit {

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(dump(body) + "\n", "application/json");
}

void fail(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

json body_of(const httplib::Request& req, bool allow_empty) {
  if (req.body.empty() && allow_empty) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("request body is not valid JSON: ") + e.what());
  }
}

// Maps library errors onto status codes.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const SessionNotFound& e) {
      fail(res, 404, "not_found", e.what());
    } catch (const RejectedAnswer& e) {
      fail(res, 409, "conflict", e.what());
    } catch (const InvalidArgument& e) {
      fail(res, 422, "invalid_request", e.what());
    } catch (const std::exception& e) {
      fail(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

HttpService::HttpService(SessionManager& sessions, std::optional<std::string> static_dir)
    : sessions_(sessions), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  // The library default adds SO_REUSEPORT, which would let a second server share the port silently.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  if (static_dir && !s.set_mount_point("/", *static_dir))
    throw InvalidArgument("static directory '" + *static_dir + "' does not exist");

  s.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
          send(res, 200, {{"status", "ok"}});
        }));

  s.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
          send(res, 200, {{"sessions", sessions_.ids()}});
        }));

  s.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const SessionSpec spec = session_spec_from_json(body_of(req, true));
           send(res, 201, to_json(sessions_.create(spec)));
         }));

  s.Get("/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send(res, 200, to_json(sessions_.get(req.path_params.at("id"))));
        }));

  s.Post("/sessions/:id/answers", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const std::string id = req.path_params.at("id");
           sessions_.get(id);  // unknown sessions are 404 even with a bad body
           const json body = body_of(req, false);
           const Fields f(body);
           f.only({"query_id", "prefers_left"});
           const std::uint64_t qid = f.uint64("query_id", 0);
           if (!f.has("query_id")) throw ConfigError("query_id", "required field is missing");
           if (!f.has("prefers_left")) throw ConfigError("prefers_left", "required field is missing");
           send(res, 200, to_json(sessions_.answer(id, qid, f.boolean("prefers_left", false))));
         }));

  s.Post("/sessions/:id/abort", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const std::string id = req.path_params.at("id");
           sessions_.get(id);
           const json body = body_of(req, true);
           const Fields f(body);
           f.only({"reason"});
           send(res, 200, to_json(sessions_.abort(id, f.string("reason", "aborted by client"))));
         }));

  s.Post("/sessions/:id/fork", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const std::string id = req.path_params.at("id");
           sessions_.get(id);
           const json body = body_of(req, false);
           const Fields f(body);
           f.only({"keep_answers"});
           if (!f.has("keep_answers")) throw ConfigError("keep_answers", "required field is missing");
           send(res, 201, to_json(sessions_.fork(id, f.uint64("keep_answers", 0))));
         }));
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p < 0) throw PortBusy("could not bind any port on " + host);
    return p;
  }
  if (!server_->bind_to_port(host, port)) throw PortBusy("port " + std::to_string(port) + " on " + host + " is busy");
  return port;
}

void HttpService::run() { server_->listen_after_bind(); }

void HttpService::stop() {
  if (server_) server_->stop();
}

}  // namespace fairelicit
