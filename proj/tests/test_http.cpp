#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "fairelicit/http_service.hpp"

using namespace fairelicit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("fe_http_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// A manager plus a listening service on a loopback port.
struct Server {
  SessionManager sessions;
  HttpService http;
  int port = 0;
  std::thread loop;

  explicit Server(const fs::path& dir, std::optional<std::string> static_dir = std::nullopt)
      : sessions(dir), http(sessions, std::move(static_dir)) {
    sessions.resume_all();
    port = http.bind("127.0.0.1", 0);
    loop = std::thread([this] { http.run(); });
  }
  ~Server() {
    http.stop();
    loop.join();
    sessions.shutdown();
  }
};

struct Reply {
  int status = 0;
  json body;
};

Reply call(int port, const std::string& method, const std::string& path, const std::string& body = "") {
  httplib::Client cli("127.0.0.1", port);
  httplib::Result r = method == "GET" ? cli.Get(path) : cli.Post(path, body, "application/json");
  REQUIRE(r);
  Reply out{r->status, json()};
  if (!r->body.empty() && r->get_header_value("Content-Type") == "application/json") out.body = json::parse(r->body);
  return out;
}

// Answers queries from the JSON presentation alone, as a remote client would.
json play(int port, json view, Oracle& truth, std::uint64_t limit = ~0ull) {
  for (std::uint64_t n = 0; n < limit && view["state"] == "awaiting_answer"; ++n) {
    const json& q = view["query"];
    const bool left = truth.compare(
        {tuple_from_json(q["left"]["rates"]), tuple_from_json(q["right"]["rates"]), q["stage"].get<std::string>()});
    const json body = {{"query_id", q["query_id"]}, {"prefers_left", left}};
    const Reply r = call(port, "POST", "/sessions/" + view["id"].get<std::string>() + "/answers", dump(body));
    REQUIRE(r.status == 200);
    view = r.body;
  }
  return view;
}

std::string direct(const SessionSpec& spec, const MetricParams& truth) {
  ExactOracle o(truth, spec.resolved_prevalence());
  return dump(to_json(fpme(o, spec.fpme_config()).params));
}

}  // namespace

TEST_CASE("health and error shapes") {
  TempDir d;
  Server s(d.path);
  const Reply h = call(s.port, "GET", "/healthz");
  CHECK(h.status == 200);
  CHECK(h.body["status"] == "ok");

  const Reply nf = call(s.port, "GET", "/sessions/missing");
  CHECK(nf.status == 404);
  CHECK(nf.body["error"]["code"] == "not_found");
  CHECK(nf.body["error"]["message"].is_string());

  const Reply m1 = call(s.port, "POST", "/sessions", R"({"m":1})");
  CHECK(m1.status == 422);
  CHECK(m1.body["error"]["message"].get<std::string>().find("'m'") != std::string::npos);
  CHECK(call(s.port, "POST", "/sessions", "{not json").status == 422);
  CHECK(call(s.port, "POST", "/sessions/missing/answers", R"({"query_id":1,"prefers_left":true})").status == 404);
}

TEST_CASE("create, inspect, conflict") {
  TempDir d;
  Server s(d.path);
  const Reply c = call(s.port, "POST", "/sessions", R"({"k":2,"m":2,"epsilon":0.05})");
  REQUIRE(c.status == 201);
  const std::string id = c.body["id"];
  CHECK(c.body["state"] == "awaiting_answer");
  CHECK(c.body["query"]["query_id"] == 1);
  CHECK(c.body["progress"]["budget"] == 266);
  CHECK(c.body["query"]["left"]["matrices"].size() == 2);

  const Reply g = call(s.port, "GET", "/sessions/" + id);
  CHECK(g.status == 200);
  CHECK(g.body == c.body);

  const std::string path = "/sessions/" + id + "/answers";
  CHECK(call(s.port, "POST", path, R"({"query_id":1})").status == 422);
  CHECK(call(s.port, "POST", path, R"({"query_id":1,"prefers_left":"yes"})").status == 422);
  CHECK(call(s.port, "POST", path, R"({"query_id":1,"prefers_left":true})").status == 200);
  const Reply dup = call(s.port, "POST", path, R"({"query_id":1,"prefers_left":true})");
  CHECK(dup.status == 409);
  CHECK(dup.body["error"]["code"] == "conflict");
  CHECK(call(s.port, "GET", "/sessions/" + id).body["progress"]["answered"] == 1);

  const Reply ab = call(s.port, "POST", "/sessions/" + id + "/abort", R"({"reason":"test"})");
  CHECK(ab.status == 200);
  CHECK(ab.body["state"] == "aborted");
  CHECK(ab.body["reason"] == "test");
  CHECK(call(s.port, "POST", "/sessions/" + id + "/abort").status == 409);
  CHECK(call(s.port, "POST", path, R"({"query_id":2,"prefers_left":true})").status == 409);
}

TEST_CASE("replay over HTTP equals the direct run") {
  TempDir d;
  Server s(d.path);
  for (int m : {2, 3}) {
    SessionSpec spec;
    spec.m = m;
    const auto truth = random_metric(300 + m, 2, m);
    ExactOracle o(truth, spec.resolved_prevalence());
    const Reply c = call(s.port, "POST", "/sessions", dump(to_json(spec)));
    REQUIRE(c.status == 201);
    const json done = play(s.port, c.body, o);
    REQUIRE(done["state"] == "completed");
    CHECK(done["progress"]["answered"] == done["progress"]["budget"]);
    CHECK(dump(done["result"]["params"]) == direct(spec, truth));
    const Reply late = call(s.port, "POST", "/sessions/" + done["id"].get<std::string>() + "/answers",
                            R"({"query_id":1,"prefers_left":true})");
    CHECK(late.status == 409);
  }
}

TEST_CASE("crash and resume over HTTP") {
  TempDir d;
  SessionSpec spec;
  const auto truth = random_metric(42, 2, 2);
  ExactOracle o(truth, spec.resolved_prevalence());
  std::string id;
  {
    Server s(d.path);
    const Reply c = call(s.port, "POST", "/sessions", "{}");
    id = c.body["id"];
    const json mid = play(s.port, c.body, o, 10);
    CHECK(mid["progress"]["answered"] == 10);
  }
  Server s(d.path);
  const Reply g = call(s.port, "GET", "/sessions/" + id);
  REQUIRE(g.status == 200);
  CHECK(g.body["state"] == "awaiting_answer");
  CHECK(g.body["query"]["query_id"] == 11);
  const json done = play(s.port, g.body, o);
  REQUIRE(done["state"] == "completed");
  CHECK(dump(done["result"]["params"]) == direct(spec, truth));
}

TEST_CASE("fork endpoint") {
  TempDir d;
  Server s(d.path);
  ExactOracle o(random_metric(8, 2, 2), GroupPrevalence::uniform(2, 2));
  const json v = play(s.port, call(s.port, "POST", "/sessions", "{}").body, o, 6);
  const Reply f = call(s.port, "POST", "/sessions/" + v["id"].get<std::string>() + "/fork", R"({"keep_answers":3})");
  CHECK(f.status == 201);
  CHECK(f.body["progress"]["answered"] == 3);
  CHECK(f.body["query"]["query_id"] == 4);
  CHECK(call(s.port, "POST", "/sessions/" + v["id"].get<std::string>() + "/fork", R"({"keep_answers":60})").status ==
        422);
}

TEST_CASE("static files and busy ports") {
  TempDir d;
  const fs::path web = d.path / "web";
  fs::create_directories(web);
  std::ofstream(web / "index.html") << "<html></html>\n";
  Server s(d.path / "journals", web.string());
  httplib::Client cli("127.0.0.1", s.port);
  const auto r = cli.Get("/index.html");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->body == "<html></html>\n");

  SessionManager other(d.path / "other");
  HttpService clash(other);
  CHECK_THROWS_AS(clash.bind("127.0.0.1", s.port), PortBusy);
  CHECK_THROWS_AS(HttpService(other, (d.path / "nowhere").string()), InvalidArgument);
}
