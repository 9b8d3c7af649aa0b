#include "fairelicit/session.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "fairelicit/evaluation.hpp"

namespace fairelicit {

GroupPrevalence SessionSpec::resolved_prevalence() const {
  return prevalence ? *prevalence : GroupPrevalence::uniform(k, m);
}

void SessionSpec::validate() const {
  if (k < 2 || k > 10) throw ConfigError("k", "must be between 2 and 10");
  if (m < 2) throw ConfigError("m", "fairness needs at least two groups");
  if (m > 16) throw ConfigError("m", "at most 16 groups are supported");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon", "must lie in (0, 1)");
  if (!(rho > 0.0)) throw ConfigError("rho", "must be positive");
  if (cycles < 1) throw ConfigError("cycles", "must be at least 1");
  if (prevalence && (prevalence->k() != k || prevalence->m() != m))
    throw ConfigError("prevalence", "dimensions do not match k and m");
  try {
    fpme_config().validate();
  } catch (const Error& e) {
    throw ConfigError("rho", e.what());
  }
}

FpmeConfig SessionSpec::fpme_config() const { return experiment_config(k, resolved_prevalence(), epsilon, rho, cycles); }

std::uint64_t SessionSpec::budget() const { return query_budget(k, m, epsilon, cycles).total(); }

SessionSpec session_spec_from_json(const json& j) {
  const Fields f(j);
  f.only({"k", "m", "epsilon", "rho", "cycles", "prevalence"});
  SessionSpec s;
  s.k = f.integer("k", s.k);
  s.m = f.integer("m", s.m);
  s.epsilon = f.number("epsilon", s.epsilon);
  s.rho = f.number("rho", s.rho);
  s.cycles = f.integer("cycles", s.cycles);
  if (f.has("prevalence")) s.prevalence = prevalence_from_json(f.raw("prevalence"), "prevalence");
  s.validate();
  return s;
}

json to_json(const SessionSpec& s) {
  json j = {{"k", s.k}, {"m", s.m}, {"epsilon", s.epsilon}, {"rho", s.rho}, {"cycles", s.cycles}};
  if (s.prevalence) j["prevalence"] = to_json(*s.prevalence);
  return j;
}

std::string to_string(SessionState s) {
  switch (s) {
    case SessionState::Created:
      return "created";
    case SessionState::AwaitingAnswer:
      return "awaiting_answer";
    case SessionState::Completed:
      return "completed";
    case SessionState::Aborted:
      return "aborted";
  }
  return "unknown";
}

std::string stage_label(const std::string& stage) {
  if (stage == kStageMisclassification) return "Performance stage: both groups share one classifier";
  if (stage == kStageTradeoff) return "Trade-off stage: performance against fairness";
  // violation:{u,v,...}:i
  const auto first = stage.find(':'), last = stage.rfind(':');
  if (stage.rfind("violation:", 0) == 0 && first != last)
    return "Fairness stage: groups " + stage.substr(first + 1, last - first - 1) + " pinned to class " +
           stage.substr(last + 1);
  return stage;
}

QueryPresentation present(const PendingQuery& q, const GroupPrevalence& prev) {
  return {q.id, q.query.stage, q.query.left, q.query.right, overall_rate(q.query.left, prev),
          overall_rate(q.query.right, prev)};
}

namespace {

json matrices(const GroupRateTuple& t) {
  json out = json::array();
  for (const auto& r : t.rates()) out.push_back(r.matrix());
  return out;
}

json side(const GroupRateTuple& t, const RateVector& overall) {
  return {{"rates", to_json(t)}, {"matrices", matrices(t)}, {"overall", overall.values()},
          {"overall_matrix", overall.matrix()}};
}

}  // namespace

json to_json(const QueryPresentation& p) {
  return {{"query_id", p.id}, {"stage", p.stage}, {"stage_label", stage_label(p.stage)},
          {"left", side(p.left, p.left_overall)}, {"right", side(p.right, p.right_overall)}};
}

json to_json(const SessionView& v) {
  json j = {{"id", v.id},
            {"state", to_string(v.state)},
            {"spec", to_json(v.spec)},
            {"progress", {{"answered", v.answered}, {"budget", v.budget}}}};
  if (v.query) j["query"] = to_json(*v.query);
  if (v.result) j["result"] = to_json(*v.result);
  if (v.state == SessionState::Aborted) j["reason"] = v.reason;
  return j;
}

struct Session {
  std::string id;
  SessionSpec spec;
  FpmeConfig cfg;
  std::uint64_t budget = 0;
  DeferredOracle oracle;
  std::thread driver;
  std::mutex answer_mu;  // one writer at a time

  mutable std::mutex mu;
  SessionState state = SessionState::Created;
  std::vector<bool> answers;
  std::optional<FpmeResult> result;
  std::string reason;
  std::FILE* journal = nullptr;
  bool quiet = false;            // shutdown or replay failure: write nothing more
  bool completion_logged = false;  // a replayed journal already holds it
  std::optional<std::string> logged_params;

  ~Session() {
    if (journal) std::fclose(journal);
  }

  // Caller holds mu.
  void append(const json& event) {
    if (quiet || !journal) return;
    const std::string line = dump(event) + "\n";
    if (std::fwrite(line.data(), 1, line.size(), journal) != line.size() || std::fflush(journal) != 0 ||
        ::fsync(::fileno(journal)) != 0)
      throw Error("journal write failed for session " + id);
  }

  void run() {
    try {
      FpmeResult r = fpme(oracle, cfg);
      std::lock_guard lk(mu);
      if (logged_params && *logged_params != dump(to_json(r.params))) {
        state = SessionState::Aborted;
        reason = "corrupt journal: replay produced a different result";
      } else {
        result = std::move(r);
        state = SessionState::Completed;
        if (!completion_logged) append({{"event", "completed"}, {"result", to_json(*result)}});
      }
    } catch (const SessionAborted& e) {
      std::lock_guard lk(mu);
      state = SessionState::Aborted;
      if (reason.empty()) reason = e.what();
    } catch (const std::exception& e) {
      std::lock_guard lk(mu);
      state = SessionState::Aborted;
      reason = std::string("elicitation error: ") + e.what();
      try {
        append({{"event", "aborted"}, {"reason", reason}});
      } catch (const Error&) {
      }
    }
    oracle.finish();
  }

  SessionView view() const {
    std::unique_lock lk(mu);
    std::optional<PendingQuery> p;
    // Wait out the short gap between an accepted answer and the next query.
    while (state == SessionState::AwaitingAnswer && !(p && p->id == answers.size() + 1)) {
      const auto after = answers.size();
      lk.unlock();
      p = oracle.wait_pending_after(after);
      lk.lock();
    }
    SessionView v{id, state, spec, answers.size(), budget, std::nullopt, result, reason};
    if (state == SessionState::AwaitingAnswer) v.query = present(*p, cfg.prev);
    return v;
  }
};

SessionManager::SessionManager(std::filesystem::path journal_dir) : dir_(std::move(journal_dir)) {
  std::filesystem::create_directories(dir_);
}

SessionManager::~SessionManager() { shutdown(); }

std::string SessionManager::fresh_id() const {
  static thread_local std::mt19937_64 rng(std::random_device{}());
  for (;;) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    const std::string id = buf;
    if (!sessions_.count(id) && !std::filesystem::exists(dir_ / (id + ".jsonl"))) return id;
  }
}

std::shared_ptr<Session> SessionManager::start(const std::string& id, const SessionSpec& spec) {
  auto s = std::make_shared<Session>();
  s->id = id;
  s->spec = spec;
  s->cfg = spec.fpme_config();
  s->budget = spec.budget();
  s->state = SessionState::AwaitingAnswer;
  s->driver = std::thread([raw = s.get()] { raw->run(); });
  return s;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lk(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound("no session '" + id + "'");
  return it->second;
}

SessionView SessionManager::create(const SessionSpec& spec) {
  spec.validate();
  std::unique_lock lk(mu_);
  if (stopped_) throw Error("service is shutting down");
  const std::string id = fresh_id();
  std::FILE* f = std::fopen((dir_ / (id + ".jsonl")).c_str(), "a");
  if (!f) throw Error("cannot open journal for session " + id);
  auto s = start(id, spec);
  {
    std::lock_guard sl(s->mu);
    s->journal = f;
    s->append({{"event", "created"}, {"id", id}, {"spec", to_json(spec)}});
  }
  sessions_[id] = s;
  lk.unlock();
  return s->view();
}

SessionView SessionManager::get(const std::string& id) const { return find(id)->view(); }

SessionView SessionManager::answer(const std::string& id, std::uint64_t query_id, bool prefers_left) {
  auto s = find(id);
  std::lock_guard al(s->answer_mu);
  {
    // Do not race the driver: the previous answer's query must be out.
    const SessionView before = s->view();
    if (before.state != SessionState::AwaitingAnswer)
      throw RejectedAnswer("session is " + to_string(before.state) + "; no query awaits an answer");
    if (!before.query || before.query->id != query_id)
      throw RejectedAnswer("answer for query " + std::to_string(query_id) + " but pending query is " +
                           (before.query ? std::to_string(before.query->id) : std::string("none")));
    std::lock_guard lk(s->mu);
    s->append({{"event", "answer"}, {"query_id", query_id}, {"prefers_left", prefers_left}});
    s->answers.push_back(prefers_left);
  }
  s->oracle.answer(query_id, prefers_left);
  return s->view();
}

SessionView SessionManager::abort(const std::string& id, const std::string& reason) {
  auto s = find(id);
  std::lock_guard al(s->answer_mu);
  {
    std::lock_guard lk(s->mu);
    if (s->state == SessionState::Completed || s->state == SessionState::Aborted)
      throw RejectedAnswer("session is already " + to_string(s->state));
    s->reason = reason.empty() ? "aborted by client" : reason;
    s->append({{"event", "aborted"}, {"reason", s->reason}});
  }
  s->oracle.abort(s->reason);
  if (s->driver.joinable()) s->driver.join();
  return s->view();
}

SessionView SessionManager::fork(const std::string& id, std::uint64_t keep) {
  auto src = find(id);
  std::vector<bool> prefix;
  {
    std::lock_guard lk(src->mu);
    if (keep > src->answers.size())
      throw InvalidArgument("session has only " + std::to_string(src->answers.size()) + " answers");
    prefix.assign(src->answers.begin(), src->answers.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  SessionView v = create(src->spec);
  for (std::size_t i = 0; i < prefix.size(); ++i) v = answer(v.id, i + 1, prefix[i]);
  return v;
}

namespace {

struct JournalImage {
  std::string id;
  SessionSpec spec;
  std::vector<bool> answers;
  std::optional<std::string> aborted;
  std::optional<std::string> params;  // dumped MetricParams of a completed run
};

JournalImage read_journal(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.empty()) throw Error("empty journal");
  if (text.back() != '\n') throw Error("truncated last line");
  std::istringstream lines(text);
  std::string line;
  JournalImage img;
  bool created = false, terminal = false;
  for (std::size_t n = 1; std::getline(lines, line); ++n) {
    const std::string where = "line " + std::to_string(n) + ": ";
    json ev;
    try {
      ev = json::parse(line);
    } catch (const json::exception&) {
      throw Error(where + "not valid JSON");
    }
    if (!ev.is_object() || !ev.contains("event") || !ev["event"].is_string()) throw Error(where + "missing event");
    const std::string kind = ev["event"];
    if (terminal) throw Error(where + "event after the session ended");
    try {
      if (kind == "created") {
        if (created) throw Error("second created event");
        img.id = ev.at("id").get<std::string>();
        img.spec = session_spec_from_json(ev.at("spec"));
        created = true;
      } else if (!created) {
        throw Error("journal does not start with a created event");
      } else if (kind == "answer") {
        if (ev.at("query_id").get<std::uint64_t>() != img.answers.size() + 1) throw Error("answer ids out of order");
        img.answers.push_back(ev.at("prefers_left").get<bool>());
      } else if (kind == "aborted") {
        img.aborted = ev.at("reason").get<std::string>();
        terminal = true;
      } else if (kind == "completed") {
        img.params = dump(ev.at("result").at("params"));
        terminal = true;
      } else {
        throw Error("unknown event '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw Error(where + e.what());
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
  if (!created) throw Error("no created event");
  if (img.id != path.stem().string()) throw Error("journal id does not match its file name");
  return img;
}

}  // namespace

std::vector<std::string> SessionManager::resume_all() {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir_))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<std::string> out;
  for (const auto& path : files) {
    const std::string id = path.stem().string();
    {
      std::shared_lock lk(mu_);
      if (sessions_.count(id)) continue;
    }
    std::shared_ptr<Session> s;
    try {
      const JournalImage img = read_journal(path);
      if (img.aborted) {
        s = std::make_shared<Session>();
        s->id = id;
        s->spec = img.spec;
        s->cfg = img.spec.fpme_config();
        s->budget = img.spec.budget();
        s->state = SessionState::Aborted;
        s->reason = *img.aborted;
        s->answers = img.answers;
      } else {
        s = start(id, img.spec);
        {
          std::lock_guard lk(s->mu);
          s->quiet = true;  // nothing is written until the replay checks out
          s->completion_logged = img.params.has_value();
          s->logged_params = img.params;
        }
        for (std::size_t i = 0; i < img.answers.size(); ++i) {
          const auto p = s->oracle.wait_pending_after(i);
          if (!p || p->id != i + 1) throw Error("replay stopped before answer " + std::to_string(i + 1));
          {
            std::lock_guard lk(s->mu);
            s->answers.push_back(img.answers[i]);
          }
          s->oracle.answer(p->id, img.answers[i]);
        }
        const SessionView v = s->view();
        if (v.state == SessionState::Aborted) throw Error(v.reason);
        if (img.params && v.state != SessionState::Completed) throw Error("replay did not complete");
        std::lock_guard lk(s->mu);
        s->journal = std::fopen(path.c_str(), "a");
        if (!s->journal) throw Error("cannot reopen journal");
        s->quiet = false;
        // crashed between the last answer and the completion record
        if (s->state == SessionState::Completed && !img.params)
          s->append({{"event", "completed"}, {"result", to_json(*s->result)}});
      }
    } catch (const std::exception& e) {
      if (s) {
        {
          std::lock_guard lk(s->mu);
          s->quiet = true;
        }
        s->oracle.abort("corrupt journal");
        if (s->driver.joinable()) s->driver.join();
      }
      auto dead = std::make_shared<Session>();
      dead->id = id;
      dead->state = SessionState::Aborted;
      dead->reason = std::string("corrupt journal: ") + e.what();
      if (s) {
        dead->spec = s->spec;
        dead->cfg = s->cfg;
        dead->budget = s->budget;
      }
      s = dead;
    }
    std::unique_lock lk(mu_);
    sessions_[id] = s;
    out.push_back(id);
  }
  return out;
}

std::vector<std::string> SessionManager::ids() const {
  std::shared_lock lk(mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

void SessionManager::shutdown() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::unique_lock lk(mu_);
    stopped_ = true;
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  for (const auto& s : all) {
    {
      std::lock_guard lk(s->mu);
      s->quiet = true;
    }
    s->oracle.abort("service shut down");
    if (s->driver.joinable()) s->driver.join();
  }
}

}  // namespace fairelicit
