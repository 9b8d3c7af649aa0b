#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fairelicit/fpme.hpp"
#include "fairelicit/serialization.hpp"

namespace fairelicit {

/// What a client supplies to start an elicitation.
struct SessionSpec {
  int k = 2;
  int m = 2;
  double epsilon = 0.05;  // human scale; simulations use 1e-3
  double rho = 0.2;
  int cycles = 4;
  std::optional<GroupPrevalence> prevalence;  // uniform when absent

  GroupPrevalence resolved_prevalence() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
  FpmeConfig fpme_config() const;
  std::uint64_t budget() const;
};

SessionSpec session_spec_from_json(const json& j);
json to_json(const SessionSpec& s);

enum class SessionState { Created, AwaitingAnswer, Completed, Aborted };
std::string to_string(SessionState s);

struct QueryPresentation {
  std::uint64_t id = 0;
  std::string stage;
  GroupRateTuple left;
  GroupRateTuple right;
  RateVector left_overall;
  RateVector right_overall;
};

/// Human-readable banner for a stage tag.
std::string stage_label(const std::string& stage);
QueryPresentation present(const PendingQuery& q, const GroupPrevalence& prev);
json to_json(const QueryPresentation& p);

struct SessionView {
  std::string id;
  SessionState state = SessionState::Created;
  SessionSpec spec;
  std::uint64_t answered = 0;
  std::uint64_t budget = 0;
  std::optional<QueryPresentation> query;
  std::optional<FpmeResult> result;
  std::string reason;  // why it was aborted
};

json to_json(const SessionView& v);

struct Session;

/// Owns every live session and its journal file (one JSONL per session).
class SessionManager {
 public:
  explicit SessionManager(std::filesystem::path journal_dir);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  SessionView create(const SessionSpec& spec);
  SessionView get(const std::string& id) const;
  /// Conflict (RejectedAnswer) unless query_id is the pending query.
  SessionView answer(const std::string& id, std::uint64_t query_id, bool prefers_left);
  SessionView abort(const std::string& id, const std::string& reason);
  /// New session with the same spec and the first keep answers of an existing one.
  SessionView fork(const std::string& id, std::uint64_t keep);

  /// Rebuilds sessions from journals not yet loaded. Returns their ids.
  std::vector<std::string> resume_all();
  std::vector<std::string> ids() const;

  /// Stops every driver without journaling anything.
  void shutdown();

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> start(const std::string& id, const SessionSpec& spec);
  std::string fresh_id() const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  bool stopped_ = false;
};

}  // namespace fairelicit
