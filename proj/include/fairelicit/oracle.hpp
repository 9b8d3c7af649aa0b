#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fairelicit/fair_metric.hpp"
#include "fairelicit/rate_geometry.hpp"
#include "fairelicit/rng.hpp"

namespace fairelicit {

struct OracleQuery {
  GroupRateTuple left;
  GroupRateTuple right;
  std::string stage;
};

/// Pairwise preference: true means left is strictly preferred.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual bool compare(const OracleQuery& query) = 0;
};

class ExactOracle : public Oracle {
 public:
  ExactOracle(MetricParams params, GroupPrevalence prev);
  bool compare(const OracleQuery& query) override;
  double value(const GroupRateTuple& t) const { return evaluate(params_, t, prev_); }

 private:
  MetricParams params_;
  GroupPrevalence prev_;
};

enum class NoisePolicy { Flip, Random, Adversarial };

NoisePolicy parse_noise_policy(const std::string& s);
std::string to_string(NoisePolicy p);

/// Exact outside the band |diff| <= eps_omega, policy-driven inside it.
class NoisyOracle : public Oracle {
 public:
  NoisyOracle(MetricParams params, GroupPrevalence prev, double eps_omega, std::uint64_t seed,
              NoisePolicy policy);
  bool compare(const OracleQuery& query) override;

 private:
  MetricParams params_;
  GroupPrevalence prev_;
  double eps_;
  NoisePolicy policy_;
  std::mutex mu_;
  Rng rng_;
};

struct LedgerEntry {
  std::uint64_t id = 0;
  OracleQuery query;
  bool answer = false;
};

struct QueryLedger {
  std::uint64_t count_total = 0;
  std::map<std::string, std::uint64_t> count_by_stage;
  std::vector<LedgerEntry> transcript;
};

/// Delegates to an inner oracle and records every exchange.
class CountingOracle : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner, bool keep_transcript = true);
  bool compare(const OracleQuery& query) override;
  QueryLedger ledger() const;
  std::uint64_t count() const;

 private:
  Oracle& inner_;
  bool keep_;
  mutable std::mutex mu_;
  QueryLedger ledger_;
};

struct PendingQuery {
  std::uint64_t id = 0;
  OracleQuery query;
};

/// Rendezvous between a blocked elicitation driver and an external answerer.
/// At most one query is outstanding; ids start at 1 and increase by one.
class DeferredOracle : public Oracle {
 public:
  bool compare(const OracleQuery& query) override;

  /// Throws RejectedAnswer unless id is the outstanding query.
  void answer(std::uint64_t id, bool prefers_left);
  void abort(const std::string& reason);
  /// Marks the driver as done so waiters wake up.
  void finish();

  std::optional<PendingQuery> pending() const;
  /// Blocks until a query with id > after is pending, or the driver finished/aborted.
  std::optional<PendingQuery> wait_pending_after(std::uint64_t after) const;
  std::uint64_t last_id() const;
  bool aborted() const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::uint64_t next_id_ = 1;
  std::optional<PendingQuery> pending_;
  std::optional<bool> reply_;
  bool aborted_ = false;
  bool finished_ = false;
  std::string abort_reason_;
};

}  // namespace fairelicit
