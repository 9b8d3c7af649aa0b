#include "fairelicit/oracle.hpp"

#include <cmath>

#include "fairelicit/errors.hpp"

namespace fairelicit {

ExactOracle::ExactOracle(MetricParams params, GroupPrevalence prev)
    : params_(std::move(params)), prev_(std::move(prev)) {
  if (params_.k != prev_.k() || params_.m != prev_.m())
    throw DimensionMismatch("oracle metric and prevalence disagree on dimensions");
}

bool ExactOracle::compare(const OracleQuery& query) {
  return value(query.left) > value(query.right);
}

NoisePolicy parse_noise_policy(const std::string& s) {
  if (s == "flip") return NoisePolicy::Flip;
  if (s == "random") return NoisePolicy::Random;
  if (s == "adversarial") return NoisePolicy::Adversarial;
  throw InvalidArgument("unknown noise policy '" + s + "'");
}

std::string to_string(NoisePolicy p) {
  switch (p) {
    case NoisePolicy::Flip: return "flip";
    case NoisePolicy::Random: return "random";
    case NoisePolicy::Adversarial: return "adversarial";
  }
  return "?";
}

NoisyOracle::NoisyOracle(MetricParams params, GroupPrevalence prev, double eps_omega,
                         std::uint64_t seed, NoisePolicy policy)
    : params_(std::move(params)), prev_(std::move(prev)), eps_(eps_omega), policy_(policy), rng_(seed) {
  if (!(eps_omega >= 0.0)) throw InvalidArgument("noise band must be nonnegative");
  if (params_.k != prev_.k() || params_.m != prev_.m())
    throw DimensionMismatch("oracle metric and prevalence disagree on dimensions");
}

bool NoisyOracle::compare(const OracleQuery& query) {
  const double l = evaluate(params_, query.left, prev_);
  const double r = evaluate(params_, query.right, prev_);
  const bool truth = l > r;
  if (std::abs(l - r) > eps_) return truth;
  switch (policy_) {
    case NoisePolicy::Flip:
      return !truth;
    case NoisePolicy::Adversarial:
      // reversed strict comparison; equal values still answer false
      return l < r;
    case NoisePolicy::Random: {
      std::lock_guard lk(mu_);
      return std::bernoulli_distribution(0.5)(rng_);
    }
  }
  return truth;
}

CountingOracle::CountingOracle(Oracle& inner, bool keep_transcript) : inner_(inner), keep_(keep_transcript) {}

bool CountingOracle::compare(const OracleQuery& query) {
  const bool ans = inner_.compare(query);
  std::lock_guard lk(mu_);
  ++ledger_.count_total;
  ++ledger_.count_by_stage[query.stage];
  if (keep_) ledger_.transcript.push_back({ledger_.count_total, query, ans});
  return ans;
}

QueryLedger CountingOracle::ledger() const {
  std::lock_guard lk(mu_);
  return ledger_;
}

std::uint64_t CountingOracle::count() const {
  std::lock_guard lk(mu_);
  return ledger_.count_total;
}

bool DeferredOracle::compare(const OracleQuery& query) {
  std::unique_lock lk(mu_);
  if (aborted_) throw SessionAborted(abort_reason_);
  pending_ = PendingQuery{next_id_++, query};
  reply_.reset();
  cv_.notify_all();
  cv_.wait(lk, [&] { return reply_.has_value() || aborted_; });
  if (!reply_) {
    pending_.reset();
    throw SessionAborted(abort_reason_);
  }
  const bool ans = *reply_;
  reply_.reset();
  pending_.reset();
  return ans;
}

void DeferredOracle::answer(std::uint64_t id, bool prefers_left) {
  std::lock_guard lk(mu_);
  if (aborted_) throw RejectedAnswer("session aborted");
  if (!pending_ || reply_)
    throw RejectedAnswer("no pending query awaits an answer (got id " + std::to_string(id) + ")");
  if (pending_->id != id)
    throw RejectedAnswer("answer for query " + std::to_string(id) + " but pending query is " +
                         std::to_string(pending_->id));
  reply_ = prefers_left;
  cv_.notify_all();
}

void DeferredOracle::abort(const std::string& reason) {
  std::lock_guard lk(mu_);
  aborted_ = true;
  abort_reason_ = reason.empty() ? "aborted" : reason;
  cv_.notify_all();
}

void DeferredOracle::finish() {
  std::lock_guard lk(mu_);
  finished_ = true;
  cv_.notify_all();
}

std::optional<PendingQuery> DeferredOracle::pending() const {
  std::lock_guard lk(mu_);
  if (pending_ && !reply_) return pending_;
  return std::nullopt;
}

std::optional<PendingQuery> DeferredOracle::wait_pending_after(std::uint64_t after) const {
  std::unique_lock lk(mu_);
  cv_.wait(lk, [&] { return (pending_ && !reply_ && pending_->id > after) || finished_ || aborted_; });
  if (pending_ && !reply_ && pending_->id > after) return pending_;
  return std::nullopt;
}

std::uint64_t DeferredOracle::last_id() const {
  std::lock_guard lk(mu_);
  return next_id_ - 1;
}

bool DeferredOracle::aborted() const {
  std::lock_guard lk(mu_);
  return aborted_;
}

}  // namespace fairelicit
