#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairelicit/errors.hpp"
#include "fairelicit/evaluation.hpp"
#include "fairelicit/fair_metric.hpp"
#include "fairelicit/fpme.hpp"
#include "fairelicit/oracle.hpp"
#include "fairelicit/rate_geometry.hpp"

namespace fairelicit {

using json = nlohmann::json;

/// Bad input document; field() is the dotted path of the offending value.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& what)
      : InvalidArgument(field.empty() ? what : "field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Typed access to a JSON object that reports failures by path.
class Fields {
 public:
  Fields(const json& j, std::string path = {});

  bool has(const std::string& key) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key) const;
  int integer(const std::string& key, int fallback) const;
  std::uint64_t uint64(const std::string& key, std::uint64_t fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  Vec numbers(const std::string& key) const;
  std::vector<int> integers(const std::string& key, std::vector<int> fallback) const;
  Fields object(const std::string& key) const;
  const json& raw(const std::string& key) const;
  std::string path(const std::string& key) const;
  /// Rejects keys outside the allowed set.
  void only(const std::vector<std::string>& allowed) const;

 private:
  const json& j_;
  std::string path_;
};

json to_json(const RateVector& r);
json to_json(const GroupRateTuple& t);
json to_json(const GroupPrevalence& p);
json to_json(const MetricParams& p);
json to_json(const Sphere& s);

RateVector rate_vector_from_json(const json& j, const std::string& path = {});
GroupRateTuple tuple_from_json(const json& j, const std::string& path = {});
GroupPrevalence prevalence_from_json(const json& j, const std::string& path = {});
MetricParams metric_from_json(const json& j, const std::string& path = {});

/// Canonical text used wherever byte-identical output matters.
std::string dump(const json& j);

/// Reads `group,true_label,pred_label` rows; errors carry the 1-based line number.
std::vector<PredictionRecord> read_predictions_csv(std::istream& in, int k, int m);

/// Params plus warnings and the regularity margin; timings are left out so output stays deterministic.
json to_json(const FpmeResult& r);

json ledger_entry_json(const LedgerEntry& e);
std::string transcript_jsonl(const QueryLedger& ledger);

ClassifierPool pool_from_json(const json& j);
json to_json(const ClassifierPool& pool);

std::string recovery_csv(const RecoveryReport& rep);
json recovery_summary(const RecoveryReport& rep);
std::string ranking_csv(const RankingReport& rep);
json ranking_summary(const RankingReport& rep);

}  // namespace fairelicit
