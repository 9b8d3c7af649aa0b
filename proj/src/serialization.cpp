#include "fairelicit/serialization.hpp"

#include <charconv>
#include <istream>
#include <set>
#include <sstream>

namespace fairelicit {

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const char* type_name(const json& j) { return j.type_name(); }

Vec read_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, std::string("expected an array of numbers, got ") + type_name(j));
  Vec out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(indexed(path, i), "expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

// Shortest text that reads back to the same double.
std::string num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace

Fields::Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object())
    throw ConfigError(path_, std::string("expected an object, got ") + type_name(j_));
}

std::string Fields::path(const std::string& key) const { return join(path_, key); }

bool Fields::has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

const json& Fields::raw(const std::string& key) const {
  if (!has(key)) throw ConfigError(path(key), "required field is missing");
  return j_.at(key);
}

double Fields::number(const std::string& key) const {
  const json& v = raw(key);
  if (!v.is_number()) throw ConfigError(path(key), std::string("expected a number, got ") + type_name(v));
  return v.get<double>();
}

double Fields::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

int Fields::integer(const std::string& key) const {
  const json& v = raw(key);
  if (!v.is_number_integer()) throw ConfigError(path(key), std::string("expected an integer, got ") + type_name(v));
  return v.get<int>();
}

int Fields::integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

std::uint64_t Fields::uint64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const json& v = raw(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(path(key), "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool Fields::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const json& v = raw(key);
  if (!v.is_boolean()) throw ConfigError(path(key), std::string("expected true or false, got ") + type_name(v));
  return v.get<bool>();
}

std::string Fields::string(const std::string& key) const {
  const json& v = raw(key);
  if (!v.is_string()) throw ConfigError(path(key), std::string("expected a string, got ") + type_name(v));
  return v.get<std::string>();
}

std::string Fields::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

Vec Fields::numbers(const std::string& key) const { return read_numbers(raw(key), path(key)); }

std::vector<int> Fields::integers(const std::string& key, std::vector<int> fallback) const {
  if (!has(key)) return fallback;
  const json& v = raw(key);
  if (!v.is_array()) throw ConfigError(path(key), "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer()) throw ConfigError(indexed(path(key), i), "expected an integer");
    out.push_back(v[i].get<int>());
  }
  return out;
}

Fields Fields::object(const std::string& key) const { return Fields(raw(key), path(key)); }

void Fields::only(const std::vector<std::string>& allowed) const {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j_.items())
    if (!ok.count(k)) throw ConfigError(path(k), "unknown field");
}

json to_json(const RateVector& r) { return {{"k", r.k()}, {"values", r.values()}}; }

json to_json(const GroupRateTuple& t) {
  json rates = json::array();
  for (const auto& r : t.rates()) rates.push_back(r.values());
  return {{"m", t.m()}, {"k", t.k()}, {"rates", rates}};
}

json to_json(const GroupPrevalence& p) { return {{"k", p.k()}, {"m", p.m()}, {"t", p.t()}}; }

json to_json(const MetricParams& p) {
  json b = json::object();
  const auto pairs = group_pairs(p.m);
  for (std::size_t i = 0; i < pairs.size() && i < p.B.size(); ++i)
    b[pair_key(pairs[i].first, pairs[i].second)] = p.B[i];
  return {{"k", p.k}, {"m", p.m}, {"a", p.a}, {"B", b}, {"lambda", p.lambda}};
}

json to_json(const Sphere& s) { return {{"center", s.center}, {"radius", s.radius}}; }

RateVector rate_vector_from_json(const json& j, const std::string& path) {
  const Fields f(j, path);
  f.only({"k", "values"});
  const int k = f.integer("k");
  if (k < 2) throw ConfigError(f.path("k"), "needs at least two classes");
  const Vec v = f.numbers("values");
  if (v.size() != off_diag_dim(k))
    throw ConfigError(f.path("values"), "expected " + std::to_string(off_diag_dim(k)) + " entries for k=" +
                                            std::to_string(k));
  try {
    return RateVector(k, v);
  } catch (const Error& e) {
    throw ConfigError(f.path("values"), e.what());
  }
}

GroupRateTuple tuple_from_json(const json& j, const std::string& path) {
  const Fields f(j, path);
  f.only({"m", "k", "rates"});
  const int k = f.integer("k"), m = f.integer("m");
  if (k < 2) throw ConfigError(f.path("k"), "needs at least two classes");
  if (m < 1) throw ConfigError(f.path("m"), "needs at least one group");
  const json& rates = f.raw("rates");
  if (!rates.is_array() || rates.size() != static_cast<std::size_t>(m))
    throw ConfigError(f.path("rates"), "expected " + std::to_string(m) + " rate arrays");
  std::vector<RateVector> out;
  for (std::size_t g = 0; g < rates.size(); ++g) {
    const std::string p = indexed(f.path("rates"), g);
    const Vec v = read_numbers(rates[g], p);
    if (v.size() != off_diag_dim(k)) throw ConfigError(p, "expected " + std::to_string(off_diag_dim(k)) + " entries");
    try {
      out.emplace_back(k, v);
    } catch (const Error& e) {
      throw ConfigError(p, e.what());
    }
  }
  return GroupRateTuple(std::move(out));
}

GroupPrevalence prevalence_from_json(const json& j, const std::string& path) {
  const Fields f(j, path);
  f.only({"k", "m", "t"});
  const int k = f.integer("k"), m = f.integer("m");
  const json& t = f.raw("t");
  if (!t.is_array() || t.size() != static_cast<std::size_t>(std::max(m, 0)))
    throw ConfigError(f.path("t"), "expected one row per group");
  std::vector<Vec> rows;
  for (std::size_t g = 0; g < t.size(); ++g) rows.push_back(read_numbers(t[g], indexed(f.path("t"), g)));
  try {
    return GroupPrevalence(k, m, std::move(rows));
  } catch (const Error& e) {
    throw ConfigError(f.path("t"), e.what());
  }
}

MetricParams metric_from_json(const json& j, const std::string& path) {
  const Fields f(j, path);
  f.only({"k", "m", "a", "B", "lambda"});
  MetricParams p;
  p.k = f.integer("k");
  p.m = f.integer("m");
  if (p.k < 2) throw ConfigError(f.path("k"), "needs at least two classes");
  if (p.m < 2) throw ConfigError(f.path("m"), "needs at least two groups");
  p.a = f.numbers("a");
  if (p.a.size() != p.q()) throw ConfigError(f.path("a"), "expected " + std::to_string(p.q()) + " entries");
  const Fields b = f.object("B");
  std::vector<std::string> keys;
  for (const auto& [u, v] : group_pairs(p.m)) {
    const std::string key = pair_key(u, v);
    keys.push_back(key);
    p.B.push_back(b.numbers(key));
    if (p.B.back().size() != p.q()) throw ConfigError(b.path(key), "expected " + std::to_string(p.q()) + " entries");
  }
  b.only(keys);
  p.lambda = f.number("lambda");
  return p;
}

std::string dump(const json& j) { return j.dump(); }

std::vector<PredictionRecord> read_predictions_csv(std::istream& in, int k, int m) {
  std::string line;
  std::size_t lineno = 0;
  auto strip = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw InvalidArgument("prediction log is empty; expected header group,true_label,pred_label");
  ++lineno;
  strip(line);
  if (line != "group,true_label,pred_label")
    throw InvalidArgument("line 1: expected header group,true_label,pred_label, got '" + line + "'");

  static const char* cols[] = {"group", "true_label", "pred_label"};
  std::vector<PredictionRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    strip(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t comma; (comma = line.find(',', start)) != std::string::npos; start = comma + 1)
      cells.push_back(line.substr(start, comma - start));
    cells.push_back(line.substr(start));
    if (cells.size() != 3) throw InvalidArgument(where + ": expected 3 columns, got " + std::to_string(cells.size()));
    int vals[3];
    for (int c = 0; c < 3; ++c) {
      const std::string& cell = cells[c];
      if (cell.empty()) throw InvalidArgument(where + ": empty cell in column " + cols[c]);
      const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), vals[c]);
      if (r.ec != std::errc() || r.ptr != cell.data() + cell.size())
        throw InvalidArgument(where + ": column " + cols[c] + " is not an integer: '" + cell + "'");
    }
    if (vals[0] < 1 || vals[0] > m)
      throw InvalidArgument(where + ": group " + std::to_string(vals[0]) + " outside 1.." + std::to_string(m));
    for (int c = 1; c < 3; ++c)
      if (vals[c] < 1 || vals[c] > k)
        throw InvalidArgument(where + ": " + cols[c] + " " + std::to_string(vals[c]) + " outside 1.." +
                              std::to_string(k));
    out.push_back({vals[0], vals[1], vals[2]});
  }
  if (out.empty()) throw InvalidArgument("prediction log has no records");
  return out;
}

json to_json(const FpmeResult& r) {
  return {{"params", to_json(r.params)}, {"warnings", r.warnings}, {"regularity_margin", r.regularity_margin}};
}

json ledger_entry_json(const LedgerEntry& e) {
  return {{"id", e.id},
          {"stage", e.query.stage},
          {"left", to_json(e.query.left)},
          {"right", to_json(e.query.right)},
          {"answer", e.answer}};
}

std::string transcript_jsonl(const QueryLedger& ledger) {
  std::string out;
  for (const auto& e : ledger.transcript) out += dump(ledger_entry_json(e)) + "\n";
  return out;
}

ClassifierPool pool_from_json(const json& j) {
  const Fields f(j);
  f.only({"prevalence", "entries"});
  ClassifierPool pool{{}, prevalence_from_json(f.raw("prevalence"), "prevalence")};
  const json& entries = f.raw("entries");
  if (!entries.is_array()) throw ConfigError("entries", "expected an array");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Fields e(entries[i], indexed("entries", i));
    e.only({"id", "rates"});
    pool.entries.push_back({e.string("id"), tuple_from_json(e.raw("rates"), e.path("rates"))});
  }
  try {
    pool.validate();
  } catch (const Error& e) {
    throw ConfigError("entries", e.what());
  }
  return pool;
}

json to_json(const ClassifierPool& pool) {
  json entries = json::array();
  for (const auto& e : pool.entries) entries.push_back({{"id", e.id}, {"rates", to_json(e.rates)}});
  return {{"prevalence", to_json(pool.prev)}, {"entries", entries}};
}

std::string recovery_csv(const RecoveryReport& rep) {
  std::ostringstream os;
  os << "k,m,trial,a_err,b_err,lambda_err,queries_total\n";
  for (const auto& r : rep.rows) {
    os << r.k << ',' << r.m << ',' << r.trial << ',';
    if (r.error.empty())
      os << num(r.dist.a_err) << ',' << num(r.dist.b_err) << ',' << num(r.dist.lambda_err) << ',' << r.queries_total;
    else
      os << ",,,";
    os << '\n';
  }
  return os.str();
}

json recovery_summary(const RecoveryReport& rep) {
  auto dist = [](const MetricDistance& d) {
    return json{{"a_err", d.a_err}, {"b_err", d.b_err}, {"lambda_err", d.lambda_err}};
  };
  json cells = json::array();
  for (const auto& c : rep.cells)
    cells.push_back({{"k", c.k}, {"m", c.m}, {"ok", c.ok}, {"failed", c.failed}, {"mean", dist(c.mean)},
                     {"stddev", dist(c.stddev)}});
  json failures = json::array();
  for (const auto& r : rep.rows)
    if (!r.error.empty()) failures.push_back({{"k", r.k}, {"m", r.m}, {"trial", r.trial}, {"error", r.error}});
  return {{"cells", cells}, {"failures", failures}};
}

std::string ranking_csv(const RankingReport& rep) {
  std::ostringstream os;
  os << "score,trial";
  for (const auto& name : rep.methods) os << ',' << name;
  os << '\n';
  for (const char* score : {"ndcg", "tau"})
    for (const auto& t : rep.trials) {
      os << score << ',' << t.trial;
      for (const auto& name : rep.methods) {
        os << ',';
        const auto it = t.scores.find(name);
        if (it != t.scores.end()) os << num(std::string(score) == "ndcg" ? it->second.ndcg : it->second.tau);
      }
      os << '\n';
    }
  return os.str();
}

json ranking_summary(const RankingReport& rep) {
  json mean = json::object();
  for (const auto& name : rep.methods) mean[name] = {{"ndcg", rep.mean.at(name).ndcg}, {"tau", rep.mean.at(name).tau}};
  json failures = json::array();
  for (const auto& t : rep.trials)
    if (!t.error.empty()) failures.push_back({{"trial", t.trial}, {"error", t.error}});
  return {{"methods", rep.methods}, {"mean", mean}, {"trials", rep.trials.size()}, {"failures", failures}};
}

}  // namespace fairelicit
