#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "fairelicit/serialization.hpp"

using namespace fairelicit;

namespace {

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

std::vector<PredictionRecord> csv(const std::string& text, int k, int m) {
  std::istringstream in(text);
  return read_predictions_csv(in, k, m);
}

}  // namespace

TEST_CASE("rate JSON shapes") {
  const RateVector r(2, {0.25, 0.125});
  CHECK(dump(to_json(r)) == R"({"k":2,"values":[0.25,0.125]})");
  const auto t = GroupRateTuple::replicate(r, 2);
  CHECK(dump(to_json(t)) == R"({"k":2,"m":2,"rates":[[0.25,0.125],[0.25,0.125]]})");
  CHECK(tuple_from_json(to_json(t)) == t);
  CHECK(rate_vector_from_json(to_json(r)) == r);
  const auto prev = GroupPrevalence::uniform(2, 2);
  CHECK(dump(to_json(prev)) == R"({"k":2,"m":2,"t":[[0.5,0.5],[0.5,0.5]]})");
  CHECK(prevalence_from_json(to_json(prev)).t() == prev.t());
}

TEST_CASE("doubles survive a text round trip bit for bit") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_metric(rng(), 3, 4);
    const MetricParams back = metric_from_json(json::parse(dump(to_json(p))));
    CHECK(back == p);
  }
}

TEST_CASE("metric JSON keys pairs by group numbers") {
  const auto p = random_metric(1, 2, 3);
  const json j = to_json(p);
  CHECK(j["B"].size() == 3);
  CHECK(j["B"].contains("1-2"));
  CHECK(j["B"].contains("1-3"));
  CHECK(j["B"].contains("2-3"));
  CHECK(j["lambda"].get<double>() == p.lambda);
}

TEST_CASE("decode errors name the field") {
  json j = to_json(random_metric(2, 2, 3));
  json bad = j;
  bad.erase("lambda");
  CHECK(field_of([&] { metric_from_json(bad); }) == "lambda");
  bad = j;
  bad["B"].erase("2-3");
  CHECK(field_of([&] { metric_from_json(bad); }) == "B.2-3");
  bad = j;
  bad["a"].push_back(0.1);
  CHECK(field_of([&] { metric_from_json(bad); }) == "a");
  bad = j;
  bad["B"]["1-4"] = {0.1, 0.2};
  CHECK(field_of([&] { metric_from_json(bad); }) == "B.1-4");
  bad = j;
  bad["extra"] = 1;
  CHECK(field_of([&] { metric_from_json(bad); }) == "extra");
  bad = j;
  bad["a"][1] = "x";
  CHECK(field_of([&] { metric_from_json(bad, "oracle.metric"); }) == "oracle.metric.a[1]");

  CHECK(field_of([] { tuple_from_json(json::parse(R"({"k":2,"m":2,"rates":[[0.1,0.1]]})")); }) == "rates");
  CHECK(field_of([] { tuple_from_json(json::parse(R"({"k":2,"m":1,"rates":[[0.1,1.5]]})")); }) == "rates[0]");
  CHECK(field_of([] { rate_vector_from_json(json::parse(R"({"k":"2","values":[]})")); }) == "k");
}

TEST_CASE("prediction CSV feeds the counting estimator") {
  const auto recs = csv("group,true_label,pred_label\n1,1,2\n1,1,1\n1,2,2\n1,2,2\n", 2, 1);
  const auto er = empirical_rates(recs, 2, 1);
  CHECK(dump(to_json(er.rates)) == R"({"k":2,"m":1,"rates":[[0.5,0.0]]})");
  CHECK(er.prevalence.t() == std::vector<Vec>{{1.0, 1.0}});
  CHECK(csv("group,true_label,pred_label\r\n1,1,2\r\n", 2, 1).size() == 1);
}

TEST_CASE("prediction CSV errors carry the line") {
  auto message = [](const std::string& text) {
    try {
      csv(text, 2, 2);
    } catch (const InvalidArgument& e) {
      return std::string(e.what());
    }
    return std::string("<no error>");
  };
  CHECK(message("1,1,2\n").find("header") != std::string::npos);
  CHECK(message("").find("header") != std::string::npos);
  CHECK(message("group,true_label,pred_label\n1,1,2\n1,3,1\n").find("line 3") != std::string::npos);
  CHECK(message("group,true_label,pred_label\n3,1,1\n").find("group 3") != std::string::npos);
  CHECK(message("group,true_label,pred_label\n1,,1\n").find("empty cell in column true_label") != std::string::npos);
  CHECK(message("group,true_label,pred_label\n1,1\n").find("3 columns") != std::string::npos);
  CHECK(message("group,true_label,pred_label\n1,1,1,1\n").find("3 columns") != std::string::npos);
  CHECK(message("group,true_label,pred_label\n1,1.5,1\n").find("not an integer") != std::string::npos);
  CHECK(message("group,true_label,pred_label\n").find("no records") != std::string::npos);
}

TEST_CASE("transcript lines") {
  ExactOracle ex(random_metric(4, 2, 2), GroupPrevalence::uniform(2, 2));
  CountingOracle c(ex);
  const auto t = GroupRateTuple::replicate(RateVector(2, {0.1, 0.2}), 2);
  const auto u = GroupRateTuple::replicate(RateVector(2, {0.2, 0.1}), 2);
  c.compare({t, u, "misclassification"});
  c.compare({u, t, "tradeoff"});
  const std::string text = transcript_jsonl(c.ledger());
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    ++n;
    CHECK(j["id"] == n);
    CHECK(j.size() == 5);
    CHECK(tuple_from_json(j["left"]) == (n == 1 ? t : u));
    CHECK(j["answer"].is_boolean());
  }
  CHECK(n == 2);
  CHECK(text.back() == '\n');
}

TEST_CASE("pool JSON round trip and checks") {
  const auto pool = synth_pool(5, 10, 3, 2);
  const auto back = pool_from_json(json::parse(dump(to_json(pool))));
  REQUIRE(back.entries.size() == 10);
  CHECK(back.entries[3].id == pool.entries[3].id);
  CHECK(back.entries[3].rates == pool.entries[3].rates);
  json dup = to_json(pool);
  dup["entries"][1]["id"] = dup["entries"][0]["id"];
  CHECK(field_of([&] { pool_from_json(dup); }) == "entries");
  json wrong = to_json(pool);
  wrong["entries"][2]["rates"] = to_json(synth_pool(5, 2, 2, 2).entries[0].rates);
  CHECK_THROWS_AS(pool_from_json(wrong), ConfigError);
}

TEST_CASE("report layouts") {
  RecoveryConfig rc;
  rc.ks = {2};
  rc.ms = {2};
  rc.trials = 5;
  rc.epsilon = 0.05;
  const auto rep = recovery_experiment(rc);
  const std::string text = recovery_csv(rep);
  CHECK(text.rfind("k,m,trial,a_err,b_err,lambda_err,queries_total\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  const json s = recovery_summary(rep);
  CHECK(s["cells"][0]["ok"] == 5);

  RankingConfig kc;
  kc.trials = 2;
  kc.epsilon = 0.05;
  const auto rk = ranking_experiment(synth_pool(1, 20, 2, 2), kc);
  const std::string r = ranking_csv(rk);
  const std::string header = r.substr(0, r.find('\n'));
  CHECK(std::count(header.begin(), header.end(), ',') == 10);  // score, trial and 9 methods
  CHECK(header.rfind("score,trial,fpme,phi_varphi_lambda_a", 0) == 0);
  CHECK(std::count(r.begin(), r.end(), '\n') == 5);
  CHECK(ranking_summary(rk)["mean"].contains("o_f"));
}
