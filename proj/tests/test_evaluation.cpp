#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fairelicit/errors.hpp"
#include "fairelicit/evaluation.hpp"

using namespace fairelicit;

namespace {

// Metric whose value is the first off-diagonal entry of the overall rate.
MetricParams first_entry_metric() {
  MetricParams p;
  p.k = 2;
  p.m = 2;
  p.a = {1.0, 0.0};
  p.B = {{0.0, 1.0}};
  p.lambda = 0.0;
  return p;
}

ClassifierPool pool_with_values(const std::vector<double>& vals) {
  ClassifierPool pool{{}, GroupPrevalence::uniform(2, 2)};
  for (std::size_t i = 0; i < vals.size(); ++i)
    pool.entries.push_back({"p" + std::to_string(i), GroupRateTuple::replicate(RateVector(2, {vals[i], 0.0}), 2)});
  return pool;
}

double brute_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++tx;
      } else if (dy == 0) {
        ++ty;
      } else if ((dx > 0) == (dy > 0)) {
        ++conc;
      } else {
        ++disc;
      }
    }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

}  // namespace

TEST_CASE("synthetic pools are valid and reproducible") {
  for (int k : {2, 3, 5})
    for (int m : {2, 3}) {
      const auto pool = synth_pool(11, 100, k, m);
      CHECK(pool.entries.size() == 100);
      CHECK(pool.entries.front().id == "c000");
      CHECK(pool.entries.back().id == "c099");
      pool.validate();
      for (const auto& e : pool.entries)
        for (int g = 0; g < m; ++g) CHECK(is_valid_rate(k, e.rates[g].values()));
      const auto again = synth_pool(11, 100, k, m);
      CHECK(again.entries[37].rates[0].values() == pool.entries[37].rates[0].values());
      CHECK(synth_pool(12, 100, k, m).entries[37].rates[0].values() != pool.entries[37].rates[0].values());
    }
  CHECK_THROWS_AS(synth_pool(1, 1, 2, 2), InvalidArgument);
}

TEST_CASE("random prevalence rows are distributions over groups") {
  const auto prev = random_prevalence(5, 3, 4);
  for (int i = 0; i < 3; ++i) {
    double s = 0;
    for (int g = 0; g < 4; ++g) {
      s += prev.t()[g][i];
      CHECK(prev.t()[g][i] >= 1.0 / 8 - 1e-12);
    }
    CHECK(std::abs(s - 1) < 1e-12);
  }
}

TEST_CASE("experiment radius stays inside the rate region") {
  CHECK(effective_radius(2, 0.2) == 0.2);
  CHECK(effective_radius(3, 0.2) == 0.2);
  CHECK(effective_radius(4, 0.2) == doctest::Approx(0.95 * 0.14433756729740643));
  CHECK(effective_radius(5, 0.2) == doctest::Approx(0.095));
  for (int k = 2; k <= 5; ++k) experiment_config(k, GroupPrevalence::uniform(k, 2), 1e-3, 0.2).validate();
}

TEST_CASE("rank sorts ascending with id tie break") {
  const auto pool = synth_pool(3, 60, 3, 2);
  const auto p = random_metric(4, 3, 2);
  const auto r = rank(pool, p);
  std::vector<std::pair<double, std::string>> brute;
  for (const auto& e : pool.entries) brute.push_back({evaluate(p, e.rates, pool.prev), e.id});
  std::sort(brute.begin(), brute.end());
  REQUIRE(r.size() == brute.size());
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == brute[i].second);

  const auto tied = pool_with_values({0.2, 0.1, 0.2, 0.1});
  CHECK(rank(tied, first_entry_metric()) == std::vector<std::string>{"p1", "p3", "p0", "p2"});
}

TEST_CASE("ndcg frozen values") {
  // Values scaled by 1/2 of the reference fixture; the score is scale free.
  const auto pool = pool_with_values({0.05, 0.2, 0.125, 0.45, 0.3});
  const auto p = first_entry_metric();
  CHECK(ndcg_exponential(p, rank(pool, p), pool) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(ndcg_exponential(p, {"p1", "p0", "p2", "p4", "p3"}, pool) - 0.7901692457442988) < 1e-12);
  auto rev = rank(pool, p);
  std::reverse(rev.begin(), rev.end());
  CHECK(std::abs(ndcg_exponential(p, rev, pool) - 0.5292244924355345) < 1e-12);

  const auto flat = pool_with_values({0.2, 0.2, 0.2});
  CHECK(ndcg_exponential(p, {"p2", "p0", "p1"}, flat) == 1.0);
  CHECK_THROWS_AS(ndcg_exponential(p, {"p0", "p0", "p1"}, flat), InvalidArgument);
  CHECK_THROWS_AS(ndcg_exponential(p, {"p0", "p1"}, flat), InvalidArgument);
}

TEST_CASE("ndcg punishes reversed orders on random pools") {
  for (int s = 0; s < 5; ++s) {
    const auto pool = synth_pool(20 + s, 100, 3, 3);
    const auto p = random_metric(30 + s, 3, 3);
    auto r = rank(pool, p);
    CHECK(ndcg_exponential(p, r, pool) == doctest::Approx(1.0));
    std::reverse(r.begin(), r.end());
    CHECK(ndcg_exponential(p, r, pool) < 0.9);
  }
}

TEST_CASE("kendall tau-b") {
  const std::vector<double> x{1, 2, 2, 3, 4, 4, 4, 5}, y{2, 1, 3, 3, 5, 4, 4, 6};
  CHECK(std::abs(kendall_tau_b(x, y) - 0.8406728074767076) < 1e-12);
  CHECK(kendall_tau_b({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(kendall_tau_b({1}, {4}) == 1.0);
  CHECK_THROWS_AS(kendall_tau_b({1, 1, 1}, {1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS(kendall_tau_b({1, 2}, {1}), DimensionMismatch);

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> d(0, 6);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + t % 40;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = d(rng);
      b[i] = d(rng);
    }
    if (std::adjacent_find(a.begin(), a.end(), std::not_equal_to<>()) == a.end()) continue;
    if (std::adjacent_find(b.begin(), b.end(), std::not_equal_to<>()) == b.end()) continue;
    CHECK(std::abs(kendall_tau_b(a, b) - brute_tau_b(a, b)) < 1e-12);
  }

  CHECK(kendall_tau({"a", "b", "c"}, {"a", "b", "c"}) == doctest::Approx(1.0));
  CHECK(kendall_tau({"a", "b", "c"}, {"c", "b", "a"}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(kendall_tau({"a", "b"}, {"a", "x"}), InvalidArgument);
}

TEST_CASE("baseline recipes") {
  const auto& specs = standard_baselines();
  REQUIRE(specs.size() == 8);
  CHECK(specs.front().name == "phi_varphi_lambda_a");
  CHECK(specs.back().name == "o_f");

  const auto truth = random_metric(41, 3, 3);
  const auto prev = GroupPrevalence::uniform(3, 3);
  ExactOracle omega(truth, prev);
  const auto cfg = experiment_config(3, prev, 0.05, 0.2);
  auto get = [&](const std::string& name) {
    for (const auto& s : specs)
      if (s.name == name) return baseline_params(s, truth, omega, cfg, 99);
    FAIL("missing " << name);
    return truth;
  };

  const auto acc = get("phi_varphi_lambda_a");
  acc.validate(1e-9);
  CHECK(acc.lambda == 0.5);
  for (double x : acc.a) CHECK(x == doctest::Approx(1 / std::sqrt(6.0)));

  const auto w = get("phi_varphi_lambda_w");
  w.validate(1e-9);
  CHECK((w.lambda >= 0.5) == (truth.lambda >= 0.5));
  // weights follow the order of the planted ones
  for (std::size_t i = 0; i < w.a.size(); ++i)
    for (std::size_t j = 0; j < w.a.size(); ++j)
      if (truth.a[i] < truth.a[j]) CHECK(w.a[i] <= w.a[j]);
  CHECK(get("phi_varphi_lambda_w") == w);

  const auto op = get("o_p");
  CHECK(op.lambda == 0.0);
  CHECK(op.a == truth.a);
  const auto of = get("o_f");
  CHECK(of.lambda == 1.0);
  CHECK(of.B == truth.B);

  const auto pa = get("phi_a");
  pa.validate(1e-9);
  // violation weights elicited against the wrong a still land near the truth
  CHECK(metric_distance(truth, pa).b_err < 0.5);
  CHECK(metric_distance(truth, get("phi_w")).b_err < 0.5);
}

TEST_CASE("small recovery run") {
  RecoveryConfig c;
  c.ks = {2, 3};
  c.ms = {2};
  c.trials = 3;
  c.epsilon = 0.05;
  c.jobs = 2;
  const auto rep = recovery_experiment(c);
  CHECK(rep.rows.size() == 6);
  for (const auto& r : rep.rows) {
    CHECK(r.error.empty());
    CHECK(r.queries_total == query_budget(r.k, r.m, 0.05, 4).total());
  }
  CHECK(rep.cell(2, 2).ok == 3);
  CHECK(rep.cell(3, 2).mean.a_err < 0.1);
  CHECK_THROWS_AS(rep.cell(4, 2), InvalidArgument);

  c.jobs = 1;
  const auto serial = recovery_experiment(c);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) CHECK(serial.rows[i].dist.b_err == rep.rows[i].dist.b_err);

  c.ks = {};
  CHECK_THROWS_AS(recovery_experiment(c), InvalidArgument);
}

TEST_CASE("small ranking run") {
  const auto pool = synth_pool(2, 40, 2, 2);
  RankingConfig c;
  c.trials = 3;
  c.epsilon = 0.01;
  const auto rep = ranking_experiment(pool, c);
  REQUIRE(rep.methods.size() == 9);
  CHECK(rep.methods.front() == "fpme");
  for (const auto& t : rep.trials) CHECK(t.error.empty());
  CHECK(rep.mean.at("fpme").ndcg > 0.95);
  for (const auto& name : rep.methods) {
    CHECK(rep.mean.at(name).ndcg <= 1.0 + 1e-12);
    CHECK(rep.mean.at(name).tau <= 1.0 + 1e-12);
  }
}
