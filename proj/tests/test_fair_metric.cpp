#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fairelicit/errors.hpp"
#include "fairelicit/fair_metric.hpp"

using namespace fairelicit;
using doctest::Approx;

namespace {

MetricParams two_by_two() {
  MetricParams p;
  p.k = 2;
  p.m = 2;
  p.a = {1 / std::sqrt(2.0), 1 / std::sqrt(2.0)};
  p.B = {{1.0, 0.0}};
  p.lambda = 0.5;
  return p;
}

RateVector random_rate(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.0, 1.0 / k);
  Vec v(off_diag_dim(k));
  for (double& x : v) x = u(rng);
  return RateVector(k, v);
}

GroupRateTuple random_tuple(std::mt19937_64& rng, int k, int m) {
  std::vector<RateVector> r;
  for (int g = 0; g < m; ++g) r.push_back(random_rate(rng, k));
  return GroupRateTuple(r);
}

}  // namespace

TEST_CASE("group pair ordering") {
  const auto p = group_pairs(4);
  REQUIRE(p.size() == 6);
  CHECK(p[0] == std::pair{1, 2});
  CHECK(p[2] == std::pair{1, 4});
  CHECK(p[5] == std::pair{3, 4});
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(pair_index(4, p[i].first, p[i].second) == i);
    CHECK(pair_index(4, p[i].second, p[i].first) == i);
  }
  CHECK(pair_key(2, 3) == "2-3");
}

TEST_CASE("evaluate examples") {
  const auto p = two_by_two();
  const auto prev = GroupPrevalence::uniform(2, 2);
  const RateVector s(2, {0.2, 0.4});
  CHECK(evaluate(p, GroupRateTuple::replicate(s, 2), prev) == Approx(0.21213203435596426).epsilon(1e-14));
  GroupRateTuple t({s, RateVector(2, {0.4, 0.4})});
  CHECK(evaluate(p, t, prev) == Approx(0.3474873734152917).epsilon(1e-14));
  CHECK_THROWS_AS(evaluate(p, GroupRateTuple::replicate(uniform_rate(3), 2), prev), DimensionMismatch);
}

TEST_CASE("shared rates reduce to the linear term") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_metric(t, 3, 3);
    const auto prev = GroupPrevalence::uniform(3, 3);
    const RateVector s = random_rate(rng, 3);
    CHECK(evaluate(p, GroupRateTuple::replicate(s, 3), prev) ==
          Approx((1 - p.lambda) * dot(p.a, s.values())).epsilon(1e-13));
  }
}

TEST_CASE("linear_eval") {
  CHECK(linear_eval({1, 0}, {0.3, 0.9}) == 0.3);
  CHECK(linear_eval({0.6, 0.8}, {0, 0}) == 0.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 100; ++t) {
    Vec a(12), b(12);
    double want = 0;
    for (int i = 0; i < 12; ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
      want += a[i] * b[i];
    }
    CHECK(linear_eval(a, b) == Approx(want).epsilon(1e-13));
  }
  CHECK_THROWS_AS(linear_eval({1}, {1, 2}), DimensionMismatch);
}

TEST_CASE("random metrics satisfy the invariants and margins") {
  Margins mg;
  double lo = 1, hi = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const int k = 2 + seed % 4, m = 2 + (seed / 4) % 4;
    const auto p = random_metric(seed, k, m, mg);
    CHECK_NOTHROW(p.validate());
    for (double v : p.a) CHECK(v >= mg.c3);
    CHECK(regularity_value(p.a, p.B, m) <= 1 - mg.regularity);
    lo = std::min(lo, p.lambda);
    hi = std::max(hi, p.lambda);
  }
  CHECK(lo >= mg.c2);
  CHECK(hi <= mg.c1);
  CHECK(random_metric(42, 3, 4) == random_metric(42, 3, 4));
  CHECK(!(random_metric(42, 3, 4) == random_metric(43, 3, 4)));
}

TEST_CASE("misclassification draw is shared across group counts") {
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    CHECK(random_metric(seed, 3, 2).a == random_metric(seed, 3, 5).a);
}

TEST_CASE("metric distance") {
  const auto p = random_metric(7, 3, 3);
  const auto d0 = metric_distance(p, p);
  CHECK(d0.a_err == 0.0);
  CHECK(d0.b_err == 0.0);
  CHECK(d0.lambda_err == 0.0);

  auto x = two_by_two();
  x.lambda = 0.3;
  auto y = x;
  y.lambda = 0.35;
  const auto d = metric_distance(x, y);
  CHECK(d.a_err == 0.0);
  CHECK(d.b_err == 0.0);
  CHECK(d.lambda_err == Approx(0.05).epsilon(1e-12));

  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto u = random_metric(s, 3, 4), v = random_metric(s + 100, 3, 4);
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < u.a.size(); ++i) sa += (u.a[i] - v.a[i]) * (u.a[i] - v.a[i]);
    for (std::size_t p2 = 0; p2 < u.B.size(); ++p2)
      for (std::size_t i = 0; i < u.a.size(); ++i) sb += (u.B[p2][i] - v.B[p2][i]) * (u.B[p2][i] - v.B[p2][i]);
    const auto dd = metric_distance(u, v);
    CHECK(dd.a_err == Approx(std::sqrt(sa)).epsilon(1e-12));
    CHECK(dd.b_err == Approx(std::sqrt(sb)).epsilon(1e-12));
    CHECK(dd.lambda_err == Approx(std::abs(u.lambda - v.lambda)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(metric_distance(random_metric(1, 2, 2), random_metric(1, 3, 2)), DimensionMismatch);
}

TEST_CASE("validate rejects broken parameters") {
  auto p = two_by_two();
  CHECK_NOTHROW(p.validate());
  p.lambda = 1.5;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = two_by_two();
  p.a = {1, 1};
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = two_by_two();
  p.B.push_back({0, 0});
  CHECK_THROWS_AS(p.validate(), DimensionMismatch);
}

TEST_CASE("group permutation invariance") {
  std::mt19937_64 rng(4);
  const int k = 3, m = 3;
  for (int t = 0; t < 30; ++t) {
    const auto p = random_metric(t, k, m);
    GroupPrevalence prev(k, m, {{0.2, 0.5, 0.1}, {0.3, 0.25, 0.6}, {0.5, 0.25, 0.3}});
    const auto tup = random_tuple(rng, k, m);
    // swap groups 1 and 3
    MetricParams pp = p;
    pp.B[pair_index(m, 1, 2)] = p.B[pair_index(m, 2, 3)];
    pp.B[pair_index(m, 2, 3)] = p.B[pair_index(m, 1, 2)];
    GroupPrevalence sp(k, m, {prev.t()[2], prev.t()[1], prev.t()[0]});
    GroupRateTuple st({tup[2], tup[1], tup[0]});
    CHECK(evaluate(pp, st, sp) == Approx(evaluate(p, tup, prev)).epsilon(1e-13));
  }
}

TEST_CASE("linearity along shared-rate segments") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const auto prev = GroupPrevalence::uniform(3, 3);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_metric(t, 3, 3);
    const RateVector s1 = random_rate(rng, 3), s2 = random_rate(rng, 3);
    const double al = u(rng);
    const RateVector mix(3, add(scaled(s1.values(), al), scaled(s2.values(), 1 - al)));
    const double lhs = evaluate(p, GroupRateTuple::replicate(mix, 3), prev);
    const double rhs = al * evaluate(p, GroupRateTuple::replicate(s1, 3), prev) +
                       (1 - al) * evaluate(p, GroupRateTuple::replicate(s2, 3), prev);
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("monotone in overall rate and in discrepancies") {
  std::mt19937_64 rng(12);
  const int k = 2, m = 2;
  const auto prev = GroupPrevalence::uniform(k, m);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_metric(t, k, m);
    const auto tup = random_tuple(rng, k, m);
    const double base = evaluate(p, tup, prev);
    // shift both groups up by the same amount: discrepancies fixed, overall rate rises
    Vec r0 = tup[0].values(), r1 = tup[1].values();
    r0[0] += 0.05;
    r1[0] += 0.05;
    CHECK(evaluate(p, GroupRateTuple({RateVector(k, r0), RateVector(k, r1)}), prev) >= base);
    // widen a discrepancy while keeping the overall rate fixed
    Vec w0 = tup[0].values(), w1 = tup[1].values();
    const double sign = w0[1] >= w1[1] ? 1.0 : -1.0;
    w0[1] += sign * 0.02;
    w1[1] -= sign * 0.02;
    if (w0[1] >= 0 && w1[1] >= 0)
      CHECK(evaluate(p, GroupRateTuple({RateVector(k, w0), RateVector(k, w1)}), prev) >= base - 1e-15);
  }
}

TEST_CASE("violation term is symmetric in the pair") {
  std::mt19937_64 rng(14);
  const auto prev = GroupPrevalence::uniform(3, 2);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_metric(t, 3, 2);
    const auto tup = random_tuple(rng, 3, 2);
    // equal prevalences, so the overall rate is unchanged by the swap too
    CHECK(evaluate(p, GroupRateTuple({tup[1], tup[0]}), prev) == Approx(evaluate(p, tup, prev)).epsilon(1e-14));
  }
}
