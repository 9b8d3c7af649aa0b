#include "fairelicit/fair_metric.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fairelicit/errors.hpp"
#include "fairelicit/rng.hpp"

namespace fairelicit {

std::vector<std::pair<int, int>> group_pairs(int m) {
  std::vector<std::pair<int, int>> out;
  for (int u = 1; u <= m; ++u)
    for (int v = u + 1; v <= m; ++v) out.emplace_back(u, v);
  return out;
}

std::size_t pair_count(int m) { return m < 2 ? 0 : static_cast<std::size_t>(m) * (m - 1) / 2; }

std::size_t pair_index(int m, int u, int v) {
  if (u > v) std::swap(u, v);
  if (u < 1 || v > m || u == v) throw InvalidArgument("bad group pair");
  // pairs before row u: sum_{w<u} (m - w)
  std::size_t idx = 0;
  for (int w = 1; w < u; ++w) idx += m - w;
  return idx + (v - u - 1);
}

std::string pair_key(int u, int v) { return std::to_string(u) + "-" + std::to_string(v); }

void MetricParams::validate(double tol) const {
  if (k < 2) throw InvalidArgument("k must be at least 2");
  if (m < 2) throw InvalidArgument("m must be at least 2");
  const std::size_t qq = q();
  if (a.size() != qq) throw DimensionMismatch("a has " + std::to_string(a.size()) + " entries, expected " + std::to_string(qq));
  if (B.size() != pair_count(m))
    throw DimensionMismatch("B has " + std::to_string(B.size()) + " pairs, expected " +
                            std::to_string(pair_count(m)));
  for (double v : a)
    if (v < -tol) throw InvalidArgument("a has a negative entry");
  if (std::abs(norm2(a) - 1.0) > tol) throw InvalidArgument("a is not unit norm");
  double bsum = 0.0;
  for (const auto& b : B) {
    if (b.size() != qq) throw DimensionMismatch("violation weight length mismatch");
    for (double v : b)
      if (v < -tol) throw InvalidArgument("B has a negative entry");
    bsum += norm2(b);
  }
  if (std::abs(bsum - 1.0) > tol) throw InvalidArgument("violation weight norms do not sum to 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda outside [0, 1]");
}

Vec MetricParams::group_one_violation() const {
  Vec s(q(), 0.0);
  for (int v = 2; v <= m; ++v) s = add(s, B[pair_index(m, 1, v)]);
  return s;
}

MetricParams normalized_params(MetricParams p) {
  p.a = normalized(p.a);
  double bsum = 0.0;
  for (const auto& b : p.B) bsum += norm2(b);
  if (bsum > 0.0)
    for (auto& b : p.B) b = scaled(b, 1.0 / bsum);
  return p;
}

double evaluate(const MetricParams& params, const GroupRateTuple& tuple, const GroupPrevalence& prev) {
  if (tuple.k() != params.k || tuple.m() != params.m)
    throw DimensionMismatch("tuple does not match metric dimensions");
  const RateVector r = overall_rate(tuple, prev);
  double viol = 0.0;
  const auto pairs = group_pairs(params.m);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Vec& ru = tuple[pairs[p].first - 1].values();
    const Vec& rv = tuple[pairs[p].second - 1].values();
    const Vec& b = params.B[p];
    for (std::size_t i = 0; i < b.size(); ++i) viol += b[i] * std::abs(ru[i] - rv[i]);
  }
  return (1.0 - params.lambda) * dot(params.a, r.values()) + params.lambda * viol;
}

double linear_eval(const Vec& weights, const Vec& point) {
  if (weights.size() != point.size()) throw DimensionMismatch("linear_eval length mismatch");
  return dot(weights, point);
}

double regularity_value(const Vec& a, const std::vector<Vec>& B, int m) {
  Vec s(a.size(), 0.0);
  for (int v = 2; v <= m; ++v) s = add(s, B[pair_index(m, 1, v)]);
  const double n = norm2(s);
  return n > 0.0 ? dot(a, s) / n : 0.0;
}

MetricParams random_metric(std::uint64_t seed, int k, int m, const Margins& margins) {
  if (k < 2 || m < 2) throw InvalidArgument("random_metric needs k >= 2 and m >= 2");
  const std::size_t q = off_diag_dim(k);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int kMaxTries = 1000;

  auto abs_normal_unit = [&](Rng& rng) {
    Vec v(q);
    for (double& x : v) x = std::abs(normal(rng));
    return normalized(v);
  };

  // a depends only on (seed, k) so its draw is shared across group counts.
  Rng rng_a(substream(seed, 0xA, static_cast<std::uint64_t>(k)));
  MetricParams p;
  p.k = k;
  p.m = m;
  int tries = 0;
  do {
    if (++tries > kMaxTries) throw Error("random_metric: no misclassification draw met the margin");
    p.a = abs_normal_unit(rng_a);
  } while (*std::min_element(p.a.begin(), p.a.end()) < margins.c3);

  Rng rng(substream(seed, 0xB, (static_cast<std::uint64_t>(k) << 32) | static_cast<std::uint64_t>(m)));
  std::uniform_real_distribution<double> unif(margins.c2, margins.c1);
  p.lambda = unif(rng);
  const std::size_t M = pair_count(m);
  tries = 0;
  do {
    if (++tries > kMaxTries) throw Error("random_metric: no violation draw met the regularity margin");
    p.B.assign(M, Vec(q));
    double total = 0.0;
    for (auto& b : p.B) {
      for (double& x : b) x = std::abs(normal(rng));
      total += norm2(b);
    }
    for (auto& b : p.B) b = scaled(b, 1.0 / total);
  } while (regularity_value(p.a, p.B, m) > 1.0 - margins.regularity);
  return p;
}

MetricDistance metric_distance(const MetricParams& p, const MetricParams& q) {
  if (p.k != q.k || p.m != q.m || p.B.size() != q.B.size())
    throw DimensionMismatch("metric_distance between different dimensions");
  MetricDistance d;
  d.a_err = norm2(sub(p.a, q.a));
  double sq = 0.0;
  for (std::size_t i = 0; i < p.B.size(); ++i) {
    const Vec diff = sub(p.B[i], q.B[i]);
    sq += dot(diff, diff);
  }
  d.b_err = std::sqrt(sq);
  d.lambda_err = std::abs(p.lambda - q.lambda);
  return d;
}

}  // namespace fairelicit
