#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairelicit/rate_geometry.hpp"
#include "fairelicit/vec.hpp"

namespace fairelicit {

/// Unordered group pairs (u, v), u < v, 1-indexed, lexicographic.
std::vector<std::pair<int, int>> group_pairs(int m);
std::size_t pair_count(int m);
/// Position of pair {u, v} in group_pairs order.
std::size_t pair_index(int m, int u, int v);
std::string pair_key(int u, int v);

struct MetricParams {
  int k = 2;
  int m = 2;
  Vec a;
  std::vector<Vec> B;  // group_pairs(m) order
  double lambda = 0.0;

  std::size_t q() const noexcept { return off_diag_dim(k); }
  /// Throws if a norm, count or range invariant fails.
  void validate(double tol = 1e-9) const;
  /// Sum of b^{1v}, v >= 2.
  Vec group_one_violation() const;

  friend bool operator==(const MetricParams&, const MetricParams&) = default;
};

/// Rescales a and B to the unit normalizations.
MetricParams normalized_params(MetricParams p);

double evaluate(const MetricParams& params, const GroupRateTuple& tuple, const GroupPrevalence& prev);
double linear_eval(const Vec& weights, const Vec& point);

struct Margins {
  double c1 = 0.9;
  double c2 = 0.1;
  double c3 = 0.05;
  double regularity = 0.01;
};

MetricParams random_metric(std::uint64_t seed, int k, int m, const Margins& margins = {});

/// <a, s / |s|> with s the summed group-one violation weights.
double regularity_value(const Vec& a, const std::vector<Vec>& B, int m);

struct MetricDistance {
  double a_err = 0.0;
  double b_err = 0.0;
  double lambda_err = 0.0;
};

MetricDistance metric_distance(const MetricParams& p, const MetricParams& q);

}  // namespace fairelicit
