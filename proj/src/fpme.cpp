#include "fairelicit/fpme.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "fairelicit/errors.hpp"

namespace fairelicit {

namespace {

Eigen::MatrixXd to_eigen(const std::vector<Vec>& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd mat(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) mat(i, j) = rows[i][j];
  return mat;
}

// Run fn, attributing any library failure to the named stage.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const SessionAborted&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }
}

std::vector<int> zero_indexed(const Partition& p) {
  std::vector<int> out;
  for (int g : p.groups) out.push_back(g - 1);
  return out;
}

}  // namespace

bool Partition::contains(int g) const {
  return std::find(groups.begin(), groups.end(), g) != groups.end();
}

std::string Partition::label() const {
  std::string s = "{";
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(groups[i]);
  }
  return s + "}";
}

std::vector<Vec> membership_matrix(int m, const std::vector<Partition>& parts) {
  const auto pairs = group_pairs(m);
  std::vector<Vec> xi(parts.size(), Vec(pairs.size(), 0.0));
  for (std::size_t r = 0; r < parts.size(); ++r)
    for (std::size_t c = 0; c < pairs.size(); ++c)
      xi[r][c] = parts[r].contains(pairs[c].first) != parts[r].contains(pairs[c].second) ? 1.0 : 0.0;
  return xi;
}

int matrix_rank(const std::vector<Vec>& rows) {
  if (rows.empty()) return 0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(to_eigen(rows));
  lu.setThreshold(1e-10);
  return static_cast<int>(lu.rank());
}

PartitionSystem::PartitionSystem(int m, std::vector<Partition> partitions)
    : m_(m), parts_(std::move(partitions)) {
  const std::size_t M = std::max<std::size_t>(pair_count(m), 1);
  for (const auto& p : parts_) {
    if (p.groups.empty() || p.groups.size() >= static_cast<std::size_t>(m))
      throw PartitionSystemError("partition " + p.label() + " is not a nonempty proper subset");
    for (int g : p.groups)
      if (g < 1 || g > m) throw PartitionSystemError("partition " + p.label() + " names a missing group");
  }
  if (parts_.size() != M)
    throw PartitionSystemError("need " + std::to_string(M) + " partitions, got " +
                               std::to_string(parts_.size()));
  xi_ = membership_matrix(m, parts_);
  if (matrix_rank(xi_) != static_cast<int>(M)) throw PartitionSystemError("membership matrix is singular");
}

Vec PartitionSystem::solve(const Vec& rhs) const {
  if (rhs.size() != xi_.size()) throw DimensionMismatch("right-hand side length mismatch");
  const Eigen::MatrixXd A = to_eigen(xi_);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  const Eigen::VectorXd x = A.fullPivLu().solve(b);
  if (!((A * x - b).norm() <= 1e-8 * (1.0 + b.norm()))) throw PartitionSystemError("membership solve failed");
  return Vec(x.data(), x.data() + x.size());
}

PartitionSystem choose_partitions(int m) {
  if (m < 3) throw InvalidArgument("partition systems need at least three groups");
  if (m > 16) throw InvalidArgument("partition search is limited to 16 groups");
  const std::size_t M = pair_count(m);

  std::vector<Partition> candidates;
  for (const auto& [u, v] : group_pairs(m)) candidates.push_back({{u, v}});
  for (int g = 1; g <= m; ++g) candidates.push_back({{g}});
  for (int size = 3; size < m; ++size) {
    std::vector<bool> pick(m, false);
    std::fill(pick.begin(), pick.begin() + size, true);
    do {
      Partition p;
      for (int g = 0; g < m; ++g)
        if (pick[g]) p.groups.push_back(g + 1);
      candidates.push_back(std::move(p));
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }

  std::vector<Partition> chosen;
  int rank = 0;
  for (auto& cand : candidates) {
    chosen.push_back(cand);
    const int r = matrix_rank(membership_matrix(m, chosen));
    if (r > rank)
      rank = r;
    else
      chosen.pop_back();
    if (static_cast<std::size_t>(rank) == M) break;
  }
  if (static_cast<std::size_t>(rank) != M)
    throw PartitionSystemError("could not reach a full-rank membership matrix for m=" + std::to_string(m));
  return PartitionSystem(m, std::move(chosen));
}

FpmeConfig FpmeConfig::make(const Sphere& sphere, const GroupPrevalence& prev, double epsilon, int cycles) {
  FpmeConfig c;
  c.sphere = sphere;
  c.positive = positive_sphere(sphere);
  c.epsilon = epsilon;
  c.cycles = cycles;
  c.prev = prev;
  return c;
}

void FpmeConfig::validate() const {
  const int kk = k();
  if (m() < 2) throw InvalidArgument("fair elicitation needs at least two groups");
  if (sphere.dim() != off_diag_dim(kk)) throw DimensionMismatch("sphere dimension does not match k");
  lpme_config().validate();
  // the whole ball must stay inside the valid rate region
  for (double c : sphere.center)
    if (c - sphere.radius < 0.0 || c + sphere.radius > 1.0)
      throw InvalidArgument("sphere leaves the valid rate region");
  for (int row = 0; row < kk; ++row) {
    double s = 0.0;
    for (int c = 0; c < kk - 1; ++c) s += sphere.center[row * (kk - 1) + c];
    if (s + sphere.radius * std::sqrt(kk - 1.0) > 1.0)
      throw InvalidArgument("sphere leaves the valid rate region");
  }
}

std::string violation_stage(const Partition& sigma, int cls) {
  return "violation:" + sigma.label() + ":" + std::to_string(cls);
}

LinearOracle class_oracle(Oracle& omega, int k, int m) {
  return [&omega, k, m](const Vec& s1, const Vec& s2) {
    OracleQuery q{GroupRateTuple::replicate(RateVector(k, s1), m),
                  GroupRateTuple::replicate(RateVector(k, s2), m), kStageMisclassification};
    return omega.compare(q);
  };
}

LinearOracle violation_oracle(Oracle& omega, int k, int m, const Partition& sigma, int cls) {
  const RateVector pinned = trivial_rate(k, cls);
  std::string stage = violation_stage(sigma, cls);
  return [&omega, k, m, sigma, pinned, stage](const Vec& s1, const Vec& s2) {
    auto build = [&](const Vec& s) {
      const RateVector probe(k, s);
      std::vector<RateVector> rates;
      for (int g = 1; g <= m; ++g) rates.push_back(sigma.contains(g) ? pinned : probe);
      return GroupRateTuple(std::move(rates));
    };
    return omega.compare({build(s1), build(s2), stage});
  };
}

Vec elicit_a(Oracle& omega, const FpmeConfig& config) {
  return in_stage(kStageMisclassification,
                  [&] { return lpme(class_oracle(omega, config.k(), config.m()), config.lpme_config()); });
}

Vec partition_gamma(const Vec& f_breve, const Vec& f_tilde, const Vec& a_hat, const Vec& tau_sigma, int k) {
  const std::size_t q = off_diag_dim(k);
  if (f_breve.size() != q || f_tilde.size() != q || a_hat.size() != q || tau_sigma.size() != q)
    throw DimensionMismatch("slope lengths do not match k");
  Vec A(q);
  for (std::size_t i = 0; i < q; ++i) A[i] = a_hat[i] * (1.0 - tau_sigma[i]);
  // Pivots: (row 1, col k) and (row k, col 1); the two anchors carry opposite signs there.
  const std::size_t p = off_diag_index(k, 1, k);
  const std::size_t r = off_diag_index(k, k, 1);
  const double den = f_breve[r] * f_tilde[p] - f_breve[p] * f_tilde[r];
  if (std::abs(den) < 1e-9) throw DegenerateGeometry("anchor slopes are nearly parallel at the pivots");
  const double delta = 2.0 * (A[r] * f_tilde[p] - A[p] * f_tilde[r]) / den;
  const Vec w1 = sign_vector(k, 1);
  Vec gamma(q);
  for (std::size_t i = 0; i < q; ++i) gamma[i] = w1[i] * (delta * f_breve[i] - A[i]);
  return gamma;
}

Vec recover_b_two_groups(const Vec& f_breve, const Vec& f_tilde, const Vec& a_hat, const GroupPrevalence& prev) {
  if (prev.m() != 2) throw InvalidArgument("two-group recovery called with m=" + std::to_string(prev.m()));
  return partition_gamma(f_breve, f_tilde, a_hat, prev.tau(1), prev.k());
}

std::vector<Vec> recover_b_multi(const PartitionSystem& system, const std::vector<Vec>& f_breve,
                                 const std::vector<Vec>& f_tilde, const Vec& a_hat, const GroupPrevalence& prev) {
  const auto& parts = system.partitions();
  if (f_breve.size() != parts.size() || f_tilde.size() != parts.size())
    throw DimensionMismatch("one slope pair per partition is required");
  const int k = prev.k();
  const std::size_t q = off_diag_dim(k);
  std::vector<Vec> gamma;
  for (std::size_t s = 0; s < parts.size(); ++s) {
    try {
      gamma.push_back(partition_gamma(f_breve[s], f_tilde[s], a_hat, prev.tau_sum(zero_indexed(parts[s])), k));
    } catch (const DegenerateGeometry& e) {
      throw DegenerateGeometry("partition " + parts[s].label() + ": " + e.what());
    }
  }
  std::vector<Vec> b(parts.size(), Vec(q));
  Vec rhs(parts.size());
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t s = 0; s < parts.size(); ++s) rhs[s] = gamma[s][i];
    const Vec x = system.solve(rhs);
    for (std::size_t c = 0; c < x.size(); ++c) b[c][i] = x[c];
  }
  return b;
}

std::vector<Vec> finalize_violation_weights(std::vector<Vec> b, std::vector<std::string>* warnings) {
  std::size_t clamped = 0;
  for (auto& v : b)
    for (double& x : v)
      if (x < 0.0) {
        x = 0.0;
        ++clamped;
      }
  double total = 0.0;
  for (const auto& v : b) total += norm2(v);
  if (!(total > 0.0)) throw DegenerateGeometry("recovered violation weights are all zero");
  for (auto& v : b) v = scaled(v, 1.0 / total);
  if (clamped && warnings)
    warnings->push_back("clamped " + std::to_string(clamped) + " negative violation weight entries to zero");
  return b;
}

namespace {

struct AnchorSlopes {
  Vec f_breve;
  Vec f_tilde;
};

AnchorSlopes elicit_anchors(Oracle& omega, const FpmeConfig& config, const Partition& sigma) {
  const int k = config.k(), m = config.m();
  AnchorSlopes s;
  s.f_breve = in_stage(violation_stage(sigma, 1),
                       [&] { return lpme(violation_oracle(omega, k, m, sigma, 1), config.lpme_config()); });
  s.f_tilde = in_stage(violation_stage(sigma, k),
                       [&] { return lpme(violation_oracle(omega, k, m, sigma, k), config.lpme_config()); });
  return s;
}

}  // namespace

Vec elicit_b_two_groups(Oracle& omega, const FpmeConfig& config, const Vec& a_hat,
                        std::vector<std::string>* warnings) {
  if (config.m() != 2) throw InvalidArgument("two-group elicitation called with m=" + std::to_string(config.m()));
  const Partition sigma{{2}};
  const AnchorSlopes s = elicit_anchors(omega, config, sigma);
  return in_stage("violation:" + sigma.label(), [&] {
    auto b = finalize_violation_weights({recover_b_two_groups(s.f_breve, s.f_tilde, a_hat, config.prev)}, warnings);
    return b.front();
  });
}

std::vector<Vec> elicit_b_multi(Oracle& omega, const FpmeConfig& config, const Vec& a_hat,
                                std::vector<std::string>* warnings) {
  const PartitionSystem system = in_stage("violation", [&] { return choose_partitions(config.m()); });
  std::vector<Vec> fb, ft;
  for (const auto& sigma : system.partitions()) {
    AnchorSlopes s = elicit_anchors(omega, config, sigma);
    fb.push_back(std::move(s.f_breve));
    ft.push_back(std::move(s.f_tilde));
  }
  return in_stage("violation", [&] {
    return finalize_violation_weights(recover_b_multi(system, fb, ft, a_hat, config.prev), warnings);
  });
}

Vec tradeoff_slope(double lambda_bar, const Vec& a_hat, const std::vector<Vec>& B_hat, int m,
                   const GroupPrevalence& prev) {
  const Vec& tau1 = prev.tau(0);
  Vec slope(a_hat.size());
  Vec b1(a_hat.size(), 0.0);
  for (int v = 2; v <= m; ++v) b1 = add(b1, B_hat[pair_index(m, 1, v)]);
  for (std::size_t i = 0; i < slope.size(); ++i)
    slope[i] = (1.0 - lambda_bar) * tau1[i] * a_hat[i] + lambda_bar * b1[i];
  return slope;
}

Vec lambda_maximizer(double lambda_bar, const Vec& a_hat, const std::vector<Vec>& B_hat,
                     const GroupPrevalence& prev, const PositiveSphere& positive) {
  return optimal_on_sphere(tradeoff_slope(lambda_bar, a_hat, B_hat, prev.m(), prev), positive.as_sphere());
}

std::function<bool(double, double)> tradeoff_oracle(Oracle& omega, const FpmeConfig& config,
                                                    const Vec& a_hat, const std::vector<Vec>& B_hat) {
  const int k = config.k(), m = config.m();
  const RateVector base(k, config.positive.base);
  return [&omega, config, a_hat, B_hat, k, m, base](double l1, double l2) {
    auto build = [&](double lb) {
      std::vector<RateVector> rates(static_cast<std::size_t>(m), base);
      rates[0] = RateVector(k, lambda_maximizer(lb, a_hat, B_hat, config.prev, config.positive));
      return GroupRateTuple(std::move(rates));
    };
    return omega.compare({build(l1), build(l2), kStageTradeoff});
  };
}

double elicit_lambda(Oracle& omega, const FpmeConfig& config, const Vec& a_hat, const std::vector<Vec>& B_hat) {
  return in_stage(kStageTradeoff, [&] {
    const auto cmp = tradeoff_oracle(omega, config, a_hat, B_hat);
    Interval iv{0.0, 1.0};
    const int steps = halving_steps(1.0, config.epsilon);
    for (int s = 0; s < steps; ++s) {
      const Quartiles p = quartiles(iv);
      ShrinkResponses r;
      r.c_over_a = cmp(p.c, p.a);
      r.d_over_c = cmp(p.d, p.c);
      r.e_over_d = cmp(p.e, p.d);
      r.b_over_e = cmp(p.b, p.e);
      iv = shrink_interval(r, p);
    }
    return iv.mid();
  });
}

FpmeResult fpme(Oracle& omega, const FpmeConfig& config) {
  in_stage("config", [&] {
    config.validate();
    return 0;
  });
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  FpmeResult res;
  MetricParams& p = res.params;
  p.k = config.k();
  p.m = config.m();

  auto t0 = clock::now();
  p.a = elicit_a(omega, config);
  res.stage_seconds["misclassification"] = seconds_since(t0);

  t0 = clock::now();
  if (p.m == 2)
    p.B = {elicit_b_two_groups(omega, config, p.a, &res.warnings)};
  else
    p.B = elicit_b_multi(omega, config, p.a, &res.warnings);
  res.stage_seconds["violation"] = seconds_since(t0);

  res.regularity_margin = 1.0 - regularity_value(p.a, p.B, p.m);
  if (res.regularity_margin < 0.01)
    res.warnings.push_back("regularity margin " + std::to_string(res.regularity_margin) +
                           " is below 0.01; trade-off estimate may be unreliable");

  t0 = clock::now();
  p.lambda = elicit_lambda(omega, config, p.a, p.B);
  res.stage_seconds["tradeoff"] = seconds_since(t0);

  in_stage("result", [&] {
    p.validate();
    return 0;
  });
  return res;
}

QueryBudget query_budget(int k, int m, double epsilon, int cycles) {
  const std::uint64_t one = lpme_query_count(off_diag_dim(k), epsilon, cycles);
  const std::uint64_t M = m == 2 ? 1 : pair_count(m);
  QueryBudget b;
  b.misclassification = one;
  b.violation = 2 * M * one;
  b.tradeoff = 4 * static_cast<std::uint64_t>(halving_steps(1.0, epsilon));
  return b;
}

}  // namespace fairelicit
