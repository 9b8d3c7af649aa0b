#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fairelicit/fair_metric.hpp"
#include "fairelicit/lpme.hpp"
#include "fairelicit/oracle.hpp"
#include "fairelicit/rate_geometry.hpp"

namespace fairelicit {

/// Nonempty proper subset of groups, stored 1-indexed and sorted.
struct Partition {
  std::vector<int> groups;

  bool contains(int g) const;
  std::string label() const;  // "{1,2}"
  friend bool operator==(const Partition&, const Partition&) = default;
};

/// Partitions plus the binary membership matrix xi[row][pair] = |pair ∩ sigma| == 1.
class PartitionSystem {
 public:
  PartitionSystem(int m, std::vector<Partition> partitions);

  int m() const noexcept { return m_; }
  const std::vector<Partition>& partitions() const noexcept { return parts_; }
  const std::vector<Vec>& xi() const noexcept { return xi_; }
  /// Solves xi * x = rhs.
  Vec solve(const Vec& rhs) const;

 private:
  int m_;
  std::vector<Partition> parts_;
  std::vector<Vec> xi_;
};

std::vector<Vec> membership_matrix(int m, const std::vector<Partition>& parts);
int matrix_rank(const std::vector<Vec>& rows);

/// Greedy rank-building choice: pairs, then singletons, then larger subsets.
PartitionSystem choose_partitions(int m);

struct FpmeConfig {
  Sphere sphere;
  PositiveSphere positive;
  double epsilon = 1e-3;
  int cycles = 4;
  GroupPrevalence prev = GroupPrevalence::uniform(2, 2);

  static FpmeConfig make(const Sphere& sphere, const GroupPrevalence& prev, double epsilon, int cycles = 4);
  int k() const { return prev.k(); }
  int m() const { return prev.m(); }
  LpmeConfig lpme_config() const { return {sphere, epsilon, cycles}; }
  void validate() const;
};

std::string violation_stage(const Partition& sigma, int cls);
inline constexpr const char* kStageMisclassification = "misclassification";
inline constexpr const char* kStageTradeoff = "tradeoff";

/// Compares (s1, ..., s1) against (s2, ..., s2).
LinearOracle class_oracle(Oracle& omega, int k, int m);
/// Groups in sigma get the trivial rate of class cls; the rest get the probe.
LinearOracle violation_oracle(Oracle& omega, int k, int m, const Partition& sigma, int cls);

Vec elicit_a(Oracle& omega, const FpmeConfig& config);

/// Scaled violation sum gamma for one partition from the two anchor slopes.
/// Throws DegenerateGeometry when the pivot system is near singular.
Vec partition_gamma(const Vec& f_breve, const Vec& f_tilde, const Vec& a_hat, const Vec& tau_sigma, int k);

/// Unnormalized (common positive scale) weights from exact or estimated slopes.
Vec recover_b_two_groups(const Vec& f_breve, const Vec& f_tilde, const Vec& a_hat,
                         const GroupPrevalence& prev);
std::vector<Vec> recover_b_multi(const PartitionSystem& system, const std::vector<Vec>& f_breve,
                                 const std::vector<Vec>& f_tilde, const Vec& a_hat,
                                 const GroupPrevalence& prev);

/// Clamps negatives to zero and scales so the norms sum to one.
std::vector<Vec> finalize_violation_weights(std::vector<Vec> b, std::vector<std::string>* warnings);

Vec elicit_b_two_groups(Oracle& omega, const FpmeConfig& config, const Vec& a_hat,
                        std::vector<std::string>* warnings = nullptr);
std::vector<Vec> elicit_b_multi(Oracle& omega, const FpmeConfig& config, const Vec& a_hat,
                                std::vector<std::string>* warnings = nullptr);

Vec tradeoff_slope(double lambda_bar, const Vec& a_hat, const std::vector<Vec>& B_hat, int m,
                   const GroupPrevalence& prev);
Vec lambda_maximizer(double lambda_bar, const Vec& a_hat, const std::vector<Vec>& B_hat,
                     const GroupPrevalence& prev, const PositiveSphere& positive);

/// Comparator over candidate trade-offs via their maximizers padded with o.
std::function<bool(double, double)> tradeoff_oracle(Oracle& omega, const FpmeConfig& config,
                                                    const Vec& a_hat, const std::vector<Vec>& B_hat);

double elicit_lambda(Oracle& omega, const FpmeConfig& config, const Vec& a_hat, const std::vector<Vec>& B_hat);

struct FpmeResult {
  MetricParams params;
  std::vector<std::string> warnings;
  double regularity_margin = 0.0;
  std::map<std::string, double> stage_seconds;
};

FpmeResult fpme(Oracle& omega, const FpmeConfig& config);

struct QueryBudget {
  std::uint64_t misclassification = 0;
  std::uint64_t violation = 0;
  std::uint64_t tradeoff = 0;
  std::uint64_t total() const { return misclassification + violation + tradeoff; }
};

QueryBudget query_budget(int k, int m, double epsilon, int cycles = 4);

}  // namespace fairelicit
