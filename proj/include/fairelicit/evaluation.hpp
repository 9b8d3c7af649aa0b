#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairelicit/fair_metric.hpp"
#include "fairelicit/fpme.hpp"
#include "fairelicit/oracle.hpp"
#include "fairelicit/rate_geometry.hpp"

namespace fairelicit {

struct PoolEntry {
  std::string id;
  GroupRateTuple rates;
};

struct ClassifierPool {
  std::vector<PoolEntry> entries;
  GroupPrevalence prev;

  void validate() const;
};

/// Prevalence with per-class group weights drawn from U[1, 2] and normalized.
GroupPrevalence random_prevalence(std::uint64_t seed, int k, int m);

/// Sphere radius actually used for k classes: rho capped to stay inside the rate region.
double effective_radius(int k, double rho);
FpmeConfig experiment_config(int k, const GroupPrevalence& prev, double epsilon, double rho, int cycles = 4);

/// Runs fn(i) for i in [0, n) on up to jobs threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

struct NoiseSetting {
  double eps_omega = 0.0;
  NoisePolicy policy = NoisePolicy::Adversarial;
};

struct RecoveryConfig {
  std::vector<int> ks{2, 3};
  std::vector<int> ms{2, 3};
  int trials = 20;
  double epsilon = 1e-3;
  double rho = 0.2;
  int cycles = 4;
  std::optional<NoiseSetting> noise;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct RecoveryRow {
  int k = 0;
  int m = 0;
  int trial = 0;
  MetricDistance dist;
  std::uint64_t queries_total = 0;
  std::string error;  // nonempty for a failed trial
};

struct RecoveryCell {
  int k = 0;
  int m = 0;
  int ok = 0;
  int failed = 0;
  MetricDistance mean;
  MetricDistance stddev;
};

struct RecoveryReport {
  std::vector<RecoveryRow> rows;
  std::vector<RecoveryCell> cells;
  const RecoveryCell& cell(int k, int m) const;
};

RecoveryReport recovery_experiment(const RecoveryConfig& config);

ClassifierPool synth_pool(std::uint64_t seed, int n, int k, int m);

/// Ids ordered by ascending metric value, ties broken by id.
std::vector<std::string> rank(const ClassifierPool& pool, const MetricParams& params);

double ndcg_exponential(const MetricParams& true_params, const std::vector<std::string>& ranking,
                        const ClassifierPool& pool);

/// Tau-b between two score sequences (tie corrected).
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);
/// Tau-b between two orderings of the same ids.
double kendall_tau(const std::vector<std::string>& rank1, const std::vector<std::string>& rank2);

enum class Recipe { Accuracy, Weighted, Elicit, True, Absent };

struct BaselineSpec {
  std::string name;
  Recipe a = Recipe::Accuracy;
  Recipe b = Recipe::Accuracy;
  Recipe lambda = Recipe::Accuracy;
  double fixed_lambda = 0.5;  // used when lambda is Accuracy or Absent
};

/// The eight comparison metrics in their fixed report order.
const std::vector<BaselineSpec>& standard_baselines();

MetricParams baseline_params(const BaselineSpec& spec, const MetricParams& truth, Oracle& omega,
                             const FpmeConfig& config, std::uint64_t seed);

struct RankingConfig {
  int trials = 20;
  double epsilon = 1e-3;
  double rho = 0.2;
  int cycles = 4;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<BaselineSpec> baselines = standard_baselines();
};

struct RankingScores {
  double ndcg = 0.0;
  double tau = 0.0;
};

struct RankingTrial {
  int trial = 0;
  std::map<std::string, RankingScores> scores;  // "fpme" plus every baseline
  std::string error;
};

struct RankingReport {
  std::vector<std::string> methods;  // "fpme" first, then baselines in order
  std::vector<RankingTrial> trials;
  std::map<std::string, RankingScores> mean;
};

RankingReport ranking_experiment(const ClassifierPool& pool, const RankingConfig& config);

}  // namespace fairelicit
