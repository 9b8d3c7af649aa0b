#include "fairelicit/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>

#include "fairelicit/errors.hpp"
#include "fairelicit/rng.hpp"

namespace fairelicit {

void ClassifierPool::validate() const {
  if (entries.size() < 2) throw InvalidArgument("a classifier pool needs at least two entries");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.rates.k() != prev.k() || e.rates.m() != prev.m())
      throw DimensionMismatch("pool entry '" + e.id + "' does not match the prevalence dimensions");
    if (!ids.insert(e.id).second) throw InvalidArgument("duplicate pool id '" + e.id + "'");
  }
}

GroupPrevalence random_prevalence(std::uint64_t seed, int k, int m) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  std::vector<Vec> t(m, Vec(k));
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (int g = 0; g < m; ++g) s += (t[g][i] = u(rng));
    for (int g = 0; g < m; ++g) t[g][i] /= s;
  }
  return GroupPrevalence(k, m, std::move(t));
}

double effective_radius(int k, double rho) { return std::min(rho, 0.95 * valid_rate_inscribed_radius(k)); }

FpmeConfig experiment_config(int k, const GroupPrevalence& prev, double epsilon, double rho, int cycles) {
  return FpmeConfig::make({uniform_rate(k).values(), effective_radius(k, rho)}, prev, epsilon, cycles);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::clamp<std::size_t>(jobs < 1 ? 1 : jobs, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

const RecoveryCell& RecoveryReport::cell(int k, int m) const {
  for (const auto& c : cells)
    if (c.k == k && c.m == m) return c;
  throw InvalidArgument("no cell for k=" + std::to_string(k) + ", m=" + std::to_string(m));
}

RecoveryReport recovery_experiment(const RecoveryConfig& config) {
  if (config.ks.empty() || config.ms.empty()) throw InvalidArgument("recovery grid is empty");
  if (config.trials < 1) throw InvalidArgument("trials must be at least 1");

  RecoveryReport rep;
  for (int k : config.ks)
    for (int m : config.ms)
      for (int t = 0; t < config.trials; ++t) rep.rows.push_back({k, m, t, {}, 0, {}});

  parallel_for(rep.rows.size(), config.jobs, [&](std::size_t idx) {
    RecoveryRow& row = rep.rows[idx];
    const auto trial = static_cast<std::uint64_t>(row.trial);
    try {
      // The metric stream ignores (k, m) so the same trial plants comparable metrics across cells.
      const MetricParams truth = random_metric(substream(config.seed, 1, trial), row.k, row.m);
      const GroupPrevalence prev = random_prevalence(
          substream(config.seed, 2, (trial << 16) | (row.k << 8) | row.m), row.k, row.m);
      const FpmeConfig cfg = experiment_config(row.k, prev, config.epsilon, config.rho, config.cycles);
      std::unique_ptr<Oracle> inner;
      if (config.noise)
        inner = std::make_unique<NoisyOracle>(truth, prev, config.noise->eps_omega,
                                              substream(config.seed, 3, trial), config.noise->policy);
      else
        inner = std::make_unique<ExactOracle>(truth, prev);
      CountingOracle counter(*inner, false);
      const FpmeResult res = fpme(counter, cfg);
      row.dist = metric_distance(truth, res.params);
      row.queries_total = counter.count();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  for (int k : config.ks)
    for (int m : config.ms) {
      RecoveryCell c{k, m, 0, 0, {}, {}};
      std::vector<MetricDistance> ok;
      for (const auto& r : rep.rows)
        if (r.k == k && r.m == m) {
          if (r.error.empty())
            ok.push_back(r.dist);
          else
            ++c.failed;
        }
      c.ok = static_cast<int>(ok.size());
      if (!ok.empty()) {
        const double n = static_cast<double>(ok.size());
        for (const auto& d : ok) {
          c.mean.a_err += d.a_err / n;
          c.mean.b_err += d.b_err / n;
          c.mean.lambda_err += d.lambda_err / n;
        }
        for (const auto& d : ok) {
          c.stddev.a_err += std::pow(d.a_err - c.mean.a_err, 2) / n;
          c.stddev.b_err += std::pow(d.b_err - c.mean.b_err, 2) / n;
          c.stddev.lambda_err += std::pow(d.lambda_err - c.mean.lambda_err, 2) / n;
        }
        c.stddev.a_err = std::sqrt(c.stddev.a_err);
        c.stddev.b_err = std::sqrt(c.stddev.b_err);
        c.stddev.lambda_err = std::sqrt(c.stddev.lambda_err);
      }
      rep.cells.push_back(c);
    }
  return rep;
}

ClassifierPool synth_pool(std::uint64_t seed, int n, int k, int m) {
  if (n < 2) throw InvalidArgument("pool size must be at least 2");
  Rng rng(substream(seed, 0x900, 0));
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<RateVector> vertices;
  for (int i = 1; i <= k; ++i) vertices.push_back(trivial_rate(k, i));
  ClassifierPool pool{{}, random_prevalence(substream(seed, 0x901, 0), k, m)};
  const int width = std::max(3, static_cast<int>(std::to_string(n - 1).size()));
  for (int c = 0; c < n; ++c) {
    std::vector<RateVector> rates;
    for (int g = 0; g < m; ++g) {
      // Dirichlet(1) weights over the trivial-classifier vertices
      Vec w(k);
      double s = 0.0;
      for (double& x : w) s += (x = gamma(rng));
      Vec r(off_diag_dim(k), 0.0);
      for (int i = 0; i < k; ++i)
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += w[i] / s * vertices[i][j];
      rates.emplace_back(k, std::move(r));
    }
    std::string id = std::to_string(c);
    id.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0');
    pool.entries.push_back({"c" + id, GroupRateTuple(std::move(rates))});
  }
  return pool;
}

namespace {

std::vector<double> pool_values(const ClassifierPool& pool, const MetricParams& params) {
  std::vector<double> v;
  v.reserve(pool.entries.size());
  for (const auto& e : pool.entries) v.push_back(evaluate(params, e.rates, pool.prev));
  return v;
}

}  // namespace

std::vector<std::string> rank(const ClassifierPool& pool, const MetricParams& params) {
  const auto vals = pool_values(pool, params);
  std::vector<std::size_t> idx(vals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    if (vals[i] != vals[j]) return vals[i] < vals[j];
    return pool.entries[i].id < pool.entries[j].id;
  });
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(pool.entries[i].id);
  return out;
}

double ndcg_exponential(const MetricParams& true_params, const std::vector<std::string>& ranking,
                        const ClassifierPool& pool) {
  if (ranking.size() != pool.entries.size()) throw InvalidArgument("ranking is not a permutation of the pool");
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < pool.entries.size(); ++i) pos[pool.entries[i].id] = i;
  std::vector<bool> seen(pool.entries.size(), false);
  for (const auto& id : ranking) {
    const auto it = pos.find(id);
    if (it == pos.end() || seen[it->second]) throw InvalidArgument("ranking is not a permutation of the pool");
    seen[it->second] = true;
  }
  if (pool.entries.size() < 2) return 1.0;

  const auto vals = pool_values(pool, true_params);
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  if (*hi == *lo) return 1.0;
  std::vector<double> gain(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double rel = 5.0 * (*hi - vals[i]) / (*hi - *lo);
    gain[i] = std::exp2(rel) - 1.0;
  }
  double dcg = 0.0;
  for (std::size_t r = 0; r < ranking.size(); ++r) dcg += gain[pos[ranking[r]]] / std::log2(r + 2.0);
  std::vector<double> ideal = gain;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal.size(); ++r) idcg += ideal[r] / std::log2(r + 2.0);
  return idcg > 0.0 ? dcg / idcg : 1.0;
}

namespace {

// Merge sort that returns the number of inversions.
std::uint64_t sort_count_swaps(std::vector<double>& v, std::size_t lo, std::size_t hi, std::vector<double>& buf) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = (lo + hi) / 2;
  std::uint64_t swaps = sort_count_swaps(v, lo, mid, buf) + sort_count_swaps(v, mid, hi, buf);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

// Pairs tied within runs of equal values in a sorted sequence.
std::uint64_t tied_pairs(const std::vector<double>& sorted) {
  std::uint64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionMismatch("kendall tau needs equal-length sequences");
  const std::size_t n = x.size();
  if (n < 2) return 1.0;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return x[i] != x[j] ? x[i] < x[j] : y[i] < y[j];
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = tied_pairs(xs);
  std::uint64_t n3 = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && xs[i] == xs[i - 1] && ys[i] == ys[i - 1]) {
      ++run;
    } else {
      n3 += run * (run - 1) / 2;
      run = 1;
    }
  }
  std::vector<double> buf(n);
  const std::uint64_t swaps = sort_count_swaps(ys, 0, n, buf);
  const std::uint64_t n2 = tied_pairs(ys);
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  if (denom == 0.0) throw InvalidArgument("kendall tau is undefined for a constant sequence");
  const double num = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                     static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  return num / denom;
}

double kendall_tau(const std::vector<std::string>& rank1, const std::vector<std::string>& rank2) {
  if (rank1.size() != rank2.size()) throw InvalidArgument("rankings have different id sets");
  std::unordered_map<std::string, double> pos2;
  for (std::size_t i = 0; i < rank2.size(); ++i) pos2[rank2[i]] = static_cast<double>(i);
  if (pos2.size() != rank2.size()) throw InvalidArgument("ranking repeats an id");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < rank1.size(); ++i) {
    const auto it = pos2.find(rank1[i]);
    if (it == pos2.end()) throw InvalidArgument("rankings have different id sets");
    x.push_back(static_cast<double>(i));
    y.push_back(it->second);
  }
  return kendall_tau_b(x, y);
}

const std::vector<BaselineSpec>& standard_baselines() {
  static const std::vector<BaselineSpec> specs = {
      {"phi_varphi_lambda_a", Recipe::Accuracy, Recipe::Accuracy, Recipe::Accuracy, 0.5},
      {"phi_varphi_lambda_w", Recipe::Weighted, Recipe::Weighted, Recipe::Weighted, 0.5},
      {"phi_varphi_a", Recipe::Accuracy, Recipe::Accuracy, Recipe::Elicit, 0.5},
      {"phi_varphi_w", Recipe::Weighted, Recipe::Weighted, Recipe::Elicit, 0.5},
      {"phi_a", Recipe::Accuracy, Recipe::Elicit, Recipe::Elicit, 0.5},
      {"phi_w", Recipe::Weighted, Recipe::Elicit, Recipe::Elicit, 0.5},
      {"o_p", Recipe::True, Recipe::Absent, Recipe::Absent, 0.0},
      {"o_f", Recipe::Absent, Recipe::True, Recipe::Absent, 1.0},
  };
  return specs;
}

namespace {

// Random weights in [0.1, 1] reassigned so their order follows the reference.
Vec order_matched(const Vec& reference, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Vec draw(reference.size());
  for (double& x : draw) x = u(rng);
  std::sort(draw.begin(), draw.end());
  std::vector<std::size_t> idx(reference.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return reference[i] < reference[j]; });
  Vec out(reference.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[idx[r]] = draw[r];
  return out;
}

}  // namespace

MetricParams baseline_params(const BaselineSpec& spec, const MetricParams& truth, Oracle& omega,
                             const FpmeConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t q = truth.q();
  const std::size_t M = truth.B.size();
  MetricParams p;
  p.k = truth.k;
  p.m = truth.m;

  switch (spec.a) {
    case Recipe::Weighted:
      p.a = normalized(order_matched(truth.a, rng));
      break;
    case Recipe::True:
      p.a = truth.a;
      break;
    case Recipe::Elicit:
      p.a = elicit_a(omega, config);
      break;
    default:
      p.a = Vec(q, 1.0 / std::sqrt(static_cast<double>(q)));
  }

  switch (spec.b) {
    case Recipe::Weighted: {
      Vec stacked;
      for (const auto& b : truth.B) stacked.insert(stacked.end(), b.begin(), b.end());
      const Vec w = order_matched(stacked, rng);
      p.B.assign(M, Vec(q));
      for (std::size_t i = 0; i < M; ++i) std::copy(w.begin() + i * q, w.begin() + (i + 1) * q, p.B[i].begin());
      p.B = finalize_violation_weights(std::move(p.B), nullptr);
      break;
    }
    case Recipe::True:
      p.B = truth.B;
      break;
    case Recipe::Elicit:
      p.B = truth.m == 2 ? std::vector<Vec>{elicit_b_two_groups(omega, config, p.a)}
                         : elicit_b_multi(omega, config, p.a);
      break;
    default:
      p.B.assign(M, Vec(q, 1.0 / (static_cast<double>(M) * std::sqrt(static_cast<double>(q)))));
  }

  switch (spec.lambda) {
    case Recipe::Weighted: {
      std::uniform_real_distribution<double> u(0.0, 0.5);
      p.lambda = truth.lambda >= 0.5 ? 0.5 + u(rng) : u(rng);
      break;
    }
    case Recipe::True:
      p.lambda = truth.lambda;
      break;
    case Recipe::Elicit:
      p.lambda = elicit_lambda(omega, config, p.a, p.B);
      break;
    default:
      p.lambda = spec.fixed_lambda;
  }
  return p;
}

RankingReport ranking_experiment(const ClassifierPool& pool, const RankingConfig& config) {
  pool.validate();
  if (pool.prev.m() < 2) throw InvalidArgument("ranking needs at least two groups");
  if (config.trials < 1) throw InvalidArgument("trials must be at least 1");
  const int k = pool.prev.k(), m = pool.prev.m();
  const FpmeConfig cfg = experiment_config(k, pool.prev, config.epsilon, config.rho, config.cycles);

  RankingReport rep;
  rep.methods.push_back("fpme");
  for (const auto& b : config.baselines) rep.methods.push_back(b.name);
  rep.trials.resize(config.trials);

  parallel_for(rep.trials.size(), config.jobs, [&](std::size_t t) {
    RankingTrial& tr = rep.trials[t];
    tr.trial = static_cast<int>(t);
    try {
      const MetricParams truth = random_metric(substream(config.seed, 1, t), k, m);
      ExactOracle omega(truth, pool.prev);
      const auto truth_rank = rank(pool, truth);
      auto score = [&](const MetricParams& p) {
        const auto r = rank(pool, p);
        return RankingScores{ndcg_exponential(truth, r, pool), kendall_tau(truth_rank, r)};
      };
      tr.scores["fpme"] = score(fpme(omega, cfg).params);
      for (std::size_t b = 0; b < config.baselines.size(); ++b)
        tr.scores[config.baselines[b].name] =
            score(baseline_params(config.baselines[b], truth, omega, cfg, substream(config.seed, 5, (t << 8) | b)));
    } catch (const std::exception& e) {
      tr.error = e.what();
      tr.scores.clear();
    }
  });

  for (const auto& name : rep.methods) {
    RankingScores s;
    int n = 0;
    for (const auto& tr : rep.trials)
      if (tr.error.empty()) {
        s.ndcg += tr.scores.at(name).ndcg;
        s.tau += tr.scores.at(name).tau;
        ++n;
      }
    if (n) {
      s.ndcg /= n;
      s.tau /= n;
    }
    rep.mean[name] = s;
  }
  return rep;
}

}  // namespace fairelicit
