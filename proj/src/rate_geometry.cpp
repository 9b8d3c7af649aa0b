#include "fairelicit/rate_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fairelicit/errors.hpp"

namespace fairelicit {

namespace {

constexpr double kTol = 1e-9;

void check_class(int k, int cls) {
  if (k < 2) throw InvalidArgument("class count must be at least 2, got " + std::to_string(k));
  if (cls < 1 || cls > k)
    throw InvalidArgument("class index " + std::to_string(cls) + " outside [1, " +
                          std::to_string(k) + "]");
}

}  // namespace

std::size_t off_diag_index(int k, int i, int j) {
  return static_cast<std::size_t>(i - 1) * (k - 1) + (j < i ? j : j - 1) - 1;
}

RateVector::RateVector(int k, Vec values) : k_(k), values_(std::move(values)) {
  if (k < 2) throw InvalidArgument("class count must be at least 2, got " + std::to_string(k));
  if (values_.size() != off_diag_dim(k))
    throw DimensionMismatch("rate vector for k=" + std::to_string(k) + " needs " +
                            std::to_string(off_diag_dim(k)) + " entries, got " +
                            std::to_string(values_.size()));
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!(v >= -kTol && v <= 1.0 + kTol))
      throw InvalidArgument("rate entry " + std::to_string(i) + " = " + std::to_string(v) +
                            " outside [0, 1]");
  }
  for (int row = 0; row < k; ++row) {
    double s = 0.0;
    for (int c = 0; c < k - 1; ++c) s += values_[row * (k - 1) + c];
    if (s > 1.0 + kTol)
      throw InvalidArgument("row " + std::to_string(row + 1) + " off-diagonal mass " +
                            std::to_string(s) + " exceeds 1");
  }
}

std::vector<Vec> RateVector::matrix() const {
  std::vector<Vec> mat(k_, Vec(k_, 0.0));
  for (int i = 1; i <= k_; ++i) {
    double off = 0.0;
    for (int j = 1; j <= k_; ++j) {
      if (i == j) continue;
      const double v = values_[off_diag_index(k_, i, j)];
      mat[i - 1][j - 1] = v;
      off += v;
    }
    mat[i - 1][i - 1] = 1.0 - off;
  }
  return mat;
}

GroupRateTuple::GroupRateTuple(std::vector<RateVector> rates) : rates_(std::move(rates)) {
  if (rates_.empty()) throw InvalidArgument("rate tuple needs at least one group");
  for (const auto& r : rates_)
    if (r.k() != rates_.front().k())
      throw DimensionMismatch("groups disagree on class count");
}

GroupRateTuple GroupRateTuple::replicate(const RateVector& r, int m) {
  return GroupRateTuple(std::vector<RateVector>(static_cast<std::size_t>(m), r));
}

GroupPrevalence::GroupPrevalence(int k, int m, std::vector<Vec> t) : k_(k), m_(m), t_(std::move(t)) {
  if (k < 2) throw InvalidArgument("class count must be at least 2");
  if (m < 1) throw InvalidArgument("group count must be at least 1");
  if (t_.size() != static_cast<std::size_t>(m))
    throw DimensionMismatch("prevalence needs " + std::to_string(m) + " group rows");
  for (const auto& row : t_) {
    if (row.size() != static_cast<std::size_t>(k))
      throw DimensionMismatch("prevalence row needs " + std::to_string(k) + " entries");
    for (double v : row)
      if (!(v >= -kTol && v <= 1.0 + kTol)) throw InvalidArgument("prevalence entry outside [0, 1]");
  }
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (int g = 0; g < m; ++g) s += t_[g][i];
    if (std::abs(s - 1.0) > kTol)
      throw InvalidArgument("prevalence of class " + std::to_string(i + 1) + " sums to " +
                            std::to_string(s) + " across groups");
  }
  tau_.assign(m, Vec(off_diag_dim(k)));
  for (int g = 0; g < m; ++g)
    for (int i = 1; i <= k; ++i)
      for (int j = 1; j <= k; ++j)
        if (i != j) tau_[g][off_diag_index(k, i, j)] = t_[g][i - 1];
}

GroupPrevalence GroupPrevalence::uniform(int k, int m) {
  return GroupPrevalence(k, m, std::vector<Vec>(m, Vec(k, 1.0 / m)));
}

Vec GroupPrevalence::tau_sum(const std::vector<int>& groups) const {
  Vec s(off_diag_dim(k_), 0.0);
  for (int g : groups)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += tau_[g][i];
  return s;
}

bool Sphere::contains(const Vec& x, double slack) const {
  return norm2(sub(x, center)) <= radius + slack;
}

RateVector trivial_rate(int k, int cls) {
  check_class(k, cls);
  Vec v(off_diag_dim(k), 0.0);
  for (int i = 1; i <= k; ++i)
    if (i != cls) v[off_diag_index(k, i, cls)] = 1.0;
  return RateVector(k, std::move(v));
}

RateVector uniform_rate(int k) {
  if (k < 2) throw InvalidArgument("class count must be at least 2");
  return RateVector(k, Vec(off_diag_dim(k), 1.0 / k));
}

Vec sign_vector(int k, int cls) {
  Vec w = trivial_rate(k, cls).values();
  for (double& v : w) v = 1.0 - 2.0 * v;
  return w;
}

RateVector overall_rate(const GroupRateTuple& tuple, const GroupPrevalence& prev) {
  if (tuple.m() != prev.m() || tuple.k() != prev.k())
    throw DimensionMismatch("tuple (k=" + std::to_string(tuple.k()) + ", m=" +
                            std::to_string(tuple.m()) + ") vs prevalence (k=" +
                            std::to_string(prev.k()) + ", m=" + std::to_string(prev.m()) + ")");
  Vec r(tuple.q(), 0.0);
  for (int g = 0; g < tuple.m(); ++g) {
    const Vec& tau = prev.tau(g);
    const Vec& rg = tuple[g].values();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += tau[i] * rg[i];
  }
  return RateVector(tuple.k(), std::move(r));
}

Vec discrepancy(const RateVector& ru, const RateVector& rv) {
  if (ru.k() != rv.k()) throw DimensionMismatch("discrepancy between different class counts");
  Vec d(ru.q());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(ru[i] - rv[i]);
  return d;
}

EmpiricalRates empirical_rates(const std::vector<PredictionRecord>& records, int k, int m) {
  if (k < 2) throw InvalidArgument("class count must be at least 2");
  if (m < 1) throw InvalidArgument("group count must be at least 1");
  if (records.empty()) throw InvalidArgument("no prediction records");

  // counts[g][i][j]
  std::vector<std::vector<Vec>> counts(m, std::vector<Vec>(k, Vec(k, 0.0)));
  for (std::size_t n = 0; n < records.size(); ++n) {
    const auto& rec = records[n];
    if (rec.group < 1 || rec.group > m || rec.true_label < 1 || rec.true_label > k ||
        rec.predicted_label < 1 || rec.predicted_label > k)
      throw InvalidArgument("record " + std::to_string(n + 1) + " has an index out of range");
    counts[rec.group - 1][rec.true_label - 1][rec.predicted_label - 1] += 1.0;
  }

  Vec class_total(k, 0.0);
  std::vector<Vec> cell(m, Vec(k, 0.0));
  for (int g = 0; g < m; ++g)
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) cell[g][i] += counts[g][i][j];
      class_total[i] += cell[g][i];
    }
  for (int i = 0; i < k; ++i)
    if (class_total[i] == 0.0)
      throw UndefinedRate("undefined prevalence: no records with true class " + std::to_string(i + 1));

  std::vector<RateVector> rates;
  std::vector<Vec> t(m, Vec(k));
  for (int g = 0; g < m; ++g) {
    Vec v(off_diag_dim(k), 0.0);
    for (int i = 1; i <= k; ++i) {
      const double n_gi = cell[g][i - 1];
      if (n_gi == 0.0)
        throw UndefinedRate("undefined conditional rate: no records for group " +
                            std::to_string(g + 1) + ", true class " + std::to_string(i));
      for (int j = 1; j <= k; ++j)
        if (j != i) v[off_diag_index(k, i, j)] = counts[g][i - 1][j - 1] / n_gi;
      t[g][i - 1] = n_gi / class_total[i - 1];
    }
    rates.emplace_back(k, std::move(v));
  }
  return {GroupRateTuple(std::move(rates)), GroupPrevalence(k, m, std::move(t))};
}

Vec unit_direction(const AngleVector& angles) {
  const std::size_t q = angles.size() + 1;
  Vec u(q);
  double prod = 1.0;
  for (std::size_t i = 0; i + 1 < q; ++i) {
    u[i] = prod * std::cos(angles[i]);
    prod *= std::sin(angles[i]);
  }
  u[q - 1] = prod;
  return u;
}

AngleVector angles_from_direction(const Vec& u) {
  const std::size_t q = u.size();
  if (q < 2) throw InvalidArgument("direction needs at least two coordinates");
  AngleVector th(q - 1);
  // tail[i] = norm of u[i..q-1]
  Vec tail(q + 1, 0.0);
  for (std::size_t i = q; i-- > 0;) tail[i] = std::hypot(tail[i + 1], u[i]);
  for (std::size_t i = 0; i + 2 < q; ++i) th[i] = std::atan2(tail[i + 1], u[i]);
  double last = std::atan2(u[q - 1], u[q - 2]);
  if (last < 0) last += 2.0 * std::numbers::pi;
  th[q - 2] = last;
  return th;
}

Vec sphere_boundary_point(const AngleVector& angles, const Sphere& sphere) {
  if (angles.size() + 1 != sphere.dim())
    throw DimensionMismatch("angle count does not match sphere dimension");
  return add(sphere.center, scaled(unit_direction(angles), sphere.radius));
}

Vec optimal_on_sphere(const Vec& slope, const Sphere& sphere) {
  if (slope.size() != sphere.dim()) throw DimensionMismatch("slope does not match sphere dimension");
  const double n = norm2(slope);
  if (!(n > 0.0)) throw InvalidArgument("zero slope has no optimal direction");
  return add(sphere.center, scaled(slope, sphere.radius / n));
}

Sphere find_sphere(const MembershipFn& member, const Vec& o, int k, FindSphereOptions opts) {
  const std::size_t q = o.size();
  if (q != off_diag_dim(k)) throw DimensionMismatch("center does not match class count");
  if (!member(o)) throw InfeasibleCenter("center point is not feasible");

  auto probe = [&](std::size_t axis, double dir) {
    Vec x = o;
    auto ok = [&](double step) {
      x[axis] = o[axis] + dir * step;
      return member(x);
    };
    if (ok(opts.cap)) return opts.cap;
    double lo = 0.0, hi = opts.cap;
    while (hi - lo > opts.tolerance) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
    return lo;
  };

  double inv_sq = 0.0;
  for (std::size_t j = 0; j < q; ++j) {
    const double l = std::min(probe(j, 1.0), probe(j, -1.0));
    if (l <= 0.0)
      throw InfeasibleCenter("no feasible step along axis " + std::to_string(j + 1));
    inv_sq += 1.0 / (l * l);
  }
  return {o, 1.0 / std::sqrt(inv_sq)};
}

PositiveSphere positive_sphere(const Sphere& sphere) {
  const double rq = std::sqrt(static_cast<double>(sphere.dim()));
  const double rho = sphere.radius;
  const double varrho = rho / (2.0 * (1.0 + rq));
  Vec c = sphere.center;
  for (double& v : c) v += (rho - varrho) / rq;
  return {std::move(c), varrho, sphere.center};
}

double valid_rate_inscribed_radius(int k) {
  return 1.0 / (k * std::sqrt(static_cast<double>(k - 1)));
}

bool is_valid_rate(int k, const Vec& x, double tol) {
  if (x.size() != off_diag_dim(k)) return false;
  for (double v : x)
    if (v < -tol || v > 1.0 + tol) return false;
  for (int row = 0; row < k; ++row) {
    double s = 0.0;
    for (int c = 0; c < k - 1; ++c) s += x[row * (k - 1) + c];
    if (s > 1.0 + tol) return false;
  }
  return true;
}

}  // namespace fairelicit
