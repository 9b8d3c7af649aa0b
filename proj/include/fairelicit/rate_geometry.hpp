#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fairelicit/vec.hpp"

namespace fairelicit {

inline std::size_t off_diag_dim(int k) { return static_cast<std::size_t>(k) * (k - 1); }

/// Position of off-diagonal entry (i, j), both 1-indexed, in row-major order.
std::size_t off_diag_index(int k, int i, int j);

/// One classifier's off-diagonal confusion rates on one group.
class RateVector {
 public:
  RateVector(int k, Vec values);

  int k() const noexcept { return k_; }
  std::size_t q() const noexcept { return values_.size(); }
  const Vec& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Full k x k matrix with the implied diagonal filled in, row-major.
  std::vector<Vec> matrix() const;

  friend bool operator==(const RateVector&, const RateVector&) = default;

 private:
  int k_;
  Vec values_;
};

class GroupRateTuple {
 public:
  explicit GroupRateTuple(std::vector<RateVector> rates);
  /// Every group gets the same rates.
  static GroupRateTuple replicate(const RateVector& r, int m);

  int m() const noexcept { return static_cast<int>(rates_.size()); }
  int k() const noexcept { return rates_.front().k(); }
  std::size_t q() const noexcept { return rates_.front().q(); }
  const RateVector& operator[](std::size_t g) const { return rates_[g]; }
  const std::vector<RateVector>& rates() const noexcept { return rates_; }

  friend bool operator==(const GroupRateTuple&, const GroupRateTuple&) = default;

 private:
  std::vector<RateVector> rates_;
};

/// t[g][i] = P(G = g | Y = i); each class column sums to one across groups.
class GroupPrevalence {
 public:
  GroupPrevalence(int k, int m, std::vector<Vec> t);
  static GroupPrevalence uniform(int k, int m);

  int k() const noexcept { return k_; }
  int m() const noexcept { return m_; }
  const std::vector<Vec>& t() const noexcept { return t_; }
  /// Off-diagonal expansion of group g's prevalence (0-indexed g).
  const Vec& tau(std::size_t g) const { return tau_[g]; }
  /// Sum of tau over the given 0-indexed groups.
  Vec tau_sum(const std::vector<int>& groups) const;

  friend bool operator==(const GroupPrevalence&, const GroupPrevalence&) = default;

 private:
  int k_;
  int m_;
  std::vector<Vec> t_;
  std::vector<Vec> tau_;
};

struct Sphere {
  Vec center;
  double radius = 0.0;

  std::size_t dim() const noexcept { return center.size(); }
  bool contains(const Vec& x, double slack = 1e-12) const;
};

struct PositiveSphere {
  Vec center;
  double radius = 0.0;
  Vec base;

  Sphere as_sphere() const { return {center, radius}; }
};

/// q-1 hyperspherical angles; the last one is the primary angle in [0, 2pi].
using AngleVector = Vec;

struct PredictionRecord {
  int group = 1;
  int true_label = 1;
  int predicted_label = 1;
};

RateVector trivial_rate(int k, int cls);
RateVector uniform_rate(int k);
Vec sign_vector(int k, int cls);

RateVector overall_rate(const GroupRateTuple& tuple, const GroupPrevalence& prev);
Vec discrepancy(const RateVector& ru, const RateVector& rv);

struct EmpiricalRates {
  GroupRateTuple rates;
  GroupPrevalence prevalence;
};

EmpiricalRates empirical_rates(const std::vector<PredictionRecord>& records, int k, int m);

/// Unit vector of the hyperspherical parameterization.
Vec unit_direction(const AngleVector& angles);
/// Inverse of unit_direction for a nonzero vector.
AngleVector angles_from_direction(const Vec& u);

Vec sphere_boundary_point(const AngleVector& angles, const Sphere& sphere);
Vec optimal_on_sphere(const Vec& slope, const Sphere& sphere);

using MembershipFn = std::function<bool(const Vec&)>;

struct FindSphereOptions {
  double tolerance = 1e-4;
  double cap = 1.0;
};

Sphere find_sphere(const MembershipFn& member, const Vec& o, int k, FindSphereOptions opts = {});

PositiveSphere positive_sphere(const Sphere& sphere);

/// Largest ball around o inside the set of valid rate vectors for k classes.
double valid_rate_inscribed_radius(int k);

/// member() predicate for the valid rate region itself.
bool is_valid_rate(int k, const Vec& x, double tol = 1e-12);

}  // namespace fairelicit
