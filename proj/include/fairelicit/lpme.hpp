#pragma once

#include <cstdint>
#include <functional>

#include "fairelicit/rate_geometry.hpp"
#include "fairelicit/vec.hpp"

namespace fairelicit {

/// True iff the hidden linear value of z1 exceeds that of z2.
using LinearOracle = std::function<bool(const Vec& z1, const Vec& z2)>;

struct LpmeConfig {
  Sphere sphere;
  double epsilon = 1e-3;
  int cycles = 4;

  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
};

/// Answers to the four neighbouring comparisons of one shrink step.
struct ShrinkResponses {
  bool c_over_a = false;
  bool d_over_c = false;
  bool e_over_d = false;
  bool b_over_e = false;
};

struct Quartiles {
  double a, c, d, e, b;
};

Quartiles quartiles(const Interval& iv);
Interval shrink_interval(const ShrinkResponses& r, const Quartiles& p);

/// Number of halvings before the width drops to eps or below.
int halving_steps(double range, double eps);

/// Per-coordinate sign of the hidden slope; issues exactly q queries.
Vec detect_orthant(const LinearOracle& oracle, const Sphere& sphere);

std::uint64_t lpme_query_count(std::size_t q, double epsilon, int cycles);

/// Observer hook: (cycle, angle index, interval after the shrink).
using LpmeObserver = std::function<void(int, std::size_t, const Interval&)>;

/// Unit slope estimate recovered from comparisons on the sphere boundary.
Vec lpme(const LinearOracle& oracle, const LpmeConfig& config, const LpmeObserver& observer = {});

}  // namespace fairelicit
