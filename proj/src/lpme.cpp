#include "fairelicit/lpme.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "fairelicit/errors.hpp"

namespace fairelicit {

namespace {

constexpr double kPi = std::numbers::pi;

// Quarter-width ranges that match the detected orthant, one per angle.
std::vector<Interval> orthant_ranges(const Vec& signs) {
  const std::size_t q = signs.size();
  std::vector<Interval> out(q - 1);
  for (std::size_t j = 0; j + 2 < q; ++j)
    out[j] = signs[j] > 0 ? Interval{0.0, kPi / 2} : Interval{kPi / 2, kPi};
  const bool x = signs[q - 2] > 0, y = signs[q - 1] > 0;
  if (x && y)
    out[q - 2] = {0.0, kPi / 2};
  else if (!x && y)
    out[q - 2] = {kPi / 2, kPi};
  else if (!x && !y)
    out[q - 2] = {kPi, 3 * kPi / 2};
  else
    out[q - 2] = {3 * kPi / 2, 2 * kPi};
  return out;
}

}  // namespace

void LpmeConfig::validate() const {
  if (!(epsilon > 0.0)) throw InvalidArgument("search tolerance must be positive");
  if (cycles < 1) throw InvalidArgument("cycles must be at least 1");
  if (sphere.dim() < 2) throw InvalidArgument("sphere dimension must be at least 2");
  if (!(sphere.radius > 0.0)) throw InvalidArgument("sphere radius must be positive");
}

Quartiles quartiles(const Interval& iv) {
  const double w = iv.width();
  return {iv.lo, iv.lo + 0.25 * w, iv.lo + 0.5 * w, iv.lo + 0.75 * w, iv.hi};
}

Interval shrink_interval(const ShrinkResponses& r, const Quartiles& p) {
  if (!r.c_over_a) return {p.a, p.d};
  if (!r.d_over_c) return {p.a, p.d};
  if (!r.e_over_d) return {p.c, p.e};
  return {p.d, p.b};  // both remaining cases keep the upper half
}

int halving_steps(double range, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("tolerance must be positive");
  int n = 0;
  for (double w = range; w > eps; w /= 2) ++n;
  return n;
}

Vec detect_orthant(const LinearOracle& oracle, const Sphere& sphere) {
  const std::size_t q = sphere.dim();
  const Vec base(q, 1.0 / std::sqrt(static_cast<double>(q)));
  const Vec z_base = optimal_on_sphere(base, sphere);
  Vec signs(q);
  for (std::size_t i = 0; i < q; ++i) {
    Vec flipped = base;
    flipped[i] = -flipped[i];
    signs[i] = oracle(z_base, optimal_on_sphere(flipped, sphere)) ? 1.0 : -1.0;
  }
  return signs;
}

std::uint64_t lpme_query_count(std::size_t q, double epsilon, int cycles) {
  return q + static_cast<std::uint64_t>(cycles) * (q - 1) * 4 *
                 static_cast<std::uint64_t>(halving_steps(kPi / 2, epsilon));
}

Vec lpme(const LinearOracle& oracle, const LpmeConfig& config, const LpmeObserver& observer) {
  config.validate();
  const Sphere& sphere = config.sphere;
  const std::size_t q = sphere.dim();
  const double eps = config.epsilon;

  const Vec signs = detect_orthant(oracle, sphere);
  const std::vector<Interval> ranges = orthant_ranges(signs);
  const int steps = halving_steps(kPi / 2, eps);

  AngleVector theta(q - 1);
  for (std::size_t j = 0; j < q - 1; ++j) theta[j] = ranges[j].mid();

  auto point = [&](std::size_t j, double value) {
    AngleVector t = theta;
    t[j] = value;
    return sphere_boundary_point(t, sphere);
  };
  // An earlier angle at a pole zeroes the later coordinates, so angle j is then unidentifiable.
  auto at_pole = [&](std::size_t j) {
    for (std::size_t i = 0; i < j; ++i)
      if (theta[i] < eps || theta[i] > kPi - eps) return true;
    return false;
  };

  for (int cycle = 0; cycle < config.cycles; ++cycle) {
    // Last angle first: with the later angles optimal, each earlier one
    // sees a one-dimensional unimodal slice.
    for (std::size_t j = q - 1; j-- > 0;) {
      Interval iv = ranges[j];
      for (int s = 0; s < steps; ++s) {
        const Quartiles p = quartiles(iv);
        const Vec za = point(j, p.a), zc = point(j, p.c), zd = point(j, p.d), ze = point(j, p.e),
                  zb = point(j, p.b);
        ShrinkResponses r;
        r.c_over_a = oracle(zc, za);
        r.d_over_c = oracle(zd, zc);
        r.e_over_d = oracle(ze, zd);
        r.b_over_e = oracle(zb, ze);
        iv = shrink_interval(r, p);
        if (observer) observer(cycle, j, iv);
      }
      if (!at_pole(j)) theta[j] = iv.mid();
    }
  }
  return unit_direction(theta);
}

}  // namespace fairelicit
