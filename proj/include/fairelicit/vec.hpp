#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fairelicit {

using Vec = std::vector<double>;

// Small dense helpers over std::vector<double>. Callers check lengths.

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline Vec scaled(std::span<const double> x, double s) {
  Vec out(x.begin(), x.end());
  for (double& v : out) v *= s;
  return out;
}

inline Vec hadamard(std::span<const double> x, std::span<const double> y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return out;
}

inline Vec add(std::span<const double> x, std::span<const double> y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return out;
}

inline Vec sub(std::span<const double> x, std::span<const double> y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return out;
}

/// x scaled to unit l2 norm. Zero input yields zero output.
inline Vec normalized(std::span<const double> x) {
  const double n = norm2(x);
  return n > 0.0 ? scaled(x, 1.0 / n) : Vec(x.begin(), x.end());
}

}  // namespace fairelicit
