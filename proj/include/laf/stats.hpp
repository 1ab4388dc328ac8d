#pragma once

#include <cmath>
#include <cstddef>

namespace laf {

// Welford accumulator.
struct RunningStat {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const {
    return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Wilson score interval; well behaved at zero observed errors.
inline Interval wilson_interval(std::size_t errors, std::size_t total, double z = 1.959964) {
  if (total == 0) return {0.0, 1.0};
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {center - half, center + half};
}

}  // namespace laf
