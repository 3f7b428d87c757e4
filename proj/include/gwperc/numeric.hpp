#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace gwperc {

// Compensated accumulator for long sums of similar-magnitude terms.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// Binomial coefficient as a double, exact for all results below 2^53.
inline double binom(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0.0;
  if (k > n - k) k = n - k;
  double r = 1.0;
  for (std::int64_t i = 1; i <= k; ++i) {
    r *= static_cast<double>(n - k + i);
    r /= static_cast<double>(i);
  }
  return r;
}

inline double falling_factorial(double x, int r) {
  double v = 1.0;
  for (int i = 0; i < r; ++i) v *= x - i;
  return v;
}

inline double int_pow(double x, int e) {
  double r = 1.0;
  double b = x;
  for (int n = e; n > 0; n >>= 1) {
    if (n & 1) r *= b;
    b *= b;
  }
  return r;
}

// Mean and standard error of the mean from (count, sum, sum of squares).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(double count, double sum, double sum_sq) {
  MeanSe out;
  if (count <= 0) return out;
  out.mean = sum / count;
  if (count > 1) {
    double var = (sum_sq - count * out.mean * out.mean) / (count - 1.0);
    if (var < 0) var = 0;
    out.se = std::sqrt(var / count);
  }
  return out;
}

}  // namespace gwperc
