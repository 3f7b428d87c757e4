#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gwperc/errors.hpp"
#include "gwperc/numeric.hpp"
#include "gwperc/offspring.hpp"

// Critical-window expansion of the annealed survival probability and the
// combinatorial constants attached to it.
//
// Writing eps = p - p_c, the survival probability expands as
// g(p_c + eps) = sum_j r_j eps^j.  The leading coefficient K = r_1 equals
// 2 / (p_c^3 phi''(1)); higher coefficients follow a recursion over integer
// compositions whose terms mix lower-order coefficients with derivatives of
// the generating function at 1.

namespace gwperc {

namespace detail {

// Visit every composition (ordered tuple of positive parts) of `total` into
// exactly `parts` parts, each part at most `max_part`.
template <class Fn>
void for_each_composition(int total, int parts, int max_part, std::vector<int>& buf, Fn&& fn) {
  if (parts == 1) {
    if (total >= 1 && total <= max_part) {
      buf.push_back(total);
      fn(buf);
      buf.pop_back();
    }
    return;
  }
  int hi = std::min(max_part, total - (parts - 1));
  for (int first = 1; first <= hi; ++first) {
    buf.push_back(first);
    for_each_composition(total - first, parts - 1, max_part, buf, fn);
    buf.pop_back();
  }
}

inline double factorial_d(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace detail

struct ExpansionCoefficients {
  double p_c = 0.0;
  double slope = 0.0;  // K = r[1]
  // r[j] for 1 <= j <= order; r[0] is unused.
  std::vector<double> r;
  // powers[m][j] holds the eps^j coefficient of (sum_i r_i eps^i)^m,
  // for 1 <= m <= order and 0 <= j <= order.  powers[m][j] = 0 for j < m
  // and powers[m][m] = K^m.
  std::vector<std::vector<double>> powers;

  int order() const { return static_cast<int>(r.size()) - 1; }
};

inline ExpansionCoefficients expansion_coefficients(const OffspringDistribution& dist, int order) {
  if (order < 1) throw ValidationError("expansion order must be at least 1");
  if (order + 1 > dist.max_exact_moment()) {
    throw MomentUnavailableError(
        "expansion order " + std::to_string(order) + " needs factorial moments up to order " +
        std::to_string(order + 1) + ", but only orders up to " +
        std::to_string(dist.max_exact_moment()) + " are exact for this distribution");
  }

  const double pc = dist.critical_parameter();
  const double phi2 = dist.pgf(2, 1.0);

  ExpansionCoefficients out;
  out.p_c = pc;
  out.r.assign(static_cast<std::size_t>(order) + 1, 0.0);
  out.r[1] = 2.0 / (pc * pc * pc * phi2);
  out.slope = out.r[1];

  std::vector<int> buf;
  for (int j = 2; j <= order; ++j) {
    KahanSum acc;
    for (int len = 1; len <= j; ++len) {
      const double phi_der = dist.pgf(len + 1, 1.0);
      if (phi_der == 0.0) continue;
      const double weight = phi_der / detail::factorial_d(len + 1);
      const double sign = (len % 2 == 0) ? 1.0 : -1.0;
      // Parts stay below j so only previously computed coefficients appear;
      // totals below j - len - 1 contribute nothing through the binomial.
      for (int total = std::max(len, j - len - 1); total <= j; ++total) {
        if (len == 1 && total == j) continue;  // the trivial composition (j)
        const double choose = binom(len + 1, j - total);
        if (choose == 0.0) continue;
        detail::for_each_composition(total, len, j - 1, buf, [&](const std::vector<int>& a) {
          double prod = 1.0;
          for (int part : a) prod *= out.r[static_cast<std::size_t>(part)];
          acc.add(prod * choose * int_pow(pc, total + len + 1 - j) * sign * weight);
        });
      }
    }
    out.r[static_cast<std::size_t>(j)] = 2.0 / (pc * pc * phi2) * acc.value();
  }

  out.powers.assign(static_cast<std::size_t>(order) + 1, {});
  std::vector<double> base(static_cast<std::size_t>(order) + 1, 0.0);
  for (int j = 1; j <= order; ++j) base[static_cast<std::size_t>(j)] = out.r[static_cast<std::size_t>(j)];
  out.powers[1] = base;
  for (int m = 2; m <= order; ++m) {
    std::vector<double> next(static_cast<std::size_t>(order) + 1, 0.0);
    const auto& prev = out.powers[static_cast<std::size_t>(m) - 1];
    for (int a = m - 1; a <= order; ++a) {
      if (prev[static_cast<std::size_t>(a)] == 0.0) continue;
      for (int b = 1; a + b <= order; ++b) {
        next[static_cast<std::size_t>(a + b)] +=
            prev[static_cast<std::size_t>(a)] * base[static_cast<std::size_t>(b)];
      }
    }
    out.powers[static_cast<std::size_t>(m)] = std::move(next);
  }
  return out;
}

// c[j][i] = p_c^j * sum over compositions of j into i parts of the product
// of factorial moments of the parts.  These constants translate statistics
// of i-subsets one generation down into statistics of j-subsets; c[j][j] = 1
// and c[1][1] = 1 by criticality of p_c.
struct CompositionConstants {
  std::vector<std::vector<double>> c;  // c[j] has entries 0..j, index 0 unused

  int j_max() const { return static_cast<int>(c.size()) - 1; }
  double at(int j, int i) const {
    if (i < 1 || i > j) return 0.0;
    return c[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  }
};

inline CompositionConstants composition_constants(const OffspringDistribution& dist, int j_max) {
  if (j_max < 1) throw ValidationError("composition constant order must be at least 1");
  if (j_max > dist.max_exact_moment()) {
    throw MomentUnavailableError(
        "composition constants up to order " + std::to_string(j_max) +
        " need factorial moments of that order, but only orders up to " +
        std::to_string(dist.max_exact_moment()) + " are exact for this distribution");
  }
  const double pc = dist.critical_parameter();
  std::vector<double> moments(static_cast<std::size_t>(j_max) + 1, 0.0);
  for (int r = 1; r <= j_max; ++r) moments[static_cast<std::size_t>(r)] = dist.factorial_moment(r);

  CompositionConstants out;
  out.c.assign(static_cast<std::size_t>(j_max) + 1, {});
  std::vector<int> buf;
  for (int j = 1; j <= j_max; ++j) {
    auto& row = out.c[static_cast<std::size_t>(j)];
    row.assign(static_cast<std::size_t>(j) + 1, 0.0);
    for (int i = 1; i <= j; ++i) {
      KahanSum acc;
      detail::for_each_composition(j, i, j, buf, [&](const std::vector<int>& a) {
        double prod = 1.0;
        for (int part : a) prod *= moments[static_cast<std::size_t>(part)];
        acc.add(prod);
      });
      row[static_cast<std::size_t>(i)] = int_pow(pc, j) * acc.value();
    }
  }
  return out;
}

// Leading-order growth of subset statistics: X_n^{(j,k)} ~ c'[j][k] n^(j+k-1) W^j
// as the window depth n grows.  The table follows a two-way recursion seeded
// by c'[1][k] = 1/k!.
struct GrowthConstants {
  std::vector<std::vector<double>> c;  // c[j][k], 1 <= j, 0 <= k

  double at(int j, int k) const { return c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]; }
};

inline GrowthConstants growth_constants(const OffspringDistribution& dist, int j_max, int k_max) {
  if (j_max < 1 || k_max < 0) throw ValidationError("growth constant orders out of range");
  CompositionConstants cc = composition_constants(dist, j_max);

  GrowthConstants out;
  out.c.assign(static_cast<std::size_t>(j_max) + 1,
               std::vector<double>(static_cast<std::size_t>(k_max) + 1, 0.0));
  for (int k = 0; k <= k_max; ++k)
    out.c[1][static_cast<std::size_t>(k)] = 1.0 / detail::factorial_d(k);
  for (int j = 2; j <= j_max; ++j) {
    const double link = cc.at(j, j - 1);
    out.c[static_cast<std::size_t>(j)][0] =
        link * out.c[static_cast<std::size_t>(j) - 1][0] / (j - 1);
    for (int k = 1; k <= k_max; ++k) {
      out.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] =
          (j * out.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k) - 1] +
           link * out.c[static_cast<std::size_t>(j) - 1][static_cast<std::size_t>(k)]) /
          (j + k - 1);
    }
  }
  return out;
}

}  // namespace gwperc
