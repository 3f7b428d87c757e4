#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gwperc/coefficients.hpp"
#include "gwperc/errors.hpp"
#include "gwperc/numeric.hpp"
#include "gwperc/subset_stats.hpp"

// Survival expansion martingales.
//
// M_n^{(i)} blends subset statistics with series coefficients so that, as
// the window depth n grows, M^{(i)} becomes the coefficient of eps^i in the
// tree-conditional survival probability at retention p_c + eps.  Each M^{(i)}
// is a martingale in n with mean r_i.

namespace gwperc {

struct ExpansionMartingale {
  int order = 0;
  int n_max = 0;
  double p_c = 0.0;
  std::vector<std::vector<double>> m;  // m[n][i], index i from 1

  double at(int n, int i) const {
    if (n < 0 || n > n_max || i < 1 || i > order)
      throw ValidationError("martingale index out of range");
    return m[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)];
  }
};

inline ExpansionMartingale expansion_martingale(const SubsetStatTable& stats,
                                                const ExpansionCoefficients& coeffs,
                                                int order) {
  if (order < 1) throw ValidationError("martingale order must be at least 1");
  if (stats.J < order || stats.K < order - 1 || coeffs.order() < order) {
    throw ValidationError(
        "martingale order " + std::to_string(order) + " needs subset caps J >= " +
        std::to_string(order) + " and K >= " + std::to_string(order - 1) +
        " and coefficients of order >= " + std::to_string(order) + " (have J = " +
        std::to_string(stats.J) + ", K = " + std::to_string(stats.K) + ", coefficient order " +
        std::to_string(coeffs.order()) + ")");
  }

  const double mu = 1.0 / coeffs.p_c;
  ExpansionMartingale out;
  out.order = order;
  out.n_max = stats.n_max;
  out.p_c = coeffs.p_c;
  out.m.assign(static_cast<std::size_t>(stats.n_max) + 1,
               std::vector<double>(static_cast<std::size_t>(order) + 1, 0.0));
  for (int n = 0; n <= stats.n_max; ++n) {
    for (int i = 1; i <= order; ++i) {
      KahanSum acc;
      for (int j = 1; j <= i; ++j) {
        const double sign = (j % 2 == 1) ? 1.0 : -1.0;
        for (int d = j; d <= i; ++d) {
          const double r_jd = coeffs.powers[static_cast<std::size_t>(j)]
                                           [static_cast<std::size_t>(d)];
          if (r_jd == 0.0) continue;
          acc.add(sign * int_pow(coeffs.p_c, d) * r_jd * stats.at(n, j, i - d));
        }
      }
      out.m[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)] =
          int_pow(mu, i) * acc.value();
    }
  }
  return out;
}

// Exact cross-check between the series coefficients and the composition
// constants: for all 1 <= a, b <= i,
//   sum_{d,j} (-1)^(j-1) p_c^d r_{j,d} c_{j,a} C(j, b-d)
// must equal (-1)^(a+1) p_c^b r_{a,b}.  Returns the worst absolute residual.
inline double verify_constants_identity(const OffspringDistribution& dist, int i) {
  if (i < 1) throw ValidationError("identity order must be at least 1");
  const ExpansionCoefficients coeffs = expansion_coefficients(dist, i);
  const CompositionConstants cc = composition_constants(dist, i);
  double worst = 0.0;
  for (int a = 1; a <= i; ++a) {
    for (int b = 1; b <= i; ++b) {
      KahanSum lhs;
      for (int d = 1; d <= i; ++d) {
        for (int j = 1; j <= i; ++j) {
          const double r_jd = coeffs.powers[static_cast<std::size_t>(j)]
                                           [static_cast<std::size_t>(d)];
          if (r_jd == 0.0) continue;
          const double c_ja = cc.at(j, a);
          if (c_ja == 0.0) continue;
          const double sign = (j % 2 == 1) ? 1.0 : -1.0;
          lhs.add(sign * int_pow(coeffs.p_c, d) * r_jd * c_ja * binom(j, b - d));
        }
      }
      const double r_ab =
          b >= a ? coeffs.powers[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] : 0.0;
      const double rhs = ((a % 2 == 1) ? 1.0 : -1.0) * int_pow(coeffs.p_c, b) * r_ab;
      worst = std::max(worst, std::abs(lhs.value() - rhs));
    }
  }
  return worst;
}

// Taylor prediction of the tree-conditional survival at p_c + eps from the
// deepest available window.
inline double predict_quenched_survival(const ExpansionMartingale& mart, double eps) {
  if (!(eps >= 0.0 && eps < 1.0 - mart.p_c))
    throw ValidationError("offset must lie in [0, 1 - p_c)");
  double acc = 0.0;
  for (int i = mart.order; i >= 1; --i) acc = (acc + mart.at(mart.n_max, i)) * eps;
  return acc;
}

// Window depth n(eps) = ceil(eps^-delta) used by the windowed prediction
// mode; shallow on purpose, so union-bound corrections stay controlled.
inline int bonferroni_window(double eps, double delta) {
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("offset must lie in (0,1)");
  if (!(delta > 0.0)) throw ValidationError("window exponent must be positive");
  return static_cast<int>(std::ceil(std::pow(eps, -delta)));
}

inline double predict_quenched_survival_windowed(const ExpansionMartingale& mart, double eps,
                                                 double delta) {
  const int n = bonferroni_window(eps, delta);
  if (n > mart.n_max)
    throw ValidationError("windowed prediction needs depth " + std::to_string(n) +
                          " but the martingale table stops at " + std::to_string(mart.n_max));
  double acc = 0.0;
  for (int i = mart.order; i >= 1; --i) acc = (acc + mart.at(n, i)) * eps;
  return acc;
}

}  // namespace gwperc
