#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gwperc/coefficients.hpp"
#include "gwperc/errors.hpp"
#include "gwperc/numeric.hpp"
#include "gwperc/offspring.hpp"

// Annealed (tree-averaged) survival of percolation with retention p.
// g(p) is the unique root in (0, 1] of 1 - phi(1 - p s) = s for p above
// p_c = 1/mean, and 0 at or below p_c.
//
// Solving that fixed point directly loses all precision near p_c: both sides
// approach 0 like (p - p_c)^1 while the defect approaches 0 like the square,
// so the residual drowns in rounding noise from evaluating phi.  Dividing
// out the trivial root first gives the deflated equation
//
//   h(s) = 1 - p * psi(p s) = 0,   psi(x) = (1 - phi(1 - x)) / x,
//
// whose derivative stays bounded away from zero at the root.  psi has the
// stable power-sum form psi(x) = sum_i P(Z > i) (1 - x)^i, with no
// subtractions of nearby quantities.

namespace gwperc {

// Width of the near-critical band where the solver hands over to the series
// expansion; below this offset the double-precision root is no more accurate
// than the truncated series.
inline constexpr double kNearCriticalWindow = 1e-8;

namespace detail {

inline std::vector<double> tail_probs(const OffspringDistribution& dist) {
  const auto& pmf = dist.pmf();
  std::vector<double> tail(pmf.size(), 0.0);
  double run = 0.0;
  for (std::size_t i = pmf.size(); i-- > 0;) {
    run += pmf[i];
    if (i > 0) tail[i - 1] = run;  // tail[i] = P(Z > i)
  }
  tail.back() = 0.0;
  return tail;
}

// psi(x) and psi'(x) from the tail-probability power series.
inline void eval_psi(const std::vector<double>& tail, double x, double& val, double& der) {
  const double y = 1.0 - x;
  KahanSum v, d;
  double pow_y = 1.0;  // y^i
  for (std::size_t i = 0; i < tail.size(); ++i) {
    if (tail[i] != 0.0) {
      v.add(tail[i] * pow_y);
      if (i >= 1) d.add(-static_cast<double>(i) * tail[i] * (pow_y / y));
    }
    pow_y *= y;
  }
  // The derivative form above divides by y; rebuild it directly when y is 0.
  if (y == 0.0) {
    d = KahanSum{};
    if (tail.size() >= 2) d.add(-tail[1]);
  }
  val = v.value();
  der = d.value();
}

}  // namespace detail

inline double annealed_survival(const OffspringDistribution& dist, double p, double tol = 1e-12) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("retention probability must lie in [0,1]");
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  const double pc = dist.critical_parameter();
  if (p <= pc) return 0.0;

  const double eps = p - pc;
  if (eps < kNearCriticalWindow && dist.max_exact_moment() >= 2) {
    const int order = std::min(3, dist.max_exact_moment() - 1);
    ExpansionCoefficients coeffs = expansion_coefficients(dist, order);
    double g = 0.0;
    for (int j = order; j >= 1; --j) g = g * eps + coeffs.r[static_cast<std::size_t>(j)];
    return g * eps;
  }

  const std::vector<double> tail = detail::tail_probs(dist);
  auto h = [&](double s, double& deriv) {
    double val, der;
    detail::eval_psi(tail, p * s, val, der);
    deriv = -p * p * der;
    return 1.0 - p * val;
  };

  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    double unused;
    (h(mid, unused) < 0.0 ? lo : hi) = mid;
  }

  const double residual_floor = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + p * dist.mean());
  double s = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    double deriv;
    const double f = h(s, deriv);
    (f < 0.0 ? lo : hi) = s;
    if (std::abs(f) <= residual_floor) return s;
    double next = s - f / deriv;
    if (next < lo || next > hi) next = 0.5 * (lo + hi);
    const double step = std::abs(next - s);
    s = next;
    if (step <= tol * s + 1e-15) return s;
  }
  throw NumericError("annealed survival solver failed to converge at p=" + std::to_string(p));
}

// K: slope of g at the critical point, g(p_c + eps) ~ K eps.
inline double critical_slope(const OffspringDistribution& dist) {
  const double pc = dist.critical_parameter();
  return 2.0 / (pc * pc * pc * dist.pgf(2, 1.0));
}

namespace detail {

inline double single_child_prob_unchecked(const OffspringDistribution& dist, double p) {
  const double g = annealed_survival(dist, p);
  return p * dist.pgf(1, 1.0 - p * g);
}

}  // namespace detail

// A_p: annealed probability that the root of the surviving cluster has
// exactly one surviving child.  Equals p phi'(1 - p g(p)); tends to 1 at
// p_c and to P(Z = 1) at full retention.
inline double single_child_prob(const OffspringDistribution& dist, double p) {
  const double pc = dist.critical_parameter();
  if (!(p > pc && p < 1.0))
    throw ValidationError("single_child_prob needs p strictly between p_c and 1");
  return detail::single_child_prob_unchecked(dist, p);
}

// g_2(p): annealed probability that at least two children of the root carry
// surviving subtrees.  Decays like K mu eps^2 in the critical window.
inline double annealed_branch_prob(const OffspringDistribution& dist, double p) {
  const double pc = dist.critical_parameter();
  if (!(p > pc && p <= 1.0))
    throw ValidationError("annealed_branch_prob needs p in (p_c, 1]");
  const double g = annealed_survival(dist, p);
  return g * (1.0 - p * dist.pgf(1, 1.0 - p * g));
}

// Generating function of the number of surviving children given survival:
// phi_p(z) = [phi(1 - p g (1 - z)) - phi(1 - p g)] / g.  This is the
// offspring law of the tree spanned by vertices connected to infinity.
inline double thinned_pgf(const OffspringDistribution& dist, double p, double z) {
  const double pc = dist.critical_parameter();
  if (!(p > pc && p <= 1.0)) throw ValidationError("thinned_pgf needs p in (p_c, 1]");
  const double g = annealed_survival(dist, p);
  return (dist.pgf(0, 1.0 - p * g * (1.0 - z)) - dist.pgf(0, 1.0 - p * g)) / g;
}

}  // namespace gwperc
