#pragma once

#include <cstdint>
#include <vector>

#include "gwperc/coefficients.hpp"
#include "gwperc/hash_rng.hpp"
#include "gwperc/subset_stats.hpp"

// Test-only machinery for conditional-mean checks: resample the offspring of
// the deepest frozen level and recompute the next window's statistics, so
// expectations conditioned on the frozen tree can be estimated directly.

namespace testutil {

using namespace gwperc;

// Window-(n+1) subset statistics of a one-level extension of a depth-n tree.
// Extension degrees are drawn from the replicate stream (ext_seed, rep), one
// draw per level-n vertex, independent of the tree's own stream.
inline detail::StatTable extended_window_table(const SampledTree& tree, int n,
                                               const detail::StatOps& ops,
                                               std::uint64_t ext_seed, std::uint64_t rep) {
  const auto& lv = tree.level(n);
  // Base table of a level-n vertex with d fresh children, all of them
  // window-(n+1) leaves: d copies of the lifted leaf table, convolved.
  std::vector<detail::StatTable> by_degree(2);
  const detail::StatTable lifted_leaf = ops.lift(ops.base());
  by_degree[1] = lifted_leaf;

  std::vector<detail::StatTable> base(lv.states.size());
  const std::uint64_t rep_root = rng::replicate_root_state(ext_seed, rep);
  for (std::size_t i = 0; i < lv.states.size(); ++i) {
    const double u = rng::replicate_uniform(rng::child_state(rep_root, i));
    const int d = tree.dist().sample(u);
    while (static_cast<int>(by_degree.size()) <= d)
      by_degree.push_back(ops.convolve(by_degree.back(), lifted_leaf));
    base[i] = by_degree[static_cast<std::size_t>(d)];
  }
  return detail::dp_root_table(tree, n, std::move(base), ops);
}

// One-step martingale increment of Y built from the frozen window table and
// an extended window table: deltaY = X_{n+1} - X_n - bracket(X_n).
inline double delta_y_entry(const SubsetStatTable& stats, const detail::StatTable& next,
                            const CompositionConstants& cc, const detail::StatOps& ops, int j,
                            int k) {
  const int n = stats.n_max;
  double bracket = 0.0;
  for (int d = 0; d < k; ++d) bracket += binom(j, k - d) * stats.at(n, j, d);
  for (int i = 1; i < j; ++i) {
    const double cji = cc.at(j, i);
    if (cji == 0.0) continue;
    for (int d = 0; d <= k; ++d) bracket += cji * binom(j, k - d) * stats.at(n, i, d);
  }
  return next[ops.idx(j, k)] - stats.at(n, j, k) - bracket;
}

// M^{(i)} evaluated on a raw window table.
inline double martingale_entry(const detail::StatTable& table, const ExpansionCoefficients& coeffs,
                               const detail::StatOps& ops, int i) {
  const double mu = 1.0 / coeffs.p_c;
  double acc = 0.0;
  for (int j = 1; j <= i; ++j) {
    const double sign = (j % 2 == 1) ? 1.0 : -1.0;
    for (int d = j; d <= i; ++d) {
      const double r_jd = coeffs.powers[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
      if (r_jd == 0.0) continue;
      acc += sign * int_pow(coeffs.p_c, d) * r_jd * table[ops.idx(j, i - d)];
    }
  }
  return int_pow(mu, i) * acc;
}

}  // namespace testutil
