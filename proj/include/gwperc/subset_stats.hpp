#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gwperc/coefficients.hpp"
#include "gwperc/errors.hpp"
#include "gwperc/numeric.hpp"
#include "gwperc/offspring.hpp"
#include "gwperc/tree.hpp"

// Subset statistics of a sampled tree.
//
// For a window depth n, X_n^{(j,k)} sums C(m, k) p_c^m over all j-element
// subsets of the level-n vertices, where m is the edge count of the smallest
// rooted subtree spanning the subset.  The exact computation is a bottom-up
// sweep: each vertex carries a small table indexed by (subset size, k);
// moving through the edge to the parent multiplies by p_c and shifts k by
// the Pascal rule (every spanned edge count grows by one), and a parent
// combines children by convolving their lifted tables in both indices.

namespace gwperc {

struct SubsetStatTable {
  int n_max = 0;
  int J = 0;
  int K = 0;
  // x[n] is a flattened (J+1) x (K+1) table; entry (0,0) is always 1.
  std::vector<std::vector<double>> x;

  double at(int n, int j, int k) const {
    if (n < 0 || n > n_max || j < 0 || j > J || k < 0 || k > K)
      throw ValidationError("subset statistic index out of range");
    return x[static_cast<std::size_t>(n)]
            [static_cast<std::size_t>(j) * (K + 1) + static_cast<std::size_t>(k)];
  }
};

namespace detail {

using StatTable = std::vector<double>;

struct StatOps {
  int J, K;
  double p_c;

  std::size_t size() const { return static_cast<std::size_t>(J + 1) * (K + 1); }
  std::size_t idx(int j, int k) const {
    return static_cast<std::size_t>(j) * (K + 1) + static_cast<std::size_t>(k);
  }

  StatTable zero() const { return StatTable(size(), 0.0); }

  StatTable identity() const {
    StatTable t = zero();
    t[idx(0, 0)] = 1.0;
    return t;
  }

  // Table of a window-base vertex: the empty subset and the singleton.
  StatTable base() const {
    StatTable t = identity();
    if (J >= 1) t[idx(1, 0)] = 1.0;
    return t;
  }

  // Push a table through the edge to the parent: for nonempty subsets every
  // spanned count m becomes m+1, so C(m+1,k) = C(m,k) + C(m,k-1) and a
  // factor p_c appears.  The empty subset spans nothing and is untouched.
  StatTable lift(const StatTable& s) const {
    StatTable t = zero();
    t[idx(0, 0)] = s[idx(0, 0)];
    for (int j = 1; j <= J; ++j) {
      for (int k = 0; k <= K; ++k) {
        double v = s[idx(j, k)];
        if (k >= 1) v += s[idx(j, k - 1)];
        t[idx(j, k)] = p_c * v;
      }
    }
    return t;
  }

  // Subsets of a union of disjoint child blocks: convolve in j, multiply
  // polynomials in k.  Truncation at (J, K) is exact for the retained range.
  StatTable convolve(const StatTable& a, const StatTable& b) const {
    StatTable t = zero();
    for (int ja = 0; ja <= J; ++ja) {
      for (int ka = 0; ka <= K; ++ka) {
        const double va = a[idx(ja, ka)];
        if (va == 0.0) continue;
        for (int jb = 0; jb + ja <= J; ++jb) {
          for (int kb = 0; kb + ka <= K; ++kb) {
            t[idx(ja + jb, ka + kb)] += va * b[idx(jb, kb)];
          }
        }
      }
    }
    return t;
  }
};

// Root table for one window, given per-vertex tables at the window level.
// Consumes `base`.
inline StatTable dp_root_table(const SampledTree& tree, int window,
                               std::vector<StatTable>&& base, const StatOps& ops) {
  std::vector<StatTable> tables = std::move(base);
  for (int lvl = window - 1; lvl >= 0; --lvl) {
    const auto& lv = tree.level(lvl);
    std::vector<StatTable> out(lv.states.size());
    for (std::size_t i = 0; i < lv.states.size(); ++i) {
      StatTable acc;
      for (std::uint64_t c = lv.offsets[i]; c < lv.offsets[i + 1]; ++c) {
        StatTable lifted = ops.lift(tables[c]);
        acc = acc.empty() ? std::move(lifted) : ops.convolve(acc, lifted);
      }
      out[i] = acc.empty() ? ops.identity() : std::move(acc);
    }
    tables = std::move(out);
  }
  return std::move(tables[0]);
}

// Deterministic d-ary trees are self-similar: one table per window depth,
// advanced by lift-and-convolve d times.  This reaches depths whose explicit
// vertex sets would be astronomically large.
inline std::vector<StatTable> regular_tree_tables(int d, int n_max, const StatOps& ops) {
  std::vector<StatTable> by_window;
  StatTable s = ops.base();
  by_window.push_back(s);
  for (int t = 1; t <= n_max; ++t) {
    StatTable lifted = ops.lift(s);
    StatTable acc = lifted;
    for (int c = 1; c < d; ++c) acc = ops.convolve(acc, lifted);
    s = std::move(acc);
    by_window.push_back(s);
  }
  return by_window;
}

}  // namespace detail

inline SubsetStatTable subset_stats(const SampledTree& tree, int n, int J, int K) {
  if (n < 0 || n > tree.depth()) throw ValidationError("window depth exceeds the sampled depth");
  if (J < 1) throw ValidationError("subset size cap J must be at least 1");
  if (K < 0) throw ValidationError("binomial order cap K must be nonnegative");
  const detail::StatOps ops{J, K, tree.dist().critical_parameter()};

  SubsetStatTable out;
  out.n_max = n;
  out.J = J;
  out.K = K;
  if (tree.dist().is_degenerate()) {
    out.x = detail::regular_tree_tables(tree.dist().degenerate_degree(), n, ops);
    return out;
  }
  out.x.reserve(static_cast<std::size_t>(n) + 1);
  for (int window = 0; window <= n; ++window) {
    std::vector<detail::StatTable> base(tree.level_size(window), ops.base());
    out.x.push_back(detail::dp_root_table(tree, window, std::move(base), ops));
  }
  return out;
}

// Direct enumeration oracle: walks every subset of window vertices and
// counts the union of root paths.
inline SubsetStatTable brute_force_subset_stats(const SampledTree& tree, int n, int J, int K) {
  if (n < 0 || n > tree.depth()) throw ValidationError("window depth exceeds the sampled depth");
  if (J < 1) throw ValidationError("subset size cap J must be at least 1");
  if (K < 0) throw ValidationError("binomial order cap K must be nonnegative");
  const double pc = tree.dist().critical_parameter();
  const detail::StatOps ops{J, K, pc};

  {
    const double budget = binom(static_cast<std::int64_t>(tree.level_size(n)), J);
    if (budget > 1e7)
      throw ResourceError("brute-force subset enumeration budget exceeded: C(" +
                          std::to_string(tree.level_size(n)) + "," + std::to_string(J) +
                          ") subsets");
  }

  // parent index of every vertex, per level
  std::vector<std::vector<std::uint64_t>> parent(static_cast<std::size_t>(n) + 1);
  for (int m = 0; m < n; ++m) {
    const auto& lv = tree.level(m);
    parent[static_cast<std::size_t>(m) + 1].resize(tree.level_size(m + 1));
    for (std::size_t i = 0; i < lv.states.size(); ++i)
      for (std::uint64_t c = lv.offsets[i]; c < lv.offsets[i + 1]; ++c)
        parent[static_cast<std::size_t>(m) + 1][c] = i;
  }

  SubsetStatTable out;
  out.n_max = n;
  out.J = J;
  out.K = K;
  out.x.assign(static_cast<std::size_t>(n) + 1, ops.zero());

  for (int window = 0; window <= n; ++window) {
    auto& table = out.x[static_cast<std::size_t>(window)];
    table[ops.idx(0, 0)] = 1.0;
    const std::uint64_t z = tree.level_size(window);
    std::unordered_set<std::uint64_t> nodes;
    for (int j = 1; j <= J; ++j) {
      if (static_cast<std::uint64_t>(j) > z) break;
      // lexicographic combinations of {0..z-1} choose j
      std::vector<std::uint64_t> pick(static_cast<std::size_t>(j));
      for (int i = 0; i < j; ++i) pick[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i);
      while (true) {
        nodes.clear();
        for (std::uint64_t v : pick) {
          std::uint64_t idx = v;
          for (int lvl = window; lvl >= 0; --lvl) {
            // encode (level, index); root inserts as level 0
            if (!nodes.insert((static_cast<std::uint64_t>(lvl) << 40) | idx).second) break;
            if (lvl > 0) idx = parent[static_cast<std::size_t>(lvl)][idx];
          }
        }
        const int edges = static_cast<int>(nodes.size()) - 1;
        const double weight = int_pow(pc, edges);
        for (int k = 0; k <= K; ++k)
          table[ops.idx(j, k)] += binom(edges, k) * weight;

        int pos = j - 1;
        while (pos >= 0 && pick[static_cast<std::size_t>(pos)] ==
                               z - static_cast<std::uint64_t>(j - pos)) --pos;
        if (pos < 0) break;
        ++pick[static_cast<std::size_t>(pos)];
        for (int q = pos + 1; q < j; ++q)
          pick[static_cast<std::size_t>(q)] = pick[static_cast<std::size_t>(q) - 1] + 1;
      }
    }
  }
  return out;
}

// Doob decomposition of the X arrays: X_n = Y_n + sum_{m<=n} deltaA_m with
// Y a martingale and deltaA predictable (a function of the previous level).
struct DoobParts {
  int n_max = 0;
  int J = 0;
  int K = 0;
  std::vector<std::vector<double>> delta_a;  // delta_a[0] is all zero
  std::vector<std::vector<double>> y;

  double delta_a_at(int n, int j, int k) const {
    return delta_a[static_cast<std::size_t>(n)]
                  [static_cast<std::size_t>(j) * (K + 1) + static_cast<std::size_t>(k)];
  }
  double y_at(int n, int j, int k) const {
    return y[static_cast<std::size_t>(n)]
            [static_cast<std::size_t>(j) * (K + 1) + static_cast<std::size_t>(k)];
  }
};

inline DoobParts doob_decomposition(const SubsetStatTable& stats,
                                    const OffspringDistribution& dist) {
  const CompositionConstants cc = composition_constants(dist, stats.J);
  const detail::StatOps ops{stats.J, stats.K, dist.critical_parameter()};

  DoobParts out;
  out.n_max = stats.n_max;
  out.J = stats.J;
  out.K = stats.K;
  out.delta_a.assign(static_cast<std::size_t>(stats.n_max) + 1, ops.zero());
  out.y.assign(static_cast<std::size_t>(stats.n_max) + 1, ops.zero());

  // Increment of the predictable part, from level n-1 data alone.
  for (int n = 1; n <= stats.n_max; ++n) {
    auto& da = out.delta_a[static_cast<std::size_t>(n)];
    for (int j = 1; j <= stats.J; ++j) {
      for (int k = 0; k <= stats.K; ++k) {
        double v = -stats.at(n - 1, j, k);
        for (int i = 1; i <= j; ++i) {
          const double cji = cc.at(j, i);
          if (cji == 0.0) continue;
          for (int d = 0; d <= k; ++d)
            v += cji * binom(j, k - d) * stats.at(n - 1, i, d);
        }
        da[ops.idx(j, k)] = v;
      }
    }
  }

  // Martingale part via the explicit finite sum over earlier levels.  The
  // diagonal terms (i = j, d = k) are deliberately absent here; their
  // reappearance through the deltaA route is what the decomposition
  // identity checks.
  for (int n = 0; n <= stats.n_max; ++n) {
    auto& yn = out.y[static_cast<std::size_t>(n)];
    for (int j = 1; j <= stats.J; ++j) {
      for (int k = 0; k <= stats.K; ++k) {
        KahanSum correction;
        for (int m = 0; m < n; ++m) {
          for (int d = 0; d < k; ++d)
            correction.add(binom(j, k - d) * stats.at(m, j, d));
          for (int i = 1; i < j; ++i) {
            const double cji = cc.at(j, i);
            if (cji == 0.0) continue;
            for (int d = 0; d <= k; ++d)
              correction.add(cji * binom(j, k - d) * stats.at(m, i, d));
          }
        }
        yn[ops.idx(j, k)] = stats.at(n, j, k) - correction.value();
      }
    }
    yn[ops.idx(0, 0)] = 1.0;
  }
  return out;
}

}  // namespace gwperc
