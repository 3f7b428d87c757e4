#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gwperc/annealed.hpp"
#include "gwperc/errors.hpp"
#include "gwperc/hash_rng.hpp"
#include "gwperc/numeric.hpp"
#include "gwperc/offspring.hpp"
#include "gwperc/tree.hpp"

// Quenched (fixed-tree) survival to a finite depth, Monte Carlo replicate
// percolation, and the branching-depth derivative estimator.
//
// The exact recursion q_v = 1 - prod_u (1 - p q_u) runs over the hash stream
// directly, one depth-first pass for an arbitrary set of retention values at
// once, so depth-30 trees with around 10^9 vertices never need to be held in
// memory.  Monte Carlo replicates rehash the same vertex addresses under a
// replicate stream, which keeps estimates coupled across p.

namespace gwperc {

inline std::vector<double> survival_to_depth_multi(const SampledTree& tree,
                                                   const std::vector<double>& ps, int n) {
  if (n < 0 || n > tree.depth())
    throw ValidationError("survival window exceeds the sampled depth");
  for (double p : ps)
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("retention probability must lie in [0,1]");
  const std::size_t np = ps.size();
  std::vector<double> q(np, 1.0);
  if (n == 0 || np == 0) return q;

  const OffspringDistribution& dist = tree.dist();

  if (dist.is_degenerate()) {
    const int d = dist.degenerate_degree();
    for (std::size_t i = 0; i < np; ++i) {
      double qq = 1.0;
      for (int t = 0; t < n; ++t) qq = 1.0 - int_pow(1.0 - ps[i] * qq, d);
      q[i] = qq;
    }
    return q;
  }

  // One frame per ancestor of the current vertex; prod accumulates
  // prod_children (1 - p q_child) for each retention value.
  struct Frame {
    std::uint64_t state = 0;
    std::uint32_t deg = 0;
    std::uint32_t next = 0;
    std::vector<double> prod;
  };
  std::vector<Frame> stack(static_cast<std::size_t>(n));
  for (auto& f : stack) f.prod.assign(np, 1.0);

  // Vertices one step above the window boundary close in place:
  // q = 1 - (1-p)^deg without hashing the boundary level.
  auto boundary_q = [&](std::uint32_t deg, std::size_t i) {
    return 1.0 - int_pow(1.0 - ps[i], static_cast<int>(deg));
  };

  const std::uint64_t root_state = rng::tree_root_state(tree.seed());
  const std::uint32_t root_deg =
      static_cast<std::uint32_t>(dist.sample(rng::degree_uniform(root_state)));
  if (n == 1) {
    for (std::size_t i = 0; i < np; ++i) q[i] = boundary_q(root_deg, i);
    return q;
  }

  int top = 0;
  stack[0].state = root_state;
  stack[0].deg = root_deg;
  stack[0].next = 0;
  for (std::size_t i = 0; i < np; ++i) stack[0].prod[i] = 1.0;

  while (true) {
    Frame& f = stack[static_cast<std::size_t>(top)];
    if (f.next == f.deg) {
      // close this vertex: q_v = 1 - prod
      if (top == 0) {
        for (std::size_t i = 0; i < np; ++i) q[i] = 1.0 - f.prod[i];
        return q;
      }
      Frame& parent = stack[static_cast<std::size_t>(top) - 1];
      for (std::size_t i = 0; i < np; ++i)
        parent.prod[i] *= 1.0 - ps[i] * (1.0 - f.prod[i]);
      --top;
      continue;
    }
    const std::uint64_t cs = rng::child_state(f.state, f.next++);
    const std::uint32_t cdeg =
        static_cast<std::uint32_t>(dist.sample(rng::degree_uniform(cs)));
    if (top + 1 == n - 1) {
      // child sits one level above the boundary
      Frame& cur = stack[static_cast<std::size_t>(top)];
      for (std::size_t i = 0; i < np; ++i)
        cur.prod[i] *= 1.0 - ps[i] * boundary_q(cdeg, i);
    } else {
      ++top;
      Frame& cf = stack[static_cast<std::size_t>(top)];
      cf.state = cs;
      cf.deg = cdeg;
      cf.next = 0;
      for (std::size_t i = 0; i < np; ++i) cf.prod[i] = 1.0;
    }
  }
}

inline double survival_to_depth(const SampledTree& tree, double p, int n) {
  return survival_to_depth_multi(tree, {p}, n)[0];
}

struct SurvivalCurve {
  int n = 0;
  std::vector<double> p;
  std::vector<double> g;
};

inline SurvivalCurve quenched_curve(const SampledTree& tree, const std::vector<double>& grid,
                                    int n) {
  for (double p : grid)
    if (!(p > 0.0 && p <= 1.0))
      throw ValidationError("survival curve grid must lie in (0,1]");
  SurvivalCurve out;
  out.n = n;
  out.p = grid;
  out.g = survival_to_depth_multi(tree, grid, n);
  return out;
}

namespace detail {

// Replicate percolation accessors: degrees come from the tree stream,
// openness of the edge above a vertex from the replicate stream.
struct ReplicateWalk {
  const OffspringDistribution* dist;
  double p;
  int window;

  struct V {
    std::uint64_t tree_state;
    std::uint64_t rep_state;
    int depth;
  };

  int degree(const V& v) const {
    return dist->sample(rng::degree_uniform(v.tree_state));
  }
  V child(const V& v, int j) const {
    return {rng::child_state(v.tree_state, static_cast<std::uint64_t>(j)),
            rng::child_state(v.rep_state, static_cast<std::uint64_t>(j)), v.depth + 1};
  }
  bool edge_open(const V& c) const { return rng::replicate_uniform(c.rep_state) <= p; }

  // True when v's subtree holds an open path from v down to the window level.
  bool connects(const V& v) const {
    if (v.depth >= window) return true;
    const int d = degree(v);
    for (int j = 0; j < d; ++j) {
      const V c = child(v, j);
      if (edge_open(c) && connects(c)) return true;
    }
    return false;
  }
};

}  // namespace detail

struct McEstimate {
  double estimate = 0.0;
  double se = 0.0;
  std::uint64_t reps = 0;
};

// Survival frequency under fresh replicate uniforms.
inline McEstimate mc_survival(const SampledTree& tree, double p, int n, std::uint64_t reps,
                              std::uint64_t seed) {
  if (n < 0 || n > tree.depth())
    throw ValidationError("survival window exceeds the sampled depth");
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("retention probability must lie in [0,1]");
  if (reps < 1) throw ValidationError("at least one replicate is required");
  const detail::ReplicateWalk walk{&tree.dist(), p, n};
  const std::uint64_t tree_root = rng::tree_root_state(tree.seed());
  std::uint64_t hits = 0;
  for (std::uint64_t r = 0; r < reps; ++r) {
    const detail::ReplicateWalk::V root{tree_root, rng::replicate_root_state(seed, r), 0};
    if (walk.connects(root)) ++hits;
  }
  McEstimate out;
  out.reps = reps;
  out.estimate = static_cast<double>(hits) / static_cast<double>(reps);
  out.se = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(reps));
  return out;
}

struct BranchingDepthEstimate {
  double estimate = 0.0;  // mean of |B| * 1{survival} over all replicates
  double se = 0.0;
  std::uint64_t survivors = 0;
  std::uint64_t unresolved = 0;  // walks that hit the window floor (|B| = n)
  std::uint64_t reps = 0;
};

// Depth of the last trunk vertex: walk from the root while exactly one child
// subtree stays connected to the window level.  The number of edges walked
// equals the number of open pivotal edges for the window-survival event, so
// its unconditioned mean is p times the derivative of survival in p.
inline BranchingDepthEstimate mc_branching_depth(const SampledTree& tree, double p, int n,
                                                 std::uint64_t reps, std::uint64_t seed) {
  const double pc = tree.dist().critical_parameter();
  if (!(p > pc && p < 1.0))
    throw ValidationError("branching depth needs p strictly between p_c and 1");
  if (n < 1 || n > tree.depth())
    throw ValidationError("branching window must lie within the sampled depth");
  if (reps < 1) throw ValidationError("at least one replicate is required");

  const detail::ReplicateWalk walk{&tree.dist(), p, n};
  const std::uint64_t tree_root = rng::tree_root_state(tree.seed());
  std::uint64_t survivors = 0, unresolved = 0;
  std::uint64_t sum = 0, sum_sq = 0;
  std::vector<detail::ReplicateWalk::V> alive;
  for (std::uint64_t r = 0; r < reps; ++r) {
    detail::ReplicateWalk::V v{tree_root, rng::replicate_root_state(seed, r), 0};
    if (!walk.connects(v)) continue;
    ++survivors;
    while (true) {
      if (v.depth == n) {
        ++unresolved;  // bare open path through the whole window
        break;
      }
      alive.clear();
      const int d = walk.degree(v);
      for (int j = 0; j < d; ++j) {
        const auto c = walk.child(v, j);
        if (walk.edge_open(c) && walk.connects(c)) alive.push_back(c);
      }
      if (alive.size() != 1) break;  // branch point (>= 2) ends the trunk
      v = alive[0];
    }
    const auto len = static_cast<std::uint64_t>(v.depth);
    sum += len;
    sum_sq += len * len;
  }
  BranchingDepthEstimate out;
  out.reps = reps;
  out.survivors = survivors;
  out.unresolved = unresolved;
  auto ms = mean_se(static_cast<double>(reps), static_cast<double>(sum),
                    static_cast<double>(sum_sq));
  out.estimate = ms.mean;
  out.se = ms.se;
  return out;
}

// Smallest window depth n with A_p^{n/2} below tol; beyond it the walk is
// effectively insensitive to the truncation.
inline int default_branch_window(const OffspringDistribution& dist, double p, double tol = 1e-4) {
  const double a = single_child_prob(dist, p);
  if (!(tol > 0.0 && tol < 1.0)) throw ValidationError("window tolerance must lie in (0,1)");
  const double need = 2.0 * std::log(tol) / std::log(a);
  return static_cast<int>(std::ceil(need));
}

struct RussoReport {
  double p = 0.0;
  double h = 0.0;
  int n = 0;
  double g_minus = 0.0;
  double g_plus = 0.0;
  double fd_derivative = 0.0;
  double russo_estimate = 0.0;  // p^{-1} E |B|
  double se = 0.0;              // statistical error of russo_estimate
  double fd_bias_scale = 0.0;   // h^2, the discretization error scale
  std::uint64_t survivors = 0;
  std::uint64_t unresolved = 0;
  std::uint64_t reps = 0;
  bool pass = false;
};

// Allowance multiplier applied to h^2 in the pass verdict; the third
// derivative of a survival window at moderate p is of order one to ten.
inline constexpr double kFdBiasAllowance = 10.0;

inline RussoReport russo_check(const SampledTree& tree, double p, int n, std::uint64_t reps,
                               std::uint64_t seed, double h = 1e-3) {
  if (!(h > 0.0 && p - h >= 0.0 && p + h <= 1.0))
    throw ValidationError("finite-difference step leaves the unit interval");
  auto g = survival_to_depth_multi(tree, {p - h, p + h}, n);
  auto bd = mc_branching_depth(tree, p, n, reps, seed);

  RussoReport out;
  out.p = p;
  out.h = h;
  out.n = n;
  out.g_minus = g[0];
  out.g_plus = g[1];
  out.fd_derivative = (g[1] - g[0]) / (2.0 * h);
  out.russo_estimate = bd.estimate / p;
  out.se = bd.se / p;
  out.fd_bias_scale = h * h;
  out.survivors = bd.survivors;
  out.unresolved = bd.unresolved;
  out.reps = bd.reps;
  out.pass = std::abs(out.fd_derivative - out.russo_estimate) <=
             3.0 * out.se + kFdBiasAllowance * out.fd_bias_scale;
  return out;
}

}  // namespace gwperc
