#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gwperc/errors.hpp"
#include "gwperc/hash_rng.hpp"
#include "gwperc/numeric.hpp"
#include "gwperc/offspring.hpp"
#include "gwperc/quenched.hpp"
#include "gwperc/tree.hpp"

// Collapsed-tree shapes, chain-collapsing, initial-subtree matching against
// percolation survivor trees, Monte Carlo moments of the matched edge-weight
// monomials, and the signed term expansion whose p-scaled sum equals the
// derivative of such a moment in the retention parameter.

namespace gwperc {

// Ordered rooted tree stored in preorder: vertex 0 is the root, every child
// list keeps its order, and edge i is the edge above vertex i+1.  Equality of
// the stored arrays is ordered isomorphism because the layout is canonical.
struct OrderedTree {
  std::vector<std::vector<int>> kids;
  std::vector<int> parent;  // parent[0] = -1

  int size() const { return static_cast<int>(kids.size()); }
  int edge_count() const { return size() - 1; }
  bool is_leaf(int v) const { return kids[static_cast<std::size_t>(v)].empty(); }

  // no vertex except possibly the root has exactly one child
  bool is_collapsed() const {
    for (int v = 1; v < size(); ++v)
      if (kids[static_cast<std::size_t>(v)].size() == 1) return false;
    return true;
  }

  int add_vertex(int par) {
    kids.emplace_back();
    parent.push_back(par);
    const int idx = size() - 1;
    if (par >= 0) kids[static_cast<std::size_t>(par)].push_back(idx);
    return idx;
  }

  // Nested-parentheses form, e.g. "(()())" is a root with two leaf children.
  static OrderedTree parse(const std::string& text) {
    OrderedTree t;
    int cur = -1;
    bool done = false;
    for (char ch : text) {
      if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') continue;
      if (done) throw ValidationError("trailing characters after tree literal");
      if (ch == '(') {
        cur = t.add_vertex(cur);
      } else if (ch == ')') {
        if (cur < 0) throw ValidationError("unbalanced ')' in tree literal");
        cur = t.parent[static_cast<std::size_t>(cur)];
        if (cur < 0) done = true;
      } else {
        throw ValidationError("tree literal may contain only parentheses");
      }
    }
    if (!done) throw ValidationError("tree literal is empty or unbalanced");
    return t;
  }

  std::string format() const {
    std::string out;
    format_rec(0, out);
    return out;
  }

  bool operator==(const OrderedTree& other) const { return kids == other.kids; }

 private:
  void format_rec(int v, std::string& out) const {
    out.push_back('(');
    for (int c : kids[static_cast<std::size_t>(v)]) format_rec(c, out);
    out.push_back(')');
  }
};

// Edge exponents in preorder edge order; the value of a matched shape is
// prod d(e)^{f(e)}.
using Monomial = std::vector<int>;

inline void validate_shape(const OrderedTree& v) {
  if (v.size() < 2) throw ValidationError("collapsed shape needs at least one edge");
  if (!v.is_collapsed())
    throw ValidationError("collapsed shape has a non-root vertex with exactly one child");
}

inline void validate_monomial(const OrderedTree& v, const Monomial& f) {
  if (static_cast<int>(f.size()) != v.edge_count())
    throw ValidationError("monomial length must equal the shape's edge count");
  for (int e : f)
    if (e < 0) throw ValidationError("monomial exponents must be nonnegative");
}

inline double monomial_value(const Monomial& f, const std::vector<int>& d) {
  double out = 1.0;
  for (std::size_t i = 0; i < f.size(); ++i) out *= int_pow(static_cast<double>(d[i]), f[i]);
  return out;
}

struct CollapseResult {
  OrderedTree tree;
  std::vector<int> d;  // collapsed-path length per edge, preorder edge order
};

namespace detail {

inline void collapse_rec(const OrderedTree& t, int src, CollapseResult& out, int dst) {
  for (int c : t.kids[static_cast<std::size_t>(src)]) {
    int w = c, len = 1;
    while (t.kids[static_cast<std::size_t>(w)].size() == 1) {
      w = t.kids[static_cast<std::size_t>(w)][0];
      ++len;
    }
    const int nd = out.tree.add_vertex(dst);
    out.d.push_back(len);
    collapse_rec(t, w, out, nd);
  }
}

}  // namespace detail

// Collapse every maximal chain of single-child vertices to one weighted edge.
inline CollapseResult collapse(const OrderedTree& t) {
  CollapseResult out;
  out.tree.add_vertex(-1);
  detail::collapse_rec(t, 0, out, 0);
  return out;
}

enum class MatchStatus { Match, NoMatch, Indeterminate };

struct MatchResult {
  MatchStatus status = MatchStatus::NoMatch;
  std::vector<int> d;  // valid when status == Match
};

namespace detail {

// A view exposes, per vertex, the ordered list of children that continue to
// the window level, or reports the count as unknown at the window floor.

struct ExplicitView {
  const OrderedTree* t;
  using Vtx = int;
  Vtx root() const { return 0; }
  // fully observed: every child continues, never unknown
  int surviving_children(Vtx v, std::vector<Vtx>& out) const {
    out = t->kids[static_cast<std::size_t>(v)];
    return static_cast<int>(out.size());
  }
};

struct SurvivorView {
  ReplicateWalk walk;
  std::uint64_t tree_root;
  std::uint64_t rep_root;
  using Vtx = ReplicateWalk::V;
  Vtx root() const { return {tree_root, rep_root, 0}; }
  int surviving_children(const Vtx& v, std::vector<Vtx>& out) const {
    if (v.depth >= walk.window) return -1;  // floor: counts unobservable
    out.clear();
    const int deg = walk.degree(v);
    for (int j = 0; j < deg; ++j) {
      const Vtx c = walk.child(v, j);
      if (walk.edge_open(c) && walk.connects(c)) out.push_back(c);
    }
    return static_cast<int>(out.size());
  }
};

// Matching walks one chain per shape edge: descend while exactly one child
// survives; the image of an interior shape vertex must show exactly its
// child count, the image of a shape leaf any count other than one.
template <class View>
MatchStatus match_from(const View& view, const OrderedTree& v, int x,
                       typename View::Vtx image, const std::vector<typename View::Vtx>& surv,
                       std::vector<int>& d) {
  std::vector<typename View::Vtx> buf;
  const auto& xk = v.kids[static_cast<std::size_t>(x)];
  for (std::size_t i = 0; i < xk.size(); ++i) {
    typename View::Vtx cur = surv[i];
    int len = 1;
    int cnt = view.surviving_children(cur, buf);
    while (cnt == 1) {
      cur = buf[0];
      ++len;
      cnt = view.surviving_children(cur, buf);
    }
    if (cnt < 0) return MatchStatus::Indeterminate;
    const int xi = xk[i];
    d[static_cast<std::size_t>(xi) - 1] = len;
    if (!v.is_leaf(xi)) {
      if (cnt != static_cast<int>(v.kids[static_cast<std::size_t>(xi)].size()))
        return MatchStatus::NoMatch;
      const MatchStatus st = match_from(view, v, xi, cur, buf, d);
      if (st != MatchStatus::Match) return st;
    }
    // shape leaf: the chain already stopped at a vertex with != 1 children
  }
  return MatchStatus::Match;
}

template <class View>
MatchResult match_view(const View& view, const OrderedTree& v) {
  MatchResult res;
  res.d.assign(static_cast<std::size_t>(v.edge_count()), 0);
  std::vector<typename View::Vtx> buf;
  const std::size_t root_kids = v.kids[0].size();
  if (root_kids == 1) {
    // unary shape root: its edge is the chain starting at the ambient root
    typename View::Vtx cur = view.root();
    int len = 0;
    int cnt = view.surviving_children(cur, buf);
    while (cnt == 1) {
      cur = buf[0];
      ++len;
      cnt = view.surviving_children(cur, buf);
    }
    if (cnt < 0) {
      res.status = MatchStatus::Indeterminate;
      return res;
    }
    if (len == 0) return res;  // ambient root does not start a chain
    const int x1 = v.kids[0][0];
    res.d[0] = len;
    if (!v.is_leaf(x1)) {
      if (cnt != static_cast<int>(v.kids[static_cast<std::size_t>(x1)].size())) return res;
      res.status = match_from(view, v, x1, cur, buf, res.d);
    } else {
      res.status = MatchStatus::Match;
    }
    return res;
  }
  const int cnt = view.surviving_children(view.root(), buf);
  if (cnt < 0) {
    res.status = MatchStatus::Indeterminate;
    return res;
  }
  if (cnt != static_cast<int>(root_kids)) return res;
  res.status = match_from(view, v, 0, view.root(), buf, res.d);
  return res;
}

}  // namespace detail

// Match against a fully known finite ordered tree.
inline MatchResult match_initial_subtree(const OrderedTree& ambient, const OrderedTree& v) {
  validate_shape(v);
  detail::ExplicitView view{&ambient};
  return detail::match_view(view, v);
}

// Match against one percolation replicate of a sampled tree, observed down to
// window level n.
inline MatchResult match_survivor_replicate(const SampledTree& tree, const OrderedTree& v,
                                            double p, int n, std::uint64_t seed,
                                            std::uint64_t rep) {
  validate_shape(v);
  if (n < 0 || n > tree.depth())
    throw ValidationError("survival window exceeds the sampled depth");
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("retention probability must lie in (0,1)");
  detail::SurvivorView view{{&tree.dist(), p, n},
                            rng::tree_root_state(tree.seed()),
                            rng::replicate_root_state(seed, rep)};
  return detail::match_view(view, v);
}

struct McMonomialEstimate {
  double estimate = 0.0;
  double se = 0.0;
  std::uint64_t reps = 0;
  std::uint64_t matched = 0;
  std::uint64_t indeterminate = 0;
  bool indeterminate_warning = false;  // more than 1% of replicates undecidable
};

// Mean of the matched monomial value over replicates (zero off-match;
// undecidable replicates score zero and are tallied).
inline McMonomialEstimate mc_monomial_expectation(const SampledTree& tree, const OrderedTree& v,
                                                  const Monomial& f, double p, int n,
                                                  std::uint64_t reps, std::uint64_t seed) {
  validate_shape(v);
  validate_monomial(v, f);
  const double pc = tree.dist().critical_parameter();
  if (!(p > pc && p < 1.0))
    throw ValidationError("monomial expectation needs p strictly between p_c and 1");
  if (n < 1 || n > tree.depth())
    throw ValidationError("survival window must lie within the sampled depth");
  if (reps < 1) throw ValidationError("at least one replicate is required");

  detail::SurvivorView view{{&tree.dist(), p, n}, rng::tree_root_state(tree.seed()), 0};
  McMonomialEstimate out;
  out.reps = reps;
  KahanSum sum, sum_sq;
  for (std::uint64_t r = 0; r < reps; ++r) {
    view.rep_root = rng::replicate_root_state(seed, r);
    const MatchResult m = detail::match_view(view, v);
    if (m.status == MatchStatus::Indeterminate) {
      ++out.indeterminate;
    } else if (m.status == MatchStatus::Match) {
      ++out.matched;
      const double val = monomial_value(f, m.d);
      sum.add(val);
      sum_sq.add(val * val);
    }
  }
  const auto ms = mean_se(static_cast<double>(reps), sum.value(), sum_sq.value());
  out.estimate = ms.mean;
  out.se = ms.se;
  out.indeterminate_warning =
      static_cast<double>(out.indeterminate) > 0.01 * static_cast<double>(reps);
  return out;
}

struct SignedTerm {
  int sign = 1;  // +1 or -1
  OrderedTree tree;
  Monomial f;
};

using SignedTermList = std::vector<SignedTerm>;

namespace detail {

// scratch representation for building modified shapes: exponent of the edge
// above each node travels with the node
struct NodeF {
  int f = 0;
  std::vector<NodeF> kids;
};

inline NodeF to_nodef(const OrderedTree& v, const Monomial& f, int x) {
  NodeF n;
  n.f = x == 0 ? 0 : f[static_cast<std::size_t>(x) - 1];
  for (int c : v.kids[static_cast<std::size_t>(x)]) n.kids.push_back(to_nodef(v, f, c));
  return n;
}

inline void from_nodef_rec(const NodeF& n, int par, OrderedTree& t, Monomial& f) {
  const int idx = t.add_vertex(par);
  if (par >= 0) f.push_back(n.f);
  for (const NodeF& c : n.kids) from_nodef_rec(c, idx, t, f);
}

inline SignedTerm from_nodef(int sign, const NodeF& n) {
  SignedTerm term;
  term.sign = sign;
  from_nodef_rec(n, -1, term.tree, term.f);
  return term;
}

inline NodeF* node_at(NodeF& root, const std::vector<int>& path) {
  NodeF* cur = &root;
  for (int step : path) cur = &cur->kids[static_cast<std::size_t>(step)];
  return cur;
}

template <class Fn>
void for_each_node(const NodeF& n, std::vector<int>& path, Fn&& fn) {
  fn(n, path);
  for (std::size_t i = 0; i < n.kids.size(); ++i) {
    path.push_back(static_cast<int>(i));
    for_each_node(n.kids[i], path, fn);
    path.pop_back();
  }
}

}  // namespace detail

// All signed terms whose p-scaled expectation sum gives d/dp of the (v, f)
// moment: exponent bumps, leaf branchings, edge subdivisions with a binomial
// split of the edge exponent over the two halves, and a unit-exponent child
// inserted into every gap of every interior child list.  Each term's monomial
// degree is deg(f)+1 and its edge count is at most edge_count+2; repeated
// triples carry binomial multiplicity.
inline SignedTermList derivative_expansion(const OrderedTree& v, const Monomial& f) {
  validate_shape(v);
  validate_monomial(v, f);
  const detail::NodeF base = detail::to_nodef(v, f, 0);
  SignedTermList out;
  std::vector<int> path;

  // exponent bump, one term per edge
  detail::for_each_node(base, path, [&](const detail::NodeF&, const std::vector<int>& at) {
    if (at.empty()) return;
    detail::NodeF copy = base;
    detail::node_at(copy, at)->f += 1;
    out.push_back(detail::from_nodef(+1, copy));
  });

  // leaf branches into two children; the unit exponent sits on either new edge
  detail::for_each_node(base, path, [&](const detail::NodeF& n, const std::vector<int>& at) {
    if (!n.kids.empty()) return;
    for (int which = 0; which < 2; ++which) {
      detail::NodeF copy = base;
      detail::NodeF* leaf = detail::node_at(copy, at);
      leaf->kids.assign(2, detail::NodeF{});
      leaf->kids[static_cast<std::size_t>(which)].f = 1;
      out.push_back(detail::from_nodef(+1, copy));
    }
  });

  // edge subdivision with a new unit-exponent child at the midpoint, on either
  // side; the old exponent m splits as (i, m-i) with multiplicity C(m, i)
  detail::for_each_node(base, path, [&](const detail::NodeF& n, const std::vector<int>& at) {
    if (at.empty()) return;
    const int m = n.f;
    for (int side = 0; side < 2; ++side) {
      for (int i = 0; i <= m; ++i) {
        const auto mult = static_cast<std::int64_t>(binom(m, i));
        for (std::int64_t rep = 0; rep < mult; ++rep) {
          detail::NodeF copy = base;
          detail::NodeF* child = detail::node_at(copy, at);
          detail::NodeF mid;
          mid.f = i;
          detail::NodeF moved = *child;
          moved.f = m - i;
          detail::NodeF fresh;
          fresh.f = 1;
          if (side == 0)
            mid.kids = {fresh, moved};
          else
            mid.kids = {moved, fresh};
          *child = mid;
          out.push_back(detail::from_nodef(-1, copy));
        }
      }
    }
  });

  // unit-exponent child inserted into each gap of an interior child list
  detail::for_each_node(base, path, [&](const detail::NodeF& n, const std::vector<int>& at) {
    if (n.kids.empty()) return;
    for (std::size_t slot = 0; slot <= n.kids.size(); ++slot) {
      detail::NodeF copy = base;
      detail::NodeF* vtx = detail::node_at(copy, at);
      detail::NodeF fresh;
      fresh.f = 1;
      vtx->kids.insert(vtx->kids.begin() + static_cast<std::ptrdiff_t>(slot), fresh);
      out.push_back(detail::from_nodef(-1, copy));
    }
  });

  return out;
}

// Flattened k-fold application with multiplied signs.  The first derivative
// of the (v, f) moment is p^{-1} times the signed sum over one application;
// differentiating that signed sum again is p^{-1} times the signed sum over
// two applications, and so on.
inline SignedTermList iterate_expansion(const OrderedTree& v, const Monomial& f, int k) {
  if (k < 1) throw ValidationError("expansion order must be at least 1");
  SignedTermList cur = derivative_expansion(v, f);
  for (int round = 1; round < k; ++round) {
    SignedTermList next;
    for (const SignedTerm& t : cur) {
      SignedTermList sub = derivative_expansion(t.tree, t.f);
      for (SignedTerm& s : sub) {
        s.sign *= t.sign;
        next.push_back(std::move(s));
      }
    }
    cur = std::move(next);
  }
  return cur;
}

struct DerivativeCheckReport {
  double p = 0.0;
  double h = 0.0;
  int n = 0;
  double fd_derivative = 0.0;       // coupled central difference of the moment
  double fd_se = 0.0;
  double expansion_estimate = 0.0;  // p^{-1} signed sum over expansion terms
  double expansion_se = 0.0;
  double combined_se = 0.0;
  double fd_bias_scale = 0.0;       // h^2, the discretization error scale
  std::uint64_t reps = 0;
  std::uint64_t indeterminate = 0;
  std::size_t term_count = 0;
  bool pass = false;
};

// Compares the central finite difference of the (v, f) moment, replicates
// coupled across p-h and p+h, against the p-scaled signed expansion sum
// evaluated at p on the same replicate stream.
inline DerivativeCheckReport verify_derivative_identity(const SampledTree& tree,
                                                        const OrderedTree& v, const Monomial& f,
                                                        double p, int n, double h,
                                                        std::uint64_t reps, std::uint64_t seed) {
  validate_shape(v);
  validate_monomial(v, f);
  const double pc = tree.dist().critical_parameter();
  if (!(h > 0.0 && p - h > pc && p + h < 1.0))
    throw ValidationError("finite-difference stencil must stay strictly between p_c and 1");
  if (n < 1 || n > tree.depth())
    throw ValidationError("survival window must lie within the sampled depth");
  if (reps < 1) throw ValidationError("at least one replicate is required");

  const SignedTermList terms = derivative_expansion(v, f);
  // terms sharing a shape share one match per replicate
  struct Group {
    OrderedTree tree;
    std::vector<std::pair<int, const Monomial*>> members;
  };
  std::vector<Group> groups;
  for (const SignedTerm& t : terms) {
    Group* g = nullptr;
    for (Group& cand : groups)
      if (cand.tree == t.tree) {
        g = &cand;
        break;
      }
    if (g == nullptr) {
      groups.push_back({t.tree, {}});
      g = &groups.back();
    }
    g->members.emplace_back(t.sign, &t.f);
  }

  const std::uint64_t tree_root = rng::tree_root_state(tree.seed());
  detail::SurvivorView lo{{&tree.dist(), p - h, n}, tree_root, 0};
  detail::SurvivorView hi{{&tree.dist(), p + h, n}, tree_root, 0};
  detail::SurvivorView mid{{&tree.dist(), p, n}, tree_root, 0};

  KahanSum diff_sum, diff_sq, term_sum, term_sq;
  std::uint64_t indet = 0;
  for (std::uint64_t r = 0; r < reps; ++r) {
    const std::uint64_t rep_root = rng::replicate_root_state(seed, r);
    lo.rep_root = hi.rep_root = mid.rep_root = rep_root;
    bool bad = false;

    auto moment_value = [&](const detail::SurvivorView& view) {
      const MatchResult m = detail::match_view(view, v);
      if (m.status == MatchStatus::Indeterminate) bad = true;
      return m.status == MatchStatus::Match ? monomial_value(f, m.d) : 0.0;
    };
    const double v_lo = moment_value(lo);
    const double v_hi = moment_value(hi);

    double t_val = 0.0;
    for (const Group& g : groups) {
      const MatchResult m = detail::match_view(mid, g.tree);
      if (m.status == MatchStatus::Indeterminate) bad = true;
      if (m.status != MatchStatus::Match) continue;
      for (const auto& [sign, mono] : g.members)
        t_val += sign * monomial_value(*mono, m.d);
    }
    if (bad) ++indet;
    const double d = v_hi - v_lo;
    diff_sum.add(d);
    diff_sq.add(d * d);
    term_sum.add(t_val);
    term_sq.add(t_val * t_val);
  }

  DerivativeCheckReport out;
  out.p = p;
  out.h = h;
  out.n = n;
  out.reps = reps;
  out.indeterminate = indet;
  out.term_count = terms.size();
  const auto fd = mean_se(static_cast<double>(reps), diff_sum.value(), diff_sq.value());
  out.fd_derivative = fd.mean / (2.0 * h);
  out.fd_se = fd.se / (2.0 * h);
  const auto ts = mean_se(static_cast<double>(reps), term_sum.value(), term_sq.value());
  out.expansion_estimate = ts.mean / p;
  out.expansion_se = ts.se / p;
  out.combined_se = std::sqrt(out.fd_se * out.fd_se + out.expansion_se * out.expansion_se);
  out.fd_bias_scale = h * h;
  out.pass = std::abs(out.fd_derivative - out.expansion_estimate) <=
             3.0 * out.combined_se + kFdBiasAllowance * out.fd_bias_scale;
  return out;
}

}  // namespace gwperc
