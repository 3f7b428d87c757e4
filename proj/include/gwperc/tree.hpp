#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <mutex>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gwperc/errors.hpp"
#include "gwperc/hash_rng.hpp"
#include "gwperc/numeric.hpp"
#include "gwperc/offspring.hpp"

// Sampled branching trees on the Ulam-Harris skeleton.
//
// A tree is identified by (distribution, seed, depth).  Every vertex carries
// a 64-bit hash state determined by its root path; its offspring count and
// its percolation uniform are derived from that state.  Levels are stored
// breadth-first and materialized on demand, so deep trees can be walked
// through the hash without ever holding them in memory, while window
// algorithms that need level arrays get contiguous child blocks.

namespace gwperc {

inline constexpr std::uint64_t kDefaultPopulationCap = 100'000'000;

class SampledTree {
 public:
  struct Level {
    std::vector<std::uint64_t> states;
    std::vector<std::uint32_t> degs;
    std::vector<double> us;         // percolation uniform of the edge above each vertex
    std::vector<std::uint64_t> offsets;  // offsets[i]..offsets[i+1] index children in the next level
  };

  SampledTree(OffspringDistribution dist, int depth, std::uint64_t seed,
              std::uint64_t population_cap = kDefaultPopulationCap)
      : dist_(std::move(dist)), depth_(depth), seed_(seed), cap_(population_cap) {
    if (depth < 0) throw ValidationError("tree depth must be nonnegative");
    // Reserve one slot per level so that references returned by level()
    // survive later materialization.
    levels_.reserve(static_cast<std::size_t>(depth) + 1);
    Level root;
    root.states.push_back(rng::tree_root_state(seed));
    fill_level(root);
    total_ = 1;
    levels_.push_back(std::move(root));
  }

  const OffspringDistribution& dist() const { return dist_; }
  int depth() const { return depth_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t population_cap() const { return cap_; }

  // Level arrays, materializing everything up to m on first use.
  const Level& level(int m) const {
    ensure(m);
    return levels_[static_cast<std::size_t>(m)];
  }

  std::uint64_t level_size(int m) const { return level(m).states.size(); }

  // Z_m / mu^m.  Exactly 1 for deterministic trees, with no materialization.
  double w(int m) const {
    if (dist_.is_degenerate()) return 1.0;
    return static_cast<double>(level_size(m)) / int_pow(dist_.mean(), m);
  }

 private:
  void fill_level(Level& lv) const {
    const std::size_t n = lv.states.size();
    lv.degs.resize(n);
    lv.us.resize(n);
    lv.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t s = lv.states[i];
      lv.degs[i] = static_cast<std::uint32_t>(dist_.sample(rng::degree_uniform(s)));
      lv.us[i] = rng::vertex_uniform(s);
      lv.offsets[i + 1] = lv.offsets[i] + lv.degs[i];
    }
  }

  void ensure(int m) const {
    if (m < 0 || m > depth_) throw ValidationError("level index outside the sampled depth");
    std::lock_guard<std::mutex> lock(mu_);
    while (static_cast<int>(levels_.size()) <= m) {
      const Level& prev = levels_.back();
      const std::uint64_t count = prev.offsets.back();
      if (total_ + count > cap_) {
        throw ResourceError("population cap of " + std::to_string(cap_) +
                            " vertices exceeded while materializing level " +
                            std::to_string(levels_.size()));
      }
      Level next;
      next.states.resize(count);
      for (std::size_t i = 0; i < prev.states.size(); ++i) {
        for (std::uint32_t j = 0; j < prev.degs[i]; ++j) {
          next.states[prev.offsets[i] + j] = rng::child_state(prev.states[i], j);
        }
      }
      fill_level(next);
      total_ += count;
      levels_.push_back(std::move(next));
    }
  }

  OffspringDistribution dist_;
  int depth_;
  std::uint64_t seed_;
  std::uint64_t cap_;
  mutable std::mutex mu_;
  mutable std::vector<Level> levels_;
  mutable std::uint64_t total_ = 0;
};

inline SampledTree sample_tree(const OffspringDistribution& dist, int depth, std::uint64_t seed,
                               std::uint64_t population_cap = kDefaultPopulationCap) {
  return SampledTree(dist, depth, seed, population_cap);
}

// W_{n_max}, the working estimate of the martingale limit.
inline double martingale_limit_estimate(const SampledTree& tree) {
  if (tree.depth() < 1) throw ValidationError("martingale limit estimate needs depth >= 1");
  return tree.w(tree.depth());
}

// Connectivity marking: open[m][i] is 1 when vertex i of level m is joined
// to the root by edges whose uniforms are all <= p.  Monotone in p by the
// shared-uniform coupling.
struct PercolationMarking {
  std::vector<std::vector<std::uint8_t>> open;
};

inline PercolationMarking percolate(const SampledTree& tree, double p, int depth) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("retention probability must lie in [0,1]");
  if (depth < 0 || depth > tree.depth())
    throw ValidationError("percolation depth exceeds the sampled depth");
  PercolationMarking mark;
  mark.open.resize(static_cast<std::size_t>(depth) + 1);
  mark.open[0] = {1};
  for (int m = 1; m <= depth; ++m) {
    const auto& parents = tree.level(m - 1);
    const auto& lv = tree.level(m);
    auto& out = mark.open[static_cast<std::size_t>(m)];
    out.assign(lv.states.size(), 0);
    const auto& above = mark.open[static_cast<std::size_t>(m) - 1];
    for (std::size_t i = 0; i < parents.states.size(); ++i) {
      if (!above[i]) continue;
      for (std::uint64_t c = parents.offsets[i]; c < parents.offsets[i + 1]; ++c) {
        out[c] = lv.us[c] <= p ? 1 : 0;
      }
    }
  }
  return mark;
}

// Binary interchange format: header (magic "GWT1", u64 seed, u32 depth,
// u64 JSON byte length, distribution JSON), then for each level 0..depth a
// u64 vertex count followed by (u32 degree, f64 uniform) pairs in
// breadth-first order.  All fields little-endian.
namespace treeio {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ValidationError("tree dump truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw ValidationError("tree dump truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace treeio

inline void dump_tree(const SampledTree& tree, std::ostream& os) {
  os.write("GWT1", 4);
  treeio::put_u64(os, tree.seed());
  treeio::put_u32(os, static_cast<std::uint32_t>(tree.depth()));
  const std::string json = tree.dist().to_json().dump();
  treeio::put_u64(os, json.size());
  os.write(json.data(), static_cast<std::streamsize>(json.size()));
  for (int m = 0; m <= tree.depth(); ++m) {
    const auto& lv = tree.level(m);
    treeio::put_u64(os, lv.states.size());
    for (std::size_t i = 0; i < lv.states.size(); ++i) {
      treeio::put_u32(os, lv.degs[i]);
      treeio::put_u64(os, std::bit_cast<std::uint64_t>(lv.us[i]));
    }
  }
}

struct TreeDump {
  std::uint64_t seed = 0;
  int depth = 0;
  std::string dist_json;
  std::vector<std::vector<std::uint32_t>> degs;
  std::vector<std::vector<double>> us;
};

inline TreeDump load_tree_dump(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "GWT1")
    throw ValidationError("not a GWT1 tree dump");
  TreeDump out;
  out.seed = treeio::get_u64(is);
  out.depth = static_cast<int>(treeio::get_u32(is));
  const std::uint64_t len = treeio::get_u64(is);
  out.dist_json.resize(len);
  is.read(out.dist_json.data(), static_cast<std::streamsize>(len));
  if (!is) throw ValidationError("tree dump truncated");
  for (int m = 0; m <= out.depth; ++m) {
    const std::uint64_t count = treeio::get_u64(is);
    std::vector<std::uint32_t> d(count);
    std::vector<double> u(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      d[i] = treeio::get_u32(is);
      u[i] = std::bit_cast<double>(treeio::get_u64(is));
    }
    out.degs.push_back(std::move(d));
    out.us.push_back(std::move(u));
  }
  return out;
}

}  // namespace gwperc
