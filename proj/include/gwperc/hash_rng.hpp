#pragma once

#include <cstdint>

// Counter-style randomness for tree sampling and Monte Carlo replicates.
//
// Every random quantity is a pure function of (seed, position), where the
// position of a vertex is its root path.  Vertex v carries a 64-bit state;
// the state of its j-th child is a mix of the parent state and j.  Degrees
// and edge uniforms are decorrelated from the state chain by xoring distinct
// stream tags before a final mix.  This gives reproducible trees that can be
// regrown lazily in any traversal order, and Monte Carlo replicate streams
// that stay coupled across different percolation parameters.

namespace gwperc::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// Stream tags.  Arbitrary odd constants, fixed forever: dumped trees and
// recorded runs depend on them.
inline constexpr std::uint64_t kTagTree = 0x243F6A8885A308D3ull;
inline constexpr std::uint64_t kTagDegree = 0x13198A2E03707345ull;
inline constexpr std::uint64_t kTagVertexUniform = 0xA4093822299F31D1ull;
inline constexpr std::uint64_t kTagMc = 0x082EFA98EC4E6C89ull;
inline constexpr std::uint64_t kTagMcUniform = 0x452821E638D01377ull;

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Top 53 bits to a double in [0, 1).
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline std::uint64_t tree_root_state(std::uint64_t seed) {
  return mix64(seed ^ kTagTree);
}

inline std::uint64_t child_state(std::uint64_t parent_state, std::uint64_t child_index) {
  return mix64(parent_state ^ mix64((child_index + 1) * kGolden));
}

// Uniform driving the offspring draw at this vertex.
inline double degree_uniform(std::uint64_t state) {
  return unit_interval(mix64(state ^ kTagDegree));
}

// Uniform attached to the vertex for percolation thresholds (the edge above it).
inline double vertex_uniform(std::uint64_t state) {
  return unit_interval(mix64(state ^ kTagVertexUniform));
}

// Root state of one Monte Carlo replicate.  Replicate streams then descend
// with the same child_state chain, keyed off this alternate root.
inline std::uint64_t replicate_root_state(std::uint64_t mc_seed, std::uint64_t replicate) {
  return mix64(mix64(mc_seed ^ kTagMc) ^ mix64((replicate + 1) * kGolden));
}

inline double replicate_uniform(std::uint64_t replicate_state) {
  return unit_interval(mix64(replicate_state ^ kTagMcUniform));
}

}  // namespace gwperc::rng
