#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <set>

#include "gwperc/hash_rng.hpp"

using namespace gwperc;

TEST_CASE("mix64 is deterministic and spreads nearby inputs") {
  CHECK(rng::mix64(0x12345678u) == rng::mix64(0x12345678u));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 4096; ++i) seen.insert(rng::mix64(i));
  CHECK(seen.size() == 4096);
}

TEST_CASE("unit_interval maps into [0,1)") {
  CHECK(rng::unit_interval(0) == 0.0);
  CHECK(rng::unit_interval(~0ull) < 1.0);
  CHECK(rng::unit_interval(~0ull) > 0.999999999);
}

TEST_CASE("vertex streams are reproducible and distinct") {
  const std::uint64_t root = rng::tree_root_state(42);
  CHECK(root == rng::tree_root_state(42));
  CHECK(root != rng::tree_root_state(43));

  const std::uint64_t c0 = rng::child_state(root, 0);
  const std::uint64_t c1 = rng::child_state(root, 1);
  CHECK(c0 != c1);
  CHECK(rng::child_state(c0, 0) != rng::child_state(c1, 0));
  CHECK(rng::degree_uniform(root) != rng::vertex_uniform(root));
}

TEST_CASE("replicate streams differ between replicates but not calls") {
  const std::uint64_t a = rng::replicate_root_state(7, 0);
  CHECK(a == rng::replicate_root_state(7, 0));
  CHECK(a != rng::replicate_root_state(7, 1));
  CHECK(a != rng::replicate_root_state(8, 0));
}

TEST_CASE("hash uniforms pass coarse moment checks") {
  const int n = 1000000;
  double sum = 0.0, sum_sq = 0.0, cross = 0.0;
  std::uint64_t state = rng::tree_root_state(2024);
  for (int i = 0; i < n; ++i) {
    state = rng::child_state(state, 0);
    const double u = rng::degree_uniform(state);
    const double v = rng::vertex_uniform(state);
    sum += u;
    sum_sq += u * u;
    cross += (u - 0.5) * (v - 0.5);
  }
  const double mean = sum / n;
  const double second = sum_sq / n;
  // 1/sqrt(12 n) is about 2.9e-4; allow four sigma.
  CHECK(std::abs(mean - 0.5) < 1.2e-3);
  CHECK(std::abs(second - 1.0 / 3.0) < 1.5e-3);
  CHECK(std::abs(cross / n) < 1.2e-3);
}
