#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ext_helpers.hpp"
#include "gwperc/subset_stats.hpp"

using namespace gwperc;

namespace {

OffspringDistribution binary() { return OffspringDistribution::finite({{2, 1.0}}); }
OffspringDistribution ternary() { return OffspringDistribution::finite({{3, 1.0}}); }
OffspringDistribution one_or_three() {
  return OffspringDistribution::finite({{1, 0.5}, {3, 0.5}});
}
OffspringDistribution geo() { return OffspringDistribution::geometric(0.5, 60); }

double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
  return std::abs(a - b) / scale;
}

}  // namespace

// Closed forms for the deterministic binary tree, derived once by hand from
// the subset sums: X_n^{(1,k)} = C(n,k), X_n^{(2,0)} = n/4,
// X_n^{(2,1)} = n(3n+1)/8, X_n^{(3,0)} = n(n-1)/16.
TEST_CASE("binary tree closed forms") {
  auto t = sample_tree(binary(), 14, 1);
  auto s = subset_stats(t, 14, 3, 3);
  for (int n = 0; n <= 14; ++n) {
    for (int k = 0; k <= 3; ++k)
      CHECK(s.at(n, 1, k) == Catch::Approx(binom(n, k)).margin(1e-12));
    CHECK(s.at(n, 2, 0) == Catch::Approx(n / 4.0).margin(1e-12));
    CHECK(s.at(n, 2, 1) == Catch::Approx(n * (3.0 * n + 1) / 8.0).epsilon(1e-12).margin(1e-12));
    CHECK(s.at(n, 3, 0) == Catch::Approx(n * (n - 1.0) / 16.0).epsilon(1e-12).margin(1e-12));
  }
  // Worked examples: a sibling pair spans 2 edges; at n=2 the two sibling
  // pairs span 3 edges and the four cross pairs span 4.
  CHECK(s.at(1, 2, 0) == Catch::Approx(0.25));
  CHECK(s.at(2, 2, 0) == Catch::Approx(2.0 / 8 + 4.0 / 16));
  CHECK(s.at(0, 1, 0) == 1.0);
}

TEST_CASE("general sweep agrees with the self-similar fast path") {
  auto t = sample_tree(binary(), 10, 3);
  auto fast = subset_stats(t, 10, 3, 2);
  const detail::StatOps ops{3, 2, 0.5};
  for (int window = 0; window <= 10; ++window) {
    std::vector<detail::StatTable> base(t.level_size(window), ops.base());
    auto root = detail::dp_root_table(t, window, std::move(base), ops);
    for (int j = 0; j <= 3; ++j)
      for (int k = 0; k <= 2; ++k)
        CHECK(rel_diff(root[ops.idx(j, k)], fast.at(window, j, k)) < 1e-12);
  }
}

TEST_CASE("dynamic program matches brute force on random trees") {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 50; ++seed) {
    REQUIRE(seed < 200);
    for (auto d : {one_or_three(), geo()}) {
      auto t = sample_tree(d, 4, seed);
      if (binom(static_cast<std::int64_t>(t.level_size(4)), 3) > 1e7) continue;
      auto dp = subset_stats(t, 4, 3, 3);
      auto bf = brute_force_subset_stats(t, 4, 3, 3);
      for (int n = 0; n <= 4; ++n)
        for (int j = 1; j <= 3; ++j)
          for (int k = 0; k <= 3; ++k)
            CHECK(rel_diff(dp.at(n, j, k), bf.at(n, j, k)) < 1e-12);
      ++checked;
    }
  }
}

TEST_CASE("first row is C(n,k) W_n on any sampled tree") {
  for (auto d : {one_or_three(), geo()}) {
    auto t = sample_tree(d, 8, 17);
    auto s = subset_stats(t, 8, 2, 3);
    for (int n = 0; n <= 8; ++n)
      for (int k = 0; k <= 3; ++k)
        CHECK(s.at(n, 1, k) == Catch::Approx(binom(n, k) * t.w(n)).epsilon(1e-12).margin(1e-14));
  }
}

TEST_CASE("subset sizes above the level population vanish") {
  // Hunt for a single-file tree: every level-n count is 1 until depth 4.
  auto d = one_or_three();
  for (std::uint64_t seed = 0;; ++seed) {
    REQUIRE(seed < 100000);
    auto t = sample_tree(d, 4, seed);
    if (t.level_size(4) != 1) continue;
    auto s = subset_stats(t, 4, 3, 1);
    CHECK(s.at(4, 1, 0) == Catch::Approx(1.0 / 16));  // W_4 = 2^-4
    CHECK(s.at(4, 2, 0) == 0.0);
    CHECK(s.at(4, 3, 0) == 0.0);
    break;
  }
}

TEST_CASE("doob identity reconstructs X from Y and the predictable part") {
  for (auto d : {one_or_three(), geo()}) {
    for (std::uint64_t seed : {11u, 22u, 33u}) {
      auto t = sample_tree(d, 10, seed);
      auto s = subset_stats(t, 10, 3, 2);
      auto doob = doob_decomposition(s, d);
      for (int j = 1; j <= 3; ++j) {
        for (int k = 0; k <= 2; ++k) {
          double run = 0.0;
          for (int n = 0; n <= 10; ++n) {
            run += doob.delta_a_at(n, j, k);
            const double rebuilt = doob.y_at(n, j, k) + run;
            const double x = s.at(n, j, k);
            CHECK(std::abs(rebuilt - x) < 1e-10 * std::max(1.0, std::abs(x)));
          }
        }
      }
    }
  }
}

TEST_CASE("binary tree martingale part is constant in the first row") {
  auto t = sample_tree(binary(), 12, 9);
  auto doob = doob_decomposition(subset_stats(t, 12, 2, 2), binary());
  for (int n = 0; n <= 12; ++n) CHECK(doob.y_at(n, 1, 0) == Catch::Approx(1.0));
}

TEST_CASE("first-row martingale increments track W increments") {
  auto d = one_or_three();
  auto t = sample_tree(d, 9, 4);
  auto s = subset_stats(t, 9, 2, 3);
  auto doob = doob_decomposition(s, d);
  for (int n = 1; n <= 9; ++n) {
    const double dw = t.w(n) - t.w(n - 1);
    for (int k = 0; k <= 3; ++k) {
      const double expect = (binom(n - 1, k) + binom(n - 1, k - 1)) * dw;
      CHECK(doob.y_at(n, 1, k) - doob.y_at(n - 1, 1, k) ==
            Catch::Approx(expect).margin(1e-10));
    }
  }
}

TEST_CASE("conditional mean of the Y increment vanishes over extensions") {
  auto d = one_or_three();
  auto t = sample_tree(d, 7, 2718);
  auto s = subset_stats(t, 7, 3, 2);
  auto cc = composition_constants(d, 3);
  const detail::StatOps ops{3, 2, d.critical_parameter()};
  const int reps = 1000;
  for (auto [j, k] : {std::pair{2, 0}, {2, 1}, {3, 2}}) {
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < reps; ++r) {
      auto next = testutil::extended_window_table(t, 7, ops, 555, static_cast<std::uint64_t>(r));
      const double dy = testutil::delta_y_entry(s, next, cc, ops, j, k);
      sum += dy;
      sum_sq += dy * dy;
    }
    auto ms = mean_se(reps, sum, sum_sq);
    INFO("j=" << j << " k=" << k << " mean=" << ms.mean << " se=" << ms.se);
    CHECK(ms.se > 0.0);
    CHECK(std::abs(ms.mean) < 3 * ms.se);
  }
}

TEST_CASE("ensemble mean of Y is level-independent") {
  auto d = one_or_three();
  const int seeds = 1500;
  double sum = 0.0, sum_sq = 0.0;
  for (int s = 0; s < seeds; ++s) {
    auto t = sample_tree(d, 8, 50000 + s);
    auto doob = doob_decomposition(subset_stats(t, 8, 2, 1), d);
    const double diff = doob.y_at(8, 2, 1) - doob.y_at(3, 2, 1);
    sum += diff;
    sum_sq += diff * diff;
  }
  auto ms = mean_se(seeds, sum, sum_sq);
  INFO("mean=" << ms.mean << " se=" << ms.se);
  CHECK(std::abs(ms.mean) < 3 * ms.se);
}

TEST_CASE("deep growth ratios settle near the growth constants") {
  for (auto d : {binary(), ternary()}) {
    auto t = sample_tree(d, 512, 1);
    auto s = subset_stats(t, 512, 3, 2);
    auto gc = growth_constants(d, 3, 2);
    for (int j = 1; j <= 3; ++j) {
      for (int k = 0; k <= 2; ++k) {
        const double r256 = s.at(256, j, k) / std::pow(256.0, j + k - 1);
        const double r512 = s.at(512, j, k) / std::pow(512.0, j + k - 1);
        INFO("j=" << j << " k=" << k << " r512=" << r512 << " c'=" << gc.at(j, k));
        CHECK(rel_diff(r256, r512) < 0.05);
        CHECK(rel_diff(r512, gc.at(j, k)) < 0.05);
      }
    }
  }
}

TEST_CASE("brute force refuses oversized enumerations") {
  auto t = sample_tree(binary(), 9, 1);
  CHECK_THROWS_AS(brute_force_subset_stats(t, 9, 3, 0), ResourceError);
}

TEST_CASE("argument validation") {
  auto t = sample_tree(binary(), 4, 1);
  CHECK_THROWS_AS(subset_stats(t, 5, 2, 2), ValidationError);
  CHECK_THROWS_AS(subset_stats(t, 4, 0, 2), ValidationError);
  CHECK_THROWS_AS(subset_stats(t, 4, 2, -1), ValidationError);
  auto s = subset_stats(t, 4, 2, 2);
  CHECK_THROWS_AS(s.at(5, 1, 0), ValidationError);
  CHECK_THROWS_AS(s.at(4, 3, 0), ValidationError);
}
