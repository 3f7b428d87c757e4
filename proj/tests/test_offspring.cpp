#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gwperc/hash_rng.hpp"
#include "gwperc/offspring.hpp"

using namespace gwperc;

namespace {

OffspringDistribution binary() { return OffspringDistribution::finite({{2, 1.0}}); }

OffspringDistribution one_or_three() {
  return OffspringDistribution::finite({{1, 0.5}, {3, 0.5}});
}

}  // namespace

TEST_CASE("binary law basics") {
  auto d = binary();
  CHECK(d.mean() == Catch::Approx(2.0));
  CHECK(d.critical_parameter() == Catch::Approx(0.5));
  CHECK(d.is_degenerate());
  CHECK(d.degenerate_degree() == 2);
  CHECK(d.max_degree() == 2);
  CHECK(d.pgf(0, 0.3) == Catch::Approx(0.09));
  CHECK(d.pgf(1, 0.3) == Catch::Approx(0.6));
  CHECK(d.pgf(2, 0.3) == Catch::Approx(2.0));
  CHECK(d.pgf(3, 0.3) == 0.0);
  CHECK(d.factorial_moment(1) == Catch::Approx(2.0));
  CHECK(d.factorial_moment(2) == Catch::Approx(1.0));
  CHECK(d.factorial_moment(3) == 0.0);
  CHECK(d.max_exact_moment() == 20);
  for (double u : {0.0, 0.25, 0.9999}) CHECK(d.sample(u) == 2);
}

TEST_CASE("two-atom law moments") {
  auto d = one_or_three();
  CHECK(d.mean() == Catch::Approx(2.0));
  CHECK_FALSE(d.is_degenerate());
  CHECK(d.factorial_moment(2) == Catch::Approx(1.5));
  CHECK(d.factorial_moment(3) == Catch::Approx(0.5));
  CHECK(d.pgf(0, 1.0) == Catch::Approx(1.0));
  CHECK(d.pgf(2, 1.0) == Catch::Approx(3.0));
}

TEST_CASE("inverse-CDF sampling uses strict inequality at atoms") {
  auto d = one_or_three();
  CHECK(d.sample(0.0) == 1);
  CHECK(d.sample(0.4999) == 1);
  // CDF(1) = 0.5 exactly, so u = 0.5 must move past the atom.
  CHECK(d.sample(0.5) == 3);
  CHECK(d.sample(0.9999) == 3);
}

TEST_CASE("truncated geometric matches the closed-form law") {
  auto g = OffspringDistribution::geometric(0.5, 100);
  CHECK(g.mean() == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(g.critical_parameter() == Catch::Approx(0.5).epsilon(1e-12));
  for (int r = 1; r <= 6; ++r)
    CHECK(g.factorial_moment(r) == Catch::Approx(2.0).epsilon(1e-10));
  CHECK(g.max_exact_moment() >= 10);
  CHECK(g.max_exact_moment() <= 20);
  CHECK(g.sample(0.0) == 1);
  CHECK(g.sample(0.49) == 1);
  CHECK(g.sample(0.51) == 2);
  CHECK(g.sample(0.76) == 3);

  // Severe truncation is detected and reflected in the trusted moment range.
  auto coarse = OffspringDistribution::geometric(0.5, 8);
  CHECK(coarse.max_exact_moment() == 0);
}

TEST_CASE("validation rejects malformed laws") {
  CHECK_THROWS_AS(OffspringDistribution::finite({{0, 0.5}, {2, 0.5}}), ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::finite({{1, 0.7}, {2, 0.7}}), ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::finite({{1, 1.0}}), ValidationError);  // mean 1
  CHECK_THROWS_AS(OffspringDistribution::finite({{2, 1.0}, {2, 0.0}}), ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::finite({{-1, 0.5}, {2, 0.5}}), ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::finite({{1, -0.5}, {2, 1.5}}), ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::geometric(0.0, 60), ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::geometric(1.0, 60), ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::geometric(0.5, 1), ValidationError);
}

TEST_CASE("json round trip") {
  auto d = OffspringDistribution::from_json_text(
      R"({"type":"finite","pmf":[["1",0.5],["3",0.5]]})");
  CHECK(d == one_or_three());
  auto d2 = OffspringDistribution::from_json(d.to_json());
  CHECK(d2 == d);

  auto g = OffspringDistribution::from_json_text(
      R"({"type":"geometric","q":0.5,"truncate":60})");
  CHECK(g.mean() == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(OffspringDistribution::from_json(g.to_json()) == g);

  CHECK_THROWS_AS(OffspringDistribution::from_json_text("not json"), ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::from_json_text(R"({"type":"zeta","s":2})"),
                  ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::from_json_text(R"({"type":"geometric","q":0.5})"),
                  ValidationError);
  CHECK_THROWS_AS(OffspringDistribution::from_json_text(R"({"type":"finite","pmf":[["x",1.0]]})"),
                  ValidationError);
}

TEST_CASE("sampling frequencies track the pmf") {
  auto d = one_or_three();
  const int n = 1000000;
  int ones = 0;
  std::uint64_t state = rng::tree_root_state(99);
  for (int i = 0; i < n; ++i) {
    state = rng::child_state(state, 0);
    if (d.sample(rng::degree_uniform(state)) == 1) ++ones;
  }
  // Binomial sd is 0.0005; allow four sigma.
  CHECK(std::abs(ones / static_cast<double>(n) - 0.5) < 2e-3);
}
