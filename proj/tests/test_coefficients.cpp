#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gwperc/coefficients.hpp"

using namespace gwperc;

namespace {

OffspringDistribution binary() { return OffspringDistribution::finite({{2, 1.0}}); }
OffspringDistribution geo() { return OffspringDistribution::geometric(0.5, 100); }

}  // namespace

// Reference values checked by hand from the defining recursion.  For the
// binary law (phi = z^2) the first coefficients are 8, -32, 96; for the
// geometric law with q = 1/2 (all derivatives phi^(r)(1) = 2 r!) they are
// 4, -8, 16.
TEST_CASE("expansion coefficients of the binary law") {
  auto c = expansion_coefficients(binary(), 3);
  CHECK(c.p_c == Catch::Approx(0.5));
  CHECK(c.slope == Catch::Approx(8.0).margin(1e-9));
  CHECK(c.r[1] == Catch::Approx(8.0).margin(1e-9));
  CHECK(c.r[2] == Catch::Approx(-32.0).margin(1e-9));
  CHECK(c.r[3] == Catch::Approx(96.0).margin(1e-9));
}

TEST_CASE("expansion coefficients of the geometric law") {
  auto c = expansion_coefficients(geo(), 3);
  CHECK(c.r[1] == Catch::Approx(4.0).margin(1e-9));
  CHECK(c.r[2] == Catch::Approx(-8.0).margin(1e-9));
  CHECK(c.r[3] == Catch::Approx(16.0).margin(1e-9));
}

TEST_CASE("series powers are truncated polynomial powers") {
  auto c = expansion_coefficients(binary(), 3);
  CHECK(c.powers[1][1] == Catch::Approx(8.0));
  CHECK(c.powers[1][3] == Catch::Approx(96.0));
  CHECK(c.powers[2][1] == 0.0);
  CHECK(c.powers[2][2] == Catch::Approx(64.0));          // r1^2
  CHECK(c.powers[2][3] == Catch::Approx(2 * 8.0 * -32.0));  // 2 r1 r2
  CHECK(c.powers[3][3] == Catch::Approx(512.0));         // r1^3
}

TEST_CASE("expansion order beyond the trusted moments is refused") {
  auto coarse = OffspringDistribution::geometric(0.5, 12);
  CHECK_THROWS_AS(expansion_coefficients(coarse, 3), MomentUnavailableError);
  CHECK_THROWS_AS(expansion_coefficients(binary(), 0), ValidationError);
}

TEST_CASE("composition constants, binary law") {
  auto cc = composition_constants(binary(), 3);
  CHECK(cc.at(1, 1) == Catch::Approx(1.0));
  CHECK(cc.at(2, 1) == Catch::Approx(0.25));
  CHECK(cc.at(2, 2) == Catch::Approx(1.0));
  CHECK(cc.at(3, 1) == 0.0);  // no third factorial moment for two children
  CHECK(cc.at(3, 2) == Catch::Approx(0.5));
  CHECK(cc.at(3, 3) == Catch::Approx(1.0));
  CHECK(cc.at(2, 3) == 0.0);
}

TEST_CASE("composition constants, geometric law") {
  auto cc = composition_constants(geo(), 3);
  CHECK(cc.at(1, 1) == Catch::Approx(1.0));
  CHECK(cc.at(2, 1) == Catch::Approx(0.5));
  CHECK(cc.at(2, 2) == Catch::Approx(1.0));
  CHECK(cc.at(3, 1) == Catch::Approx(0.25));
  CHECK(cc.at(3, 2) == Catch::Approx(1.0));
  CHECK(cc.at(3, 3) == Catch::Approx(1.0));
}

TEST_CASE("diagonal composition constants are 1 for any law") {
  for (auto d : {binary(), geo(), OffspringDistribution::finite({{1, 0.5}, {3, 0.5}})}) {
    auto cc = composition_constants(d, 4);
    for (int j = 1; j <= 4; ++j) CHECK(cc.at(j, j) == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("growth constants, binary law") {
  auto gc = growth_constants(binary(), 3, 2);
  CHECK(gc.at(1, 0) == Catch::Approx(1.0));
  CHECK(gc.at(1, 1) == Catch::Approx(1.0));
  CHECK(gc.at(1, 2) == Catch::Approx(0.5));
  CHECK(gc.at(2, 0) == Catch::Approx(0.25));
  // X_n^{(2,1)} = n(3n+1)/8 for the deterministic binary tree, so the
  // n^2 growth coefficient must be 3/8.
  CHECK(gc.at(2, 1) == Catch::Approx(0.375));
  CHECK(gc.at(3, 0) == Catch::Approx(1.0 / 16.0));
}

TEST_CASE("moment precondition on composition constants") {
  auto coarse = OffspringDistribution::geometric(0.5, 8);
  CHECK_THROWS_AS(composition_constants(coarse, 2), MomentUnavailableError);
}
