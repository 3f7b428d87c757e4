// The derivative of a collapsed-shape moment equals a signed sum of moments
// of expanded shapes.  Check one instance by finite differences.

#include <cstdio>

#include "gwperc/collapsed.hpp"
#include "gwperc/offspring.hpp"
#include "gwperc/tree.hpp"

int main() {
  using namespace gwperc;
  const auto dist = OffspringDistribution::finite({{1, 0.5}, {3, 0.5}});
  const auto tree = sample_tree(dist, 24, 2);

  const auto v = OrderedTree::parse("(())");
  const Monomial f = {1};
  const auto terms = derivative_expansion(v, f);
  std::printf("d/dp of the single-edge moment expands into %zu signed terms:\n", terms.size());
  for (const auto& t : terms) {
    std::printf("  %c %s (", t.sign > 0 ? '+' : '-', t.tree.format().c_str());
    for (std::size_t i = 0; i < t.f.size(); ++i)
      std::printf("%s%d", i ? "," : "", t.f[i]);
    std::printf(")\n");
  }

  const auto rep = verify_derivative_identity(tree, v, f, 0.75, 24, 0.01, 200000, 5);
  std::printf("\nfinite difference  %+.4f +- %.4f\n", rep.fd_derivative, rep.fd_se);
  std::printf("expansion estimate %+.4f +- %.4f\n", rep.expansion_estimate, rep.expansion_se);
  std::printf("agreement within three combined standard errors: %s\n",
              rep.pass ? "yes" : "no");
  return 0;
}
