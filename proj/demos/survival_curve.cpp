// Sample one tree and print its window-survival curve next to the
// population-averaged curve, plus a Monte Carlo spot check.

#include <cstdio>

#include "gwperc/annealed.hpp"
#include "gwperc/offspring.hpp"
#include "gwperc/quenched.hpp"
#include "gwperc/tree.hpp"

int main() {
  using namespace gwperc;
  const auto dist = OffspringDistribution::finite({{1, 0.5}, {3, 0.5}});
  const int depth = 18;
  const auto tree = sample_tree(dist, depth, 42);

  std::printf("offspring mean %.3f, critical parameter %.3f, W_%d = %.4f\n", dist.mean(),
              dist.critical_parameter(), depth, tree.w(depth));
  std::printf("%6s  %10s  %10s  %10s\n", "p", "g_tree", "g_avg", "g_mc");

  std::vector<double> grid;
  for (double p = 0.55; p < 0.96; p += 0.05) grid.push_back(p);
  const auto exact = survival_to_depth_multi(tree, grid, depth);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double p = grid[i];
    const auto mc = mc_survival(tree, p, depth, 20000, 7);
    std::printf("%6.2f  %10.6f  %10.6f  %10.6f\n", p, exact[i], annealed_survival(dist, p),
                mc.estimate);
  }
  return 0;
}
