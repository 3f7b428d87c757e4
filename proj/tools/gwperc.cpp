// Command-line front end: batch runs of the survival-analysis modules with
// CSV/JSON output.  All output is deterministic for a fixed argument vector;
// worker threads only change wall time, never results.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gwperc/annealed.hpp"
#include "gwperc/coefficients.hpp"
#include "gwperc/collapsed.hpp"
#include "gwperc/errors.hpp"
#include "gwperc/expansion.hpp"
#include "gwperc/offspring.hpp"
#include "gwperc/quenched.hpp"
#include "gwperc/subset_stats.hpp"
#include "gwperc/tree.hpp"

namespace {

using nlohmann::ordered_json;
using namespace gwperc;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

OffspringDistribution load_dist(const std::string& path) {
  return OffspringDistribution::from_json_text(read_file(path));
}

// "start:stop:step" inclusive of stop up to rounding, or a single value
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> parts;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t colon = text.find(':', pos);
    const std::string tok = text.substr(pos, colon == std::string::npos ? colon : colon - pos);
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("bad p-grid component: \"" + tok + "\"");
    }
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  std::vector<double> grid;
  if (parts.size() == 1) {
    grid.push_back(parts[0]);
  } else if (parts.size() == 3) {
    const double start = parts[0], stop = parts[1], step = parts[2];
    if (step <= 0.0) throw ValidationError("p-grid step must be positive");
    if (stop < start) throw ValidationError("p-grid stop must not precede start");
    for (int i = 0;; ++i) {
      const double p = start + i * step;
      if (p > stop + step * 1e-9) break;
      grid.push_back(p);
    }
  } else {
    throw ValidationError("p-grid must be a single value or start:stop:step");
  }
  for (double p : grid)
    if (!(p > 0.0 && p <= 1.0)) throw ValidationError("p-grid values must lie in (0, 1]");
  if (grid.empty()) throw ValidationError("p-grid is empty");
  return grid;
}

Monomial parse_monomial(const std::string& text) {
  Monomial f;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      f.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("bad exponent list component: \"" + tok + "\"");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return f;
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("GWPERC_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ValidationError("GWPERC_THREADS must be a positive integer");
  }
  return 1;
}

// Fixed work units processed in any order by any number of workers, then
// reduced in unit order; thread count cannot influence the result.
template <class Fn>
void run_chunked(int threads, int chunk_count, Fn&& fn) {
  if (threads <= 1 || chunk_count <= 1) {
    for (int c = 0; c < chunk_count; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next.fetch_add(1); c < chunk_count; c = next.fetch_add(1)) fn(c);
  };
  std::vector<std::thread> pool;
  const int n = std::min(threads, chunk_count);
  pool.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

struct Chunk {
  std::uint64_t reps;
  std::uint64_t seed;
};

std::vector<Chunk> split_reps(std::uint64_t reps, std::uint64_t mc_seed) {
  constexpr std::uint64_t kChunks = 64;
  const std::uint64_t count = std::min<std::uint64_t>(kChunks, reps);
  std::vector<Chunk> chunks(count);
  for (std::uint64_t c = 0; c < count; ++c) {
    const std::uint64_t lo = reps * c / count, hi = reps * (c + 1) / count;
    chunks[c] = {hi - lo, mc_seed * 65537 + c + 1};
  }
  return chunks;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(15) << v;
  return os.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file: " + out_path);
  out << text;
}

// ---- subcommand bodies ----

int run_coeffs(const std::string& dist_path, int order, const std::string& out) {
  const auto dist = load_dist(dist_path);
  const auto coeffs = expansion_coefficients(dist, order);
  ordered_json j;
  j["pc"] = dist.critical_parameter();
  j["mu"] = dist.mean();
  j["order"] = order;
  std::vector<double> r(coeffs.r.begin() + 1, coeffs.r.end());
  j["r"] = r;
  emit(j.dump(2) + "\n", out);
  return 0;
}

int run_stats(const std::string& dist_path, std::uint64_t seed, int depth, int jmax, int kmax,
              const std::string& out) {
  const auto dist = load_dist(dist_path);
  const auto tree = sample_tree(dist, depth, seed);
  const auto stats = subset_stats(tree, depth, jmax, kmax);
  const auto doob = doob_decomposition(stats, dist);
  std::ostringstream csv;
  csv << "n,j,k,x,y,delta_a\n";
  for (int n = 0; n <= stats.n_max; ++n)
    for (int j = 0; j <= stats.J; ++j)
      for (int k = 0; k <= stats.K; ++k)
        csv << n << ',' << j << ',' << k << ',' << fmt(stats.at(n, j, k)) << ','
            << fmt(doob.y_at(n, j, k)) << ',' << fmt(doob.delta_a_at(n, j, k)) << '\n';
  emit(csv.str(), out);
  return 0;
}

int run_martingale(const std::string& dist_path, std::uint64_t seed, int depth, int order,
                   const std::string& out) {
  const auto dist = load_dist(dist_path);
  const auto tree = sample_tree(dist, depth, seed);
  const auto stats = subset_stats(tree, depth, order, order - 1);
  const auto coeffs = expansion_coefficients(dist, order);
  const auto mart = expansion_martingale(stats, coeffs, order);
  std::ostringstream csv;
  csv << "n,w";
  for (int i = 1; i <= order; ++i) csv << ",m" << i;
  csv << '\n';
  for (int n = 0; n <= mart.n_max; ++n) {
    csv << n << ',' << fmt(tree.w(n));
    for (int i = 1; i <= order; ++i) csv << ',' << fmt(mart.at(n, i));
    csv << '\n';
  }
  emit(csv.str(), out);
  return 0;
}

int run_survival(const std::string& dist_path, std::uint64_t seed, int depth,
                 const std::string& grid_arg, std::uint64_t reps, std::uint64_t mc_seed,
                 int threads, const std::string& out) {
  const auto dist = load_dist(dist_path);
  const auto grid = parse_grid(grid_arg);
  const auto tree = sample_tree(dist, depth, seed);
  const auto exact = survival_to_depth_multi(tree, grid, depth);
  std::ostringstream csv;
  if (reps == 0) {
    csv << "p,g\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
      csv << fmt(grid[i]) << ',' << fmt(exact[i]) << '\n';
    emit(csv.str(), out);
    return 0;
  }
  csv << "p,g,g_mc,se\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double p = grid[i];
    const auto chunks = split_reps(reps, mc_seed + i);
    std::vector<std::uint64_t> successes(chunks.size(), 0);
    run_chunked(threads, static_cast<int>(chunks.size()), [&](int c) {
      const auto& ch = chunks[static_cast<std::size_t>(c)];
      const auto est = mc_survival(tree, p, depth, ch.reps, ch.seed);
      successes[static_cast<std::size_t>(c)] =
          static_cast<std::uint64_t>(std::llround(est.estimate * static_cast<double>(ch.reps)));
    });
    std::uint64_t hits = 0;
    for (auto s : successes) hits += s;
    const double rd = static_cast<double>(reps);
    const double mean = static_cast<double>(hits) / rd;
    const double se = std::sqrt(std::max(0.0, mean * (1.0 - mean) / rd));
    csv << fmt(p) << ',' << fmt(exact[i]) << ',' << fmt(mean) << ',' << fmt(se) << '\n';
    std::cerr << "survival: p=" << p << " done\n";
  }
  emit(csv.str(), out);
  return 0;
}

int run_russo(const std::string& dist_path, std::uint64_t seed, int depth, double p,
              std::uint64_t reps, double h, std::uint64_t mc_seed, const std::string& out) {
  const auto dist = load_dist(dist_path);
  const auto tree = sample_tree(dist, depth, seed);
  const auto rep = russo_check(tree, p, depth, reps, mc_seed, h);
  ordered_json j;
  j["p"] = rep.p;
  j["h"] = rep.h;
  j["n"] = rep.n;
  j["g_minus"] = rep.g_minus;
  j["g_plus"] = rep.g_plus;
  j["fd_derivative"] = rep.fd_derivative;
  j["russo_estimate"] = rep.russo_estimate;
  j["se"] = rep.se;
  j["fd_bias_scale"] = rep.fd_bias_scale;
  j["survivors"] = rep.survivors;
  j["unresolved"] = rep.unresolved;
  j["reps"] = rep.reps;
  j["pass"] = rep.pass;
  emit(j.dump(2) + "\n", out);
  return rep.pass ? 0 : 1;
}

ordered_json term_list_json(const SignedTermList& terms) {
  ordered_json arr = ordered_json::array();
  for (const auto& t : terms) {
    ordered_json e;
    e["sign"] = t.sign;
    e["v"] = t.tree.format();
    e["f"] = t.f;
    arr.push_back(std::move(e));
  }
  return arr;
}

int run_collapsed_expand(const std::string& v_text, const std::string& f_arg, int iterate,
                         const std::string& out) {
  const auto v = OrderedTree::parse(v_text);
  const auto f = parse_monomial(f_arg);
  validate_shape(v);
  validate_monomial(v, f);
  const auto terms = iterate_expansion(v, f, iterate);
  ordered_json j;
  j["v"] = v.format();
  j["f"] = f;
  j["order"] = iterate;
  j["term_count"] = terms.size();
  j["terms"] = term_list_json(terms);
  emit(j.dump(2) + "\n", out);
  return 0;
}

int run_collapsed_mc(const std::string& dist_path, std::uint64_t seed, int depth,
                     const std::string& v_text, const std::string& f_arg, double p,
                     std::uint64_t reps, std::uint64_t mc_seed, int threads,
                     const std::string& out) {
  const auto dist = load_dist(dist_path);
  const auto tree = sample_tree(dist, depth, seed);
  const auto v = OrderedTree::parse(v_text);
  const auto f = parse_monomial(f_arg);

  const auto chunks = split_reps(reps, mc_seed);
  struct Acc {
    double sum = 0.0, sum_sq = 0.0;
    std::uint64_t matched = 0, indeterminate = 0;
  };
  std::vector<Acc> acc(chunks.size());
  run_chunked(threads, static_cast<int>(chunks.size()), [&](int c) {
    const auto& ch = chunks[static_cast<std::size_t>(c)];
    const auto est = mc_monomial_expectation(tree, v, f, p, depth, ch.reps, ch.seed);
    const double rd = static_cast<double>(ch.reps);
    const double mean = est.estimate;
    Acc& a = acc[static_cast<std::size_t>(c)];
    a.sum = mean * rd;
    // invert the sample-variance formula to recover the square sum
    a.sum_sq = est.se * est.se * rd * (rd - 1.0) + rd * mean * mean;
    a.matched = est.matched;
    a.indeterminate = est.indeterminate;
  });
  KahanSum sum, sum_sq;
  std::uint64_t matched = 0, indeterminate = 0;
  for (const Acc& a : acc) {
    sum.add(a.sum);
    sum_sq.add(a.sum_sq);
    matched += a.matched;
    indeterminate += a.indeterminate;
  }
  const auto ms = mean_se(static_cast<double>(reps), sum.value(), sum_sq.value());
  ordered_json j;
  j["v"] = v.format();
  j["f"] = f;
  j["p"] = p;
  j["n"] = depth;
  j["estimate"] = ms.mean;
  j["se"] = ms.se;
  j["reps"] = reps;
  j["matched"] = matched;
  j["indeterminate"] = indeterminate;
  j["indeterminate_warning"] =
      static_cast<double>(indeterminate) > 0.01 * static_cast<double>(reps);
  emit(j.dump(2) + "\n", out);
  return 0;
}

int run_verify(const std::string& suite, const std::string& dist_path, int order,
               std::uint64_t seed, int depth, std::uint64_t reps, double p,
               std::uint64_t mc_seed, const std::string& out) {
  const auto dist = load_dist(dist_path);
  ordered_json j;
  j["suite"] = suite;
  bool pass = true;

  if (suite == "constants") {
    ordered_json checks = ordered_json::array();
    for (int i = 1; i <= order; ++i) {
      const double residual = verify_constants_identity(dist, i);
      const bool ok = residual < 1e-9;
      pass = pass && ok;
      checks.push_back(ordered_json{{"i", i}, {"residual", residual}, {"pass", ok}});
    }
    j["checks"] = checks;
  } else if (suite == "martingale") {
    const auto tree = sample_tree(dist, depth, seed);
    const int jmax = std::min(order, 3), kmax = std::min(order, 3) - 1;
    const auto stats = subset_stats(tree, depth, jmax, kmax < 0 ? 0 : kmax);
    const auto doob = doob_decomposition(stats, dist);
    double worst = 0.0;
    for (int n = 0; n <= stats.n_max; ++n)
      for (int jj = 0; jj <= stats.J; ++jj)
        for (int k = 0; k <= stats.K; ++k) {
          KahanSum rebuilt;
          rebuilt.add(doob.y_at(n, jj, k));
          for (int m = 0; m <= n; ++m) rebuilt.add(doob.delta_a_at(m, jj, k));
          const double x = stats.at(n, jj, k);
          worst = std::max(worst,
                           std::abs(rebuilt.value() - x) / std::max(1.0, std::abs(x)));
        }
    pass = worst < 1e-10;
    j["worst_relative_residual"] = worst;
    j["depth"] = depth;
    j["seed"] = seed;
  } else if (suite == "expansion") {
    const auto tree = sample_tree(dist, depth, seed);
    ordered_json checks = ordered_json::array();
    struct Probe {
      const char* name;
      const char* v;
      Monomial f;
    };
    for (const Probe& pr : {Probe{"single_edge_unit", "(())", {1}},
                            Probe{"cherry_zero", "(()())", {0, 0}}}) {
      std::cerr << "verify expansion: " << pr.name << " (" << reps << " replicates)\n";
      const auto rep = verify_derivative_identity(tree, OrderedTree::parse(pr.v), pr.f, p,
                                                  depth, 0.01, reps, mc_seed);
      pass = pass && rep.pass;
      checks.push_back(ordered_json{{"name", pr.name},
                                    {"fd_derivative", rep.fd_derivative},
                                    {"fd_se", rep.fd_se},
                                    {"expansion_estimate", rep.expansion_estimate},
                                    {"expansion_se", rep.expansion_se},
                                    {"combined_se", rep.combined_se},
                                    {"term_count", rep.term_count},
                                    {"pass", rep.pass}});
    }
    j["checks"] = checks;
  } else {
    throw ValidationError("unknown suite: " + suite +
                          " (expected constants, martingale, or expansion)");
  }

  j["pass"] = pass;
  emit(j.dump(2) + "\n", out);
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survival functions of percolation on branching-process trees"};
  app.require_subcommand(1);

  // Options with per-subcommand defaults get their own variables; CLI11
  // assigns defaults at setup time, so sharing one variable across
  // subcommands would let the last registered default win.
  std::string dist_path, out_path, grid_arg = "0.6:0.95:0.05", v_text, f_arg = "0", suite;
  std::uint64_t seed = 1, mc_seed = 1;
  std::uint64_t reps_surv = 0, reps_russo = 100000, reps_coll = 100000, reps_verify = 200000;
  int depth_stats = 8, depth_mart = 12, depth_surv = 20, depth_russo = 24, depth_coll = 27,
      depth_verify = 12;
  int order_coeffs = 3, order_mart = 3, order_verify = 5;
  int jmax = 2, kmax = 1, iterate = 1, threads = 0;
  double p = 0.75, h = 1e-3;
  bool expand = false;

  auto add_common = [&](CLI::App* cmd, bool needs_dist) {
    auto* opt = cmd->add_option("--dist", dist_path, "offspring distribution JSON file");
    if (needs_dist) opt->required();
    cmd->add_option("--out", out_path, "write output to a file instead of stdout");
    cmd->add_option("--threads", threads, "worker threads (default: GWPERC_THREADS or 1)");
  };

  auto* coeffs = app.add_subcommand("coeffs", "series coefficients of the annealed survival");
  add_common(coeffs, true);
  coeffs->add_option("--order", order_coeffs, "number of coefficients")->capture_default_str();

  auto* stats = app.add_subcommand("stats", "subset statistics and their decomposition");
  add_common(stats, true);
  stats->add_option("--seed", seed, "tree seed")->capture_default_str();
  stats->add_option("--depth", depth_stats, "sampled depth")->capture_default_str();
  stats->add_option("--jmax", jmax, "subset size cap")->capture_default_str();
  stats->add_option("--kmax", kmax, "binomial order cap")->capture_default_str();

  auto* mart = app.add_subcommand("martingale", "per-level expansion martingales");
  add_common(mart, true);
  mart->add_option("--seed", seed, "tree seed")->capture_default_str();
  mart->add_option("--depth", depth_mart, "sampled depth")->capture_default_str();
  mart->add_option("--order", order_mart, "martingale order")->capture_default_str();

  auto* surv = app.add_subcommand("survival", "root-to-depth survival over a p-grid");
  add_common(surv, true);
  surv->add_option("--seed", seed, "tree seed")->capture_default_str();
  surv->add_option("--depth", depth_surv, "sampled depth and survival window")
      ->capture_default_str();
  surv->add_option("--p", grid_arg, "p value or start:stop:step grid")->capture_default_str();
  surv->add_option("--reps", reps_surv, "add Monte Carlo columns with this many replicates");
  surv->add_option("--mc-seed", mc_seed, "replicate stream seed")->capture_default_str();

  auto* russo = app.add_subcommand("russo", "derivative of survival vs branching-depth estimate");
  add_common(russo, true);
  russo->add_option("--seed", seed, "tree seed")->capture_default_str();
  russo->add_option("--depth", depth_russo, "sampled depth and survival window")
      ->capture_default_str();
  russo->add_option("--p", p, "percolation parameter")->capture_default_str();
  russo->add_option("--reps", reps_russo, "Monte Carlo replicates")->capture_default_str();
  russo->add_option("--step", h, "finite-difference step")->capture_default_str();
  russo->add_option("--mc-seed", mc_seed, "replicate stream seed")->capture_default_str();

  auto* coll = app.add_subcommand("collapsed", "collapsed-shape moments and expansions");
  add_common(coll, false);
  coll->add_option("--v", v_text, "collapsed shape, nested parentheses")->required();
  coll->add_option("--f", f_arg, "comma-separated edge exponents")->capture_default_str();
  coll->add_flag("--expand", expand, "emit the symbolic derivative expansion and exit");
  coll->add_option("--iterate", iterate, "expansion applications (with --expand)")
      ->capture_default_str();
  coll->add_option("--seed", seed, "tree seed")->capture_default_str();
  coll->add_option("--depth", depth_coll, "sampled depth and survival window")
      ->capture_default_str();
  coll->add_option("--p", p, "percolation parameter")->capture_default_str();
  coll->add_option("--reps", reps_coll, "Monte Carlo replicates")->capture_default_str();
  coll->add_option("--mc-seed", mc_seed, "replicate stream seed")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "pass/fail identity suites");
  add_common(verify, true);
  verify->add_option("--suite", suite, "constants, martingale, or expansion")->required();
  verify->add_option("--order", order_verify, "identity order cap")->capture_default_str();
  verify->add_option("--seed", seed, "tree seed")->capture_default_str();
  verify->add_option("--depth", depth_verify, "sampled depth")->capture_default_str();
  verify->add_option("--reps", reps_verify, "Monte Carlo replicates (expansion suite)")
      ->capture_default_str();
  verify->add_option("--p", p, "percolation parameter (expansion suite)")->capture_default_str();
  verify->add_option("--mc-seed", mc_seed, "replicate stream seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << '\n';
    return 2;
  }

  try {
    const int workers = resolve_threads(threads);
    if (coeffs->parsed()) return run_coeffs(dist_path, order_coeffs, out_path);
    if (stats->parsed()) return run_stats(dist_path, seed, depth_stats, jmax, kmax, out_path);
    if (mart->parsed()) return run_martingale(dist_path, seed, depth_mart, order_mart, out_path);
    if (surv->parsed())
      return run_survival(dist_path, seed, depth_surv, grid_arg, reps_surv, mc_seed, workers,
                          out_path);
    if (russo->parsed())
      return run_russo(dist_path, seed, depth_russo, p, reps_russo, h, mc_seed, out_path);
    if (coll->parsed()) {
      if (expand) return run_collapsed_expand(v_text, f_arg, iterate, out_path);
      if (dist_path.empty())
        throw ValidationError("collapsed Monte Carlo mode requires --dist");
      return run_collapsed_mc(dist_path, seed, depth_coll, v_text, f_arg, p, reps_coll,
                              mc_seed, workers, out_path);
    }
    if (verify->parsed())
      return run_verify(suite, dist_path, order_verify, seed, depth_verify, reps_verify, p,
                        mc_seed, out_path);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
