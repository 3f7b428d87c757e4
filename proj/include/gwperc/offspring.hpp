#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gwperc/errors.hpp"
#include "gwperc/numeric.hpp"

namespace gwperc {

// Offspring law of the branching process.  Supported laws have no mass at
// zero (every vertex gets at least one child) and mean strictly above one,
// so the tree is infinite and the percolation problem is supercritical for
// retention probabilities above 1/mean.
class OffspringDistribution {
 public:
  // pmf given as (children count, probability) pairs.
  static OffspringDistribution finite(const std::vector<std::pair<int, double>>& entries) {
    OffspringDistribution d;
    d.kind_ = Kind::kFinite;
    int max_k = 0;
    for (const auto& [k, w] : entries) {
      if (k < 0) throw ValidationError("offspring count must be nonnegative");
      if (k > kMaxSupport) throw ValidationError("offspring count exceeds supported range");
      max_k = std::max(max_k, k);
    }
    d.pmf_.assign(static_cast<std::size_t>(max_k) + 1, 0.0);
    for (const auto& [k, w] : entries) {
      if (d.pmf_[static_cast<std::size_t>(k)] != 0.0)
        throw ValidationError("duplicate offspring count in pmf");
      d.pmf_[static_cast<std::size_t>(k)] = w;
    }
    d.validate();
    d.finish();
    return d;
  }

  // Geometric law on {1, 2, ...} with P(Z = k) = (1-q) q^(k-1), cut at
  // `truncate` and renormalized.  Mean of the full law is 1/(1-q).
  static OffspringDistribution geometric(double q, int truncate) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("geometric parameter q must lie in (0,1)");
    if (truncate < 2) throw ValidationError("geometric truncation must be at least 2");
    if (truncate > kMaxSupport) throw ValidationError("geometric truncation exceeds supported range");
    OffspringDistribution d;
    d.kind_ = Kind::kGeometric;
    d.q_ = q;
    d.truncate_ = truncate;
    d.pmf_.assign(static_cast<std::size_t>(truncate) + 1, 0.0);
    double mass = 1.0 - std::pow(q, truncate);
    double w = (1.0 - q) / mass;
    for (int k = 1; k <= truncate; ++k) {
      d.pmf_[static_cast<std::size_t>(k)] = w;
      w *= q;
    }
    d.validate();
    d.finish();
    return d;
  }

  static OffspringDistribution from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("type"))
      throw ValidationError("distribution json must be an object with a \"type\" field");
    const std::string type = j.at("type").get<std::string>();
    if (type == "finite") {
      if (!j.contains("pmf") || !j.at("pmf").is_array())
        throw ValidationError("finite distribution needs a \"pmf\" array");
      std::vector<std::pair<int, double>> entries;
      for (const auto& e : j.at("pmf")) {
        if (!e.is_array() || e.size() != 2)
          throw ValidationError("pmf entries must be [count, probability] pairs");
        int k = 0;
        if (e[0].is_string()) {
          try {
            k = std::stoi(e[0].get<std::string>());
          } catch (const std::exception&) {
            throw ValidationError("pmf count is not an integer: " + e[0].get<std::string>());
          }
        } else if (e[0].is_number_integer()) {
          k = e[0].get<int>();
        } else {
          throw ValidationError("pmf count must be an integer or integer string");
        }
        if (!e[1].is_number()) throw ValidationError("pmf probability must be a number");
        entries.emplace_back(k, e[1].get<double>());
      }
      return finite(entries);
    }
    if (type == "geometric") {
      if (!j.contains("q")) throw ValidationError("geometric distribution needs \"q\"");
      if (!j.contains("truncate")) throw ValidationError("geometric distribution needs \"truncate\"");
      return geometric(j.at("q").get<double>(), j.at("truncate").get<int>());
    }
    throw ValidationError("unknown distribution type: " + type);
  }

  static OffspringDistribution from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("distribution json does not parse");
    return from_json(j);
  }

  nlohmann::json to_json() const {
    nlohmann::ordered_json j;
    if (kind_ == Kind::kGeometric) {
      j["type"] = "geometric";
      j["q"] = q_;
      j["truncate"] = truncate_;
    } else {
      j["type"] = "finite";
      auto arr = nlohmann::ordered_json::array();
      for (std::size_t k = 1; k < pmf_.size(); ++k) {
        if (pmf_[k] != 0.0) arr.push_back({std::to_string(k), pmf_[k]});
      }
      j["pmf"] = std::move(arr);
    }
    return j;
  }

  const std::vector<double>& pmf() const { return pmf_; }
  int max_degree() const { return static_cast<int>(pmf_.size()) - 1; }
  double mean() const { return mu_; }
  double critical_parameter() const { return 1.0 / mu_; }

  // True when a single offspring count carries all the mass; such trees are
  // deterministic and several algorithms collapse to per-level recursions.
  bool is_degenerate() const { return degenerate_degree_ > 0; }
  int degenerate_degree() const { return degenerate_degree_; }

  // order-th derivative of the generating function E z^Z.
  double pgf(int order, double z) const {
    if (order < 0) throw ValidationError("pgf derivative order must be nonnegative");
    KahanSum acc;
    for (std::size_t k = static_cast<std::size_t>(order); k < pmf_.size(); ++k) {
      if (pmf_[k] == 0.0) continue;
      acc.add(pmf_[k] * falling_factorial(static_cast<double>(k), order) *
              int_pow(z, static_cast<int>(k) - order));
    }
    return acc.value();
  }

  // m_r = E binom(Z, r).
  double factorial_moment(int r) const {
    if (r < 0) throw ValidationError("factorial moment order must be nonnegative");
    if (r == 0) return 1.0;
    KahanSum acc;
    for (std::size_t k = static_cast<std::size_t>(r); k < pmf_.size(); ++k) {
      if (pmf_[k] != 0.0) acc.add(pmf_[k] * binom(static_cast<std::int64_t>(k), r));
    }
    return acc.value();
  }

  // Largest moment order whose value is unaffected by tail truncation at the
  // working accuracy of the coefficient machinery.
  int max_exact_moment() const { return max_exact_moment_; }

  // Smallest n with P(Z <= n) > u.  Inverse-CDF draw for u in [0,1).
  int sample(double u) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(it - cdf_.begin());
  }

  bool operator==(const OffspringDistribution& o) const { return pmf_ == o.pmf_; }

 private:
  enum class Kind { kFinite, kGeometric };

  static constexpr int kMaxSupport = 1 << 20;
  static constexpr int kMomentOrderCap = 20;
  static constexpr double kMassTolerance = 1e-12;
  static constexpr double kMomentTailTolerance = 1e-10;

  void validate() const {
    if (pmf_.size() < 2) throw ValidationError("offspring pmf is empty");
    if (pmf_[0] != 0.0) throw ValidationError("offspring laws with mass at zero are not supported");
    KahanSum mass;
    for (double w : pmf_) {
      if (!(w >= 0.0) || w > 1.0) throw ValidationError("pmf probabilities must lie in [0,1]");
      mass.add(w);
    }
    if (std::abs(mass.value() - 1.0) > kMassTolerance)
      throw ValidationError("pmf probabilities must sum to 1");
  }

  void finish() {
    KahanSum m;
    for (std::size_t k = 1; k < pmf_.size(); ++k) m.add(pmf_[k] * static_cast<double>(k));
    mu_ = m.value();
    if (!(mu_ > 1.0)) throw ValidationError("offspring mean must exceed 1 (supercritical)");

    cdf_.resize(pmf_.size());
    double run = 0.0;
    for (std::size_t k = 0; k < pmf_.size(); ++k) {
      run += pmf_[k];
      cdf_[k] = run;
    }
    cdf_.back() = 1.0;

    degenerate_degree_ = 0;
    int atoms = 0;
    int last = 0;
    for (std::size_t k = 1; k < pmf_.size(); ++k) {
      if (pmf_[k] != 0.0) {
        ++atoms;
        last = static_cast<int>(k);
      }
    }
    if (atoms == 1) degenerate_degree_ = last;

    max_exact_moment_ = kMomentOrderCap;
    if (kind_ == Kind::kGeometric) {
      // Compare each truncated moment with the closed form of the full law,
      // m_r = q^(r-1) / (1-q)^r, and trust orders whose relative truncation
      // error stays below the coefficient tolerance.
      for (int r = 1; r <= kMomentOrderCap; ++r) {
        double full = std::pow(q_, r - 1) / std::pow(1.0 - q_, r);
        double rel = std::abs(factorial_moment(r) - full) / full;
        if (rel > kMomentTailTolerance) {
          max_exact_moment_ = r - 1;
          break;
        }
      }
    }
  }

  Kind kind_ = Kind::kFinite;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
  double mu_ = 0.0;
  double q_ = 0.0;
  int truncate_ = 0;
  int degenerate_degree_ = 0;
  int max_exact_moment_ = 0;
};

}  // namespace gwperc
