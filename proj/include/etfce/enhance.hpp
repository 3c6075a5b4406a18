#pragma once

// Threshold-free cluster enhancement evaluated exactly over a merge forest,
// the uniform-threshold approximation, and the wider family of
// height/extent integrals that share the same structure.
//
//   score(v) = integral from h0 to h_v of g(e_v(h)) f(h) dh
//
// e_v(h) is constant between consecutive ranks on v's absorbed_by chain, so
// the integral collapses to a sum of antiderivative differences that can be
// accumulated from the roots downwards in one sweep.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "etfce/forest.hpp"
#include "etfce/volume.hpp"

namespace etfce {

struct EnhanceParams {
  double E = 0.5;  // extent exponent
  double H = 2.0;  // height exponent
  double h0 = 0.0;

  void validate() const {
    if (!(E >= 0.0) || !std::isfinite(E)) throw StructuralError("E must be finite and >= 0");
    if (!(H >= 0.0) || !std::isfinite(H)) throw StructuralError("H must be finite and >= 0");
    if (!(h0 >= 0.0) || !std::isfinite(h0)) throw StructuralError("h0 must be finite and >= 0");
  }
};

/// Uniform thresholds tau_i = i * h_max / n, i = 1..n.
struct DiscretizationScheme {
  int n = 100;
};

struct HeightWeight {
  enum class Kind { power, one, dirac_at_own_height };
  Kind kind = Kind::power;
  double exponent = 2.0;

  static HeightWeight power(double h) { return {Kind::power, h}; }
  static HeightWeight one() { return {Kind::one, 0.0}; }
  static HeightWeight dirac_at_own_height() { return {Kind::dirac_at_own_height, 0.0}; }
};

struct ExtentWeight {
  enum class Kind { power, identity, indicator_positive };
  Kind kind = Kind::power;
  double exponent = 0.5;

  static ExtentWeight power(double e) { return {Kind::power, e}; }
  static ExtentWeight identity() { return {Kind::identity, 1.0}; }
  static ExtentWeight indicator_positive() { return {Kind::indicator_positive, 0.0}; }
};

struct GeneralizedStatistic {
  HeightWeight f;
  ExtentWeight g;

  static GeneralizedStatistic tfce(double E, double H) {
    return {HeightWeight::power(H), ExtentWeight::power(E)};
  }
  static GeneralizedStatistic peak_height() {
    return {HeightWeight::one(), ExtentWeight::indicator_positive()};
  }
  static GeneralizedStatistic cluster_extent() {
    return {HeightWeight::dirac_at_own_height(), ExtentWeight::identity()};
  }
  static GeneralizedStatistic cluster_mass() {
    return {HeightWeight::one(), ExtentWeight::identity()};
  }
};

/// Non-negative scores on a mask.
struct EnhancedMap {
  std::shared_ptr<const Mask> mask;
  std::vector<double> scores;

  double max() const {
    double m = 0.0;
    for (double s : scores) m = s > m ? s : m;
    return m;
  }
};

namespace detail {

inline double raise(double base, double exponent) {
  if (exponent == 3.0) return base * base * base;
  if (exponent == 2.0) return base * base;
  if (exponent == 1.0) return base;
  if (exponent == 0.0) return 1.0;
  if (exponent == 0.5) return std::sqrt(base);
  return std::pow(base, exponent);
}

inline double extent_weight(const ExtentWeight& g, std::int64_t extent) {
  const double e = static_cast<double>(extent);
  switch (g.kind) {
    case ExtentWeight::Kind::power: return raise(e, g.exponent);
    case ExtentWeight::Kind::identity: return e;
    case ExtentWeight::Kind::indicator_positive: return extent > 0 ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace detail

/// Writes per-rank scores of the generalized statistic into `by_rank`.
inline void generalized_by_rank(const MergeForest& forest, const GeneralizedStatistic& stat,
                                std::vector<double>& by_rank) {
  const std::size_t n = forest.size();
  by_rank.assign(n, 0.0);
  if (stat.f.kind == HeightWeight::Kind::dirac_at_own_height) {
    for (std::size_t r = 0; r < n; ++r)
      by_rank[r] = detail::extent_weight(stat.g, forest.extent_at_own_height[r]);
    return;
  }
  if (stat.f.kind == HeightWeight::Kind::power && !(stat.f.exponent >= 0.0))
    throw StructuralError("height exponent must be >= 0");
  if (stat.g.kind == ExtentWeight::Kind::power && !(stat.g.exponent >= 0.0))
    throw StructuralError("extent exponent must be >= 0");

  // Antiderivative of f is scale * h^p.
  const double p = stat.f.kind == HeightWeight::Kind::power ? stat.f.exponent + 1.0 : 1.0;
  const double scale = 1.0 / p;
  const double base = detail::raise(forest.h0(), p);
  for (std::size_t r = n; r-- > 0;) {
    const Rank up = forest.absorbed_by[r];
    const double lower = up == kSelf ? base : detail::raise(forest.height(up), p);
    const double g = detail::extent_weight(stat.g, forest.extent_at_own_height[r]);
    const double delta = scale * g * (detail::raise(forest.height(static_cast<Rank>(r)), p) - lower);
    by_rank[r] = up == kSelf ? delta : by_rank[up] + delta;
  }
}

/// Scatters per-rank scores into voxel space; voxels outside the forest get 0.
inline EnhancedMap scatter_scores(const MergeForest& forest, const std::vector<double>& by_rank,
                                  std::shared_ptr<const Mask> mask) {
  EnhancedMap out{std::move(mask), {}};
  out.scores.assign(out.mask->in_mask_count(), 0.0);
  for (std::size_t r = 0; r < forest.size(); ++r) out.scores[forest.voxel(static_cast<Rank>(r))] = by_rank[r];
  return out;
}

inline EnhancedMap generalized_statistic(const MergeForest& forest, const GeneralizedStatistic& stat,
                                         std::shared_ptr<const Mask> mask) {
  std::vector<double> by_rank;
  generalized_by_rank(forest, stat, by_rank);
  return scatter_scores(forest, by_rank, std::move(mask));
}

/// Exact TFCE over the forest.
inline EnhancedMap exact_tfce(const MergeForest& forest, const EnhanceParams& params,
                              std::shared_ptr<const Mask> mask) {
  params.validate();
  if (forest.h0() != params.h0)
    throw StructuralError("forest was built with a different h0 than the enhancement parameters");
  return generalized_statistic(forest, GeneralizedStatistic::tfce(params.E, params.H), std::move(mask));
}

/// Convenience: rank, build and enhance a statistic map in one call.
inline EnhancedMap exact_tfce(const StatisticMap& map, const Adjacency& adjacency,
                              const EnhanceParams& params) {
  params.validate();
  return exact_tfce(build_forest(rank_order(map, params.h0), adjacency), params, map.mask_ptr());
}

/// Per-rank uniform-threshold approximation, summing g(e_v(tau)) tau^H dtau.
/// Thresholds at or below h0 are skipped.
inline void discretized_by_rank(const MergeForest& forest, double h_max, const EnhanceParams& params,
                                const DiscretizationScheme& scheme, std::vector<double>& by_rank,
                                std::vector<Rank>& label) {
  if (scheme.n < 1) throw StructuralError("discretization needs at least one threshold");
  const std::size_t n = forest.size();
  by_rank.assign(n, 0.0);
  if (!(h_max > 0.0) || n == 0) return;
  const double step = h_max / scheme.n;
  label.resize(n);
  for (int i = scheme.n; i >= 1; --i) {
    const double tau = i == scheme.n ? h_max : i * step;  // n * (h_max / n) may round past h_max
    if (tau <= params.h0) break;
    const std::size_t k = forest.count_at_or_above(tau);
    const double weight = detail::raise(tau, params.H) * step;
    for (std::size_t r = k; r-- > 0;) {
      const Rank up = forest.absorbed_by[r];
      label[r] = (up == kSelf || static_cast<std::size_t>(up) >= k) ? static_cast<Rank>(r) : label[up];
      by_rank[r] += detail::raise(static_cast<double>(forest.extent_at_own_height[label[r]]), params.E) * weight;
    }
  }
}

inline EnhancedMap discretized_tfce(const StatisticMap& map, const Adjacency& adjacency,
                                    const EnhanceParams& params, const DiscretizationScheme& scheme) {
  params.validate();
  if (scheme.n < 1) throw StructuralError("discretization needs at least one threshold");
  const MergeForest forest = build_forest(rank_order(map, params.h0), adjacency);
  std::vector<double> by_rank;
  std::vector<Rank> label;
  discretized_by_rank(forest, map.h_max(), params, scheme, by_rank, label);
  return scatter_scores(forest, by_rank, map.mask_ptr());
}

inline EnhancedMap discretized_tfce(const StatisticMap& map, Connectivity conn,
                                    const EnhanceParams& params, const DiscretizationScheme& scheme) {
  return discretized_tfce(map, Adjacency(map.mask(), conn), params, scheme);
}

inline EnhancedMap exact_tfce(const StatisticMap& map, Connectivity conn, const EnhanceParams& params) {
  return exact_tfce(map, Adjacency(map.mask(), conn), params);
}

}  // namespace etfce
