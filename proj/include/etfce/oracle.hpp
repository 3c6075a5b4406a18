#pragma once

// Brute-force reference implementations. Slow on purpose and independent of
// the merge forest: clusters come from breadth-first flood fill, TFCE from
// quadrature or level-by-level decomposition, p-values from full
// enumeration of sign patterns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <vector>

#include "etfce/enhance.hpp"
#include "etfce/error.hpp"
#include "etfce/forest.hpp"
#include "etfce/inference.hpp"
#include "etfce/volume.hpp"

namespace etfce::oracle {

struct OracleConfig {
  std::int64_t riemann_steps = 1'000'000;
  double tolerance = 1e-4;

  void validate() const {
    if (riemann_steps < 10) throw StructuralError("riemann_steps must be >= 10");
    if (!(tolerance > 0.0)) throw StructuralError("tolerance must be positive");
  }
};

inline constexpr std::size_t kMaxRiemannVoxels = 16 * 16 * 16;
inline constexpr int kMaxEnumeratedSubjects = 12;

/// Component label per voxel of {v : h_v >= cdt}; -1 elsewhere. Labels are
/// numbered in order of each component's smallest member.
inline std::vector<int> flood_labels(std::span<const double> values, const Mask& mask, Connectivity conn,
                                     double cdt, int* count = nullptr) {
  check_connectivity(mask.shape(), conn);
  const auto offsets = neighbor_offsets(conn);
  const auto& shape = mask.shape();
  std::vector<int> label(values.size(), -1);
  int next = 0;
  std::deque<Voxel> queue;
  for (std::size_t seed = 0; seed < values.size(); ++seed) {
    if (label[seed] != -1 || !(values[seed] >= cdt)) continue;
    label[seed] = next;
    queue.push_back(static_cast<Voxel>(seed));
    while (!queue.empty()) {
      const Voxel v = queue.front();
      queue.pop_front();
      const auto [x, y, z] = mask.coords(v);
      for (const auto& d : offsets) {
        if (!shape.contains(x + d[0], y + d[1], z + d[2])) continue;
        const Voxel w = mask.to_dense(shape.linear(x + d[0], y + d[1], z + d[2]));
        if (w == kNoVoxel || label[w] != -1 || !(values[w] >= cdt)) continue;
        label[w] = next;
        queue.push_back(w);
      }
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

/// Clusters of {v : h_v >= cdt} by breadth-first search, ordered by smallest member.
inline ClusterTable floodfill_clusters(const StatisticMap& map, Connectivity conn, double cdt) {
  int count = 0;
  const auto label = flood_labels(map.values(), map.mask(), conn, cdt, &count);
  ClusterTable table;
  table.cdt = cdt;
  table.clusters.resize(count);
  for (std::size_t v = 0; v < label.size(); ++v) {
    if (label[v] < 0) continue;
    auto& c = table.clusters[label[v]];
    c.members.push_back(static_cast<Voxel>(v));
    c.mass += map[static_cast<Voxel>(v)];
  }
  for (auto& c : table.clusters) c.extent = static_cast<std::int64_t>(c.members.size());
  return table;
}

namespace detail {

inline std::vector<double> distinct_levels_above(std::span<const double> values, double h0) {
  std::vector<double> levels;
  for (double v : values)
    if (v > h0) levels.push_back(v);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

inline std::vector<std::int64_t> component_sizes(const std::vector<int>& label, int count) {
  std::vector<std::int64_t> size(count, 0);
  for (int l : label)
    if (l >= 0) ++size[l];
  return size;
}

}  // namespace detail

/// Midpoint-rule quadrature of the TFCE integral on (h0, h_max].
///
/// Every step's midpoint m contributes e_v(m)^E m^H dh to each voxel with
/// h_v >= m. Steps whose midpoints fall between the same two voxel heights
/// see the same clusters, so their height weights are summed first and the
/// labeling is computed once per such run.
inline EnhancedMap riemann_tfce(const StatisticMap& map, Connectivity conn, const EnhanceParams& params,
                                const OracleConfig& cfg = {}) {
  params.validate();
  cfg.validate();
  if (map.size() > kMaxRiemannVoxels) throw BudgetError("riemann oracle is limited to 16^3 voxels");
  EnhancedMap out{map.mask_ptr(), std::vector<double>(map.size(), 0.0)};
  const double top = map.h_max();
  if (!(top > params.h0)) return out;
  const auto levels = detail::distinct_levels_above(map.values(), params.h0);
  const double dh = (top - params.h0) / static_cast<double>(cfg.riemann_steps);

  std::int64_t k = 0;
  for (double level : levels) {
    double weight = 0.0;
    for (; k < cfg.riemann_steps; ++k) {
      const double m = params.h0 + (static_cast<double>(k) + 0.5) * dh;
      if (m > level) break;
      weight += std::pow(m, params.H) * dh;
    }
    if (weight == 0.0) continue;
    int count = 0;
    const auto label = flood_labels(map.values(), map.mask(), conn, level, &count);
    const auto size = detail::component_sizes(label, count);
    for (std::size_t v = 0; v < label.size(); ++v)
      if (label[v] >= 0) out.scores[v] += std::pow(static_cast<double>(size[label[v]]), params.E) * weight;
  }
  return out;
}

/// Exact TFCE by flood filling at every distinct height and summing the
/// closed-form integral over each interval between consecutive heights.
inline EnhancedMap level_tfce(std::span<const double> values, std::shared_ptr<const Mask> mask,
                              Connectivity conn, const EnhanceParams& params) {
  params.validate();
  EnhancedMap out{mask, std::vector<double>(values.size(), 0.0)};
  const auto levels = detail::distinct_levels_above(values, params.h0);
  const double p = params.H + 1.0;
  double previous = params.h0;
  for (double level : levels) {
    int count = 0;
    const auto label = flood_labels(values, *mask, conn, level, &count);
    const auto size = detail::component_sizes(label, count);
    const double span = (std::pow(level, p) - std::pow(previous, p)) / p;
    for (std::size_t v = 0; v < label.size(); ++v)
      if (label[v] >= 0) out.scores[v] += std::pow(static_cast<double>(size[label[v]]), params.E) * span;
    previous = level;
  }
  return out;
}

/// One-sample t, computed voxel by voxel.
inline std::vector<double> plain_one_sample_t(const SubjectData& data, const std::vector<int>& signs) {
  const int n = data.n_subjects();
  std::vector<double> t(data.n_voxels());
  for (std::size_t v = 0; v < t.size(); ++v) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += signs[j] * data.row(j)[v];
    const double mean = sum / n;
    double ss = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = signs[j] * data.row(j)[v] - mean;
      ss += d * d;
    }
    const double se = std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
    if (se > 0.0)
      t[v] = mean / se;
    else
      t[v] = mean > 0.0 ? kTCap : (mean < 0.0 ? -kTCap : 0.0);
  }
  return t;
}

/// Positive-tail TFCE FWE p-values over all 2^n sign patterns:
/// p_v = #{patterns : max TFCE >= observed TFCE(v)} / 2^n.
inline PValueMap enumerate_sign_flips(const SubjectData& data, Connectivity conn, const EnhanceParams& params) {
  const int n = data.n_subjects();
  if (n > kMaxEnumeratedSubjects)
    throw BudgetError("sign-flip enumeration is limited to " + std::to_string(kMaxEnumeratedSubjects) +
                      " subjects");
  const std::int64_t patterns = std::int64_t{1} << n;
  std::vector<double> observed;
  std::vector<double> maxima;
  maxima.reserve(static_cast<std::size_t>(patterns));
  for (std::int64_t m = 0; m < patterns; ++m) {
    std::vector<int> signs(n);
    for (int j = 0; j < n; ++j) signs[j] = (m >> j) & 1 ? -1 : 1;
    const auto t = plain_one_sample_t(data, signs);
    const auto tfce = level_tfce(t, data.mask_ptr(), conn, params);
    maxima.push_back(tfce.max());
    if (m == 0) observed = tfce.scores;
  }
  PValueMap out{data.mask_ptr(), std::vector<double>(observed.size())};
  if (observed.empty()) return out;
  for (std::size_t v = 0; v < observed.size(); ++v) {
    std::int64_t hits = 0;
    for (double mx : maxima) hits += mx >= observed[v] ? 1 : 0;
    out.p[v] = static_cast<double>(hits) / static_cast<double>(patterns);
  }
  return out;
}

}  // namespace etfce::oracle
