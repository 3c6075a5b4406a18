#pragma once

// Merge forest over height-ranked voxels.
//
// Voxels are visited from the highest to the lowest. Each visited voxel is
// united with the components of its already-visited neighbors; when it
// swallows a component, the node that was that component's forest root
// records the current voxel as the node that absorbed it. Following
// absorbed_by from any node therefore walks through every rank at which the
// node's cluster grows, ending at the root of its final component.
//
// Ranks are zero-based throughout: rank 0 is the highest voxel.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "etfce/volume.hpp"

namespace etfce {

using Rank = std::int32_t;
inline constexpr Rank kSelf = -1;

struct MergeForest {
  RankOrder order;
  /// Rank of the node that absorbed this node's subtree, or kSelf for final roots.
  std::vector<Rank> absorbed_by;
  /// Size of the component containing the node among voxels of height >= its own.
  std::vector<std::int64_t> extent_at_own_height;

  std::size_t size() const { return order.size(); }
  double height(Rank r) const { return order.heights[r]; }
  Voxel voxel(Rank r) const { return order.order[r]; }
  bool is_root(Rank r) const { return absorbed_by[r] == kSelf; }
  double h0() const { return order.h0; }

  /// Number of ranks whose height is >= threshold.
  std::size_t count_at_or_above(double threshold) const {
    const auto& h = order.heights;
    return static_cast<std::size_t>(
        std::partition_point(h.begin(), h.end(), [&](double x) { return x >= threshold; }) -
        h.begin());
  }
};

/// Builds merge forests, reusing union-find scratch space across calls.
class ForestBuilder {
 public:
  void build(const RankOrder& order, const Adjacency& adjacency, MergeForest& out) {
    out.order = order;
    build_impl(adjacency, out);
  }

  void build(RankOrder&& order, const Adjacency& adjacency, MergeForest& out) {
    out.order = std::move(order);
    build_impl(adjacency, out);
  }

 private:
  // Union-find runs over ranks rather than voxels: nodes are created in rank
  // order, so they are filled front to back. Ranks are looked up on the
  // padded grid, where cells outside the mask or the grid hold kSelf.
  void build_impl(const Adjacency& adjacency, MergeForest& out) {
    const auto& ids = out.order.order;
    const auto& heights = out.order.heights;
    const std::size_t n = ids.size();
    rank_at_.assign(static_cast<std::size_t>(adjacency.padded_size()), kSelf);
    nodes_.resize(n);
    cell_.resize(n);
    out.absorbed_by.assign(n, kSelf);
    out.extent_at_own_height.assign(n, 0);

    for (std::size_t r = 0; r < n; ++r) {
      if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= adjacency.size())
        throw StructuralError("rank order does not belong to this mask");
      cell_[r] = adjacency.padded_linear(ids[r]);
      rank_at_[cell_[r]] = static_cast<Rank>(r);
    }
    const auto offsets = adjacency.padded_offsets();

    std::size_t group_begin = 0;
    while (group_begin < n) {
      std::size_t group_end = group_begin + 1;
      while (group_end < n && heights[group_end] == heights[group_begin]) ++group_end;

      for (std::size_t r = group_begin; r < group_end; ++r) {
        const Rank i = static_cast<Rank>(r);
        nodes_[i] = Node{-1, i};
        Rank root = i;
        const std::int32_t base = cell_[r];
        for (const std::int32_t off : offsets) {
          const Rank rw = rank_at_[base + off];
          // kSelf wraps to the largest value, so one compare skips it too.
          if (static_cast<std::uint32_t>(rw) >= static_cast<std::uint32_t>(i)) continue;
          const Rank a = find(rw);
          if (a == root) continue;
          out.absorbed_by[nodes_[a].top] = i;
          // Roots hold minus their size, so the larger one is the more negative.
          const Rank big = nodes_[a].link <= nodes_[root].link ? a : root;
          const Rank small = big == a ? root : a;
          nodes_[big].link += nodes_[small].link;
          nodes_[small].link = big;
          nodes_[big].top = i;
          root = big;
        }
      }
      // Tie members share one component size at their common height.
      for (std::size_t r = group_begin; r < group_end; ++r)
        out.extent_at_own_height[r] = -nodes_[find(static_cast<Rank>(r))].link;
      group_begin = group_end;
    }
  }

  Rank find(Rank v) {
    Rank root = v;
    while (nodes_[root].link >= 0) root = nodes_[root].link;
    while (v != root) {
      const Rank next = nodes_[v].link;
      nodes_[v].link = root;
      v = next;
    }
    return root;
  }

  struct Node {
    std::int32_t link;  // parent rank, or minus the component size at a root
    Rank top;           // latest rank merged into this component
  };

  std::vector<Rank> rank_at_;         // by padded grid index
  std::vector<std::int32_t> cell_;  // padded grid index by rank
  std::vector<Node> nodes_;         // by rank
};

inline MergeForest build_forest(const RankOrder& order, const Adjacency& adjacency) {
  MergeForest out;
  ForestBuilder().build(order, adjacency, out);
  return out;
}

inline MergeForest build_forest(const RankOrder& order, const Mask& mask, Connectivity conn) {
  return build_forest(order, Adjacency(mask, conn));
}

/// The node itself followed by its absorbed_by chain up to the final root.
inline std::vector<Rank> phi_set(const MergeForest& forest, Rank v) {
  if (v < 0 || static_cast<std::size_t>(v) >= forest.size())
    throw StructuralError("rank " + std::to_string(v) + " out of range");
  std::vector<Rank> chain{v};
  while (forest.absorbed_by[chain.back()] != kSelf) chain.push_back(forest.absorbed_by[chain.back()]);
  return chain;
}

/// Edges (absorber, absorbed root) in the orientation they are added during construction.
inline std::vector<std::pair<Rank, Rank>> construction_edges(const MergeForest& forest) {
  std::vector<std::pair<Rank, Rank>> edges;
  for (std::size_t r = 0; r < forest.size(); ++r)
    if (forest.absorbed_by[r] != kSelf) edges.emplace_back(forest.absorbed_by[r], static_cast<Rank>(r));
  std::sort(edges.begin(), edges.end());
  return edges;
}

enum class MassConvention {
  raw,     // sum of statistic values over members
  excess,  // sum of (value - cdt) over members
};

struct Cluster {
  Rank root = kSelf;
  std::int64_t extent = 0;
  double mass = 0.0;
  std::vector<Voxel> members;  // dense indices, ascending
};

struct ClusterTable {
  double cdt = 0.0;
  std::vector<Cluster> clusters;  // ordered by smallest member index
};

/// Per-rank component labels at a fixed threshold, without member lists.
struct ClusterSummary {
  std::size_t supra_count = 0;  // ranks 0..supra_count-1 have height >= cdt
  std::vector<Rank> root;       // cluster root for each supra-threshold rank
  std::vector<Rank> roots;      // distinct roots, ascending
  std::vector<double> mass;     // per rank; meaningful at roots only
  std::int64_t max_extent = 0;
  double max_mass = 0.0;
};

inline void summarize_clusters(const MergeForest& forest, double cdt, MassConvention convention,
                               ClusterSummary& out) {
  if (!(cdt > forest.h0()))
    throw StructuralError("cluster-defining threshold must exceed h0");
  const std::size_t k = forest.count_at_or_above(cdt);
  out.supra_count = k;
  out.root.resize(k);
  out.mass.assign(k, 0.0);
  out.roots.clear();
  out.max_extent = 0;
  out.max_mass = 0.0;
  for (std::size_t r = k; r-- > 0;) {
    const Rank up = forest.absorbed_by[r];
    if (up == kSelf || static_cast<std::size_t>(up) >= k) {
      out.root[r] = static_cast<Rank>(r);
      out.roots.push_back(static_cast<Rank>(r));
    } else {
      out.root[r] = out.root[up];
    }
    const double h = forest.height(static_cast<Rank>(r));
    out.mass[out.root[r]] += convention == MassConvention::raw ? h : h - cdt;
  }
  std::reverse(out.roots.begin(), out.roots.end());
  for (const Rank r : out.roots) {
    out.max_extent = std::max(out.max_extent, forest.extent_at_own_height[r]);
    out.max_mass = std::max(out.max_mass, out.mass[r]);
  }
}

inline ClusterSummary summarize_clusters(const MergeForest& forest, double cdt,
                                         MassConvention convention = MassConvention::raw) {
  ClusterSummary out;
  summarize_clusters(forest, cdt, convention, out);
  return out;
}

/// Connected components of {v : h_v >= cdt}, read off the forest.
inline ClusterTable clusters_at_threshold(const MergeForest& forest, double cdt,
                                          MassConvention convention = MassConvention::raw) {
  const ClusterSummary summary = summarize_clusters(forest, cdt, convention);
  ClusterTable table;
  table.cdt = cdt;
  std::vector<std::size_t> slot(summary.supra_count, 0);
  table.clusters.resize(summary.roots.size());
  for (std::size_t c = 0; c < summary.roots.size(); ++c) {
    const Rank root = summary.roots[c];
    slot[root] = c;
    table.clusters[c].root = root;
    table.clusters[c].extent = forest.extent_at_own_height[root];
    table.clusters[c].mass = summary.mass[root];
  }
  for (std::size_t r = 0; r < summary.supra_count; ++r)
    table.clusters[slot[summary.root[r]]].members.push_back(forest.voxel(static_cast<Rank>(r)));
  for (auto& c : table.clusters) std::sort(c.members.begin(), c.members.end());
  std::sort(table.clusters.begin(), table.clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.members.front() < b.members.front(); });
  return table;
}

}  // namespace etfce
