#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <set>

#include "etfce/forest.hpp"
#include "etfce/oracle.hpp"
#include "support.hpp"

using namespace etfce;
using namespace etfce::testing;

namespace {

MergeForest worked_grid_forest() {
  const auto map = worked_grid_map();
  return build_forest(rank_order(map), map.mask(), Connectivity::k2D4);
}

// Member sets of a cluster table, for partition comparisons.
std::set<std::vector<Voxel>> partition(const ClusterTable& t) {
  std::set<std::vector<Voxel>> out;
  for (const auto& c : t.clusters) out.insert(c.members);
  return out;
}

}  // namespace

// Ranks in the tests below are the 1-based ranks of the worked example; the
// library is 0-based, hence the -1 / +1 shifts.
TEST(Forest, Grid3x3AbsorbedBy) {
  const auto forest = worked_grid_forest();
  const std::vector<Rank> one_based = {5, 4, 6, 5, 7, 7, 8, 9, kSelf};
  for (Rank r = 0; r < 9; ++r)
    EXPECT_EQ(forest.absorbed_by[r], one_based[r] == kSelf ? kSelf : one_based[r] - 1) << "rank " << r + 1;
}

TEST(Forest, Grid3x3Extents) {
  const auto forest = worked_grid_forest();
  EXPECT_EQ(forest.extent_at_own_height, (std::vector<std::int64_t>{1, 1, 1, 2, 4, 2, 7, 8, 9}));
}

TEST(Forest, Grid3x3ExtentsMatchLabeling) {
  const auto map = worked_grid_map();
  const auto forest = worked_grid_forest();
  for (Rank r = 0; r < 9; ++r) {
    int count = 0;
    const auto label = oracle::flood_labels(map.values(), map.mask(), Connectivity::k2D4, forest.height(r), &count);
    const int mine = label[forest.voxel(r)];
    EXPECT_EQ(std::count(label.begin(), label.end(), mine), forest.extent_at_own_height[r]);
  }
}

TEST(Forest, Node7MergesSubtreesOf5And6) {
  const auto edges = construction_edges(worked_grid_forest());
  const std::vector<std::pair<Rank, Rank>> expected = {{3, 1}, {4, 0}, {4, 3}, {5, 2},
                                                        {6, 4}, {6, 5}, {7, 6}, {8, 7}};
  EXPECT_EQ(edges, expected);
}

TEST(Forest, PhiSets) {
  const auto forest = worked_grid_forest();
  EXPECT_EQ(phi_set(forest, 3), (std::vector<Rank>{3, 4, 6, 7, 8}));
  EXPECT_EQ(phi_set(forest, 8), (std::vector<Rank>{8}));
  EXPECT_EQ(phi_set(forest, 0), (std::vector<Rank>{0, 4, 6, 7, 8}));
  EXPECT_THROW(phi_set(forest, 9), StructuralError);
}

TEST(Forest, Grid3x3BuildTime) {
  const auto map = worked_grid_map();
  const Adjacency adj(map.mask(), Connectivity::k2D4);
  const auto start = std::chrono::steady_clock::now();
  const auto forest = build_forest(rank_order(map), adj);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(forest.size(), 9u);
  EXPECT_LT(ms, 1.0);
}

TEST(Clusters, Grid3x3Thresholds) {
  const auto forest = worked_grid_forest();
  const auto t35 = clusters_at_threshold(forest, 3.5);
  ASSERT_EQ(t35.clusters.size(), 2u);
  EXPECT_EQ(t35.clusters[0].members, (std::vector<Voxel>{A, B, C, F}));
  EXPECT_EQ(t35.clusters[0].extent, 4);
  EXPECT_EQ(t35.clusters[1].members, (std::vector<Voxel>{G, H}));
  EXPECT_EQ(t35.clusters[1].extent, 2);
  EXPECT_DOUBLE_EQ(t35.clusters[0].mass, 12.5 + 4.1 + 7.3 + 10.2);
  EXPECT_TRUE(clusters_at_threshold(forest, 13.0).clusters.empty());
  const auto t1 = clusters_at_threshold(forest, 1.0);
  ASSERT_EQ(t1.clusters.size(), 1u);
  EXPECT_EQ(t1.clusters[0].extent, 9);
}

TEST(Clusters, ClosedThreshold) {
  // h >= cdt: a cdt equal to a voxel height includes that voxel.
  const auto t = clusters_at_threshold(worked_grid_forest(), 3.5);
  EXPECT_TRUE(std::binary_search(t.clusters[1].members.begin(), t.clusters[1].members.end(), H));
}

TEST(Clusters, ExcessMass) {
  const auto t = clusters_at_threshold(worked_grid_forest(), 3.5, MassConvention::excess);
  EXPECT_NEAR(t.clusters[1].mass, (9.8 - 3.5) + (3.5 - 3.5), 1e-12);
}

TEST(Clusters, ThresholdMustExceedH0) {
  EXPECT_THROW(clusters_at_threshold(worked_grid_forest(), 0.0), StructuralError);
}

TEST(Forest, TieGroupExtentsFinalizedTogether) {
  // A plateau of three equal voxels joined only through each other.
  const StatisticMap map(full_mask(5, 1, 1), {1.0, 2.0, 2.0, 2.0, 1.0});
  const auto forest = build_forest(rank_order(map), map.mask(), Connectivity::k2D4);
  for (Rank r = 0; r < 3; ++r) EXPECT_EQ(forest.extent_at_own_height[r], 3);
  EXPECT_EQ(forest.extent_at_own_height[3], 5);
  EXPECT_EQ(forest.extent_at_own_height[4], 5);
}

TEST(Forest, StructuralInvariantsOnRandomMaps) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto mask = random_mask(GridShape(7, 6, 5), seed, 0.8);
    const StatisticMap map(mask, tied_values(mask->in_mask_count(), seed + 100, -1.0, 4.0, 9));
    for (auto conn : {Connectivity::k3D6, Connectivity::k3D18, Connectivity::k3D26}) {
      const auto forest = build_forest(rank_order(map), *mask, conn);
      std::set<std::vector<Voxel>> trees;
      std::vector<std::vector<Voxel>> by_root(forest.size());
      for (Rank r = 0; r < static_cast<Rank>(forest.size()); ++r) {
        const auto chain = phi_set(forest, r);
        ASSERT_LE(chain.size(), forest.size());
        for (std::size_t k = 1; k < chain.size(); ++k) {
          EXPECT_GT(chain[k], chain[k - 1]);
          EXPECT_LE(forest.height(chain[k]), forest.height(chain[k - 1]));
          EXPECT_GE(forest.extent_at_own_height[chain[k]], forest.extent_at_own_height[chain[k - 1]]);
        }
        EXPECT_GE(forest.extent_at_own_height[r], 1);
        by_root[chain.back()].push_back(forest.voxel(r));
      }
      for (auto& t : by_root)
        if (!t.empty()) {
          std::sort(t.begin(), t.end());
          trees.insert(t);
        }
      const double eps = 1e-300;
      EXPECT_EQ(trees, partition(oracle::floodfill_clusters(map, conn, eps)));
    }
  }
}

TEST(Clusters, MatchFloodFill) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mask = random_mask(GridShape(6, 6, 6), seed, 0.9);
    const StatisticMap map(mask, uniform_values(mask->in_mask_count(), seed, -2.0, 5.0));
    for (auto conn : {Connectivity::k3D6, Connectivity::k3D18, Connectivity::k3D26}) {
      const auto forest = build_forest(rank_order(map), *mask, conn);
      for (double cdt : {0.5, 1.0, 2.0, 3.1, 4.5}) {
        const auto mine = clusters_at_threshold(forest, cdt);
        const auto ref = oracle::floodfill_clusters(map, conn, cdt);
        ASSERT_EQ(mine.clusters.size(), ref.clusters.size());
        for (std::size_t c = 0; c < ref.clusters.size(); ++c) {
          EXPECT_EQ(mine.clusters[c].members, ref.clusters[c].members);
          EXPECT_EQ(mine.clusters[c].extent, ref.clusters[c].extent);
          EXPECT_NEAR(mine.clusters[c].mass, ref.clusters[c].mass, 1e-9);
        }
      }
    }
  }
}

TEST(Clusters, MonotoneNesting) {
  const auto mask = full_mask(8, 8, 4);
  const StatisticMap map(mask, uniform_values(mask->in_mask_count(), 77, -1.0, 5.0));
  const auto forest = build_forest(rank_order(map), *mask, Connectivity::k3D6);
  const double levels[] = {4.0, 3.0, 2.0, 1.0, 0.5};
  for (int i = 0; i + 1 < 5; ++i) {
    const auto hi = clusters_at_threshold(forest, levels[i]);
    const auto lo = clusters_at_threshold(forest, levels[i + 1]);
    for (const auto& c : hi.clusters) {
      int containing = 0;
      for (const auto& d : lo.clusters)
        if (std::includes(d.members.begin(), d.members.end(), c.members.begin(), c.members.end())) ++containing;
      EXPECT_EQ(containing, 1);
    }
  }
}

TEST(Forest, BuilderReuseGivesSameForest) {
  ForestBuilder builder;
  MergeForest a, b;
  const auto mask = full_mask(6, 6, 6);
  const StatisticMap big(mask, uniform_values(216, 1, -1.0, 3.0));
  const StatisticMap small(mask, uniform_values(216, 2, -1.0, 3.0));
  const Adjacency adj(*mask, Connectivity::k3D26);
  builder.build(rank_order(big), adj, a);
  builder.build(rank_order(small), adj, a);
  ForestBuilder().build(rank_order(small), adj, b);
  EXPECT_EQ(a.absorbed_by, b.absorbed_by);
  EXPECT_EQ(a.extent_at_own_height, b.extent_at_own_height);
}
