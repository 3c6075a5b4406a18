#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "etfce/volume.hpp"
#include "support.hpp"

using namespace etfce;
using namespace etfce::testing;

TEST(Mask, Counts) {
  EXPECT_EQ(Mask::full(GridShape(3, 3, 1)).in_mask_count(), 9u);
  EXPECT_EQ(build_mask(GridShape(2, 2, 1), std::vector<bool>(4, false)).in_mask_count(), 0u);
  std::vector<bool> corner(9, true);
  corner[0] = false;
  EXPECT_EQ(build_mask(GridShape(3, 3, 1), corner).in_mask_count(), 8u);
}

TEST(Mask, LengthMismatchThrows) {
  EXPECT_THROW(build_mask(GridShape(3, 3, 1), std::vector<bool>(8, true)), StructuralError);
  EXPECT_THROW(GridShape(0, 3, 1), StructuralError);
}

TEST(Mask, RoundTripDenseToCoords) {
  const GridShape shape(5, 4, 3);
  const auto mask = random_mask(shape, 11, 0.6);
  for (std::size_t v = 0; v < mask->in_mask_count(); ++v) {
    const auto [x, y, z] = mask->coords(static_cast<Voxel>(v));
    EXPECT_EQ(mask->to_dense(shape.linear(x, y, z)), static_cast<Voxel>(v));
  }
}

TEST(Neighbors, InteriorAndBoundaryDegrees) {
  const Mask grid2 = Mask::full(GridShape(3, 3, 1));
  EXPECT_EQ(neighbors(grid2, Connectivity::k2D4, 4).size(), 4u);
  EXPECT_EQ(neighbors(grid2, Connectivity::k2D4, 0).size(), 2u);
  EXPECT_EQ(neighbors(grid2, Connectivity::k2D8, 4).size(), 8u);
  const Mask grid3 = Mask::full(GridShape(3, 3, 3));
  EXPECT_EQ(neighbors(grid3, Connectivity::k3D26, 13).size(), 26u);
  EXPECT_EQ(neighbors(grid3, Connectivity::k3D18, 13).size(), 18u);
  EXPECT_EQ(neighbors(grid3, Connectivity::k3D6, 13).size(), 6u);
}

TEST(Neighbors, SortedAndInMaskOnly) {
  std::vector<bool> m(9, true);
  m[1] = false;
  const Mask mask = build_mask(GridShape(3, 3, 1), m);
  const auto n = neighbors(mask, Connectivity::k2D8, 3);  // grid voxel 4, the centre
  EXPECT_EQ(n.size(), 7u);
  EXPECT_TRUE(std::is_sorted(n.begin(), n.end()));
}

TEST(Neighbors, OutOfRangeThrows) {
  const Mask mask = Mask::full(GridShape(3, 3, 1));
  EXPECT_THROW(neighbors(mask, Connectivity::k2D4, 9), StructuralError);
  EXPECT_THROW(neighbors(mask, Connectivity::k2D4, -1), StructuralError);
}

TEST(Neighbors, PlanarConnectivityNeedsFlatGrid) {
  const Mask mask = Mask::full(GridShape(3, 3, 2));
  EXPECT_THROW(neighbors(mask, Connectivity::k2D4, 0), StructuralError);
}

TEST(Neighbors, SymmetricForEveryConnectivity) {
  for (auto conn : {Connectivity::k3D6, Connectivity::k3D18, Connectivity::k3D26}) {
    const auto mask = random_mask(GridShape(5, 4, 4), 3, 0.7);
    for (std::size_t v = 0; v < mask->in_mask_count(); ++v)
      for (Voxel w : neighbors(*mask, conn, static_cast<Voxel>(v))) {
        const auto back = neighbors(*mask, conn, w);
        EXPECT_TRUE(std::binary_search(back.begin(), back.end(), static_cast<Voxel>(v)));
      }
  }
  for (auto conn : {Connectivity::k2D4, Connectivity::k2D8}) {
    const auto mask = random_mask(GridShape(7, 6, 1), 4, 0.7);
    for (std::size_t v = 0; v < mask->in_mask_count(); ++v)
      for (Voxel w : neighbors(*mask, conn, static_cast<Voxel>(v))) {
        const auto back = neighbors(*mask, conn, w);
        EXPECT_TRUE(std::binary_search(back.begin(), back.end(), static_cast<Voxel>(v)));
      }
  }
}

TEST(Adjacency, MatchesNeighbors) {
  const auto mask = random_mask(GridShape(6, 5, 4), 9, 0.8);
  const Adjacency adj(*mask, Connectivity::k3D18);
  for (std::size_t v = 0; v < mask->in_mask_count(); ++v) {
    auto a = adj.neighbors_of(static_cast<Voxel>(v));
    std::sort(a.begin(), a.end());
    EXPECT_EQ(a, neighbors(*mask, Connectivity::k3D18, static_cast<Voxel>(v)));
  }
}

TEST(Connectivity, Parse) {
  EXPECT_EQ(parse_connectivity("26"), Connectivity::k3D26);
  EXPECT_EQ(parse_connectivity("3D-6"), Connectivity::k3D6);
  EXPECT_EQ(parse_connectivity("2D-4"), Connectivity::k2D4);
  EXPECT_EQ(parse_connectivity("8"), Connectivity::k2D8);
  EXPECT_THROW(parse_connectivity("12"), StructuralError);
}

TEST(StatisticMap, RejectsNonFinite) {
  EXPECT_THROW(StatisticMap(full_mask(2, 1, 1), {1.0, std::nan("")}), StructuralError);
  EXPECT_THROW(StatisticMap(full_mask(2, 1, 1), {1.0, std::numeric_limits<double>::infinity()}),
               StructuralError);
  EXPECT_THROW(StatisticMap(full_mask(2, 1, 1), {1.0}), StructuralError);
}

TEST(RankOrder, Grid3x3Ranks) {
  const auto order = rank_order(worked_grid_map());
  const std::vector<Voxel> expected = {A, F, G, C, B, H, E, D, I};
  EXPECT_EQ(order.order, expected);
}

TEST(RankOrder, ZeroMapIsEmpty) {
  EXPECT_EQ(rank_order(StatisticMap(full_mask(3, 1, 1), {0.0, 0.0, 0.0})).size(), 0u);
}

TEST(RankOrder, TiesByAscendingIndex) {
  const auto order = rank_order(StatisticMap(full_mask(3, 1, 1), {5.0, 5.0, 3.0}));
  EXPECT_EQ(order.order, (std::vector<Voxel>{0, 1, 2}));
}

TEST(RankOrder, StrictlyAboveH0) {
  const auto order = rank_order(StatisticMap(full_mask(4, 1, 1), {1.0, 2.0, 0.5, -3.0}), 1.0);
  EXPECT_EQ(order.order, (std::vector<Voxel>{1}));
  EXPECT_THROW(rank_order(StatisticMap(full_mask(1, 1, 1), {1.0}), -0.5), StructuralError);
}

// Large inputs go through the radix path; it must agree with a stable sort.
TEST(RankOrder, RadixPathMatchesStableSort) {
  const std::size_t n = 20000;
  const auto values = tied_values(n, 5, -2.0, 6.0, 97);
  const auto order = rank_order(values, 0.0);
  std::vector<Voxel> expected;
  for (std::size_t i = 0; i < n; ++i)
    if (values[i] > 0.0) expected.push_back(static_cast<Voxel>(i));
  std::stable_sort(expected.begin(), expected.end(), [&](Voxel a, Voxel b) { return values[a] > values[b]; });
  EXPECT_EQ(order.order, expected);
  EXPECT_TRUE(std::is_sorted(order.heights.rbegin(), order.heights.rend()));
}

// Re-storing voxels in a different order yields the same (height, coordinate) sequence
// once ties are broken by coordinates.
TEST(RankOrder, StorageOrderInvariant) {
  const std::size_t n = 64;
  const auto values = uniform_values(n, 8, -1.0, 5.0);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(2));
  std::vector<double> shuffled(n);
  for (std::size_t i = 0; i < n; ++i) shuffled[i] = values[perm[i]];
  const auto a = rank_order(values, 0.0);
  const auto b = rank_order(shuffled, 0.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    EXPECT_EQ(a.heights[r], b.heights[r]);
    EXPECT_EQ(static_cast<std::size_t>(a.order[r]), perm[b.order[r]]);
  }
}
