#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "etfce/enhance.hpp"
#include "etfce/oracle.hpp"
#include "support.hpp"

using namespace etfce;
using namespace etfce::testing;

namespace {

StatisticMap two_voxels() { return StatisticMap(full_mask(2, 1, 1), {2.0, 1.0}); }

MergeForest forest_of(const StatisticMap& map, Connectivity conn, double h0 = 0.0) {
  return build_forest(rank_order(map, h0), map.mask(), conn);
}

}  // namespace

TEST(ExactTfce, TwoVoxels) {
  const auto t = exact_tfce(two_voxels(), Connectivity::k2D4, {});
  EXPECT_NEAR(t.scores[0], (7.0 + std::sqrt(2.0)) / 3.0, 1e-12);
  EXPECT_NEAR(t.scores[1], std::sqrt(2.0) / 3.0, 1e-12);
}

TEST(ExactTfce, SingleVoxel) {
  const auto t = exact_tfce(StatisticMap(full_mask(1, 1, 1), {3.0}), Connectivity::k2D4, {});
  EXPECT_NEAR(t.scores[0], 9.0, 1e-12);
}

TEST(ExactTfce, Grid3x3VoxelA) {
  const auto t = exact_tfce(worked_grid_map(), Connectivity::k2D4, {});
  const double closed = (3.0 * std::pow(1.2, 3) + std::sqrt(8.0) * (std::pow(2.1, 3) - std::pow(1.2, 3)) +
                         std::sqrt(7.0) * (std::pow(2.9, 3) - std::pow(2.1, 3)) +
                         2.0 * (std::pow(4.1, 3) - std::pow(2.9, 3)) + (std::pow(12.5, 3) - std::pow(4.1, 3))) /
                        3.0;
  EXPECT_NEAR(t.scores[A], closed, 1e-9 * closed);
  EXPECT_NEAR(t.scores[A], 679.93, 0.005);
}

TEST(ExactTfce, Grid3x3MatchesQuadrature) {
  const auto map = worked_grid_map();
  const auto exact = exact_tfce(map, Connectivity::k2D4, {});
  const auto ref = oracle::riemann_tfce(map, Connectivity::k2D4, {});
  for (std::size_t v = 0; v < 9; ++v) EXPECT_NEAR(exact.scores[v], ref.scores[v], 1e-4 * ref.scores[v]);
}

TEST(ExactTfce, MatchesLevelDecomposition) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mask = random_mask(GridShape(6, 5, 4), seed, 0.85);
    const StatisticMap map(mask, tied_values(mask->in_mask_count(), seed, -2.0, 6.0, 17));
    for (auto conn : {Connectivity::k3D6, Connectivity::k3D18, Connectivity::k3D26})
      for (EnhanceParams p : {EnhanceParams{}, EnhanceParams{1.0, 1.5, 0.0}, EnhanceParams{0.5, 2.0, 1.3}}) {
        const auto exact = exact_tfce(map, conn, p);
        const auto ref = oracle::level_tfce(map.values(), mask, conn, p);
        for (std::size_t v = 0; v < map.size(); ++v)
          EXPECT_NEAR(exact.scores[v], ref.scores[v], 1e-10 * std::max(1.0, ref.scores[v]));
      }
  }
}

TEST(ExactTfce, ZeroAtOrBelowH0) {
  const auto mask = full_mask(5, 5, 1);
  const StatisticMap map(mask, uniform_values(25, 3, -2.0, 3.0));
  const EnhanceParams p{0.5, 2.0, 0.7};
  const auto t = exact_tfce(map, Connectivity::k2D8, p);
  for (std::size_t v = 0; v < 25; ++v) {
    if (map[static_cast<Voxel>(v)] <= 0.7)
      EXPECT_EQ(t.scores[v], 0.0);
    else
      EXPECT_GT(t.scores[v], 0.0);
  }
}

TEST(ExactTfce, ScalesAsPowerOfHeight) {
  const auto mask = full_mask(6, 6, 3);
  const StatisticMap map(mask, uniform_values(108, 4, -1.0, 4.0));
  std::vector<double> scaled(map.values().begin(), map.values().end());
  const double c = 1.7;
  for (auto& x : scaled) x *= c;
  const auto a = exact_tfce(map, Connectivity::k3D18, {});
  const auto b = exact_tfce(StatisticMap(mask, scaled), Connectivity::k3D18, {});
  for (std::size_t v = 0; v < a.scores.size(); ++v) EXPECT_NEAR(b.scores[v], std::pow(c, 3.0) * a.scores[v], 1e-9 * b.scores[v] + 1e-300);
  EXPECT_EQ(std::max_element(a.scores.begin(), a.scores.end()) - a.scores.begin(),
            std::max_element(b.scores.begin(), b.scores.end()) - b.scores.begin());
}

TEST(ExactTfce, ForestH0MustMatch) {
  const auto map = two_voxels();
  EXPECT_THROW(exact_tfce(forest_of(map, Connectivity::k2D4, 0.0), EnhanceParams{0.5, 2.0, 0.5}, map.mask_ptr()),
               StructuralError);
  EXPECT_THROW(exact_tfce(map, Connectivity::k2D4, EnhanceParams{-1.0, 2.0, 0.0}), StructuralError);
}

TEST(Generalized, TfceIsBitIdentical) {
  const auto mask = full_mask(7, 7, 2);
  const StatisticMap map(mask, uniform_values(98, 5, -1.0, 4.0));
  const auto forest = forest_of(map, Connectivity::k3D26);
  const auto a = exact_tfce(forest, {}, mask);
  const auto b = generalized_statistic(forest, GeneralizedStatistic::tfce(0.5, 2.0), mask);
  EXPECT_EQ(a.scores, b.scores);
}

TEST(Generalized, ClusterExtentAtOwnHeight) {
  const auto map = worked_grid_map();
  const auto forest = forest_of(map, Connectivity::k2D4);
  const auto ext = generalized_statistic(forest, GeneralizedStatistic::cluster_extent(), map.mask_ptr());
  EXPECT_EQ(ext.scores[G], 1.0);
  for (std::size_t v = 0; v < 9; ++v) {
    const auto table = clusters_at_threshold(forest, map[static_cast<Voxel>(v)]);
    for (const auto& c : table.clusters)
      if (std::binary_search(c.members.begin(), c.members.end(), static_cast<Voxel>(v)))
        EXPECT_EQ(ext.scores[v], static_cast<double>(c.extent));
  }
}

TEST(Generalized, MassIntegral) {
  const auto map = two_voxels();
  const auto m = generalized_statistic(forest_of(map, Connectivity::k2D4), GeneralizedStatistic::cluster_mass(),
                                       map.mask_ptr());
  // Voxel 1 sits in the two-voxel cluster for every h in (0, 1], so its
  // integral is 2, not 1.
  EXPECT_NEAR(m.scores[0], 3.0, 1e-12);
  EXPECT_NEAR(m.scores[1], 2.0, 1e-12);
  const auto ref = oracle::riemann_tfce(map, Connectivity::k2D4, EnhanceParams{1.0, 0.0, 0.0});
  EXPECT_NEAR(m.scores[0], ref.scores[0], 1e-4 * ref.scores[0]);
  EXPECT_NEAR(m.scores[1], ref.scores[1], 1e-4 * ref.scores[1]);
}

TEST(Generalized, PeakHeight) {
  const auto map = worked_grid_map();
  const auto ph = generalized_statistic(forest_of(map, Connectivity::k2D4), GeneralizedStatistic::peak_height(),
                                        map.mask_ptr());
  for (std::size_t v = 0; v < 9; ++v) EXPECT_NEAR(ph.scores[v], kWorkedGrid[v], 1e-12);
}

TEST(DiscretizedTfce, TwoVoxelsTwoSteps) {
  const auto t = discretized_tfce(two_voxels(), Connectivity::k2D4, {}, {2});
  EXPECT_NEAR(t.scores[0], std::sqrt(2.0) + 4.0, 1e-12);
  EXPECT_NEAR(t.scores[1], std::sqrt(2.0), 1e-12);
}

TEST(DiscretizedTfce, ZeroMap) {
  const auto t = discretized_tfce(StatisticMap(full_mask(3, 3, 1), std::vector<double>(9, 0.0)),
                                  Connectivity::k2D4, {}, {100});
  EXPECT_EQ(t.scores, std::vector<double>(9, 0.0));
  EXPECT_THROW(discretized_tfce(two_voxels(), Connectivity::k2D4, {}, {0}), StructuralError);
}

TEST(DiscretizedTfce, MatchesDirectLabeling) {
  const auto mask = random_mask(GridShape(6, 6, 6), 12, 0.9);
  const StatisticMap map(mask, uniform_values(mask->in_mask_count(), 12, -1.0, 4.0));
  const int n = 25;
  const auto t = discretized_tfce(map, Connectivity::k3D6, {}, {n});
  std::vector<double> ref(map.size(), 0.0);
  const double step = map.h_max() / n;
  for (int i = 1; i <= n; ++i) {
    const double tau = i == n ? map.h_max() : i * step;
    int count = 0;
    const auto label = oracle::flood_labels(map.values(), *mask, Connectivity::k3D6, tau, &count);
    std::vector<int> size(count, 0);
    for (int l : label)
      if (l >= 0) ++size[l];
    for (std::size_t v = 0; v < ref.size(); ++v)
      if (label[v] >= 0) ref[v] += std::sqrt(static_cast<double>(size[label[v]])) * tau * tau * step;
  }
  for (std::size_t v = 0; v < ref.size(); ++v) EXPECT_NEAR(t.scores[v], ref[v], 1e-9 * std::max(1.0, ref[v]));
}
