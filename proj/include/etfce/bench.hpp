#pragma once

// Synthetic group data and per-randomization timing.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "etfce/inference.hpp"
#include "etfce/volume.hpp"

namespace etfce {

struct Blob {
  std::array<double, 3> center{};  // voxel coordinates
  double sigma = 2.0;              // voxels
  double amplitude = 1.0;          // added to every subject's map
};

struct PhantomConfig {
  GridShape shape{16, 16, 16};
  int n_subjects = 10;
  std::uint64_t seed = 1;
  double noise_sd = 1.0;
  /// Passes of a 3-point box filter along each axis, applied to the noise.
  int smoothing_passes = 1;
  std::vector<Blob> blobs;
};

namespace detail {

inline void box_smooth(std::vector<double>& field, const GridShape& shape) {
  std::vector<double> tmp(field.size());
  const std::array<std::int64_t, 3> stride{1, shape.nx(), shape.nx() * shape.ny()};
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t n = shape.dims[axis];
    if (n == 1) continue;
    for (std::int64_t i = 0; i < shape.voxel_count(); ++i) {
      const std::int64_t c = shape.coords(i)[axis];
      double sum = field[i];
      int count = 1;
      if (c > 0) sum += field[i - stride[axis]], ++count;
      if (c + 1 < n) sum += field[i + stride[axis]], ++count;
      tmp[i] = sum / count;
    }
    field.swap(tmp);
  }
}

}  // namespace detail

/// Full-grid subject maps: smoothed Gaussian noise (rescaled to noise_sd) plus blobs.
inline SubjectData make_phantom(const PhantomConfig& cfg) {
  const auto mask = std::make_shared<const Mask>(Mask::full(cfg.shape));
  const std::size_t v = mask->in_mask_count();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> signal(v, 0.0);
  for (std::size_t i = 0; i < v; ++i) {
    const auto xyz = mask->coords(static_cast<Voxel>(i));
    for (const auto& b : cfg.blobs) {
      double r2 = 0.0;
      for (int a = 0; a < 3; ++a) r2 += (xyz[a] - b.center[a]) * (xyz[a] - b.center[a]);
      signal[i] += b.amplitude * std::exp(-0.5 * r2 / (b.sigma * b.sigma));
    }
  }

  std::vector<double> matrix(static_cast<std::size_t>(cfg.n_subjects) * v);
  std::vector<double> field(v);
  for (int s = 0; s < cfg.n_subjects; ++s) {
    for (auto& x : field) x = normal(rng);
    for (int p = 0; p < cfg.smoothing_passes; ++p) detail::box_smooth(field, cfg.shape);
    double ss = 0.0;
    for (double x : field) ss += x * x;
    const double scale = cfg.noise_sd / std::sqrt(ss / static_cast<double>(v));
    for (std::size_t i = 0; i < v; ++i) matrix[s * v + i] = field[i] * scale + signal[i];
  }
  return SubjectData(mask, cfg.n_subjects, std::move(matrix));
}

struct BenchConfig {
  int size = 64;
  int n_subjects = 10;
  std::int64_t n_perm = 20;
  Connectivity conn = Connectivity::k3D26;
  double cdt = 3.1;
  std::uint64_t seed = 1;
  int discretized_n = 100;  // 0 disables the uniform-threshold row
  int repeats = 1;          // best of `repeats` runs per row
};

struct BenchRow {
  std::string label;
  StageTimes per_randomization;  // seconds
  double wall_per_randomization = 0.0;
};

/// Default phantom for `bench`: a size^3 grid with two blobs.
inline PhantomConfig bench_phantom(const BenchConfig& cfg) {
  PhantomConfig p;
  p.shape = GridShape(cfg.size, cfg.size, cfg.size);
  p.n_subjects = cfg.n_subjects;
  p.seed = cfg.seed;
  const double s = cfg.size;
  p.blobs = {{{0.3 * s, 0.4 * s, 0.5 * s}, 0.08 * s, 1.0}, {{0.7 * s, 0.6 * s, 0.4 * s}, 0.05 * s, 0.8}};
  return p;
}

/// Times exact TFCE alone, exact TFCE with cluster extent and mass from the
/// same forest, and (optionally) the uniform-threshold approximation.
inline std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  const SubjectData data = make_phantom(bench_phantom(cfg));
  struct Variant {
    std::string label;
    StatisticRequest req;
    std::optional<DiscretizationScheme> disc;
  };
  StatisticRequest unified;
  unified.extent_cdt = cfg.cdt;
  unified.mass_cdt = cfg.cdt;
  std::vector<Variant> variants = {{"exact tfce", {}, std::nullopt},
                                   {"exact tfce + extent + mass", unified, std::nullopt}};
  if (cfg.discretized_n > 0)
    variants.push_back({"uniform tfce (n=" + std::to_string(cfg.discretized_n) + ")", {},
                        DiscretizationScheme{cfg.discretized_n}});

  // Repeats are interleaved across rows so slow drift hits every row alike.
  std::vector<BenchRow> rows(variants.size());
  for (int rep = 0; rep < std::max(1, cfg.repeats); ++rep) {
    for (std::size_t k = 0; k < variants.size(); ++k) {
      InferenceOptions opt;
      opt.conn = cfg.conn;
      opt.plan.n_perm = cfg.n_perm;
      opt.plan.seed = cfg.seed;
      opt.requested = variants[k].req;
      opt.discretization = variants[k].disc;
      const auto start = std::chrono::steady_clock::now();
      const auto result = run_inference(data, opt);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const double per = 1.0 / static_cast<double>(result.n_perm + 1);
      StageTimes t = result.times;
      t.statistic *= per;
      t.forest *= per;
      t.tfce *= per;
      t.cluster *= per;
      auto& row = rows[k];
      if (rep == 0 || wall * per < row.wall_per_randomization) {
        row.label = variants[k].label;
        row.per_randomization = t;
        row.wall_per_randomization = wall * per;
      }
    }
  }
  return rows;
}

}  // namespace etfce
