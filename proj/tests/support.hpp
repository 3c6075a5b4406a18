#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "etfce/inference.hpp"
#include "etfce/volume.hpp"

namespace etfce::testing {

// 3x3 grid, row-major: A B C / D E F / G H I.
inline const std::vector<double> kWorkedGrid = {12.5, 4.1, 7.3, 2.1, 2.9, 10.2, 9.8, 3.5, 1.2};
enum GridVoxel { A, B, C, D, E, F, G, H, I };

inline std::shared_ptr<const Mask> full_mask(std::int64_t nx, std::int64_t ny, std::int64_t nz) {
  return std::make_shared<const Mask>(Mask::full(GridShape(nx, ny, nz)));
}

inline StatisticMap worked_grid_map() { return StatisticMap(full_mask(3, 3, 1), kWorkedGrid); }

inline std::vector<double> uniform_values(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Values in [lo, hi] rounded to `levels` distinct steps, so ties are common.
inline std::vector<double> tied_values(std::size_t n, std::uint64_t seed, double lo, double hi, int levels) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, levels - 1);
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * u(rng) / (levels - 1);
  return v;
}

/// Random mask keeping roughly `keep` of the grid.
inline std::shared_ptr<const Mask> random_mask(const GridShape& shape, std::uint64_t seed, double keep) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution in(keep);
  std::vector<std::uint8_t> m(static_cast<std::size_t>(shape.voxel_count()));
  for (auto& x : m) x = in(rng);
  return std::make_shared<const Mask>(shape, std::move(m));
}

inline SubjectData gaussian_subjects(std::shared_ptr<const Mask> mask, int n, std::uint64_t seed,
                                     double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(shift, 1.0);
  std::vector<double> m(static_cast<std::size_t>(n) * mask->in_mask_count());
  for (auto& x : m) x = g(rng);
  return SubjectData(std::move(mask), n, std::move(m));
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("etfce_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace etfce::testing
