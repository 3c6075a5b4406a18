#pragma once

// Masked 3D (and 2D) grids, voxel adjacency and height ordering.
//
// In-mask voxels are addressed by a dense index 0..in_mask_count-1 which
// follows ascending linear grid order (x fastest, then y, then z).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "etfce/error.hpp"

namespace etfce {

using Voxel = std::int32_t;
inline constexpr Voxel kNoVoxel = -1;

struct GridShape {
  std::array<std::int64_t, 3> dims{1, 1, 1};
  std::array<double, 3> voxel_sizes{1.0, 1.0, 1.0};

  GridShape() = default;
  GridShape(std::int64_t nx, std::int64_t ny, std::int64_t nz,
            std::array<double, 3> sizes = {1.0, 1.0, 1.0})
      : dims{nx, ny, nz}, voxel_sizes(sizes) {
    for (auto d : dims)
      if (d < 1) throw StructuralError("grid dimensions must be >= 1");
    for (auto s : voxel_sizes)
      if (!(s > 0.0) || !std::isfinite(s))
        throw StructuralError("voxel sizes must be positive and finite");
    if (nx > std::numeric_limits<Voxel>::max() / ny ||
        nx * ny > std::numeric_limits<Voxel>::max() / nz)
      throw StructuralError("grid has more voxels than the index type allows");
  }

  std::int64_t nx() const { return dims[0]; }
  std::int64_t ny() const { return dims[1]; }
  std::int64_t nz() const { return dims[2]; }
  bool is_2d() const { return dims[2] == 1; }
  std::int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

  std::int64_t linear(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x + dims[0] * (y + dims[1] * z);
  }
  std::array<std::int64_t, 3> coords(std::int64_t linear_index) const {
    return {linear_index % dims[0], (linear_index / dims[0]) % dims[1],
            linear_index / (dims[0] * dims[1])};
  }
  bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }

  friend bool operator==(const GridShape& a, const GridShape& b) { return a.dims == b.dims; }
};

class Mask {
 public:
  Mask(GridShape shape, std::vector<std::uint8_t> membership)
      : shape_(shape), membership_(std::move(membership)) {
    if (static_cast<std::int64_t>(membership_.size()) != shape_.voxel_count())
      throw StructuralError("mask membership length " + std::to_string(membership_.size()) +
                            " does not match grid voxel count " +
                            std::to_string(shape_.voxel_count()));
    linear_to_dense_.assign(membership_.size(), kNoVoxel);
    for (std::size_t i = 0; i < membership_.size(); ++i) {
      if (membership_[i]) {
        membership_[i] = 1;
        linear_to_dense_[i] = static_cast<Voxel>(dense_to_linear_.size());
        dense_to_linear_.push_back(static_cast<std::int64_t>(i));
      }
    }
  }

  /// Mask covering every voxel of the grid.
  static Mask full(GridShape shape) {
    return Mask(shape, std::vector<std::uint8_t>(static_cast<std::size_t>(shape.voxel_count()), 1));
  }

  const GridShape& shape() const { return shape_; }
  std::size_t in_mask_count() const { return dense_to_linear_.size(); }
  bool contains_linear(std::int64_t linear_index) const { return membership_[linear_index] != 0; }
  std::span<const std::uint8_t> membership() const { return membership_; }

  std::int64_t to_linear(Voxel dense) const { return dense_to_linear_[dense]; }
  /// Dense index of a grid voxel, or kNoVoxel when outside the mask.
  Voxel to_dense(std::int64_t linear_index) const { return linear_to_dense_[linear_index]; }
  std::array<std::int64_t, 3> coords(Voxel dense) const { return shape_.coords(to_linear(dense)); }

  friend bool operator==(const Mask& a, const Mask& b) {
    return a.shape_ == b.shape_ && a.membership_ == b.membership_;
  }

 private:
  GridShape shape_;
  std::vector<std::uint8_t> membership_;
  std::vector<std::int64_t> dense_to_linear_;
  std::vector<Voxel> linear_to_dense_;
};

inline Mask build_mask(const GridShape& shape, const std::vector<bool>& membership) {
  return Mask(shape, std::vector<std::uint8_t>(membership.begin(), membership.end()));
}

enum class Connectivity { k2D4, k2D8, k3D6, k3D18, k3D26 };

inline bool is_2d(Connectivity c) { return c == Connectivity::k2D4 || c == Connectivity::k2D8; }

inline int neighbor_count(Connectivity c) {
  switch (c) {
    case Connectivity::k2D4: return 4;
    case Connectivity::k2D8: return 8;
    case Connectivity::k3D6: return 6;
    case Connectivity::k3D18: return 18;
    case Connectivity::k3D26: return 26;
  }
  return 0;
}

inline std::string to_string(Connectivity c) {
  switch (c) {
    case Connectivity::k2D4: return "2D-4";
    case Connectivity::k2D8: return "2D-8";
    case Connectivity::k3D6: return "3D-6";
    case Connectivity::k3D18: return "3D-18";
    case Connectivity::k3D26: return "3D-26";
  }
  return "?";
}

/// Parses "4", "8", "6", "18", "26" (optionally prefixed "2D-"/"3D-").
inline Connectivity parse_connectivity(std::string text) {
  if (text.rfind("2D-", 0) == 0 || text.rfind("3D-", 0) == 0) text = text.substr(3);
  if (text == "4") return Connectivity::k2D4;
  if (text == "8") return Connectivity::k2D8;
  if (text == "6") return Connectivity::k3D6;
  if (text == "18") return Connectivity::k3D18;
  if (text == "26") return Connectivity::k3D26;
  throw StructuralError("unknown connectivity '" + text + "' (expected 4, 8, 6, 18 or 26)");
}

/// Neighbor offsets (dx, dy, dz), ordered so that their linear displacement ascends.
inline std::vector<std::array<int, 3>> neighbor_offsets(Connectivity c) {
  std::vector<std::array<int, 3>> out;
  const int zr = is_2d(c) ? 0 : 1;
  for (int dz = -zr; dz <= zr; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        bool keep = false;
        switch (c) {
          case Connectivity::k2D4:
          case Connectivity::k3D6: keep = manhattan == 1; break;
          case Connectivity::k3D18: keep = manhattan <= 2; break;
          case Connectivity::k2D8:
          case Connectivity::k3D26: keep = true; break;
        }
        if (keep) out.push_back({dx, dy, dz});
      }
  return out;
}

inline void check_connectivity(const GridShape& shape, Connectivity c) {
  if (is_2d(c) && !shape.is_2d())
    throw StructuralError("connectivity " + to_string(c) + " requires nz = 1");
}

/// In-mask neighbors of a voxel, sorted by ascending dense index.
inline std::vector<Voxel> neighbors(const Mask& mask, Connectivity conn, Voxel voxel) {
  check_connectivity(mask.shape(), conn);
  if (voxel < 0 || static_cast<std::size_t>(voxel) >= mask.in_mask_count())
    throw StructuralError("voxel index " + std::to_string(voxel) + " out of range");
  const auto& shape = mask.shape();
  const auto [x, y, z] = mask.coords(voxel);
  std::vector<Voxel> out;
  for (const auto& d : neighbor_offsets(conn)) {
    const auto nx = x + d[0], ny = y + d[1], nz = z + d[2];
    if (!shape.contains(nx, ny, nz)) continue;
    const Voxel n = mask.to_dense(shape.linear(nx, ny, nz));
    if (n != kNoVoxel) out.push_back(n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Neighbor structure of a mask: one bit per neighbor offset for every
/// in-mask voxel, set when that neighbor lies inside the grid and the mask.
/// Neighbors are addressed through grid (linear) indices. A second layout
/// pads the grid by one voxel per side so that every offset stays in range.
class Adjacency {
 public:
  Adjacency(const Mask& mask, Connectivity conn) : conn_(conn), grid_size_(mask.shape().voxel_count()) {
    check_connectivity(mask.shape(), conn);
    if (grid_size_ > std::numeric_limits<std::int32_t>::max()) throw StructuralError("grid too large");
    const auto& shape = mask.shape();
    const auto deltas = neighbor_offsets(conn);
    for (const auto& d : deltas) offsets_.push_back(d[0] + shape.nx() * (d[1] + shape.ny() * d[2]));
    const std::int64_t px = shape.nx() + 2, py = shape.ny() + 2;
    padded_size_ = px * py * (shape.nz() + 2);
    if (padded_size_ > std::numeric_limits<std::int32_t>::max()) throw StructuralError("grid too large");
    for (const auto& d : deltas) padded_offsets_.push_back(static_cast<std::int32_t>(d[0] + px * (d[1] + py * d[2])));
    const std::size_t n = mask.in_mask_count();
    linear_.resize(n);
    padded_.resize(n);
    valid_.resize(n);
    to_dense_.assign(static_cast<std::size_t>(grid_size_), kNoVoxel);
    for (std::size_t v = 0; v < n; ++v) {
      linear_[v] = static_cast<std::int32_t>(mask.to_linear(static_cast<Voxel>(v)));
      to_dense_[linear_[v]] = static_cast<Voxel>(v);
    }
    for (std::size_t v = 0; v < n; ++v) {
      const auto [x, y, z] = mask.coords(static_cast<Voxel>(v));
      padded_[v] = static_cast<std::int32_t>((x + 1) + px * ((y + 1) + py * (z + 1)));
      std::uint32_t bits = 0;
      for (std::size_t k = 0; k < deltas.size(); ++k) {
        const auto& d = deltas[k];
        if (shape.contains(x + d[0], y + d[1], z + d[2]) && to_dense_[linear_[v] + offsets_[k]] != kNoVoxel)
          bits |= std::uint32_t{1} << k;
      }
      valid_[v] = bits;
    }
  }

  Connectivity connectivity() const { return conn_; }
  std::size_t size() const { return linear_.size(); }
  std::int64_t grid_size() const { return grid_size_; }
  std::int64_t linear(Voxel v) const { return linear_[v]; }
  std::uint32_t neighbor_bits(Voxel v) const { return valid_[v]; }
  std::int64_t offset(int k) const { return offsets_[k]; }
  int neighbor_kinds() const { return static_cast<int>(offsets_.size()); }

  std::int64_t padded_size() const { return padded_size_; }
  std::int32_t padded_linear(Voxel v) const { return padded_[v]; }
  std::span<const std::int32_t> padded_offsets() const { return padded_offsets_; }

  /// Calls f(linear index) for every in-mask neighbor of dense voxel v.
  template <class F>
  void for_each_neighbor_linear(Voxel v, F&& f) const {
    const std::int64_t base = linear_[v];
    for (std::uint32_t bits = valid_[v]; bits != 0; bits &= bits - 1)
      f(base + offsets_[std::countr_zero(bits)]);
  }

  /// Calls f(dense index) for every in-mask neighbor of dense voxel v.
  template <class F>
  void for_each_neighbor(Voxel v, F&& f) const {
    for_each_neighbor_linear(v, [&](std::int64_t l) { f(to_dense_[l]); });
  }

  std::vector<Voxel> neighbors_of(Voxel v) const {
    std::vector<Voxel> out;
    for_each_neighbor(v, [&](Voxel w) { out.push_back(w); });
    return out;
  }

 private:
  Connectivity conn_;
  std::int64_t grid_size_;
  std::vector<std::int64_t> offsets_;
  std::vector<std::int32_t> linear_;
  std::vector<std::uint32_t> valid_;
  std::vector<Voxel> to_dense_;
  std::int64_t padded_size_ = 0;
  std::vector<std::int32_t> padded_;
  std::vector<std::int32_t> padded_offsets_;
};

/// Voxel-wise statistic values on a mask. Immutable; all values finite.
class StatisticMap {
 public:
  StatisticMap(std::shared_ptr<const Mask> mask, std::vector<double> values)
      : mask_(std::move(mask)), values_(std::move(values)) {
    if (!mask_) throw StructuralError("statistic map requires a mask");
    if (values_.size() != mask_->in_mask_count())
      throw StructuralError("statistic map has " + std::to_string(values_.size()) +
                            " values for " + std::to_string(mask_->in_mask_count()) +
                            " in-mask voxels");
    h_max_ = values_.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw StructuralError("non-finite statistic value at voxel " + std::to_string(i));
      h_max_ = std::max(h_max_, values_[i]);
    }
  }

  const std::shared_ptr<const Mask>& mask_ptr() const { return mask_; }
  const Mask& mask() const { return *mask_; }
  std::span<const double> values() const { return values_; }
  double operator[](Voxel v) const { return values_[v]; }
  std::size_t size() const { return values_.size(); }
  /// Maximum in-mask value (0 for an empty mask).
  double h_max() const { return h_max_; }

  StatisticMap negated() const {
    std::vector<double> v(values_.size());
    std::transform(values_.begin(), values_.end(), v.begin(), [](double x) { return -x; });
    return StatisticMap(mask_, std::move(v));
  }

 private:
  std::shared_ptr<const Mask> mask_;
  std::vector<double> values_;
  double h_max_ = 0.0;
};

/// Supra-h0 voxels sorted by non-increasing height, ties by ascending dense index.
struct RankOrder {
  std::vector<Voxel> order;     // dense voxel index per rank (rank 0 is the highest)
  std::vector<double> heights;  // heights[r] = value of order[r]
  double h0 = 0.0;

  std::size_t size() const { return order.size(); }
};

namespace detail {

// Key whose ascending unsigned order is descending order of a positive double.
inline std::uint64_t descending_key(double positive) {
  std::uint64_t bits;
  std::memcpy(&bits, &positive, sizeof bits);
  return ~bits;
}

// Stable LSD radix sort of (key, voxel) pairs on 11-bit digits; small
// buckets keep the scatter inside cache.
inline void radix_sort(std::vector<std::uint64_t>& keys, std::vector<Voxel>& ids) {
  constexpr int kBits = 11;
  constexpr int kPasses = (64 + kBits - 1) / kBits;
  constexpr std::uint64_t kDigit = (1u << kBits) - 1;
  const std::size_t n = keys.size();
  std::vector<std::array<std::uint32_t, 1u << kBits>> count(kPasses);
  for (auto k : keys)
    for (int p = 0; p < kPasses; ++p) ++count[p][(k >> (p * kBits)) & kDigit];
  std::vector<std::uint64_t> keys_tmp(n);
  std::vector<Voxel> ids_tmp(n);
  for (int p = 0; p < kPasses; ++p) {
    auto& c = count[p];
    if (std::any_of(c.begin(), c.end(), [n](std::uint32_t x) { return x == n; })) continue;
    std::uint32_t sum = 0;
    for (auto& x : c) {
      const auto t = x;
      x = sum;
      sum += t;
    }
    const int shift = p * kBits;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pos = c[(keys[i] >> shift) & kDigit]++;
      keys_tmp[pos] = keys[i];
      ids_tmp[pos] = ids[i];
    }
    keys.swap(keys_tmp);
    ids.swap(ids_tmp);
  }
}

inline constexpr std::size_t kRadixThreshold = 4096;

}  // namespace detail

/// Ranks voxels with value > h0 by non-increasing height.
inline RankOrder rank_order(std::span<const double> values, double h0) {
  if (!(h0 >= 0.0) || !std::isfinite(h0)) throw StructuralError("h0 must be finite and >= 0");
  RankOrder out;
  out.h0 = h0;
  std::vector<Voxel>& ids = out.order;
  for (std::size_t v = 0; v < values.size(); ++v)
    if (values[v] > h0) ids.push_back(static_cast<Voxel>(v));

  if (ids.size() < detail::kRadixThreshold) {
    std::stable_sort(ids.begin(), ids.end(),
                     [&](Voxel a, Voxel b) { return values[a] > values[b]; });
  } else {
    std::vector<std::uint64_t> keys(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) keys[i] = detail::descending_key(values[ids[i]]);
    detail::radix_sort(keys, ids);
  }
  out.heights.resize(ids.size());
  for (std::size_t r = 0; r < ids.size(); ++r) out.heights[r] = values[ids[r]];
  return out;
}

inline RankOrder rank_order(const StatisticMap& map, double h0 = 0.0) {
  return rank_order(map.values(), h0);
}

}  // namespace etfce
