#pragma once

// Minimal NIfTI-1 single-file (.nii / .nii.gz) reader and writer.
//
// Supported on input: int16, float32 and float64 payloads in either byte
// order, with scl_slope/scl_inter scaling. Output is always native-endian
// float64 with identity scaling. Orientation fields are carried through
// unchanged; no spatial transforms are applied.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "etfce/error.hpp"
#include "etfce/volume.hpp"

namespace etfce::nifti {

inline constexpr int kHeaderSize = 348;
inline constexpr int kInt16 = 4;
inline constexpr int kFloat32 = 16;
inline constexpr int kFloat64 = 64;

struct Header {
  std::array<std::int16_t, 8> dim{};
  std::array<float, 8> pixdim{};
  std::int16_t datatype = kFloat64;
  std::int16_t bitpix = 64;
  float vox_offset = 352.0f;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::uint8_t xyzt_units = 0;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<float, 6> quatern{};  // b, c, d, qoffset_x, qoffset_y, qoffset_z
  std::array<float, 12> srow{};
  std::array<char, 80> descrip{};
  bool byte_swapped = false;  // file order differed from native order
};

struct NiftiVolume {
  Header header;
  std::vector<double> data;  // x fastest, then y, z, t

  std::int64_t nx() const { return header.dim[1]; }
  std::int64_t ny() const { return header.dim[0] >= 2 ? header.dim[2] : 1; }
  std::int64_t nz() const { return header.dim[0] >= 3 ? header.dim[3] : 1; }
  std::int64_t nt() const {
    std::int64_t t = 1;
    for (int i = 4; i <= header.dim[0]; ++i) t *= header.dim[i];
    return t;
  }
  std::int64_t voxels_per_frame() const { return nx() * ny() * nz(); }
  GridShape shape() const {
    auto size = [&](int i) {
      const double s = header.dim[0] >= i ? std::abs(static_cast<double>(header.pixdim[i])) : 1.0;
      return s > 0.0 ? s : 1.0;
    };
    return GridShape(nx(), ny(), nz(), {size(1), size(2), size(3)});
  }
};

namespace detail {

template <typename T>
T byteswap(T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

template <typename T>
T load(const unsigned char* base, std::size_t offset, bool swap) {
  T value;
  std::memcpy(&value, base + offset, sizeof(T));
  return swap ? byteswap(value) : value;
}

template <typename T>
void store(unsigned char* base, std::size_t offset, T value) {
  std::memcpy(base + offset, &value, sizeof(T));
}

struct GzCloser {
  void operator()(gzFile f) const {
    if (f) gzclose(f);
  }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline void read_exact(gzFile f, void* buffer, std::size_t bytes, const std::string& path, const char* what) {
  auto* out = static_cast<unsigned char*>(buffer);
  std::size_t done = 0;
  while (done < bytes) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes - done, 1u << 30));
    const int got = gzread(f, out + done, chunk);
    if (got <= 0) throw FormatError(path + ": truncated " + what);
    done += static_cast<std::size_t>(got);
  }
}

}  // namespace detail

/// Parses a 348-byte header, resolving byte order from sizeof_hdr.
inline Header parse_header(const unsigned char* raw, const std::string& path = "<buffer>") {
  using detail::load;
  Header h;
  const auto sizeof_hdr = load<std::int32_t>(raw, 0, false);
  if (sizeof_hdr == kHeaderSize) {
    h.byte_swapped = false;
  } else if (detail::byteswap(sizeof_hdr) == kHeaderSize) {
    h.byte_swapped = true;
  } else {
    throw FormatError(path + ": sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348");
  }
  const bool sw = h.byte_swapped;
  if (std::memcmp(raw + 344, "n+1\0", 4) != 0)
    throw FormatError(path + ": magic is not \"n+1\" (only single-file NIfTI-1 is supported)");
  for (int i = 0; i < 8; ++i) h.dim[i] = load<std::int16_t>(raw, 40 + 2 * i, sw);
  if (h.dim[0] < 1 || h.dim[0] > 7) throw FormatError(path + ": dim[0] = " + std::to_string(h.dim[0]));
  for (int i = 1; i <= h.dim[0]; ++i)
    if (h.dim[i] < 1) throw FormatError(path + ": dim[" + std::to_string(i) + "] = " + std::to_string(h.dim[i]));
  h.datatype = load<std::int16_t>(raw, 70, sw);
  h.bitpix = load<std::int16_t>(raw, 72, sw);
  for (int i = 0; i < 8; ++i) h.pixdim[i] = load<float>(raw, 76 + 4 * i, sw);
  h.vox_offset = load<float>(raw, 108, sw);
  h.scl_slope = load<float>(raw, 112, sw);
  h.scl_inter = load<float>(raw, 116, sw);
  h.xyzt_units = raw[123];
  std::memcpy(h.descrip.data(), raw + 148, 80);
  h.qform_code = load<std::int16_t>(raw, 252, sw);
  h.sform_code = load<std::int16_t>(raw, 254, sw);
  for (int i = 0; i < 6; ++i) h.quatern[i] = load<float>(raw, 256 + 4 * i, sw);
  for (int i = 0; i < 12; ++i) h.srow[i] = load<float>(raw, 280 + 4 * i, sw);
  if (h.datatype != kInt16 && h.datatype != kFloat32 && h.datatype != kFloat64)
    throw FormatError(path + ": unsupported datatype code " + std::to_string(h.datatype) +
                      " (supported: 4 int16, 16 float32, 64 float64)");
  if (h.vox_offset < kHeaderSize) throw FormatError(path + ": vox_offset " + std::to_string(h.vox_offset) + " < 348");
  return h;
}

/// Serializes a header for a native-endian float64 payload at offset 352.
inline std::array<unsigned char, kHeaderSize> encode_header(const Header& in) {
  using detail::store;
  std::array<unsigned char, kHeaderSize> raw{};
  unsigned char* b = raw.data();
  store<std::int32_t>(b, 0, kHeaderSize);
  b[38] = 'r';  // regular
  for (int i = 0; i < 8; ++i) store<std::int16_t>(b, 40 + 2 * i, in.dim[i]);
  store<std::int16_t>(b, 70, kFloat64);
  store<std::int16_t>(b, 72, 64);
  for (int i = 0; i < 8; ++i) store<float>(b, 76 + 4 * i, in.pixdim[i]);
  store<float>(b, 108, 352.0f);
  store<float>(b, 112, 1.0f);
  store<float>(b, 116, 0.0f);
  b[123] = in.xyzt_units;
  std::memcpy(b + 148, in.descrip.data(), 80);
  store<std::int16_t>(b, 252, in.qform_code);
  store<std::int16_t>(b, 254, in.sform_code);
  for (int i = 0; i < 6; ++i) store<float>(b, 256 + 4 * i, in.quatern[i]);
  for (int i = 0; i < 12; ++i) store<float>(b, 280 + 4 * i, in.srow[i]);
  std::memcpy(b + 344, "n+1\0", 4);
  return raw;
}

inline NiftiVolume read_nifti(const std::string& path) {
  detail::GzHandle f(gzopen(path.c_str(), "rb"));
  if (!f) throw IoError(path + ": cannot open for reading");
  std::array<unsigned char, kHeaderSize> raw{};
  detail::read_exact(f.get(), raw.data(), raw.size(), path, "header");
  NiftiVolume vol;
  vol.header = parse_header(raw.data(), path);
  const Header& h = vol.header;

  std::int64_t count = 1;
  for (int i = 1; i <= h.dim[0]; ++i) count *= h.dim[i];
  const std::size_t width = h.datatype == kInt16 ? 2 : h.datatype == kFloat32 ? 4 : 8;
  std::size_t skip = static_cast<std::size_t>(h.vox_offset) - kHeaderSize;
  std::vector<unsigned char> scratch(std::max<std::size_t>(skip, 1));
  if (skip) detail::read_exact(f.get(), scratch.data(), skip, path, "extension block");
  std::vector<unsigned char> payload(static_cast<std::size_t>(count) * width);
  detail::read_exact(f.get(), payload.data(), payload.size(), path, "payload");

  vol.data.resize(static_cast<std::size_t>(count));
  const bool sw = h.byte_swapped;
  for (std::size_t i = 0; i < vol.data.size(); ++i) {
    switch (h.datatype) {
      case kInt16: vol.data[i] = detail::load<std::int16_t>(payload.data(), 2 * i, sw); break;
      case kFloat32: vol.data[i] = detail::load<float>(payload.data(), 4 * i, sw); break;
      default: vol.data[i] = detail::load<double>(payload.data(), 8 * i, sw); break;
    }
  }
  if (h.scl_slope != 0.0f && std::isfinite(h.scl_slope) && std::isfinite(h.scl_inter) &&
      !(h.scl_slope == 1.0f && h.scl_inter == 0.0f)) {
    const double slope = h.scl_slope, inter = h.scl_inter;
    for (auto& x : vol.data) x = x * slope + inter;
  }
  return vol;
}

/// Writes float64 native-endian; gzip-compressed when the path ends in ".gz".
inline void write_nifti(const NiftiVolume& vol, const std::string& path) {
  std::int64_t count = 1;
  for (int i = 1; i <= vol.header.dim[0]; ++i) count *= vol.header.dim[i];
  if (vol.header.dim[0] < 1 || count != static_cast<std::int64_t>(vol.data.size()))
    throw StructuralError(path + ": volume dimensions do not match payload size");
  const auto raw = encode_header(vol.header);
  const std::array<unsigned char, 4> extension{};
  const bool gz = detail::ends_with(path, ".gz");
  detail::GzHandle f(gzopen(path.c_str(), gz ? "wb6" : "wbT"));
  if (!f) throw IoError(path + ": cannot open for writing");
  auto put = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    while (bytes) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes, 1u << 30));
      if (gzwrite(f.get(), p, chunk) != static_cast<int>(chunk)) throw IoError(path + ": write failed");
      p += chunk;
      bytes -= chunk;
    }
  };
  put(raw.data(), raw.size());
  put(extension.data(), extension.size());
  put(vol.data.data(), vol.data.size() * sizeof(double));
  if (gzclose(f.release()) != Z_OK) throw IoError(path + ": write failed");
}

/// A 3D header for `shape`, carrying orientation from `like` when given.
inline Header header_3d(const GridShape& shape, const Header* like = nullptr) {
  Header h = like ? *like : Header{};
  h.dim = {3, static_cast<std::int16_t>(shape.nx()), static_cast<std::int16_t>(shape.ny()),
           static_cast<std::int16_t>(shape.nz()), 1, 1, 1, 1};
  if (!like) h.pixdim = {1.0f, static_cast<float>(shape.voxel_sizes[0]), static_cast<float>(shape.voxel_sizes[1]),
                         static_cast<float>(shape.voxel_sizes[2]), 1.0f, 1.0f, 1.0f, 1.0f};
  h.datatype = kFloat64;
  h.bitpix = 64;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.byte_swapped = false;
  return h;
}

/// Expands in-mask values to a full grid, writing `fill` outside the mask.
inline NiftiVolume volume_from_dense(const Mask& mask, std::span<const double> values, double fill = 0.0,
                                     const Header* like = nullptr) {
  if (values.size() != mask.in_mask_count()) throw StructuralError("value count does not match mask");
  NiftiVolume vol;
  vol.header = header_3d(mask.shape(), like);
  vol.data.assign(static_cast<std::size_t>(mask.shape().voxel_count()), fill);
  for (std::size_t v = 0; v < values.size(); ++v) vol.data[mask.to_linear(static_cast<Voxel>(v))] = values[v];
  return vol;
}

/// In-mask values of frame `t` of a volume defined on the mask's grid.
inline std::vector<double> dense_from_volume(const NiftiVolume& vol, const Mask& mask, std::int64_t t = 0) {
  if (vol.voxels_per_frame() != mask.shape().voxel_count() || t < 0 || t >= vol.nt())
    throw StructuralError("volume grid does not match mask grid");
  const std::size_t base = static_cast<std::size_t>(t * vol.voxels_per_frame());
  std::vector<double> out(mask.in_mask_count());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = vol.data[base + mask.to_linear(static_cast<Voxel>(v))];
  return out;
}

}  // namespace etfce::nifti
