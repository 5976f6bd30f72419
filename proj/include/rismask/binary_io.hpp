#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <Eigen/Dense>

#include "rismask/em_core.hpp"
#include "rismask/errors.hpp"

// Binary layout shared by kernel caches, mask exports and RIS profile
// exports, all little-endian:
//   u32 kind | u64 rows | u64 cols | u64 scene fingerprint
//   rows*cols pairs of f64 (re, im), row-major.

namespace rismask {

struct BlockHeader {
  std::uint32_t kind = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint64_t fingerprint = 0;
};

inline constexpr std::size_t block_header_bytes = 4 + 8 + 8 + 8;

namespace detail {

template <class UInt>
void put_le(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> buf{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(buf.data(), buf.size());
}

template <class UInt>
UInt get_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw Error(ErrorCode::malformed_file, "truncated binary block");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_complex_block(std::ostream& out, const BlockHeader& h, const Eigen::MatrixXcd& data) {
  if (static_cast<std::uint64_t>(data.rows()) != h.rows || static_cast<std::uint64_t>(data.cols()) != h.cols)
    throw Error(ErrorCode::dimension_mismatch, "block header does not match matrix shape");
  detail::put_le(out, h.kind);
  detail::put_le(out, h.rows);
  detail::put_le(out, h.cols);
  detail::put_le(out, h.fingerprint);
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      detail::put_le(out, std::bit_cast<std::uint64_t>(data(r, c).real()));
      detail::put_le(out, std::bit_cast<std::uint64_t>(data(r, c).imag()));
    }
  if (!out) throw Error(ErrorCode::io, "write failed");
}

inline Eigen::MatrixXcd read_complex_block(std::istream& in, BlockHeader& h) {
  h.kind = detail::get_le<std::uint32_t>(in);
  h.rows = detail::get_le<std::uint64_t>(in);
  h.cols = detail::get_le<std::uint64_t>(in);
  h.fingerprint = detail::get_le<std::uint64_t>(in);
  if (h.rows > (std::uint64_t{1} << 32) || h.cols > (std::uint64_t{1} << 32))
    throw Error(ErrorCode::malformed_file, "implausible block shape");
  Eigen::MatrixXcd data(static_cast<Eigen::Index>(h.rows), static_cast<Eigen::Index>(h.cols));
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      const double re = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
      const double im = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
      data(r, c) = {re, im};
    }
  return data;
}

inline void write_block_file(const std::string& path, const BlockHeader& h, const Eigen::MatrixXcd& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_complex_block(out, h, data);
}

inline Eigen::MatrixXcd read_block_file(const std::string& path, BlockHeader& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_complex_block(in, h);
}

inline void save_kernel(const std::string& path, const KernelMatrix& k) {
  write_block_file(path,
                   {static_cast<std::uint32_t>(k.kind), static_cast<std::uint64_t>(k.rows()),
                    static_cast<std::uint64_t>(k.cols()), k.fingerprint},
                   k.entries);
}

inline KernelMatrix load_kernel(const std::string& path) {
  BlockHeader h;
  KernelMatrix k;
  k.entries = read_block_file(path, h);
  if (h.kind > 1) throw Error(ErrorCode::malformed_file, "unknown kernel kind in " + path);
  k.kind = static_cast<KernelKind>(h.kind);
  k.fingerprint = h.fingerprint;
  return k;
}

/// Loads a cached kernel if it matches the scene fingerprint, otherwise
/// assembles it and refreshes the cache file.
inline KernelMatrix cached_kernel(const std::string& path, const ValidatedScene& scene,
                                  const SampleGrids& grids, const KernelOptions& opt = {}) {
  if (std::ifstream probe(path, std::ios::binary); probe) {
    try {
      BlockHeader h;
      auto data = read_complex_block(probe, h);
      if (h.fingerprint == scene_fingerprint(scene.config()) &&
          static_cast<Eigen::Index>(h.rows) == static_cast<Eigen::Index>(grids.target_points.size()) &&
          static_cast<Eigen::Index>(h.cols) == static_cast<Eigen::Index>(grids.ris_points.size()) &&
          h.kind <= 1) {
        return {std::move(data), static_cast<KernelKind>(h.kind), h.fingerprint};
      }
    } catch (const Error&) {
      // stale or truncated cache, rebuild below
    }
  }
  auto k = assemble_kernel(scene, grids, opt);
  save_kernel(path, k);
  return k;
}

}  // namespace rismask
