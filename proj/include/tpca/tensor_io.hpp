#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "tpca/tensor.hpp"

namespace tpca {

// Binary tensor file: magic "TPC3", u32 version = 1, u64 n, then n^3
// little-endian IEEE-754 doubles with the last index fastest.

inline constexpr char kTensorMagic[4] = {'T', 'P', 'C', '3'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;

namespace detail {

inline std::uint64_t to_le64(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xFF);
  return r;
}
inline std::uint32_t to_le32(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
}

}  // namespace detail

inline void write_tpc3(const Tensor3& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_tpc3: cannot open '" + path + "' for writing");
  f.write(kTensorMagic, 4);
  const std::uint32_t ver = detail::to_le32(kTensorFormatVersion);
  f.write(reinterpret_cast<const char*>(&ver), 4);
  const std::uint64_t n = detail::to_le64(static_cast<std::uint64_t>(t.dim()));
  f.write(reinterpret_cast<const char*>(&n), 8);
  if constexpr (std::endian::native == std::endian::little) {
    f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint64_t bits = detail::to_le64(std::bit_cast<std::uint64_t>(t.data()[i]));
      f.write(reinterpret_cast<const char*>(&bits), 8);
    }
  }
  if (!f) throw std::runtime_error("write_tpc3: write failed for '" + path + "'");
}

inline Tensor3 read_tpc3(const std::string& path, std::int64_t max_dim = kTensorMaxDim) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_tpc3: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw std::runtime_error("read_tpc3: bad magic in '" + path + "'");
  std::uint32_t ver = 0;
  f.read(reinterpret_cast<char*>(&ver), 4);
  ver = detail::to_le32(ver);
  if (!f || ver != kTensorFormatVersion)
    throw std::runtime_error("read_tpc3: unsupported version in '" + path + "'");
  std::uint64_t n_raw = 0;
  f.read(reinterpret_cast<char*>(&n_raw), 8);
  const std::uint64_t n = detail::to_le64(n_raw);
  if (!f || n < 1) throw std::runtime_error("read_tpc3: bad dimension in '" + path + "'");

  const std::uintmax_t expected = 16 + static_cast<std::uintmax_t>(n) * n * n * 8;
  std::error_code ec;
  const std::uintmax_t actual = std::filesystem::file_size(path, ec);
  if (ec || actual != expected)
    throw std::runtime_error("read_tpc3: file length does not match header in '" + path + "'");

  Tensor3 t(static_cast<std::int64_t>(n), max_dim);
  if constexpr (std::endian::native == std::endian::little) {
    f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint64_t bits = 0;
      f.read(reinterpret_cast<char*>(&bits), 8);
      t.data()[i] = std::bit_cast<double>(detail::to_le64(bits));
    }
  }
  if (!f) throw std::runtime_error("read_tpc3: truncated payload in '" + path + "'");
  return t;
}

}  // namespace tpca
