#pragma once

#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

#include "seareg/descriptors/descriptors.hpp"

namespace seareg::io {

// Layout, little-endian: "SRDS", u32 version, u32 kind, u32 dim, u64 count,
// count x u64 keypoint index, count x u8 empty flag, count*dim x f32 row-major.
inline constexpr char kDescriptorMagic[4] = {'S', 'R', 'D', 'S'};
inline constexpr std::uint32_t kDescriptorVersion = 1;

namespace detail {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(Errc::Parse, "truncated descriptor file");
  return v;
}

}  // namespace detail

inline void write_descriptors(std::ostream& out, const DescriptorSet& d) {
  out.write(kDescriptorMagic, 4);
  detail::put<std::uint32_t>(out, kDescriptorVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d.kind()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d.dimension()));
  detail::put<std::uint64_t>(out, d.size());
  for (auto i : d.indices()) detail::put<std::uint64_t>(out, i);
  for (std::size_t r = 0; r < d.size(); ++r) detail::put<std::uint8_t>(out, d.emptyRow(r) ? 1 : 0);
  for (std::size_t r = 0; r < d.size(); ++r)
    for (std::size_t k = 0; k < d.dimension(); ++k)
      detail::put<float>(out, static_cast<float>(d.row(r)[static_cast<Eigen::Index>(k)]));
}

inline DescriptorSet read_descriptors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kDescriptorMagic, 4) != 0) throw Error(Errc::Parse, "not a descriptor file");
  if (detail::get<std::uint32_t>(in) != kDescriptorVersion) throw Error(Errc::Parse, "unsupported descriptor file version");
  const auto kind_raw = detail::get<std::uint32_t>(in);
  if (kind_raw >= kAllDescriptors.size()) throw Error(Errc::Parse, "unknown descriptor kind in file");
  const auto kind = static_cast<DescriptorKind>(kind_raw);
  if (detail::get<std::uint32_t>(in) != descriptor_dimension(kind))
    throw Error(Errc::DimensionMismatch, "descriptor file dimension does not match its kind");
  const auto count = detail::get<std::uint64_t>(in);
  std::vector<std::size_t> indices(count);
  for (auto& i : indices) i = detail::get<std::uint64_t>(in);
  DescriptorSet d(kind, std::move(indices));
  for (std::size_t r = 0; r < count; ++r) d.setEmpty(r, detail::get<std::uint8_t>(in) != 0);
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t k = 0; k < d.dimension(); ++k) d.row(r)[static_cast<Eigen::Index>(k)] = detail::get<float>(in);
  return d;
}

inline void write_descriptors(const std::string& path, const DescriptorSet& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  write_descriptors(out, d);
}

inline DescriptorSet read_descriptors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path);
  return read_descriptors(in);
}

/// Debug export: `index,empty,d0,...,d{dim-1}`.
inline void write_descriptors_csv(std::ostream& out, const DescriptorSet& d) {
  out << "index,empty";
  for (std::size_t k = 0; k < d.dimension(); ++k) out << ",d" << k;
  out << '\n' << std::setprecision(9);
  for (std::size_t r = 0; r < d.size(); ++r) {
    out << d.indices()[r] << ',' << (d.emptyRow(r) ? 1 : 0);
    for (std::size_t k = 0; k < d.dimension(); ++k) out << ',' << d.row(r)[static_cast<Eigen::Index>(k)];
    out << '\n';
  }
}

}  // namespace seareg::io
