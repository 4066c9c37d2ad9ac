#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "seareg/core/point_cloud.hpp"

namespace seareg::io {

enum class PlyFormat { Ascii, BinaryLittleEndian };

namespace detail {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline PlyType parsePlyType(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  throw Error(Errc::Parse, "unknown PLY type '" + s + "'");
}

inline std::size_t plyTypeSize(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

template <typename T>
T readLE(std::istream& in) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(Errc::Parse, "unexpected end of PLY binary data");
  return v;
}

inline double readBinary(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::Int8: return readLE<std::int8_t>(in);
    case PlyType::UInt8: return readLE<std::uint8_t>(in);
    case PlyType::Int16: return readLE<std::int16_t>(in);
    case PlyType::UInt16: return readLE<std::uint16_t>(in);
    case PlyType::Int32: return readLE<std::int32_t>(in);
    case PlyType::UInt32: return readLE<std::uint32_t>(in);
    case PlyType::Float32: return readLE<float>(in);
    case PlyType::Float64: return readLE<double>(in);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

template <typename T>
void writeLE(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline std::uint8_t toByte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// Reads a PLY point cloud (ASCII or binary little-endian). Recognized vertex
/// properties: x,y,z; nx,ny,nz; red,green,blue; alpha (0 flags the colour as
/// absent). Anything else is skipped with a warning.
inline PointCloud read_ply(std::istream& in) {
  using namespace detail;
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(Errc::Parse, "missing 'ply' magic");
  PlyFormat format = PlyFormat::Ascii;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") format = PlyFormat::Ascii;
      else if (f == "binary_little_endian") format = PlyFormat::BinaryLittleEndian;
      else throw Error(Errc::Parse, "unsupported PLY format '" + f + "'");
    } else if (key == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw Error(Errc::Parse, "property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parsePlyType(ct);
        p.type = parsePlyType(it);
      } else {
        p.type = parsePlyType(t);
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (key == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw Error(Errc::Parse, "PLY header not terminated");

  PointCloud cloud;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1, ir = -1, ig = -1, ib = -1, ia = -1;
    if (is_vertex) {
      for (int k = 0; k < static_cast<int>(e.props.size()); ++k) {
        const auto& n = e.props[static_cast<std::size_t>(k)].name;
        if (n == "x") ix = k;
        else if (n == "y") iy = k;
        else if (n == "z") iz = k;
        else if (n == "nx") inx = k;
        else if (n == "ny") iny = k;
        else if (n == "nz") inz = k;
        else if (n == "red" || n == "r") ir = k;
        else if (n == "green" || n == "g") ig = k;
        else if (n == "blue" || n == "b") ib = k;
        else if (n == "alpha" || n == "a") ia = k;
        else log::warn("PLY: skipping unknown vertex property '" + n + "'");
      }
      if (ix < 0 || iy < 0 || iz < 0) throw Error(Errc::Parse, "PLY vertex element lacks x/y/z");
    } else {
      log::warn("PLY: skipping element '" + e.name + "'");
    }
    const bool has_n = inx >= 0 && iny >= 0 && inz >= 0;
    const bool has_c = ir >= 0 && ig >= 0 && ib >= 0;
    const auto colourScale = [&](int k) {
      const auto t = e.props[static_cast<std::size_t>(k)].type;
      return (t == PlyType::Float32 || t == PlyType::Float64) ? 1.0 : 1.0 / 255.0;
    };

    std::vector<double> vals(e.props.size());
    for (std::size_t row = 0; row < e.count; ++row) {
      if (format == PlyFormat::Ascii) {
        if (!std::getline(in, line)) throw Error(Errc::Parse, "unexpected end of PLY ascii data");
        std::istringstream ls(line);
        for (std::size_t k = 0; k < e.props.size(); ++k) {
          if (e.props[k].is_list) {
            std::size_t n = 0;
            ls >> n;
            double skip;
            for (std::size_t j = 0; j < n; ++j) ls >> skip;
            vals[k] = 0.0;
          } else {
            ls >> vals[k];
          }
        }
        if (!ls && !ls.eof()) throw Error(Errc::Parse, "malformed PLY ascii row");
      } else {
        for (std::size_t k = 0; k < e.props.size(); ++k) {
          if (e.props[k].is_list) {
            const auto n = static_cast<std::size_t>(readBinary(in, e.props[k].count_type));
            in.ignore(static_cast<std::streamsize>(n * plyTypeSize(e.props[k].type)));
            vals[k] = 0.0;
          } else {
            vals[k] = readBinary(in, e.props[k].type);
          }
        }
      }
      if (!is_vertex) continue;
      const auto v = [&](int k) { return vals[static_cast<std::size_t>(k)]; };
      cloud.points.emplace_back(v(ix), v(iy), v(iz));
      if (has_n) {
        Vec3 n(v(inx), v(iny), v(inz));
        const double len = n.norm();
        const bool ok = len > 0.5 && n.allFinite();
        cloud.normals.push_back(ok ? Vec3(n / len) : Vec3::Zero());
        cloud.normal_valid.push_back(ok ? 1 : 0);
      }
      if (has_c) {
        const bool ok = ia < 0 || v(ia) > 0.0;
        cloud.colours.emplace_back(v(ir) * colourScale(ir), v(ig) * colourScale(ig), v(ib) * colourScale(ib));
        cloud.colour_valid.push_back(ok ? 1 : 0);
      }
    }
  }
  cloud.validate();
  return cloud;
}

inline PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return read_ply(in);
}

/// Writes x,y,z as float32; nx,ny,nz as float32 when normals exist (flagged
/// normals written as zero); red,green,blue as uint8 when colours exist, plus
/// an alpha channel (0 = uncoloured) when any colour is flagged.
inline void write_ply(std::ostream& out, const PointCloud& c, PlyFormat format = PlyFormat::BinaryLittleEndian) {
  using namespace detail;
  const bool normals = c.hasNormals();
  const bool colours = c.hasColours();
  const bool alpha = colours && std::any_of(c.colour_valid.begin(), c.colour_valid.end(), [](auto v) { return v == 0; });
  out << "ply\n"
      << "format " << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << c.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
  if (colours) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (alpha) out << "property uchar alpha\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3& p = c.points[i];
    const Vec3 n = normals && c.normal_valid[i] ? c.normals[i] : Vec3::Zero();
    if (format == PlyFormat::Ascii) {
      out.precision(9);
      out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' ' << static_cast<float>(p.z());
      if (normals) out << ' ' << static_cast<float>(n.x()) << ' ' << static_cast<float>(n.y()) << ' ' << static_cast<float>(n.z());
      if (colours) {
        for (int k = 0; k < 3; ++k) out << ' ' << static_cast<int>(toByte(c.colours[i][k]));
      }
      if (alpha) out << ' ' << (c.colour_valid[i] ? 255 : 0);
      out << '\n';
    } else {
      for (int k = 0; k < 3; ++k) writeLE(out, static_cast<float>(p[k]));
      if (normals)
        for (int k = 0; k < 3; ++k) writeLE(out, static_cast<float>(n[k]));
      if (colours)
        for (int k = 0; k < 3; ++k) writeLE(out, toByte(c.colours[i][k]));
      if (alpha) writeLE(out, static_cast<std::uint8_t>(c.colour_valid[i] ? 255 : 0));
    }
  }
}

inline void write_ply(const std::string& path, const PointCloud& c, PlyFormat format = PlyFormat::BinaryLittleEndian) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  write_ply(out, c, format);
}

}  // namespace seareg::io
