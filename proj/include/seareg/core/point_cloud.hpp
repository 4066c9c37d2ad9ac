#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "seareg/core/error.hpp"
#include "seareg/core/se3.hpp"

namespace seareg {

/// Ordered set of 3D points with optional per-point normals and RGB colours.
///
/// Normals and colours carry a validity mask so that flagged entries (points
/// with too few neighbours for a normal, points never seen by a camera) keep
/// their index alignment with `points`. Colours are stored sRGB-encoded in
/// [0, 1]; conversion to linear RGB happens where colours are combined.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> normal_valid;
  std::vector<Vec3> colours;
  std::vector<std::uint8_t> colour_valid;

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool hasNormals() const { return !normals.empty(); }
  bool hasColours() const { return !colours.empty(); }

  bool normalValid(std::size_t i) const { return hasNormals() && normal_valid[i] != 0; }
  bool colourValid(std::size_t i) const { return hasColours() && colour_valid[i] != 0; }

  void setNormals(std::vector<Vec3> n) {
    normals = std::move(n);
    normal_valid.assign(normals.size(), 1);
  }
  void setColours(std::vector<Vec3> c) {
    colours = std::move(c);
    colour_valid.assign(colours.size(), 1);
  }
  void clearNormals() {
    normals.clear();
    normal_valid.clear();
  }
  void clearColours() {
    colours.clear();
    colour_valid.clear();
  }

  /// Appends a point, extending attribute arrays with flagged entries.
  void push_back(const Vec3& p) {
    points.push_back(p);
    if (hasNormals()) {
      normals.emplace_back(Vec3::Zero());
      normal_valid.push_back(0);
    }
    if (hasColours()) {
      colours.emplace_back(Vec3::Zero());
      colour_valid.push_back(0);
    }
  }

  /// Throws InvalidArgument if the structural invariants do not hold.
  void validate() const {
    if (hasNormals() && (normals.size() != points.size() || normal_valid.size() != points.size()))
      throw Error(Errc::InvalidArgument, "normals length differs from points");
    if (hasColours() && (colours.size() != points.size() || colour_valid.size() != points.size()))
      throw Error(Errc::InvalidArgument, "colours length differs from points");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].allFinite()) throw Error(Errc::InvalidArgument, "non-finite point");
      if (normalValid(i) && std::abs(normals[i].norm() - 1.0) > 1e-6)
        throw Error(Errc::InvalidArgument, "normal is not unit length");
      if (colourValid(i) && (colours[i].minCoeff() < 0.0 || colours[i].maxCoeff() > 1.0))
        throw Error(Errc::InvalidArgument, "colour outside [0,1]");
    }
  }
};

/// Applies a rigid transform to points and normals.
inline PointCloud transformed(const PointCloud& c, const RigidTransform& t) {
  PointCloud out = c;
  for (auto& p : out.points) p = t.apply(p);
  for (auto& n : out.normals) n = t.rotate(n);
  return out;
}

/// Subset of a cloud by index, attributes carried along.
inline PointCloud select(const PointCloud& c, const std::vector<std::size_t>& indices) {
  PointCloud out;
  out.points.reserve(indices.size());
  for (auto i : indices) out.points.push_back(c.points[i]);
  if (c.hasNormals()) {
    for (auto i : indices) {
      out.normals.push_back(c.normals[i]);
      out.normal_valid.push_back(c.normal_valid[i]);
    }
  }
  if (c.hasColours()) {
    for (auto i : indices) {
      out.colours.push_back(c.colours[i]);
      out.colour_valid.push_back(c.colour_valid[i]);
    }
  }
  return out;
}

inline PointCloud concatenate(const PointCloud& a, const PointCloud& b) {
  PointCloud out = a;
  const bool normals = a.hasNormals() && b.hasNormals();
  const bool colours = a.hasColours() && b.hasColours();
  if (!normals) out.clearNormals();
  if (!colours) out.clearColours();
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  if (normals) {
    out.normals.insert(out.normals.end(), b.normals.begin(), b.normals.end());
    out.normal_valid.insert(out.normal_valid.end(), b.normal_valid.begin(), b.normal_valid.end());
  }
  if (colours) {
    out.colours.insert(out.colours.end(), b.colours.begin(), b.colours.end());
    out.colour_valid.insert(out.colour_valid.end(), b.colour_valid.begin(), b.colour_valid.end());
  }
  return out;
}

// sRGB transfer functions on a single channel in [0,1].
inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}
inline double linear_to_srgb(double c) {
  c = std::clamp(c, 0.0, 1.0);
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}
inline Vec3 srgb_to_linear(const Vec3& c) {
  return {srgb_to_linear(c.x()), srgb_to_linear(c.y()), srgb_to_linear(c.z())};
}
inline Vec3 linear_to_srgb(const Vec3& c) {
  return {linear_to_srgb(c.x()), linear_to_srgb(c.y()), linear_to_srgb(c.z())};
}

/// Rec. 709 luma of a linear RGB colour.
inline double luma(const Vec3& linear_rgb) {
  return 0.2126 * linear_rgb.x() + 0.7152 * linear_rgb.y() + 0.0722 * linear_rgb.z();
}

}  // namespace seareg
