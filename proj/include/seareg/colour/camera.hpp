#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "seareg/core/error.hpp"
#include "seareg/core/se3.hpp"

namespace seareg {

using Vec2 = Eigen::Vector2d;

/// Pinhole intrinsics with zero skew.
struct CameraModel {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  Mat3 K() const {
    Mat3 k;
    k << fx, 0.0, cx,
         0.0, fy, cy,
         0.0, 0.0, 1.0;
    return k;
  }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(Errc::InvalidArgument, "focal lengths must be > 0");
    if (width <= 0 || height <= 0) throw Error(Errc::InvalidArgument, "raster size must be > 0");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
      throw Error(Errc::InvalidArgument, "principal point outside raster");
  }

  bool inRaster(const Vec2& px) const { return px.x() >= 0.0 && px.x() < width && px.y() >= 0.0 && px.y() < height; }
};

/// [u', v', w]^T = K p, pixel = (u'/w, v'/w). Empty when w <= 0.
inline std::optional<Vec2> pinhole(const CameraModel& cam, const Vec3& p) {
  const Vec3 h = cam.K() * p;
  if (!(h.z() > 0.0)) return std::nullopt;
  return Vec2(h.x() / h.z(), h.y() / h.z());
}

/// Projection that also requires the pixel to fall inside the raster;
/// std::nullopt means OutOfView.
inline std::optional<Vec2> project(const CameraModel& cam, const Vec3& p) {
  auto px = pinhole(cam, p);
  if (!px || !cam.inRaster(*px)) return std::nullopt;
  return px;
}

/// Point at depth w (camera z) that projects to `px`.
inline Vec3 unproject(const CameraModel& cam, const Vec2& px, double w) {
  return {(px.x() - cam.cx) / cam.fx * w, (px.y() - cam.cy) / cam.fy * w, w};
}

/// 2D Gaussian over the image, peaked at the optical centre, with standard
/// deviations sigma_frac * width and sigma_frac * height.
inline double gaussian_weight(const CameraModel& cam, const Vec2& px, double sigma_frac) {
  const double su = sigma_frac * cam.width;
  const double sv = sigma_frac * cam.height;
  const double du = px.x() - cam.cx;
  const double dv = px.y() - cam.cy;
  return std::exp(-(du * du / (2.0 * su * su) + dv * dv / (2.0 * sv * sv)));
}

/// 8-bit RGB raster, row-major.
struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3];
  }

  /// sRGB-encoded colour in [0,1] of the pixel containing `px`.
  Vec3 sample(const Vec2& px) const {
    const int x = std::clamp(static_cast<int>(std::floor(px.x())), 0, width - 1);
    const int y = std::clamp(static_cast<int>(std::floor(px.y())), 0, height - 1);
    const auto* c = at(x, y);
    return Vec3(c[0], c[1], c[2]) / 255.0;
  }
};

/// Image with the pose of the vehicle body at capture, expressed in the
/// submap frame (submap-from-body). The camera extrinsic comes from the rig.
struct PosedImage {
  Image image;
  RigidTransform submap_from_body;
};

}  // namespace seareg
