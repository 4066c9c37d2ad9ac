#pragma once

#include <cmath>
#include <vector>

#include "seareg/colour/camera.hpp"
#include "seareg/colour/convex_hull.hpp"
#include "seareg/core/point_cloud.hpp"
#include "seareg/submap/submap.hpp"

namespace seareg {

/// Hidden point removal by spherical flipping. Each point p (relative to the
/// camera) maps to p + 2 (R - |p|) p/|p| with R = max|p| * 10^gamma; points
/// whose image is a vertex of the convex hull of the flipped set plus the
/// camera centre are visible. Returns sorted indices.
inline std::vector<std::size_t> visible_points(const std::vector<Vec3>& points, const Vec3& camera_position,
                                               double gamma = 2.0) {
  if (points.empty()) throw Error(Errc::InvalidArgument, "visibility needs a non-empty cloud");
  double max_range = 0.0;
  for (const auto& p : points) {
    const double r = (p - camera_position).norm();
    if (!(r > 0.0)) throw Error(Errc::InvalidArgument, "camera coincides with a point");
    max_range = std::max(max_range, r);
  }
  std::vector<std::size_t> all(points.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  // Sets of at most three points are trivially extreme.
  if (points.size() <= 3) return all;

  const double radius = max_range * std::pow(10.0, gamma);
  std::vector<Vec3> flipped;
  flipped.reserve(points.size() + 1);
  for (const auto& p : points) {
    const Vec3 d = p - camera_position;
    const double n = d.norm();
    flipped.push_back(d + 2.0 * (radius - n) * d / n);
  }
  flipped.push_back(Vec3::Zero());
  const ConvexHull hull(flipped);
  std::vector<std::size_t> out;
  for (auto v : hull.vertices())
    if (v < points.size()) out.push_back(v);
  return out;
}

inline std::vector<std::size_t> visible_points(const PointCloud& c, const Vec3& camera_position, double gamma = 2.0) {
  return visible_points(c.points, camera_position, gamma);
}

struct ColourCandidate {
  Vec3 colour;  // channels in [0,1]
  double weight = 0.0;
};

/// Weighted mean of the candidates, per channel.
inline Vec3 fuse_colours(const std::vector<ColourCandidate>& cands) {
  Vec3 acc = Vec3::Zero();
  double wsum = 0.0;
  for (const auto& c : cands) {
    if (!(c.weight >= 0.0)) throw Error(Errc::InvalidArgument, "negative colour weight");
    acc += c.weight * c.colour;
    wsum += c.weight;
  }
  if (!(wsum > 0.0)) throw Error(Errc::NoCandidates, "no colour candidate with positive weight");
  Vec3 out = acc / wsum;
  // Keep the result inside the candidates' per-channel range despite rounding.
  for (int k = 0; k < 3; ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : cands)
      if (c.weight > 0.0) {
        lo = std::min(lo, c.colour[k]);
        hi = std::max(hi, c.colour[k]);
      }
    out[k] = std::clamp(out[k], lo, hi);
  }
  return out;
}

struct ColourizeParams {
  double gamma = 2.0;        // HPR radius exponent
  double sigma_frac = 0.25;  // Gaussian spread as a fraction of image size
};

/// Colours a submap from posed images: per image the cloud is moved into the
/// camera frame, occluded points are removed, survivors are projected and
/// their pixel colours become weighted candidates. Fusion happens in linear
/// RGB; the result is re-encoded to sRGB. Points never seen are flagged.
inline PointCloud colourize_submap(const PointCloud& c, const std::vector<PosedImage>& images,
                                   const CameraModel& cam, const SensorRig& rig, const ColourizeParams& params = {}) {
  cam.validate();
  std::vector<Vec3> acc(c.size(), Vec3::Zero());
  std::vector<double> wsum(c.size(), 0.0);
  std::vector<Vec3> pts_cam;
  std::vector<std::size_t> in_view;
  std::vector<Vec2> pixels;
  for (const auto& img : images) {
    if (img.image.width != cam.width || img.image.height != cam.height)
      throw Error(Errc::InvalidArgument, "image size differs from camera model");
    const RigidTransform cam_from_submap = (img.submap_from_body * rig.body_from_camera).inverse();
    pts_cam.clear();
    in_view.clear();
    pixels.clear();
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Vec3 q = cam_from_submap.apply(c.points[i]);
      if (const auto px = project(cam, q)) {
        in_view.push_back(i);
        pts_cam.push_back(q);
        pixels.push_back(*px);
      }
    }
    if (in_view.empty()) continue;
    std::vector<std::size_t> vis;
    try {
      vis = visible_points(pts_cam, Vec3::Zero(), params.gamma);
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateHull) throw;
      log::warn("colourize: degenerate visibility hull, image skipped");
      continue;
    }
    for (auto k : vis) {
      const std::size_t i = in_view[k];
      const double w = gaussian_weight(cam, pixels[k], params.sigma_frac);
      acc[i] += w * srgb_to_linear(img.image.sample(pixels[k]));
      wsum[i] += w;
    }
  }
  PointCloud out = c;
  out.colours.assign(c.size(), Vec3::Zero());
  out.colour_valid.assign(c.size(), 0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (wsum[i] > 0.0) {
      out.colours[i] = linear_to_srgb(Vec3((acc[i] / wsum[i]).cwiseMax(0.0).cwiseMin(1.0)));
      out.colour_valid[i] = 1;
    }
  }
  return out;
}

}  // namespace seareg
