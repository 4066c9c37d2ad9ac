#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "seareg/core/point_cloud.hpp"
#include "seareg/core/spatial_index.hpp"

namespace seareg {

using VoxelKey = std::array<std::int64_t, 3>;

inline VoxelKey voxel_key(const Vec3& p, double grid) {
  return {static_cast<std::int64_t>(std::floor(p.x() / grid)),
          static_cast<std::int64_t>(std::floor(p.y() / grid)),
          static_cast<std::int64_t>(std::floor(p.z() / grid))};
}

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (auto v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

/// Voxel grid filter: one point per occupied voxel at the centroid of its
/// members. Normals and colours are averaged over valid members; averaged
/// normals are renormalized. Output is ordered by voxel key.
inline PointCloud voxel_downsample(const PointCloud& c, double grid) {
  if (!(grid > 0.0)) throw Error(Errc::InvalidArgument, "voxel grid must be > 0");
  struct Acc {
    Vec3 p = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    Vec3 rgb = Vec3::Zero();
    std::size_t count = 0, n_count = 0, c_count = 0;
  };
  std::unordered_map<VoxelKey, Acc, VoxelKeyHash> cells;
  cells.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    Acc& a = cells[voxel_key(c.points[i], grid)];
    a.p += c.points[i];
    ++a.count;
    if (c.normalValid(i)) {
      a.n += c.normals[i];
      ++a.n_count;
    }
    if (c.colourValid(i)) {
      a.rgb += c.colours[i];
      ++a.c_count;
    }
  }
  std::vector<const std::pair<const VoxelKey, Acc>*> sorted;
  sorted.reserve(cells.size());
  for (const auto& kv : cells) sorted.push_back(&kv);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->first < b->first; });

  PointCloud out;
  out.points.reserve(sorted.size());
  if (c.hasNormals()) {
    out.normals.reserve(sorted.size());
    out.normal_valid.reserve(sorted.size());
  }
  if (c.hasColours()) {
    out.colours.reserve(sorted.size());
    out.colour_valid.reserve(sorted.size());
  }
  for (const auto* kv : sorted) {
    const Acc& a = kv->second;
    Vec3 centroid = a.p / static_cast<double>(a.count);
    // Rounding can put the centroid a hair outside the cell; clamp it back.
    for (int d = 0; d < 3; ++d) {
      const double lo = static_cast<double>(kv->first[d]) * grid;
      centroid[d] = std::clamp(centroid[d], lo, std::nextafter(lo + grid, lo));
    }
    out.points.push_back(centroid);
    if (c.hasNormals()) {
      const double len = a.n.norm();
      const bool ok = a.n_count > 0 && len > 1e-12;
      out.normals.push_back(ok ? Vec3(a.n / len) : Vec3::Zero());
      out.normal_valid.push_back(ok ? 1 : 0);
    }
    if (c.hasColours()) {
      const bool ok = a.c_count > 0;
      out.colours.push_back(ok ? Vec3(a.rgb / static_cast<double>(a.c_count)) : Vec3::Zero());
      out.colour_valid.push_back(ok ? 1 : 0);
    }
  }
  return out;
}

/// Mean and covariance of a neighbourhood.
inline void mean_and_covariance(const std::vector<Vec3>& pts, const std::vector<std::size_t>& idx, Vec3& mean,
                                Mat3& cov) {
  mean.setZero();
  for (auto i : idx) mean += pts[i];
  mean /= static_cast<double>(idx.size());
  cov.setZero();
  for (auto i : idx) {
    const Vec3 d = pts[i] - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(idx.size());
}

/// Per-point normal from the smallest eigenvector of the neighbourhood
/// covariance within `radius`, oriented toward `viewpoint`. Points with fewer
/// than three neighbours (themselves included) get a flagged normal.
inline PointCloud estimate_normals(const PointCloud& c, const SpatialIndex& index, double radius, const Vec3& viewpoint) {
  if (!(radius > 0.0)) throw Error(Errc::InvalidArgument, "normal radius must be > 0");
  PointCloud out = c;
  out.normals.assign(c.size(), Vec3::Zero());
  out.normal_valid.assign(c.size(), 0);
  std::vector<std::size_t> nb;
  Eigen::SelfAdjointEigenSolver<Mat3> solver;
  for (std::size_t i = 0; i < c.size(); ++i) {
    index.radiusUnordered(c.points[i], radius, nb);
    if (nb.size() < 3) continue;
    Vec3 mean;
    Mat3 cov;
    mean_and_covariance(c.points, nb, mean, cov);
    solver.compute(cov);
    Vec3 n = solver.eigenvectors().col(0).normalized();
    if (!n.allFinite()) continue;
    if (n.dot(viewpoint - c.points[i]) < 0.0) n = -n;
    out.normals[i] = n;
    out.normal_valid[i] = 1;
  }
  return out;
}

inline PointCloud estimate_normals(const PointCloud& c, double radius, const Vec3& viewpoint) {
  const SpatialIndex index(c.points);
  return estimate_normals(c, index, radius, viewpoint);
}

}  // namespace seareg
