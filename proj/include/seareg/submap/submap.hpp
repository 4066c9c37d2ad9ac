#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "seareg/core/filters.hpp"
#include "seareg/core/point_cloud.hpp"
#include "seareg/core/se3.hpp"

namespace seareg {

/// One laser profile: points resolved in the laser frame at time t.
struct ScanLine {
  double t = 0.0;
  std::vector<Vec3> points;
};

struct TimedPose {
  double t = 0.0;
  RigidTransform world_from_body;
};

/// Time-stamped world-from-body poses, strictly increasing in time.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TimedPose> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 1; i < samples_.size(); ++i)
      if (!(samples_[i].t > samples_[i - 1].t))
        throw Error(Errc::InvalidArgument, "trajectory timestamps must be strictly increasing");
  }

  const std::vector<TimedPose>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double startTime() const { return samples_.front().t; }
  double endTime() const { return samples_.back().t; }
  bool covers(double t) const { return samples_.size() >= 2 && t >= startTime() && t <= endTime(); }

  /// Interpolated pose: linear in translation, slerp in rotation.
  RigidTransform pose_at(double t) const {
    if (samples_.size() < 2) throw Error(Errc::OutOfRange, "trajectory needs at least two samples");
    if (!covers(t)) throw Error(Errc::OutOfRange, "time outside trajectory span");
    auto hi = std::lower_bound(samples_.begin(), samples_.end(), t,
                               [](const TimedPose& s, double v) { return s.t < v; });
    if (hi->t == t) return hi->world_from_body;
    const auto lo = hi - 1;
    const double a = (t - lo->t) / (hi->t - lo->t);
    const Eigen::Quaterniond q =
        lo->world_from_body.quaternion().slerp(a, hi->world_from_body.quaternion());
    const Vec3 p = (1.0 - a) * lo->world_from_body.translation() + a * hi->world_from_body.translation();
    return {q, p};
  }

  /// Trajectory with every pose pre-multiplied by a fixed transform.
  Trajectory leftMultiplied(const RigidTransform& w) const {
    std::vector<TimedPose> s = samples_;
    for (auto& p : s) p.world_from_body = w * p.world_from_body;
    return Trajectory(std::move(s));
  }

 private:
  std::vector<TimedPose> samples_;
};

inline RigidTransform pose_at(const Trajectory& traj, double t) { return traj.pose_at(t); }

/// Static extrinsics of the laser and the camera relative to the body.
struct SensorRig {
  RigidTransform body_from_laser;
  RigidTransform body_from_camera;
};

struct SubmapSpec {
  double loop_closure_time = 0.0;
  double half_extent = 2.5;  // metres, applied to body-frame x and y
  double voxel_grid = 0.05;  // metres
};

/// Registers scan lines into the body frame at the loop-closure time,
///   p_tau = T(tau)^-1 * T(t_k) * T_body_laser * p_laser,
/// keeps points within +-half_extent horizontally, then voxel-downsamples.
inline PointCloud build_submap(const std::vector<ScanLine>& lines, const Trajectory& traj, const SensorRig& rig,
                               const SubmapSpec& spec) {
  if (!(spec.half_extent > 0.0) || !(spec.voxel_grid > 0.0))
    throw Error(Errc::InvalidArgument, "submap extent and grid must be > 0");
  const RigidTransform tau_from_world = traj.pose_at(spec.loop_closure_time).inverse();
  PointCloud raw;
  for (const auto& line : lines) {
    if (!traj.covers(line.t)) continue;
    const RigidTransform tau_from_laser = tau_from_world * traj.pose_at(line.t) * rig.body_from_laser;
    for (const auto& p : line.points) {
      const Vec3 q = tau_from_laser.apply(p);
      if (std::abs(q.x()) <= spec.half_extent && std::abs(q.y()) <= spec.half_extent) raw.points.push_back(q);
    }
  }
  if (raw.empty()) throw Error(Errc::EmptySubmap, "no points inside the submap window");
  return voxel_downsample(raw, spec.voxel_grid);
}

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation sigma to every
/// coordinate. Normals are dropped since they no longer describe the points.
inline PointCloud add_noise(const PointCloud& c, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(Errc::InvalidArgument, "noise sigma must be >= 0");
  if (sigma == 0.0) return c;
  PointCloud out = c;
  out.clearNormals();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  for (auto& p : out.points) {
    p.x() += g(rng);
    p.y() += g(rng);
    p.z() += g(rng);
  }
  return out;
}

}  // namespace seareg
