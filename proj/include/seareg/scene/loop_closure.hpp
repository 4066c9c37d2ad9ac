#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "seareg/colour/camera.hpp"
#include "seareg/scene/scene.hpp"
#include "seareg/submap/submap.hpp"

namespace seareg {

/// Laser fan in the laser x-z plane, beams along +z at zero angle.
struct LaserModel {
  int rays = 268;
  double fan_half_angle = deg2rad(45.0);
  double range_noise = 0.0;  // standard deviation along the beam
  double max_range = 20.0;
};

/// Casts one line per `1/line_rate` seconds over [t0, t1]; hits are recorded in
/// the laser frame.
inline std::vector<ScanLine> simulate_scan(const Scene& scene, const Trajectory& traj, const SensorRig& rig,
                                           double line_rate, const LaserModel& laser = {}, double t0 = -1e300,
                                           double t1 = 1e300, std::uint64_t seed = 0) {
  if (!(line_rate > 0.0)) throw Error(Errc::InvalidArgument, "line rate must be > 0");
  if (laser.rays < 1) throw Error(Errc::InvalidArgument, "laser needs at least one ray");
  const double start = std::max(t0, traj.startTime()), end = std::min(t1, traj.endTime());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Vec3> beams;
  for (int i = 0; i < laser.rays; ++i) {
    const double a = laser.rays == 1 ? 0.0 : -laser.fan_half_angle + 2.0 * laser.fan_half_angle * i / (laser.rays - 1);
    beams.emplace_back(std::sin(a), 0.0, std::cos(a));
  }
  std::vector<ScanLine> lines;
  for (long k = 0;; ++k) {
    const double t = start + static_cast<double>(k) / line_rate;
    if (t > end) break;
    const RigidTransform world_from_laser = traj.pose_at(t) * rig.body_from_laser;
    ScanLine line{t, {}};
    for (const auto& b : beams) {
      const auto hit = scene.raycast(world_from_laser.translation(), world_from_laser.rotate(b), laser.max_range);
      if (!hit) continue;
      const double range = laser.range_noise > 0.0 ? hit->t + laser.range_noise * noise(rng) : hit->t;
      line.points.push_back(range * b);
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

inline RigidTransform downward_laser_mount() {
  Mat3 r;
  r << 0, 1, 0,
       1, 0, 0,
       0, 0, -1;
  return {r, Vec3(0.2, 0.0, -0.15)};
}

inline RigidTransform downward_camera_mount() {
  Mat3 r;
  r << 0, -1, 0,
      -1, 0, 0,
       0, 0, -1;
  return {r, Vec3(0.5, 0.0, -0.15)};
}

inline SensorRig default_rig() { return {downward_laser_mount(), downward_camera_mount()}; }

inline CameraModel default_case_camera() { return {110.0, 110.0, 80.0, 60.0, 160, 120}; }

struct CrossingGeometry {
  double heading_deg = 0.0;      // pass 1 course
  double angle_deg = 90.0;       // pass 2 course relative to pass 1
  double speed = 1.0;            // m/s
  double half_length = 4.0;      // metres of track either side of the crossing
  double altitude = 3.0;
  double wobble_deg = 1.5;       // roll/pitch oscillation amplitude
  double offset = 0.4;           // max crossing-point offset of pass 2, metres
  int images_per_pass = 0;
};

struct LoopClosureCase {
  std::string name;
  SceneSpec scene;
  CrossingGeometry geometry;
  Twist perturbation;
  std::uint64_t seed = 0;

  SensorRig rig;
  CameraModel camera;
  double tau1 = 0.0, tau2 = 0.0;
  Trajectory pass1;       // navigation == truth
  Trajectory pass2_true;
  Trajectory pass2_nav;   // drifted
  std::vector<ScanLine> lines1, lines2;
  std::vector<double> image_times1, image_times2;
  std::vector<PosedImage> images1, images2;  // poses are submap-from-body
  RigidTransform truth;   // submap 2 frame -> submap 1 frame

  /// Relative transform implied by navigation alone.
  RigidTransform initial() const { return pass1.pose_at(tau1).inverse() * pass2_nav.pose_at(tau2); }
};

namespace detail {

inline Trajectory straightPass(const Scene& scene, const CrossingGeometry& g, double heading, const Vec3& through,
                               double t_start, double tau, double phase) {
  const double duration = 2.0 * (tau - t_start);
  const Vec3 dir(std::cos(heading), std::sin(heading), 0.0);
  const double amp = deg2rad(g.wobble_deg);
  std::vector<TimedPose> samples;
  const int n = static_cast<int>(std::ceil(duration * 10.0));
  for (int k = 0; k <= n; ++k) {
    const double t = t_start + duration * k / n;
    const double s = g.speed * (t - tau);
    Vec3 p = through + s * dir;
    p.z() = scene.seabed(through.x(), through.y()) + g.altitude + 0.05 * std::sin(0.7 * t + phase);
    const Mat3 r = (Eigen::AngleAxisd(heading, Vec3::UnitZ()) *
                    Eigen::AngleAxisd(amp * std::sin(0.9 * t + phase), Vec3::UnitY()) *
                    Eigen::AngleAxisd(amp * std::sin(1.3 * t + 2.0 * phase), Vec3::UnitX()))
                       .toRotationMatrix();
    samples.push_back({t, RigidTransform(r, p)});
  }
  return Trajectory(std::move(samples));
}

inline std::vector<double> imageTimes(double tau, double half_span, int count) {
  std::vector<double> t;
  for (int k = 0; k < count; ++k) t.push_back(count == 1 ? tau : tau - half_span + 2.0 * half_span * k / (count - 1));
  return t;
}

}  // namespace detail

/// Two straight passes crossing near the origin. Pass 2's navigation is
/// corrupted by a rigid drift chosen so that the navigation-implied relative
/// transform differs from the truth by exactly `perturbation`.
inline LoopClosureCase make_loop_closure(const SceneSpec& spec, const CrossingGeometry& geometry,
                                         const Twist& perturbation, std::uint64_t seed, const Scene* prebuilt = nullptr) {
  if (!perturbation.isFinite() || perturbation.rot.norm() > deg2rad(10.0) + 1e-12 || perturbation.trans.norm() > 0.5 + 1e-12)
    throw Error(Errc::InvalidArgument, "perturbation must satisfy |rot| <= 10 deg and |trans| <= 0.5 m");
  std::optional<Scene> own;
  if (!prebuilt) own.emplace(spec);
  const Scene& scene = prebuilt ? *prebuilt : *own;

  std::mt19937_64 rng(seed ^ 0x5EA5EEDULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LoopClosureCase c;
  c.scene = spec;
  c.geometry = geometry;
  c.perturbation = perturbation;
  c.seed = seed;
  c.rig = default_rig();
  c.camera = default_case_camera();

  const double half_time = geometry.half_length / geometry.speed;
  const double h1 = deg2rad(geometry.heading_deg), h2 = deg2rad(geometry.heading_deg + geometry.angle_deg);
  c.tau1 = half_time;
  c.tau2 = 100.0 + half_time;
  const Vec3 through2(geometry.offset * u(rng), geometry.offset * u(rng), 0.0);
  c.pass1 = detail::straightPass(scene, geometry, h1, Vec3::Zero(), 0.0, c.tau1, 3.0 * u(rng));
  c.pass2_true = detail::straightPass(scene, geometry, h2, through2, 100.0, c.tau2, 3.0 * u(rng));

  const RigidTransform at2 = c.pass2_true.pose_at(c.tau2);
  const RigidTransform drift = at2 * se3_exp(perturbation).inverse() * at2.inverse();
  c.pass2_nav = c.pass2_true.leftMultiplied(drift);
  c.truth = c.pass1.pose_at(c.tau1).inverse() * at2;

  const double spacing = 1.0 / std::sqrt(spec.resolution);
  const double line_rate = geometry.speed / spacing;
  LaserModel laser;
  laser.rays = std::max(16, static_cast<int>(std::ceil(2.0 * geometry.altitude * std::tan(laser.fan_half_angle) / spacing)));
  c.lines1 = simulate_scan(scene, c.pass1, c.rig, line_rate, laser, -1e300, 1e300, seed * 2 + 1);
  c.lines2 = simulate_scan(scene, c.pass2_true, c.rig, line_rate, laser, -1e300, 1e300, seed * 2 + 2);

  if (geometry.images_per_pass > 0) {
    const double span = 0.75 * half_time;
    c.image_times1 = detail::imageTimes(c.tau1, span, geometry.images_per_pass);
    c.image_times2 = detail::imageTimes(c.tau2, span, geometry.images_per_pass);
    auto shoot = [&](const Trajectory& truth_traj, const Trajectory& nav, double tau, double t) {
      const Image img = scene.render(c.camera, truth_traj.pose_at(t) * c.rig.body_from_camera);
      return PosedImage{img, nav.pose_at(tau).inverse() * nav.pose_at(t)};
    };
    for (double t : c.image_times1) c.images1.push_back(shoot(c.pass1, c.pass1, c.tau1, t));
    for (double t : c.image_times2) c.images2.push_back(shoot(c.pass2_true, c.pass2_nav, c.tau2, t));
  }
  return c;
}

struct CaseSubmaps {
  PointCloud target;  // submap 1
  PointCloud source;  // submap 2
};

inline CaseSubmaps build_case_submaps(const LoopClosureCase& c, const SubmapSpec& base = {}) {
  SubmapSpec s1 = base, s2 = base;
  s1.loop_closure_time = c.tau1;
  s2.loop_closure_time = c.tau2;
  return {build_submap(c.lines1, c.pass1, c.rig, s1), build_submap(c.lines2, c.pass2_nav, c.rig, s2)};
}

/// Recipe for one case of the loop-closure suite; generation is deferred so
/// callers can stream through the suite.
struct CaseRecipe {
  std::string name;
  SceneSpec scene;
  CrossingGeometry geometry;
  Twist perturbation;
  std::uint64_t seed = 0;

  LoopClosureCase make() const {
    LoopClosureCase c = make_loop_closure(scene, geometry, perturbation, seed);
    c.name = name;
    return c;
  }
};

inline constexpr int kStructuredCases = 28;
inline constexpr int kSemiStructuredCases = 24;
inline constexpr int kUnstructuredCases = 66;

/// The 118-case loop-closure suite (28 structured, 24 semi-structured, 66
/// unstructured), translation perturbations in [0.1, 0.5] m and rotation
/// perturbations of 0.5 to 5 degrees about random axes.
inline std::vector<CaseRecipe> loop_closure_suite(std::uint64_t base_seed = 2024, int images_per_pass = 0) {
  std::vector<CaseRecipe> out;
  std::mt19937_64 rng(base_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  auto unit = [&] {
    Vec3 v(g(rng), g(rng), g(rng));
    return Vec3(v.normalized());
  };
  auto add = [&](SceneCategory cat, int count, const char* tag) {
    for (int k = 0; k < count; ++k) {
      CaseRecipe r;
      r.seed = base_seed * 1000 + out.size();
      r.name = std::string(tag) + "_" + std::to_string(k);
      r.scene.category = cat;
      r.scene.seed = r.seed;
      r.scene.structure = k % 2 ? StructureKind::Pipe : StructureKind::Wreck;
      r.geometry.heading_deg = 360.0 * u(rng);
      r.geometry.angle_deg = 60.0 + 60.0 * u(rng);
      r.geometry.images_per_pass = images_per_pass;
      r.perturbation.trans = (0.1 + 0.4 * u(rng)) * unit();
      r.perturbation.rot = deg2rad(0.5 + 4.5 * u(rng)) * unit();
      out.push_back(r);
    }
  };
  add(SceneCategory::Structured, kStructuredCases, "structured");
  add(SceneCategory::SemiStructured, kSemiStructuredCases, "semi");
  add(SceneCategory::Unstructured, kUnstructuredCases, "unstructured");
  return out;
}

}  // namespace seareg
