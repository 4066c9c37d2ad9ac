#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "seareg/keypoints/detectors.hpp"
#include "seareg/submap/submap.hpp"

namespace seareg {

struct RepeatabilityReport {
  double value = 0.0;  // sweep variable: degrees or metres
  double r = 0.0;
  std::size_t repeatable = 0;
  std::size_t reference_count = 0;
  std::size_t test_count = 0;
};

inline constexpr double kRepeatabilityEps = 1e-2;

/// Relative repeatability of `test` against `reference`. `truth` maps the test
/// cloud's frame into the reference frame. Pairs closer than `eps` are matched
/// one-to-one, greedily by ascending distance.
inline RepeatabilityReport repeatability(const KeypointSet& reference, const KeypointSet& test,
                                         const RigidTransform& truth, double eps = kRepeatabilityEps) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "eps must be > 0");
  if (reference.empty() || test.empty()) throw Error(Errc::EmptyKeypointSet, "repeatability needs two non-empty sets");
  const SpatialIndex index(reference.positions);
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  std::vector<Neighbour> nb;
  for (std::size_t j = 0; j < test.size(); ++j) {
    index.radiusWithDistances(truth.apply(test.positions[j]), eps, nb);
    for (const auto& n : nb)
      if (n.sq_distance < eps * eps) pairs.emplace_back(n.sq_distance, n.index, j);
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<char> used_ref(reference.size(), 0), used_test(test.size(), 0);
  RepeatabilityReport rep;
  for (const auto& [d, i, j] : pairs) {
    if (used_ref[i] || used_test[j]) continue;
    used_ref[i] = used_test[j] = 1;
    ++rep.repeatable;
  }
  rep.reference_count = reference.size();
  rep.test_count = test.size();
  rep.r = static_cast<double>(rep.repeatable) / static_cast<double>(reference.size());
  return rep;
}

inline constexpr int kRotationSteps = 19;  // 0..180 deg, 10 deg apart
inline constexpr int kNoiseSteps = 11;     // 0..0.05 m, 0.005 apart

inline std::vector<double> rotation_sweep_angles() {
  std::vector<double> a;
  for (int i = 0; i < kRotationSteps; ++i) a.push_back(10.0 * i);
  return a;
}

inline std::vector<double> noise_sweep_sigmas() {
  std::vector<double> s;
  for (int i = 0; i < kNoiseSteps; ++i) s.push_back(0.005 * i);
  return s;
}

namespace detail {

inline RepeatabilityReport sweepEntry(const KeypointSet& reference, const KeypointSet& test, const RigidTransform& truth,
                                      double value) {
  RepeatabilityReport rep;
  if (test.empty()) {
    rep.reference_count = reference.size();
  } else {
    rep = repeatability(reference, test, truth);
  }
  rep.value = value;
  return rep;
}

inline PointCloud withNormals(const PointCloud& c, const DetectorParams& params) {
  return estimate_normals(c, params.normal_radius, Vec3::Zero());
}

}  // namespace detail

/// Repeatability under rotation about the vertical axis through the origin.
/// Normals, if present, are rotated with the cloud; otherwise each rotated
/// copy gets its own estimate.
inline std::vector<RepeatabilityReport> rotation_sweep(const PointCloud& cloud, DetectorKind kind,
                                                       const DetectorParams& params) {
  if (cloud.empty()) throw Error(Errc::InvalidArgument, "rotation sweep needs a non-empty cloud");
  // Normals oriented toward the origin stay consistent under these rotations.
  const bool estimate = needs_normals(kind) && !cloud.hasNormals();
  auto prepare = [&](const PointCloud& c) { return estimate ? detail::withNormals(c, params) : c; };
  const KeypointSet reference = detect(kind, prepare(cloud), params);
  if (reference.empty()) throw Error(Errc::EmptyKeypointSet, "no reference keypoints");
  std::vector<RepeatabilityReport> out;
  for (double deg : rotation_sweep_angles()) {
    const RigidTransform rot = RigidTransform::rotationZ(deg2rad(deg));
    const KeypointSet kp = deg == 0.0 ? reference : detect(kind, prepare(transformed(cloud, rot)), params);
    out.push_back(detail::sweepEntry(reference, kp, rot.inverse(), deg));
  }
  return out;
}

/// Repeatability under isotropic Gaussian noise; normals are re-estimated on
/// each noisy copy (and on the reference when the detector needs them).
inline std::vector<RepeatabilityReport> noise_sweep(const PointCloud& cloud, DetectorKind kind,
                                                    const DetectorParams& params, std::uint64_t seed) {
  if (cloud.empty()) throw Error(Errc::InvalidArgument, "noise sweep needs a non-empty cloud");
  const bool normals = needs_normals(kind);
  const PointCloud base = normals && !cloud.hasNormals() ? detail::withNormals(cloud, params) : cloud;
  const KeypointSet reference = detect(kind, base, params);
  if (reference.empty()) throw Error(Errc::EmptyKeypointSet, "no reference keypoints");
  std::vector<RepeatabilityReport> out;
  std::uint64_t k = 0;
  for (double sigma : noise_sweep_sigmas()) {
    KeypointSet kp;
    if (sigma == 0.0) {
      kp = reference;
    } else {
      PointCloud noisy = add_noise(cloud, sigma, seed + k);
      if (normals) noisy = detail::withNormals(noisy, params);
      kp = detect(kind, noisy, params);
    }
    ++k;
    out.push_back(detail::sweepEntry(reference, kp, RigidTransform(), sigma));
  }
  return out;
}

namespace io {

inline void write_keypoints_csv(std::ostream& out, const KeypointSet& kp) {
  out << "index,x,y,z,saliency\n" << std::setprecision(10);
  for (std::size_t i = 0; i < kp.size(); ++i)
    out << kp.indices[i] << ',' << kp.positions[i].x() << ',' << kp.positions[i].y() << ',' << kp.positions[i].z()
        << ',' << kp.saliency[i] << '\n';
}

inline void write_keypoints_csv(const std::string& path, const KeypointSet& kp) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  write_keypoints_csv(out, kp);
}

/// Reads the `index,x,y,z,saliency` form back; indices must be ascending.
inline KeypointSet read_keypoints_csv(std::istream& in, DetectorKind kind = DetectorKind::ISS) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,x,y,z,saliency", 0) != 0)
    throw Error(Errc::Parse, "keypoint CSV header must be index,x,y,z,saliency");
  KeypointSet kp;
  kp.kind = kind;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::string f[5];
    for (auto& field : f)
      if (!std::getline(row, field, ',')) throw Error(Errc::Parse, "keypoint CSV row needs 5 fields: " + line);
    try {
      const auto index = static_cast<std::size_t>(std::stoull(f[0]));
      if (!kp.indices.empty() && index <= kp.indices.back()) throw Error(Errc::Parse, "keypoint indices must ascend");
      kp.indices.push_back(index);
      kp.positions.emplace_back(std::stod(f[1]), std::stod(f[2]), std::stod(f[3]));
      kp.saliency.push_back(std::stod(f[4]));
    } catch (const std::logic_error&) {
      throw Error(Errc::Parse, "bad number in keypoint CSV row: " + line);
    }
  }
  return kp;
}

inline KeypointSet read_keypoints_csv(const std::string& path, DetectorKind kind = DetectorKind::ISS) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return read_keypoints_csv(in, kind);
}

}  // namespace io

}  // namespace seareg
