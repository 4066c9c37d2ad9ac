#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seareg/alignment/alignment.hpp"
#include "seareg/colour/colourize.hpp"
#include "seareg/core/filters.hpp"
#include "seareg/descriptors/descriptors.hpp"
#include "seareg/keypoints/detectors.hpp"
#include "seareg/scene/loop_closure.hpp"

namespace seareg {

/// Detector parameters at a concrete cloud resolution, from parameters given
/// per unit resolution: radii scale linearly, ISS's threshold (a squared
/// length) quadratically; other thresholds are scale-free or absolute.
inline DetectorParams scale_detector_params(DetectorKind kind, DetectorParams unit, double res) {
  if (!(res > 0.0)) throw Error(Errc::InvalidArgument, "resolution must be > 0");
  unit.support_radius *= res;
  unit.nms_radius *= res;
  unit.normal_radius *= res;
  unit.min_scale *= res;
  if (kind == DetectorKind::ISS) unit.threshold *= res * res;
  return unit;
}

inline DescriptorParams scale_descriptor_params(DescriptorParams unit, double res) {
  if (!(res > 0.0)) throw Error(Errc::InvalidArgument, "resolution must be > 0");
  unit.support_radius *= res;
  unit.lrf_radius *= res;
  unit.min_radius *= res;
  unit.density_radius *= res;
  unit.pfh_radius *= res;
  return unit;
}

struct PipelineParams {
  std::array<DetectorParams, kAllDetectors.size()> detector_unit = [] {
    std::array<DetectorParams, kAllDetectors.size()> a;
    for (auto k : kAllDetectors) a[static_cast<std::size_t>(k)] = DetectorParams::defaults(k, 1.0);
    return a;
  }();
  DescriptorParams descriptor_unit = DescriptorParams::defaults(1.0);
  SubmapSpec submap;                   // 5 m window, 0.05 m voxels
  double normal_radius_factor = 10.0;  // x cloud resolution
  std::size_t match_k = 1;
  CoarseParams coarse;
  FineParams fine;
  double success_translation = 1.0;  // metres, against truth
  int repetitions = 5;               // timing: median over this many runs

  DetectorParams detector(DetectorKind k, double res) const {
    return scale_detector_params(k, detector_unit[static_cast<std::size_t>(k)], res);
  }
  DescriptorParams descriptor(double res) const { return scale_descriptor_params(descriptor_unit, res); }
};

/// Both submaps of a loop closure, ready for detection: normals estimated,
/// colours fused when images exist, indices built once.
struct PreparedCase {
  std::string name;
  SceneCategory category = SceneCategory::Unstructured;
  PointCloud source;  // submap 2
  PointCloud target;  // submap 1
  std::optional<SpatialIndex> source_index, target_index;
  double source_resolution = 0.0, target_resolution = 0.0;
  RigidTransform truth;    // source -> target
  RigidTransform initial;  // navigation prior, source -> target
};

inline PreparedCase prepare_case(const LoopClosureCase& c, const PipelineParams& params = {}) {
  auto subs = build_case_submaps(c, params.submap);
  PreparedCase p;
  p.name = c.name;
  p.category = c.scene.category;
  p.truth = c.truth;
  p.initial = c.initial();
  auto finish = [&](PointCloud cloud, const std::vector<PosedImage>& images, PointCloud& out,
                    std::optional<SpatialIndex>& index, double& res) {
    if (cloud.size() < 10) throw Error(Errc::EmptySubmap, "submap of " + c.name + " has too few points");
    index.emplace(cloud.points);
    res = index->resolution();
    cloud = estimate_normals(cloud, *index, params.normal_radius_factor * res, Vec3::Zero());
    if (!images.empty()) cloud = colourize_submap(cloud, images, c.camera, c.rig);
    out = std::move(cloud);
  };
  finish(std::move(subs.source), c.images2, p.source, p.source_index, p.source_resolution);
  finish(std::move(subs.target), c.images1, p.target, p.target_index, p.target_resolution);
  return p;
}

struct StageTimings {
  double extraction = 0.0;  // detection + description, both submaps, ms
  double matching = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Runs `work` `reps` times; returns the last result and the median wall time.
template <typename F>
auto timed(int reps, F&& work, double& millis) {
  std::vector<double> times;
  std::optional<std::invoke_result_t<F>> result;
  for (int r = 0; r < std::max(1, reps); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    result.emplace(work());
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  millis = median_of(std::move(times));
  return std::move(*result);
}

}  // namespace detail

inline std::pair<KeypointSet, KeypointSet> detect_both(const PreparedCase& pc, DetectorKind det,
                                                       const PipelineParams& params, double& millis) {
  return detail::timed(
      params.repetitions,
      [&] {
        return std::pair{detect(det, pc.source, params.detector(det, pc.source_resolution), &*pc.source_index),
                         detect(det, pc.target, params.detector(det, pc.target_resolution), &*pc.target_index)};
      },
      millis);
}

inline std::pair<DescriptorSet, DescriptorSet> describe_both(const PreparedCase& pc, DescriptorKind desc,
                                                             const KeypointSet& src_kp, const KeypointSet& tgt_kp,
                                                             const PipelineParams& params, double& millis) {
  return detail::timed(
      params.repetitions,
      [&] {
        return std::pair{describe(desc, pc.source, src_kp, params.descriptor(pc.source_resolution), &*pc.source_index),
                         describe(desc, pc.target, tgt_kp, params.descriptor(pc.target_resolution), &*pc.target_index)};
      },
      millis);
}

/// One cell of the matching benchmark: success or a typed failure, never throws
/// for per-case problems.
struct PairResult {
  std::string case_name;
  SceneCategory category = SceneCategory::Unstructured;
  DetectorKind detector = DetectorKind::ISS;
  DescriptorKind descriptor = DescriptorKind::PFH;
  bool success = false;
  std::string failure;  // Errc name, or "TranslationError" when the fit is > 1 m off
  std::size_t source_keypoints = 0, target_keypoints = 0;
  std::size_t inliers = 0, features = 0;
  double recall = 0.0;
  double rot_error = 0.0, trans_error = 0.0;  // |dxi_phi| rad, |dxi_rho| m (coarse vs truth)
  StageTimings timings;
  std::optional<AlignmentReport> coarse;
};

inline PairResult run_pair(const PreparedCase& pc, DetectorKind det, DescriptorKind desc, const PipelineParams& params,
                           const std::pair<KeypointSet, KeypointSet>* keypoints = nullptr, double detect_ms = 0.0) {
  PairResult r;
  r.case_name = pc.name;
  r.category = pc.category;
  r.detector = det;
  r.descriptor = desc;
  try {
    double det_ms = detect_ms, desc_ms = 0.0;
    std::pair<KeypointSet, KeypointSet> own;
    if (!keypoints) {
      own = detect_both(pc, det, params, det_ms);
      keypoints = &own;
    }
    const auto& [skp, tkp] = *keypoints;
    r.source_keypoints = skp.size();
    r.target_keypoints = tkp.size();
    if (skp.empty() || tkp.empty()) throw Error(Errc::EmptyKeypointSet, "detector returned no keypoints");
    const auto descs = describe_both(pc, desc, skp, tkp, params, desc_ms);
    r.timings.extraction = det_ms + desc_ms;
    const auto corr = detail::timed(params.repetitions, [&] { return match(descs.first, descs.second, params.match_k); },
                                    r.timings.matching);
    r.features = corr.size();
    if (corr.size() < 3) throw Error(Errc::InsufficientCorrespondences, "fewer than 3 mutual matches");
    auto report = detail::timed(
        params.repetitions, [&] { return coarse_align(corr, skp.positions, tkp.positions, params.coarse); },
        r.timings.coarse);
    report.error = se3_error(report.transform, pc.truth);
    r.inliers = report.inliers;
    r.recall = report.recall;
    r.rot_error = report.error->rot.norm();
    r.trans_error = report.error->trans.norm();
    r.success = r.trans_error < params.success_translation;
    if (!r.success) r.failure = "TranslationError";
    r.coarse = std::move(report);
  } catch (const AlignmentFailure& e) {
    r.failure = std::string(to_string(e.code()));
    r.inliers = e.best().inliers;
    r.features = e.best().features;
    r.recall = e.best().recall;
  } catch (const Error& e) {
    r.failure = std::string(to_string(e.code()));
  }
  return r;
}

/// Self-consistency and error against truth at one stage of the pipeline.
struct StageResult {
  RigidTransform transform;
  ResidualStats residuals;
  Twist error;
};

struct PipelineResult {
  std::string case_name;
  SceneCategory category = SceneCategory::Unstructured;
  DetectorKind detector = DetectorKind::ISS;
  DescriptorKind descriptor = DescriptorKind::USC;
  StageResult initial, coarse, fine;
  bool coarse_ok = false;  // false: coarse stage fell back to the navigation prior
  std::string coarse_failure;
  std::string failure;  // set when a stage could not be evaluated at all ("stage:Errc")
  PairResult pair;
  StageTimings timings;
};

/// Initial (navigation) -> coarse -> fine staging of one loop closure. When
/// coarse alignment fails the navigation prior is carried into fine alignment.
inline PipelineResult run_full_pipeline(const PreparedCase& pc, DetectorKind det, DescriptorKind desc,
                                        const PipelineParams& params = {}) {
  PipelineResult out;
  out.case_name = pc.name;
  out.category = pc.category;
  out.detector = det;
  out.descriptor = desc;
  const double max_d = params.fine.max_corr_dist;
  auto stage = [&](const RigidTransform& t, const char* tag) {
    StageResult s;
    s.transform = t;
    s.error = se3_error(t, pc.truth);
    try {
      s.residuals = self_consistency(pc.source, pc.target, t, max_d, &*pc.target_index);
    } catch (const Error& e) {
      if (out.failure.empty()) out.failure = std::string(tag) + ":" + std::string(to_string(e.code()));
    }
    return s;
  };
  out.initial = stage(pc.initial, "initial");
  out.pair = run_pair(pc, det, desc, params);
  out.timings = out.pair.timings;
  out.coarse_ok = out.pair.success;
  out.coarse_failure = out.pair.failure;
  const RigidTransform prior = out.coarse_ok ? out.pair.coarse->transform : pc.initial;
  out.coarse = stage(prior, "coarse");
  try {
    const auto fine = detail::timed(
        params.repetitions, [&] { return fine_align(pc.source, pc.target, prior, params.fine, &*pc.target_index); },
        out.timings.fine);
    out.fine = stage(fine.transform, "fine");
  } catch (const Error& e) {
    out.fine = out.coarse;
    if (out.failure.empty()) out.failure = "fine:" + std::string(to_string(e.code()));
  }
  return out;
}

}  // namespace seareg
