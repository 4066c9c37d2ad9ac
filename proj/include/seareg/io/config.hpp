#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <toml.hpp>

#include "seareg/bench/bench.hpp"

// TOML configuration. Every file carries `version = 1`; keys are optional and
// fall back to the compiled defaults, unknown keys are rejected. Lengths in
// [detectors] and [descriptors] are multiples of the cloud resolution.

namespace seareg::io {

inline constexpr std::int64_t kConfigVersion = 1;

namespace detail {

inline void checkKeys(const toml::table& t, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, node] : t)
    if (!allowed.count(std::string(key.str())))
      throw Error(Errc::Parse, "unknown key '" + std::string(key.str()) + "' in " + where);
}

inline void checkVersion(const toml::table& t, const std::string& where) {
  const auto v = t["version"].value<std::int64_t>();
  if (!v) throw Error(Errc::Parse, where + ": missing version");
  if (*v != kConfigVersion) throw Error(Errc::Parse, where + ": unsupported version " + std::to_string(*v));
}

template <typename T>
void read(const toml::table& t, const char* key, T& out) {
  const auto node = t[key];
  if (!node) return;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node.value<double>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node.value<bool>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node.value<std::string>()) {
      out = *v;
      return;
    }
  } else {
    if (auto v = node.value<std::int64_t>()) {
      if (*v < 0 && std::is_unsigned_v<T>) throw Error(Errc::Parse, std::string(key) + " must be >= 0");
      out = static_cast<T>(*v);
      return;
    }
  }
  throw Error(Errc::Parse, std::string("wrong type for '") + key + "'");
}

inline Vec3 readVec3(const toml::table& t, const char* key, const Vec3& fallback) {
  const auto* arr = t[key].as_array();
  if (!t[key]) return fallback;
  if (!arr || arr->size() != 3) throw Error(Errc::Parse, std::string(key) + " must be an array of 3 numbers");
  Vec3 v;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto x = (*arr)[i].value<double>();
    if (!x) throw Error(Errc::Parse, std::string(key) + " must be an array of 3 numbers");
    v[static_cast<Eigen::Index>(i)] = *x;
  }
  return v;
}

inline const toml::table* section(const toml::table& t, const char* name) {
  const auto node = t[name];
  if (!node) return nullptr;
  if (!node.is_table()) throw Error(Errc::Parse, std::string("[") + name + "] must be a table");
  return node.as_table();
}

template <typename Kind, typename Parse>
std::vector<Kind> readKinds(const toml::table& t, const char* key, std::vector<Kind> fallback, Parse parse,
                            const auto& all) {
  if (!t[key]) return fallback;
  const auto* arr = t[key].as_array();
  if (!arr) throw Error(Errc::Parse, std::string(key) + " must be an array of names");
  std::vector<Kind> out;
  for (const auto& n : *arr) {
    const auto s = n.value<std::string>();
    if (!s) throw Error(Errc::Parse, std::string(key) + " must be an array of names");
    if (*s == "all") return {all.begin(), all.end()};
    out.push_back(parse(*s));
  }
  return out;
}

inline toml::table parseFile(const std::filesystem::path& path) {
  try {
    return toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw Error(Errc::Parse, path.string() + ": " + std::string(e.description()));
  }
}

}  // namespace detail

/// Applies a defaults-style table ([detectors], [descriptors], [alignment],
/// [pipeline]) on top of `params`.
inline void apply_params(const toml::table& t, PipelineParams& params) {
  detail::checkKeys(t, {"version", "detectors", "descriptors", "alignment", "pipeline"}, "parameter file");
  if (const auto* d = detail::section(t, "detectors")) {
    detail::checkKeys(*d, {"support_radius", "nms_radius", "normal_radius", "min_neighbours", "gamma21", "gamma32", "harris_k",
                           "lowe_min_trace", "min_scale", "octaves", "scales_per_octave", "min_contrast", "susan_distance",
                           "susan_angular", "threshold"},
                      "[detectors]");
    std::map<std::string, double> thresholds;
    if (const auto* th = detail::section(*d, "threshold")) {
      for (auto k : kAllDetectors) {
        const std::string name(to_string(k));
        if (auto v = (*th)[name].value<double>()) thresholds[name] = *v;
      }
      for (const auto& [key, node] : *th)
        if (!thresholds.count(std::string(key.str()))) throw Error(Errc::Parse, "unknown detector threshold '" + std::string(key.str()) + "'");
    }
    for (auto k : kAllDetectors) {
      auto& p = params.detector_unit[static_cast<std::size_t>(k)];
      detail::read(*d, "support_radius", p.support_radius);
      detail::read(*d, "nms_radius", p.nms_radius);
      detail::read(*d, "normal_radius", p.normal_radius);
      detail::read(*d, "min_neighbours", p.min_neighbours);
      detail::read(*d, "gamma21", p.gamma21);
      detail::read(*d, "gamma32", p.gamma32);
      detail::read(*d, "harris_k", p.harris_k);
      detail::read(*d, "lowe_min_trace", p.lowe_min_trace);
      detail::read(*d, "min_scale", p.min_scale);
      detail::read(*d, "octaves", p.octaves);
      detail::read(*d, "scales_per_octave", p.scales_per_octave);
      detail::read(*d, "min_contrast", p.min_contrast);
      detail::read(*d, "susan_distance", p.susan_distance);
      detail::read(*d, "susan_angular", p.susan_angular);
      const auto it = thresholds.find(std::string(to_string(k)));
      // The ISS threshold is written relative to the squared support radius.
      if (it != thresholds.end()) p.threshold = k == DetectorKind::ISS ? it->second * p.support_radius * p.support_radius : it->second;
      p.validate();
    }
  }
  if (const auto* d = detail::section(t, "descriptors")) {
    detail::checkKeys(*d, {"support_radius", "lrf_radius", "min_radius", "density_radius", "pfh_radius", "pfh_max_points", "min_support"},
                      "[descriptors]");
    auto& p = params.descriptor_unit;
    detail::read(*d, "support_radius", p.support_radius);
    detail::read(*d, "lrf_radius", p.lrf_radius);
    detail::read(*d, "min_radius", p.min_radius);
    detail::read(*d, "density_radius", p.density_radius);
    detail::read(*d, "pfh_radius", p.pfh_radius);
    detail::read(*d, "pfh_max_points", p.pfh_max_points);
    detail::read(*d, "min_support", p.min_support);
    p.validate();
  }
  if (const auto* a = detail::section(t, "alignment")) {
    detail::checkKeys(*a, {"match_k", "inlier_threshold", "min_inliers", "max_iterations", "confidence", "seed", "max_corr_dist",
                           "icp_max_iterations", "update_tolerance", "cauchy_scale", "normal_min_cos", "min_correspondences"},
                      "[alignment]");
    detail::read(*a, "match_k", params.match_k);
    detail::read(*a, "inlier_threshold", params.coarse.inlier_threshold);
    detail::read(*a, "min_inliers", params.coarse.min_inliers);
    detail::read(*a, "max_iterations", params.coarse.max_iterations);
    detail::read(*a, "confidence", params.coarse.confidence);
    detail::read(*a, "seed", params.coarse.seed);
    detail::read(*a, "max_corr_dist", params.fine.max_corr_dist);
    detail::read(*a, "icp_max_iterations", params.fine.max_iterations);
    detail::read(*a, "update_tolerance", params.fine.update_tolerance);
    detail::read(*a, "cauchy_scale", params.fine.cauchy_scale);
    detail::read(*a, "normal_min_cos", params.fine.normal_min_cos);
    detail::read(*a, "min_correspondences", params.fine.min_correspondences);
    params.coarse.validate();
    params.fine.validate();
    if (params.match_k == 0) throw Error(Errc::Parse, "match_k must be >= 1");
  }
  if (const auto* p = detail::section(t, "pipeline")) {
    detail::checkKeys(*p, {"submap_half_extent", "voxel_grid", "normal_radius", "success_translation", "repetitions"}, "[pipeline]");
    detail::read(*p, "submap_half_extent", params.submap.half_extent);
    detail::read(*p, "voxel_grid", params.submap.voxel_grid);
    detail::read(*p, "normal_radius", params.normal_radius_factor);
    detail::read(*p, "success_translation", params.success_translation);
    detail::read(*p, "repetitions", params.repetitions);
    if (!(params.submap.half_extent > 0.0) || !(params.submap.voxel_grid > 0.0) || !(params.normal_radius_factor > 0.0) ||
        params.repetitions < 1)
      throw Error(Errc::Parse, "[pipeline] values must be positive");
  }
}

inline PipelineParams load_params(const std::filesystem::path& path) {
  const auto t = detail::parseFile(path);
  detail::checkVersion(t, path.string());
  PipelineParams p;
  apply_params(t, p);
  return p;
}

/// Scene file for `seareg gen`: [scene], [crossing], [perturbation] plus
/// top-level name and seed; or a [suite] table to emit the whole suite.
struct GenSpec {
  std::string name = "case";
  std::uint64_t seed = 1;
  SceneSpec scene;
  CrossingGeometry geometry;
  Twist perturbation;

  bool suite = false;
  std::uint64_t suite_seed = 2024;
  int images_per_pass = 2;
  std::size_t limit = 0;
};

inline GenSpec load_gen_spec(const std::filesystem::path& path) {
  const auto t = detail::parseFile(path);
  detail::checkVersion(t, path.string());
  detail::checkKeys(t, {"version", "name", "seed", "scene", "crossing", "perturbation", "suite"}, path.string());
  GenSpec g;
  detail::read(t, "name", g.name);
  detail::read(t, "seed", g.seed);
  g.scene.seed = g.seed;
  if (const auto* s = detail::section(t, "suite")) {
    detail::checkKeys(*s, {"seed", "images_per_pass", "limit"}, "[suite]");
    g.suite = true;
    detail::read(*s, "seed", g.suite_seed);
    detail::read(*s, "images_per_pass", g.images_per_pass);
    detail::read(*s, "limit", g.limit);
  }
  if (const auto* s = detail::section(t, "scene")) {
    detail::checkKeys(*s, {"category", "structure", "extent", "resolution", "grid", "roughness_rms", "roughness_exponent",
                           "min_wavelength", "max_wavelength", "structured_roughness_rms", "pipe_radius", "pipe_length",
                           "wreck_size", "debris_count"},
                      "[scene]");
    std::string category(to_string(g.scene.category)), structure = "wreck";
    detail::read(*s, "category", category);
    detail::read(*s, "structure", structure);
    g.scene.category = parse_category(category);
    if (structure != "wreck" && structure != "pipe") throw Error(Errc::Parse, "structure must be 'wreck' or 'pipe'");
    g.scene.structure = structure == "pipe" ? StructureKind::Pipe : StructureKind::Wreck;
    detail::read(*s, "extent", g.scene.extent);
    detail::read(*s, "resolution", g.scene.resolution);
    detail::read(*s, "grid", g.scene.grid);
    detail::read(*s, "roughness_rms", g.scene.roughness_rms);
    detail::read(*s, "roughness_exponent", g.scene.roughness_exponent);
    detail::read(*s, "min_wavelength", g.scene.min_wavelength);
    detail::read(*s, "max_wavelength", g.scene.max_wavelength);
    detail::read(*s, "structured_roughness_rms", g.scene.structured_roughness_rms);
    detail::read(*s, "pipe_radius", g.scene.pipe_radius);
    detail::read(*s, "pipe_length", g.scene.pipe_length);
    g.scene.wreck_size = detail::readVec3(*s, "wreck_size", g.scene.wreck_size);
    detail::read(*s, "debris_count", g.scene.debris_count);
  }
  g.scene.validate();
  if (const auto* c = detail::section(t, "crossing")) {
    detail::checkKeys(*c, {"heading_deg", "angle_deg", "speed", "half_length", "altitude", "wobble_deg", "offset", "images_per_pass"},
                      "[crossing]");
    detail::read(*c, "heading_deg", g.geometry.heading_deg);
    detail::read(*c, "angle_deg", g.geometry.angle_deg);
    detail::read(*c, "speed", g.geometry.speed);
    detail::read(*c, "half_length", g.geometry.half_length);
    detail::read(*c, "altitude", g.geometry.altitude);
    detail::read(*c, "wobble_deg", g.geometry.wobble_deg);
    detail::read(*c, "offset", g.geometry.offset);
    detail::read(*c, "images_per_pass", g.geometry.images_per_pass);
  }
  if (const auto* p = detail::section(t, "perturbation")) {
    detail::checkKeys(*p, {"rot_deg", "trans"}, "[perturbation]");
    g.perturbation.rot = deg2rad(1.0) * detail::readVec3(*p, "rot_deg", Vec3::Zero());
    g.perturbation.trans = detail::readVec3(*p, "trans", Vec3::Zero());
  }
  return g;
}

/// Bench file for `seareg bench`. Relative paths resolve against the file's
/// directory.
inline BenchConfig load_bench_config(const std::filesystem::path& path) {
  const auto t = detail::parseFile(path);
  detail::checkVersion(t, path.string());
  detail::checkKeys(t, {"version", "output", "params", "detectors", "descriptors", "repetitions", "cases", "keypoints", "matching",
                        "pipeline"},
                    path.string());
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() || base.empty() ? std::filesystem::path(p) : base / p; };
  BenchConfig cfg;
  std::string s;
  if (t["params"]) {
    detail::read(t, "params", s);
    cfg.params = load_params(resolve(s));
  }
  if (t["output"]) {
    detail::read(t, "output", s);
    cfg.output_dir = resolve(s);
  }
  detail::read(t, "repetitions", cfg.params.repetitions);
  if (cfg.params.repetitions < 1) throw Error(Errc::Parse, "repetitions must be >= 1");
  cfg.detectors = detail::readKinds<DetectorKind>(t, "detectors", cfg.detectors, parse_detector, kAllDetectors);
  cfg.descriptors = detail::readKinds<DescriptorKind>(t, "descriptors", cfg.descriptors, parse_descriptor, kAllDescriptors);
  if (const auto* c = detail::section(t, "cases")) {
    detail::checkKeys(*c, {"dir", "suite_seed", "images_per_pass", "limit"}, "[cases]");
    if ((*c)["dir"]) {
      detail::read(*c, "dir", s);
      if (!s.empty()) cfg.case_dir = resolve(s);
    }
    detail::read(*c, "suite_seed", cfg.suite_seed);
    detail::read(*c, "images_per_pass", cfg.images_per_pass);
    detail::read(*c, "limit", cfg.case_limit);
  }
  if (const auto* k = detail::section(t, "keypoints")) {
    detail::checkKeys(*k, {"enabled", "clouds", "detectors", "noise_seed"}, "[keypoints]");
    detail::read(*k, "enabled", cfg.run_keypoints);
    detail::read(*k, "clouds", cfg.keypoint_clouds);
    detail::read(*k, "noise_seed", cfg.noise_seed);
    cfg.keypoint_detectors = detail::readKinds<DetectorKind>(*k, "detectors", cfg.keypoint_detectors, parse_detector, kAllDetectors);
  }
  if (const auto* m = detail::section(t, "matching")) {
    detail::checkKeys(*m, {"enabled", "cases"}, "[matching]");
    detail::read(*m, "enabled", cfg.run_matching);
    detail::read(*m, "cases", cfg.matching_cases);
  }
  if (const auto* p = detail::section(t, "pipeline")) {
    detail::checkKeys(*p, {"enabled", "detector", "descriptor"}, "[pipeline]");
    detail::read(*p, "enabled", cfg.run_pipeline);
    if ((*p)["detector"]) {
      detail::read(*p, "detector", s);
      cfg.pipeline_detector = parse_detector(s);
    }
    if ((*p)["descriptor"]) {
      detail::read(*p, "descriptor", s);
      cfg.pipeline_descriptor = parse_descriptor(s);
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace seareg::io
