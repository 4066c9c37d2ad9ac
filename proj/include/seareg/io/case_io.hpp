#pragma once

#include <filesystem>
#include <fstream>
#include <algorithm>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "seareg/io/image_io.hpp"
#include "seareg/io/trajectory_io.hpp"
#include "seareg/scene/loop_closure.hpp"

// Case directory layout:
//   case.json                         scene spec, crossing geometry, rig, camera, loop-closure times
//   truth.json                        T^{z2z1} (submap 2 -> submap 1), navigation prior, perturbation
//   pass1.csv pass2_nav.csv pass2_true.csv   trajectories (world-from-body)
//   lines1.bin lines2.bin             scan lines in the laser frame
//   images/pass{1,2}_NNN.png (+ .pose.csv sidecar, submap-from-body)

namespace seareg::io {

using Json = nlohmann::json;

inline Json to_json(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  Json rows = Json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) rows.push_back(m(r, c));
  return rows;
}

inline RigidTransform transform_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 16) throw Error(Errc::Parse, "transform must be 16 numbers, row-major");
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j.at(static_cast<std::size_t>(4 * r + c)).get<double>();
  return RigidTransform(m);
}

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::Parse, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json to_json(const Twist& x) { return {{"rot", to_json(x.rot)}, {"trans", to_json(x.trans)}}; }

inline Twist twist_from_json(const Json& j) { return {vec3_from_json(j.at("rot")), vec3_from_json(j.at("trans"))}; }

inline Json to_json(const SceneSpec& s) {
  return {{"category", std::string(to_string(s.category))},
          {"extent", s.extent},
          {"resolution", s.resolution},
          {"seed", s.seed},
          {"grid", s.grid},
          {"roughness_rms", s.roughness_rms},
          {"roughness_exponent", s.roughness_exponent},
          {"min_wavelength", s.min_wavelength},
          {"max_wavelength", s.max_wavelength},
          {"structured_roughness_rms", s.structured_roughness_rms},
          {"structure", s.structure == StructureKind::Pipe ? "pipe" : "wreck"},
          {"pipe_radius", s.pipe_radius},
          {"pipe_length", s.pipe_length},
          {"wreck_size", to_json(s.wreck_size)},
          {"debris_count", s.debris_count}};
}

inline SceneSpec scene_spec_from_json(const Json& j) {
  SceneSpec s;
  s.category = parse_category(j.at("category").get<std::string>());
  s.extent = j.at("extent").get<double>();
  s.resolution = j.at("resolution").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.grid = j.at("grid").get<double>();
  s.roughness_rms = j.at("roughness_rms").get<double>();
  s.roughness_exponent = j.at("roughness_exponent").get<double>();
  s.min_wavelength = j.at("min_wavelength").get<double>();
  s.max_wavelength = j.at("max_wavelength").get<double>();
  s.structured_roughness_rms = j.at("structured_roughness_rms").get<double>();
  s.structure = j.at("structure").get<std::string>() == "pipe" ? StructureKind::Pipe : StructureKind::Wreck;
  s.pipe_radius = j.at("pipe_radius").get<double>();
  s.pipe_length = j.at("pipe_length").get<double>();
  s.wreck_size = vec3_from_json(j.at("wreck_size"));
  s.debris_count = j.at("debris_count").get<int>();
  s.validate();
  return s;
}

inline Json to_json(const CrossingGeometry& g) {
  return {{"heading_deg", g.heading_deg}, {"angle_deg", g.angle_deg},   {"speed", g.speed},
          {"half_length", g.half_length}, {"altitude", g.altitude},     {"wobble_deg", g.wobble_deg},
          {"offset", g.offset},           {"images_per_pass", g.images_per_pass}};
}

inline CrossingGeometry geometry_from_json(const Json& j) {
  CrossingGeometry g;
  g.heading_deg = j.at("heading_deg").get<double>();
  g.angle_deg = j.at("angle_deg").get<double>();
  g.speed = j.at("speed").get<double>();
  g.half_length = j.at("half_length").get<double>();
  g.altitude = j.at("altitude").get<double>();
  g.wobble_deg = j.at("wobble_deg").get<double>();
  g.offset = j.at("offset").get<double>();
  g.images_per_pass = j.at("images_per_pass").get<int>();
  return g;
}

inline Json to_json(const CameraModel& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

inline CameraModel camera_from_json(const Json& j) {
  CameraModel c{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                j.at("cy").get<double>(), j.at("width").get<int>(),  j.at("height").get<int>()};
  c.validate();
  return c;
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(Errc::Parse, path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << std::setw(2) << j << '\n';
}

namespace detail {

inline std::string imageName(int pass, std::size_t k) {
  std::ostringstream s;
  s << "pass" << pass << '_' << std::setw(3) << std::setfill('0') << k << ".png";
  return s.str();
}

}  // namespace detail

/// Writes a loop-closure case directory (created if missing).
inline void write_case(const std::filesystem::path& dir, const LoopClosureCase& c) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  Json meta = {{"format", "seareg-case"},
               {"version", 1},
               {"name", c.name},
               {"seed", c.seed},
               {"scene", to_json(c.scene)},
               {"geometry", to_json(c.geometry)},
               {"tau1", c.tau1},
               {"tau2", c.tau2},
               {"rig", {{"body_from_laser", to_json(c.rig.body_from_laser)}, {"body_from_camera", to_json(c.rig.body_from_camera)}}},
               {"camera", to_json(c.camera)},
               {"image_times1", c.image_times1},
               {"image_times2", c.image_times2}};
  write_json(dir / "case.json", meta);
  write_json(dir / "truth.json", {{"T_z2z1", to_json(c.truth)},
                                  {"initial", to_json(c.initial())},
                                  {"perturbation", to_json(c.perturbation)},
                                  {"layout", "row-major 4x4, maps submap-2 coordinates into submap 1"}});
  write_trajectory_csv((dir / "pass1.csv").string(), c.pass1);
  write_trajectory_csv((dir / "pass2_nav.csv").string(), c.pass2_nav);
  write_trajectory_csv((dir / "pass2_true.csv").string(), c.pass2_true);
  write_scan_lines((dir / "lines1.bin").string(), c.lines1);
  write_scan_lines((dir / "lines2.bin").string(), c.lines2);
  for (std::size_t k = 0; k < c.images1.size(); ++k)
    write_posed_image((dir / "images" / detail::imageName(1, k)).string(), c.images1[k], c.image_times1.at(k));
  for (std::size_t k = 0; k < c.images2.size(); ++k)
    write_posed_image((dir / "images" / detail::imageName(2, k)).string(), c.images2[k], c.image_times2.at(k));
}

/// Loads a case directory written by write_case. The scene itself is not
/// regenerated; everything downstream works from the recorded data.
inline LoopClosureCase read_case(const std::filesystem::path& dir) {
  const Json meta = read_json(dir / "case.json");
  if (meta.value("format", "") != "seareg-case") throw Error(Errc::Parse, dir.string() + " is not a case directory");
  LoopClosureCase c;
  try {
    c.name = meta.at("name").get<std::string>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.scene = scene_spec_from_json(meta.at("scene"));
    c.geometry = geometry_from_json(meta.at("geometry"));
    c.tau1 = meta.at("tau1").get<double>();
    c.tau2 = meta.at("tau2").get<double>();
    c.rig.body_from_laser = transform_from_json(meta.at("rig").at("body_from_laser"));
    c.rig.body_from_camera = transform_from_json(meta.at("rig").at("body_from_camera"));
    c.camera = camera_from_json(meta.at("camera"));
    c.image_times1 = meta.at("image_times1").get<std::vector<double>>();
    c.image_times2 = meta.at("image_times2").get<std::vector<double>>();
    const Json truth = read_json(dir / "truth.json");
    c.truth = transform_from_json(truth.at("T_z2z1"));
    c.perturbation = twist_from_json(truth.at("perturbation"));
  } catch (const Json::exception& e) {
    throw Error(Errc::Parse, dir.string() + ": " + e.what());
  }
  c.pass1 = read_trajectory_csv((dir / "pass1.csv").string());
  c.pass2_nav = read_trajectory_csv((dir / "pass2_nav.csv").string());
  c.pass2_true = read_trajectory_csv((dir / "pass2_true.csv").string());
  c.lines1 = read_scan_lines((dir / "lines1.bin").string());
  c.lines2 = read_scan_lines((dir / "lines2.bin").string());
  for (std::size_t k = 0; k < c.image_times1.size(); ++k)
    c.images1.push_back(read_posed_image((dir / "images" / detail::imageName(1, k)).string()));
  for (std::size_t k = 0; k < c.image_times2.size(); ++k)
    c.images2.push_back(read_posed_image((dir / "images" / detail::imageName(2, k)).string()));
  return c;
}

/// Case directories directly under `root`, sorted by name.
inline std::vector<std::filesystem::path> list_cases(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(root)) throw Error(Errc::Io, root.string() + " is not a directory");
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "case.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace seareg::io
