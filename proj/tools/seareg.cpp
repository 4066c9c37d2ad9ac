#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "seareg/bench/bench.hpp"
#include "seareg/io/case_io.hpp"
#include "seareg/io/config.hpp"
#include "seareg/io/descriptor_io.hpp"
#include "seareg/io/ply.hpp"

using namespace seareg;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 1 usage or I/O error, 2 alignment failed or an
// acceptance check failed.
constexpr int kFailed = 2;

PipelineParams loadParams(const std::string& path) { return path.empty() ? PipelineParams{} : io::load_params(path); }

/// A cloud ready for detection and description. Normals are estimated when
/// the file has none.
struct LoadedCloud {
  PointCloud cloud;
  SpatialIndex index;
  double resolution = 0.0;
};

LoadedCloud loadCloud(const std::string& path, const PipelineParams& params) {
  PointCloud c = io::read_ply(path);
  if (c.size() < 10) throw Error(Errc::TooFewPoints, path + " has fewer than 10 points");
  SpatialIndex index(c.points);
  const double res = index.resolution();
  if (!c.hasNormals()) c = estimate_normals(c, index, params.normal_radius_factor * res, Vec3::Zero());
  return {std::move(c), std::move(index), res};
}

RigidTransform loadTransform(const std::string& path) {
  const auto j = io::read_json(path);
  try {
    if (j.is_array()) return io::transform_from_json(j);
    if (j.contains("T_z2z1")) return io::transform_from_json(j.at("T_z2z1"));
    return io::transform_from_json(j.at("transform"));
  } catch (const io::Json::exception& e) {
    throw Error(Errc::Parse, path + ": " + e.what());
  }
}

io::Json statsJson(const ResidualStats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"p95", s.p95}, {"count", s.count}};
}

io::Json twistJson(const Twist& x) {
  auto j = io::to_json(x);
  j["rot_norm_deg"] = rad2deg(x.rot.norm());
  j["trans_norm_m"] = x.trans.norm();
  return j;
}

int cmdDetect(const std::string& kind, const std::string& cloud_path, const std::string& params_path, const std::string& out) {
  const auto params = loadParams(params_path);
  const auto det = parse_detector(kind);
  const auto in = loadCloud(cloud_path, params);
  const auto kp = detect(det, in.cloud, params.detector(det, in.resolution), &in.index);
  io::write_keypoints_csv(out, kp);
  std::printf("%zu %s keypoints, %.1f ms\n", kp.size(), std::string(to_string(det)).c_str(), kp.millis);
  return 0;
}

int cmdDescribe(const std::string& kind, const std::string& cloud_path, const std::string& kp_path,
                const std::string& params_path, const std::string& out) {
  const auto params = loadParams(params_path);
  const auto desc = parse_descriptor(kind);
  const auto in = loadCloud(cloud_path, params);
  const auto kp = io::read_keypoints_csv(kp_path);
  const auto d = describe(desc, in.cloud, kp, params.descriptor(in.resolution), &in.index);
  if (out.ends_with(".csv")) {
    std::ofstream f(out);
    if (!f) throw Error(Errc::Io, "cannot write " + out);
    io::write_descriptors_csv(f, d);
  } else {
    io::write_descriptors(out, d);
  }
  std::size_t empty = 0;
  for (std::size_t r = 0; r < d.size(); ++r) empty += d.emptyRow(r);
  std::printf("%zu %s rows (%zu empty), %.1f ms\n", d.size(), std::string(to_string(desc)).c_str(), empty, d.millis);
  return 0;
}

int cmdAlign(const std::string& src_path, const std::string& tgt_path, const std::string& det_name,
             const std::string& desc_name, const std::string& params_path, const std::string& truth_path,
             const std::string& report_path) {
  const auto params = loadParams(params_path);
  const auto det = parse_detector(det_name);
  const auto desc = parse_descriptor(desc_name);
  const auto src = loadCloud(src_path, params);
  const auto tgt = loadCloud(tgt_path, params);
  std::optional<RigidTransform> truth;
  if (!truth_path.empty()) truth = loadTransform(truth_path);

  io::Json report = {{"source", src_path},   {"target", tgt_path},
                     {"detector", det_name}, {"descriptor", desc_name},
                     {"layout", "row-major 4x4, maps source coordinates into the target frame"}};
  StageTimings times;
  int code = 0;
  try {
    double ms = 0.0;
    const auto kps = detail::timed(
        params.repetitions,
        [&] {
          return std::pair{detect(det, src.cloud, params.detector(det, src.resolution), &src.index),
                           detect(det, tgt.cloud, params.detector(det, tgt.resolution), &tgt.index)};
        },
        ms);
    times.extraction = ms;
    report["keypoints"] = {{"source", kps.first.size()}, {"target", kps.second.size()}};
    if (kps.first.empty() || kps.second.empty()) throw Error(Errc::EmptyKeypointSet, "detector returned no keypoints");
    const auto descs = detail::timed(
        params.repetitions,
        [&] {
          return std::pair{describe(desc, src.cloud, kps.first, params.descriptor(src.resolution), &src.index),
                           describe(desc, tgt.cloud, kps.second, params.descriptor(tgt.resolution), &tgt.index)};
        },
        ms);
    times.extraction += ms;
    auto nonEmpty = [](const DescriptorSet& d) {
      std::size_t n = 0;
      for (std::size_t r = 0; r < d.size(); ++r) n += !d.emptyRow(r);
      return n;
    };
    report["features"] = {{"source", nonEmpty(descs.first)}, {"target", nonEmpty(descs.second)}};
    const auto corr = detail::timed(params.repetitions, [&] { return match(descs.first, descs.second, params.match_k); },
                                    times.matching);
    report["correspondences"] = corr.size();
    if (corr.size() < 3) throw Error(Errc::InsufficientCorrespondences, "fewer than 3 mutual matches");
    auto coarse = detail::timed(
        params.repetitions,
        [&] { return coarse_align(corr, kps.first.positions, kps.second.positions, params.coarse); }, times.coarse);
    io::Json cj = {{"transform", io::to_json(coarse.transform)},
                   {"inliers", coarse.inliers},
                   {"recall", coarse.recall},
                   {"iterations", coarse.iterations}};
    if (truth) cj["error"] = twistJson(se3_error(coarse.transform, *truth));
    try {
      cj["residuals"] = statsJson(self_consistency(src.cloud, tgt.cloud, coarse.transform, params.fine.max_corr_dist, &tgt.index));
    } catch (const Error& e) {
      cj["residuals_failure"] = std::string(to_string(e.code()));
    }
    report["coarse"] = cj;
    report["transform"] = cj["transform"];
    report["recall"] = coarse.recall;
    if (truth) report["error"] = cj["error"];
    try {
      const auto fine = detail::timed(
          params.repetitions, [&] { return fine_align(src.cloud, tgt.cloud, coarse.transform, params.fine, &tgt.index); },
          times.fine);
      io::Json fj = {{"transform", io::to_json(fine.transform)},
                     {"iterations", fine.iterations},
                     {"converged", fine.converged},
                     {"correspondences", fine.inliers},
                     {"residuals", statsJson(*fine.residuals)}};
      if (truth) fj["error"] = twistJson(se3_error(fine.transform, *truth));
      report["fine"] = fj;
      report["transform"] = fj["transform"];
      report["residuals"] = fj["residuals"];
      if (truth) report["error"] = fj["error"];
    } catch (const Error& e) {
      report["fine_failure"] = std::string(to_string(e.code()));
      log::warn(std::string("fine alignment skipped: ") + e.what());
    }
  } catch (const AlignmentFailure& e) {
    report["failure"] = std::string(to_string(e.code()));
    report["best"] = {{"inliers", e.best().inliers}, {"recall", e.best().recall}};
    code = kFailed;
  } catch (const Error& e) {
    if (e.code() == Errc::Io || e.code() == Errc::Parse) throw;
    report["failure"] = std::string(to_string(e.code()));
    code = kFailed;
  }
  report["timings_ms"] = {{"extraction", times.extraction},
                          {"matching", times.matching},
                          {"coarse", times.coarse},
                          {"fine", times.fine},
                          {"repetitions", params.repetitions}};
  io::write_json(report_path, report);
  if (code == 0)
    std::printf("aligned: recall %.3f, fine median residual %s\n", report["recall"].get<double>(),
                report.contains("residuals") ? std::to_string(report["residuals"]["median"].get<double>()).c_str() : "n/a");
  else
    std::printf("alignment failed: %s\n", report["failure"].get<std::string>().c_str());
  return code;
}

int cmdGen(const std::string& spec_path, const std::string& out) {
  const auto g = io::load_gen_spec(spec_path);
  if (g.suite) {
    auto suite = loop_closure_suite(g.suite_seed, g.images_per_pass);
    const std::size_t n = g.limit ? std::min(g.limit, suite.size()) : suite.size();
    for (std::size_t i = 0; i < n; ++i) {
      io::write_case(fs::path(out) / suite[i].name, suite[i].make());
      std::fprintf(stderr, "case %zu/%zu %s\n", i + 1, n, suite[i].name.c_str());
    }
    std::printf("%zu cases written to %s\n", n, out.c_str());
    return 0;
  }
  auto c = make_loop_closure(g.scene, g.geometry, g.perturbation, g.seed);
  c.name = g.name;
  io::write_case(out, c);
  std::printf("case %s written to %s\n", c.name.c_str(), out.c_str());
  return 0;
}

int cmdBench(const std::string& config_path) {
  const auto cfg = io::load_bench_config(config_path);
  const auto res = run_bench(cfg, [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); });
  write_bench_outputs(res, cfg);
  for (const auto& c : res.checks)
    std::printf("%s %s%s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.acceptance ? "" : " (info)", c.detail.c_str());
  std::printf("outputs in %s\n", cfg.output_dir.string().c_str());
  return res.passed() ? 0 : kFailed;
}

int cmdSubmap(const std::string& case_dir, int pass, const std::string& params_path, const std::string& out) {
  const auto params = loadParams(params_path);
  const auto c = io::read_case(case_dir);
  const auto subs = build_case_submaps(c, params.submap);
  const PointCloud& cloud = pass == 1 ? subs.target : subs.source;
  io::write_ply(out, cloud);
  std::printf("submap %d: %zu points\n", pass, cloud.size());
  return 0;
}

int cmdColourize(const std::string& case_dir, int pass, const std::string& cloud_path, const std::string& out) {
  const auto c = io::read_case(case_dir);
  const PointCloud cloud = io::read_ply(cloud_path);
  const auto coloured = colourize_submap(cloud, pass == 1 ? c.images1 : c.images2, c.camera, c.rig);
  io::write_ply(out, coloured);
  std::size_t seen = 0;
  for (std::size_t i = 0; i < coloured.size(); ++i) seen += coloured.colourValid(i);
  std::printf("%zu of %zu points coloured\n", seen, coloured.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypoint/descriptor registration of laser submaps"};
  app.require_subcommand(1);
  std::string kind, cloud, params, out, keypoints, src, tgt, det = "iss", desc = "usc", truth, report, spec, config, case_dir;
  int pass = 1;
  const std::string names = "pfh, pfhrgb, shot, cshot, 3dsc, usc";

  auto* detect_cmd = app.add_subcommand("detect", "Detect keypoints, write index,x,y,z,saliency CSV");
  detect_cmd->add_option("--kind", kind, "iss, harris3d, harris6d, sift3d, susan3d, lowe, tomasi, curvature")->required();
  detect_cmd->add_option("--cloud", cloud, "input PLY")->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("--params", params, "parameter TOML (defaults when omitted)")->check(CLI::ExistingFile);
  detect_cmd->add_option("--out", out, "output CSV")->required();

  auto* describe_cmd = app.add_subcommand("describe", "Describe keypoints; .csv output is text, anything else binary");
  describe_cmd->add_option("--kind", kind, names)->required();
  describe_cmd->add_option("--cloud", cloud, "input PLY")->required()->check(CLI::ExistingFile);
  describe_cmd->add_option("--keypoints", keypoints, "keypoint CSV from detect")->required()->check(CLI::ExistingFile);
  describe_cmd->add_option("--params", params, "parameter TOML")->check(CLI::ExistingFile);
  describe_cmd->add_option("--out", out, "output file")->required();

  auto* align_cmd = app.add_subcommand("align", "Coarse then fine alignment of source onto target, JSON report");
  align_cmd->add_option("--src", src, "source PLY")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--tgt", tgt, "target PLY")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--detector", det, "keypoint detector")->capture_default_str();
  align_cmd->add_option("--descriptor", desc, names)->capture_default_str();
  align_cmd->add_option("--params", params, "parameter TOML")->check(CLI::ExistingFile);
  align_cmd->add_option("--truth", truth, "reference transform: truth.json or 16 numbers, row-major")->check(CLI::ExistingFile);
  align_cmd->add_option("--report", report, "output JSON")->required();

  auto* gen_cmd = app.add_subcommand("gen", "Generate a loop-closure case directory (or the suite)");
  gen_cmd->add_option("--spec", spec, "scene TOML")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", out, "output directory")->required();

  auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark; nonzero exit if an acceptance check fails");
  bench_cmd->add_option("--config", config, "bench TOML")->required()->check(CLI::ExistingFile);

  auto* submap_cmd = app.add_subcommand("submap", "Build a submap from a case directory");
  submap_cmd->add_option("--case", case_dir, "case directory")->required()->check(CLI::ExistingDirectory);
  submap_cmd->add_option("--pass", pass, "1 or 2 (pass 2 uses navigation poses)")->check(CLI::IsMember({1, 2}));
  submap_cmd->add_option("--params", params, "parameter TOML")->check(CLI::ExistingFile);
  submap_cmd->add_option("--out", out, "output PLY")->required();

  auto* colour_cmd = app.add_subcommand("colourize", "Colour a submap from the case's images");
  colour_cmd->add_option("--case", case_dir, "case directory")->required()->check(CLI::ExistingDirectory);
  colour_cmd->add_option("--pass", pass, "1 or 2")->check(CLI::IsMember({1, 2}));
  colour_cmd->add_option("--cloud", cloud, "submap PLY")->required()->check(CLI::ExistingFile);
  colour_cmd->add_option("--out", out, "output PLY")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*detect_cmd) return cmdDetect(kind, cloud, params, out);
    if (*describe_cmd) return cmdDescribe(kind, cloud, keypoints, params, out);
    if (*align_cmd) return cmdAlign(src, tgt, det, desc, params, truth, report);
    if (*gen_cmd) return cmdGen(spec, out);
    if (*bench_cmd) return cmdBench(config);
    if (*submap_cmd) return cmdSubmap(case_dir, pass, params, out);
    if (*colour_cmd) return cmdColourize(case_dir, pass, cloud, out);
  } catch (const Error& e) {
    std::cerr << "seareg: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "seareg: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
