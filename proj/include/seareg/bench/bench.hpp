#pragma once

#include <cstdio>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "seareg/bench/pipeline.hpp"
#include "seareg/io/case_io.hpp"
#include "seareg/keypoints/repeatability.hpp"

namespace seareg {

struct BenchConfig {
  std::vector<DetectorKind> detectors{kAllDetectors.begin(), kAllDetectors.end()};
  std::vector<DescriptorKind> descriptors{kAllDescriptors.begin(), kAllDescriptors.end()};

  std::filesystem::path case_dir;  // case directories from `seareg gen`; empty: generate the suite
  std::uint64_t suite_seed = 2024;
  int images_per_pass = 2;
  std::size_t case_limit = 0;  // 0: all cases

  bool run_keypoints = true;
  std::size_t keypoint_clouds = 5;  // spread evenly over the cases
  std::vector<DetectorKind> keypoint_detectors{kAllDetectors.begin(), kAllDetectors.end()};
  std::uint64_t noise_seed = 7;

  bool run_matching = true;
  std::size_t matching_cases = 0;  // 0: all cases

  bool run_pipeline = true;
  DetectorKind pipeline_detector = DetectorKind::ISS;
  DescriptorKind pipeline_descriptor = DescriptorKind::USC;

  std::filesystem::path output_dir = "bench_out";
  PipelineParams params;

  void validate() const {
    if (run_matching && (detectors.empty() || descriptors.empty()))
      throw Error(Errc::InvalidArgument, "matching bench needs at least one detector and one descriptor");
    if (run_keypoints && (keypoint_detectors.empty() || keypoint_clouds == 0))
      throw Error(Errc::InvalidArgument, "keypoint bench needs detectors and at least one cloud");
    if (images_per_pass < 0) throw Error(Errc::InvalidArgument, "images_per_pass must be >= 0");
  }
};

/// Streams loop-closure cases from a directory of case folders or from the
/// generated suite.
class CaseSource {
 public:
  explicit CaseSource(const BenchConfig& cfg) {
    if (!cfg.case_dir.empty())
      dirs_ = io::list_cases(cfg.case_dir);
    else
      recipes_ = loop_closure_suite(cfg.suite_seed, cfg.images_per_pass);
    count_ = dirs_.empty() ? recipes_.size() : dirs_.size();
    if (cfg.case_limit > 0) count_ = std::min(count_, cfg.case_limit);
    if (count_ == 0) throw Error(Errc::InvalidArgument, "no cases to run");
  }

  std::size_t size() const { return count_; }
  LoopClosureCase load(std::size_t i) const { return dirs_.empty() ? recipes_.at(i).make() : io::read_case(dirs_.at(i)); }

 private:
  std::vector<std::filesystem::path> dirs_;
  std::vector<CaseRecipe> recipes_;
  std::size_t count_ = 0;
};

struct KeypointRow {
  std::string cloud;
  SceneCategory category = SceneCategory::Unstructured;
  DetectorKind detector = DetectorKind::ISS;
  std::string sweep;  // "rotation" (degrees) or "noise" (metres)
  double value = 0.0;
  std::optional<double> r;  // empty when the reference set could not be built
  std::size_t repeatable = 0, reference_count = 0, test_count = 0;
  std::string failure;
};

struct TimingRow {
  std::string section, case_name;
  SceneCategory category = SceneCategory::Unstructured;
  std::string detector, descriptor;
  StageTimings timings;
};

struct Check {
  std::string name;
  bool acceptance = true;
  bool passed = false;
  std::string detail;
};

struct BenchResult {
  std::vector<KeypointRow> keypoints;
  std::vector<PairResult> matching;
  std::vector<PipelineResult> pipeline;
  std::vector<TimingRow> timings;
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return !c.acceptance || c.passed; });
  }
};

// ---------------------------------------------------------------------------

/// Rotation and noise sweeps of each detector on each cloud: 30 rows per
/// (cloud, detector), failures included.
inline std::vector<KeypointRow> run_keypoint_bench(const std::vector<std::pair<std::string, PointCloud>>& clouds,
                                                   const std::vector<SceneCategory>& categories,
                                                   const std::vector<DetectorKind>& detectors, const BenchConfig& cfg,
                                                   std::vector<TimingRow>* timings = nullptr) {
  std::vector<KeypointRow> rows;
  for (std::size_t ci = 0; ci < clouds.size(); ++ci) {
    const auto& [name, cloud] = clouds[ci];
    const SpatialIndex index(cloud.points);
    const double res = index.resolution();
    for (auto det : detectors) {
      const DetectorParams params = cfg.params.detector(det, res);
      auto emit = [&](const std::string& sweep, const std::vector<double>& levels,
                      const std::function<std::vector<RepeatabilityReport>()>& run) {
        try {
          for (const auto& rep : run())
            rows.push_back({name, categories[ci], det, sweep, rep.value, rep.r, rep.repeatable, rep.reference_count,
                            rep.test_count, ""});
        } catch (const Error& e) {
          for (double v : levels) rows.push_back({name, categories[ci], det, sweep, v, std::nullopt, 0, 0, 0, std::string(to_string(e.code()))});
        }
      };
      emit("rotation", rotation_sweep_angles(), [&] { return rotation_sweep(cloud, det, params); });
      emit("noise", noise_sweep_sigmas(), [&] { return noise_sweep(cloud, det, params, cfg.noise_seed); });
      if (timings) {
        TimingRow t{"keypoints", name, categories[ci], std::string(to_string(det)), "", {}};
        try {
          detail::timed(cfg.params.repetitions, [&] { return detect(det, cloud, params, &index); }, t.timings.extraction);
        } catch (const Error&) {
        }
        timings->push_back(std::move(t));
      }
    }
  }
  return rows;
}

/// Every detector/descriptor cell on one prepared case. Keypoints are
/// detected once per detector and shared by its descriptor cells.
inline std::vector<PairResult> run_matching_bench(const PreparedCase& pc, const std::vector<DetectorKind>& detectors,
                                                  const std::vector<DescriptorKind>& descriptors, const PipelineParams& params) {
  std::vector<PairResult> rows;
  for (auto det : detectors) {
    double det_ms = 0.0;
    std::optional<std::pair<KeypointSet, KeypointSet>> kp;
    std::string failure;
    try {
      kp = detect_both(pc, det, params, det_ms);
    } catch (const Error& e) {
      failure = std::string(to_string(e.code()));
    }
    for (auto desc : descriptors) {
      if (kp) {
        rows.push_back(run_pair(pc, det, desc, params, &*kp, det_ms));
      } else {
        PairResult r;
        r.case_name = pc.name;
        r.category = pc.category;
        r.detector = det;
        r.descriptor = desc;
        r.failure = failure;
        rows.push_back(std::move(r));
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Checks

namespace detail {

inline double median_or_nan(std::vector<double> v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : median_of(std::move(v));
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

inline std::vector<Check> keypoint_checks(const std::vector<KeypointRow>& rows, const std::vector<DetectorKind>& detectors) {
  std::vector<Check> out;
  std::size_t undefined = 0, anchors = 0, bad_anchor = 0, out_of_range = 0;
  std::map<std::pair<std::string, std::string>, std::vector<double>> levels;  // (cloud, detector+sweep)
  double min_rot = 1.0;
  bool any_rot = false;
  auto invariant = [](DetectorKind d) {
    return d == DetectorKind::ISS || d == DetectorKind::Harris3D || d == DetectorKind::Lowe || d == DetectorKind::Tomasi ||
           d == DetectorKind::Harris6D || d == DetectorKind::SIFT3D;
  };
  for (const auto& r : rows) {
    levels[{r.cloud, std::string(to_string(r.detector)) + "/" + r.sweep}].push_back(r.value);
    if (!r.r) {
      ++undefined;
      continue;
    }
    if (*r.r < 0.0 || *r.r > 1.0) ++out_of_range;
    if (r.value == 0.0) {
      ++anchors;
      if (*r.r != 1.0) ++bad_anchor;
    }
    if (r.sweep == "rotation" && invariant(r.detector)) {
      min_rot = std::min(min_rot, *r.r);
      any_rot = true;
    }
  }
  bool grids = true;
  for (const auto& [key, v] : levels) {
    const bool rot = key.second.ends_with("/rotation");
    grids = grids && v == (rot ? rotation_sweep_angles() : noise_sweep_sigmas());
  }
  out.push_back({"repeatability_anchors", true, bad_anchor == 0 && anchors > 0,
                 std::to_string(anchors - bad_anchor) + "/" + std::to_string(anchors) + " anchor rows at r = 1; " +
                     std::to_string(undefined) + " rows undefined (empty reference set)"});
  out.push_back({"repeatability_bounds", true, out_of_range == 0, std::to_string(out_of_range) + " rows outside [0,1]"});
  out.push_back({"sweep_grids", true, grids && !levels.empty(), "19 angles 0..180 deg, 11 noise levels 0..0.05 m"});
  const bool has_invariant = std::any_of(detectors.begin(), detectors.end(), invariant);
  if (has_invariant)
    out.push_back({"rotation_invariance", true, any_rot && min_rot >= 0.99,
                   "min r over ISS/Harris3D/Lowe/Tomasi/Harris6D/SIFT3D rotation rows = " + detail::fmt(min_rot)});
  return out;
}

inline Check matching_grid_check(const std::vector<PairResult>& rows, std::size_t cases, std::size_t detectors,
                                 std::size_t descriptors) {
  std::map<std::string, std::set<std::pair<int, int>>> cells;
  std::size_t untyped = 0;
  for (const auto& r : rows) {
    cells[r.case_name].emplace(static_cast<int>(r.detector), static_cast<int>(r.descriptor));
    if (!r.success && r.failure.empty()) ++untyped;
  }
  bool complete = cells.size() == cases && rows.size() == cases * detectors * descriptors;
  for (const auto& [name, set] : cells) complete = complete && set.size() == detectors * descriptors;
  return {"matching_grid", true, complete && untyped == 0,
          std::to_string(detectors * descriptors) + " cells x " + std::to_string(cases) + " cases, " +
              std::to_string(rows.size()) + " rows, " + std::to_string(untyped) + " without a success or failure record"};
}

struct StageMedians {
  double initial = 0.0, coarse = 0.0, fine = 0.0;
};

/// Median over cases of each stage's per-case median residual.
inline StageMedians stage_medians(const std::vector<PipelineResult>& rows) {
  std::vector<double> a, b, c;
  for (const auto& r : rows) {
    if (!r.failure.empty()) continue;
    a.push_back(r.initial.residuals.median);
    b.push_back(r.coarse.residuals.median);
    c.push_back(r.fine.residuals.median);
  }
  return {detail::median_or_nan(a), detail::median_or_nan(b), detail::median_or_nan(c)};
}

/// Staging holds per case: median residual initial > coarse > fine, and the
/// fine median below two voxels. Medians over cases go into the detail.
inline std::vector<Check> pipeline_checks(const std::vector<PipelineResult>& rows, double voxel) {
  const auto m = stage_medians(rows);
  std::size_t failed = 0, not_staged = 0, fine_high = 0, fine_worse = 0;
  std::string first_bad;
  for (const auto& r : rows) {
    if (!r.failure.empty()) {
      ++failed;
      if (first_bad.empty()) first_bad = r.case_name + " (" + r.failure + ")";
      continue;
    }
    const double a = r.initial.residuals.median, b = r.coarse.residuals.median, c = r.fine.residuals.median;
    if (!(a > b && b > c)) {
      ++not_staged;
      if (first_bad.empty()) first_bad = r.case_name + " (" + detail::fmt(a) + ", " + detail::fmt(b) + ", " + detail::fmt(c) + ")";
    }
    if (!(c < 2.0 * voxel)) ++fine_high;
    if (c > b) ++fine_worse;
  }
  std::vector<Check> out;
  out.push_back({"pipeline_staging", true, !rows.empty() && failed == 0 && not_staged == 0 && fine_high == 0,
                 std::to_string(rows.size() - failed - not_staged) + "/" + std::to_string(rows.size()) +
                     " cases strictly staged; " + std::to_string(fine_high) + " with fine median >= " + detail::fmt(2.0 * voxel) +
                     "; " + std::to_string(failed) + " without residuals; medians over cases initial " + detail::fmt(m.initial) +
                     ", coarse " + detail::fmt(m.coarse) + ", fine " + detail::fmt(m.fine) +
                     (first_bad.empty() ? "" : "; first miss " + first_bad)});
  out.push_back({"pipeline_fine_not_worse_than_coarse", false, fine_worse == 0,
                 std::to_string(fine_worse) + " cases where the fine median exceeds the coarse median"});
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::ofstream openOut(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(Errc::Io, "cannot write " + p.string());
  return out;
}

}  // namespace detail

inline void write_repeatability_csv(std::ostream& out, const std::vector<KeypointRow>& rows) {
  out << "cloud,category,detector,sweep,value,r,repeatable,reference_count,test_count,failure\n";
  for (const auto& r : rows)
    out << r.cloud << ',' << to_string(r.category) << ',' << to_string(r.detector) << ',' << r.sweep << ','
        << detail::num(r.value) << ',' << (r.r ? detail::num(*r.r) : "") << ',' << r.repeatable << ','
        << r.reference_count << ',' << r.test_count << ',' << r.failure << '\n';
}

/// No timing columns: this table is reproducible bit-for-bit under fixed seeds.
inline void write_matching_csv(std::ostream& out, const std::vector<PairResult>& rows) {
  out << "case,category,detector,descriptor,success,failure,source_keypoints,target_keypoints,features,inliers,recall,"
         "rot_error_deg,trans_error_m\n";
  for (const auto& r : rows) {
    const bool fitted = r.coarse.has_value();
    out << r.case_name << ',' << to_string(r.category) << ',' << to_string(r.detector) << ',' << to_string(r.descriptor)
        << ',' << (r.success ? 1 : 0) << ',' << r.failure << ',' << r.source_keypoints << ',' << r.target_keypoints << ','
        << r.features << ',' << r.inliers << ',' << detail::num(r.recall) << ','
        << (fitted ? detail::num(rad2deg(r.rot_error)) : "") << ',' << (fitted ? detail::num(r.trans_error) : "") << '\n';
  }
}

inline void write_pipeline_csv(std::ostream& out, const std::vector<PipelineResult>& rows) {
  out << "case,category,detector,descriptor,coarse_ok,coarse_failure,failure";
  for (const char* s : {"initial", "coarse", "fine"})
    out << ',' << s << "_mean," << s << "_median," << s << "_p95," << s << "_count," << s << "_rot_deg," << s << "_trans_m";
  out << '\n';
  for (const auto& r : rows) {
    out << r.case_name << ',' << to_string(r.category) << ',' << to_string(r.detector) << ',' << to_string(r.descriptor)
        << ',' << (r.coarse_ok ? 1 : 0) << ',' << r.coarse_failure << ',' << r.failure;
    for (const StageResult* s : {&r.initial, &r.coarse, &r.fine})
      out << ',' << detail::num(s->residuals.mean) << ',' << detail::num(s->residuals.median) << ','
          << detail::num(s->residuals.p95) << ',' << s->residuals.count << ',' << detail::num(rad2deg(s->error.rot.norm()))
          << ',' << detail::num(s->error.trans.norm());
    out << '\n';
  }
}

inline void write_timings_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "section,case,category,detector,descriptor,extraction_ms,matching_ms,coarse_ms,fine_ms\n";
  for (const auto& r : rows)
    out << r.section << ',' << r.case_name << ',' << to_string(r.category) << ',' << r.detector << ',' << r.descriptor << ','
        << detail::num(r.timings.extraction) << ',' << detail::num(r.timings.matching) << ','
        << detail::num(r.timings.coarse) << ',' << detail::num(r.timings.fine) << '\n';
}

/// Aggregates: percent success per detector x descriptor and per descriptor x
/// category, median stage timings per descriptor, keypoint sweep bands,
/// pipeline stage medians, and the checks.
inline nlohmann::json bench_summary(const BenchResult& res, const BenchConfig& cfg) {
  using nlohmann::json;
  json j;
  j["passed"] = res.passed();
  json checks = json::array();
  for (const auto& c : res.checks)
    checks.push_back({{"name", c.name}, {"acceptance", c.acceptance}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = checks;

  if (!res.keypoints.empty()) {
    std::map<std::string, std::map<std::string, std::map<double, std::vector<double>>>> by;  // sweep -> det -> level
    for (const auto& r : res.keypoints)
      if (r.r) by[r.sweep][std::string(to_string(r.detector))][r.value].push_back(*r.r);
    json kp;
    for (auto& [sweep, dets] : by)
      for (auto& [det, lv] : dets)
        for (auto& [level, rs] : lv) {
          std::sort(rs.begin(), rs.end());
          double mean = 0.0;
          for (double v : rs) mean += v;
          mean /= static_cast<double>(rs.size());
          kp[sweep][det].push_back({{"level", level},
                                    {"n", rs.size()},
                                    {"mean", mean},
                                    {"p2_5", detail::quantile(rs, 0.025)},
                                    {"p97_5", detail::quantile(rs, 0.975)}});
        }
    j["repeatability"] = kp;
  }

  if (!res.matching.empty()) {
    std::map<std::pair<int, int>, std::pair<int, int>> cell;  // (det, desc) -> (success, total)
    std::map<std::pair<int, std::string>, std::pair<int, int>> by_cat;
    std::map<int, std::vector<StageTimings>> times;
    for (const auto& r : res.matching) {
      auto& c = cell[{static_cast<int>(r.detector), static_cast<int>(r.descriptor)}];
      c.first += r.success;
      ++c.second;
      auto& k = by_cat[{static_cast<int>(r.descriptor), std::string(to_string(r.category))}];
      k.first += r.success;
      ++k.second;
    }
    for (const auto& t : res.timings)
      if (t.section == "matching") times[static_cast<int>(parse_descriptor(t.descriptor))].push_back(t.timings);
    json table = json::object();
    for (auto det : cfg.detectors)
      for (auto desc : cfg.descriptors) {
        const auto& c = cell[{static_cast<int>(det), static_cast<int>(desc)}];
        table[std::string(to_string(det))][std::string(to_string(desc))] = c.second ? 100.0 * c.first / c.second : 0.0;
      }
    j["success_percent"] = table;
    json cat = json::object();
    for (const auto& [key, c] : by_cat)
      cat[std::string(to_string(static_cast<DescriptorKind>(key.first)))][key.second] = 100.0 * c.first / c.second;
    j["success_percent_by_category"] = cat;
    json tj = json::object();
    for (auto& [desc, ts] : times) {
      std::vector<double> e, m, c;
      for (const auto& t : ts) {
        e.push_back(t.extraction);
        m.push_back(t.matching);
        c.push_back(t.coarse);
      }
      tj[std::string(to_string(static_cast<DescriptorKind>(desc)))] = {
          {"extraction_ms", detail::median_of(e)}, {"matching_ms", detail::median_of(m)}, {"coarse_ms", detail::median_of(c)}};
    }
    j["median_timings_by_descriptor"] = tj;
    j["cells"] = cfg.detectors.size() * cfg.descriptors.size();
  }

  if (!res.pipeline.empty()) {
    const auto m = stage_medians(res.pipeline);
    std::size_t coarse_ok = 0;
    for (const auto& r : res.pipeline) coarse_ok += r.coarse_ok;
    j["pipeline"] = {{"detector", std::string(to_string(cfg.pipeline_detector))},
                     {"descriptor", std::string(to_string(cfg.pipeline_descriptor))},
                     {"cases", res.pipeline.size()},
                     {"coarse_success", coarse_ok},
                     {"median_residual", {{"initial", m.initial}, {"coarse", m.coarse}, {"fine", m.fine}}}};
  }
  return j;
}

/// Runs the configured sections. Each case is generated (or loaded) and
/// prepared once and shared by the matching and pipeline sections.
/// `progress` receives one line per finished case.
inline BenchResult run_bench(const BenchConfig& cfg, const std::function<void(const std::string&)>& progress = {}) {
  cfg.validate();
  const CaseSource source(cfg);
  BenchResult res;

  if (cfg.run_keypoints) {
    std::vector<std::pair<std::string, PointCloud>> clouds;
    std::vector<SceneCategory> cats;
    const std::size_t n = std::min(cfg.keypoint_clouds, source.size());
    for (std::size_t k = 0; k < n; ++k) {
      const auto c = source.load(k * source.size() / n);
      auto subs = build_case_submaps(c, cfg.params.submap);
      const SpatialIndex index(subs.target.points);
      clouds.emplace_back(c.name, estimate_normals(subs.target, index, cfg.params.normal_radius_factor * index.resolution(),
                                                   Vec3::Zero()));
      cats.push_back(c.scene.category);
    }
    res.keypoints = run_keypoint_bench(clouds, cats, cfg.keypoint_detectors, cfg, &res.timings);
    for (auto& c : keypoint_checks(res.keypoints, cfg.keypoint_detectors)) res.checks.push_back(std::move(c));
    if (progress) progress("keypoint sweeps: " + std::to_string(res.keypoints.size()) + " rows");
  }

  const std::size_t match_n = cfg.run_matching ? (cfg.matching_cases ? std::min(cfg.matching_cases, source.size()) : source.size()) : 0;
  const std::size_t pipe_n = cfg.run_pipeline ? source.size() : 0;
  for (std::size_t i = 0; i < std::max(match_n, pipe_n); ++i) {
    const auto c = source.load(i);
    PreparedCase pc;
    try {
      pc = prepare_case(c, cfg.params);
    } catch (const Error& e) {
      // A case whose submaps cannot be built still yields one record per cell.
      for (auto det : i < match_n ? cfg.detectors : std::vector<DetectorKind>{})
        for (auto desc : cfg.descriptors) {
          PairResult r;
          r.case_name = c.name;
          r.category = c.scene.category;
          r.detector = det;
          r.descriptor = desc;
          r.failure = std::string(to_string(e.code()));
          res.matching.push_back(std::move(r));
        }
      if (i < pipe_n) {
        PipelineResult p;
        p.case_name = c.name;
        p.category = c.scene.category;
        p.detector = cfg.pipeline_detector;
        p.descriptor = cfg.pipeline_descriptor;
        p.failure = "prepare:" + std::string(to_string(e.code()));
        res.pipeline.push_back(std::move(p));
      }
      continue;
    }
    if (i < match_n)
      for (auto& r : run_matching_bench(pc, cfg.detectors, cfg.descriptors, cfg.params)) {
        res.timings.push_back({"matching", r.case_name, r.category, std::string(to_string(r.detector)),
                               std::string(to_string(r.descriptor)), r.timings});
        res.matching.push_back(std::move(r));
      }
    if (i < pipe_n) {
      auto p = run_full_pipeline(pc, cfg.pipeline_detector, cfg.pipeline_descriptor, cfg.params);
      res.timings.push_back({"pipeline", p.case_name, p.category, std::string(to_string(p.detector)),
                             std::string(to_string(p.descriptor)), p.timings});
      res.pipeline.push_back(std::move(p));
    }
    if (progress) progress("case " + std::to_string(i + 1) + "/" + std::to_string(std::max(match_n, pipe_n)) + " " + c.name);
  }
  if (cfg.run_matching) res.checks.push_back(matching_grid_check(res.matching, match_n, cfg.detectors.size(), cfg.descriptors.size()));
  if (cfg.run_pipeline)
    for (auto& c : pipeline_checks(res.pipeline, cfg.params.submap.voxel_grid)) res.checks.push_back(std::move(c));
  return res;
}

/// Writes the four CSV tables and summary.json into cfg.output_dir.
inline void write_bench_outputs(const BenchResult& res, const BenchConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  {
    auto out = detail::openOut(cfg.output_dir / "repeatability.csv");
    write_repeatability_csv(out, res.keypoints);
  }
  {
    auto out = detail::openOut(cfg.output_dir / "matching.csv");
    write_matching_csv(out, res.matching);
  }
  {
    auto out = detail::openOut(cfg.output_dir / "pipeline.csv");
    write_pipeline_csv(out, res.pipeline);
  }
  {
    auto out = detail::openOut(cfg.output_dir / "timings.csv");
    write_timings_csv(out, res.timings);
  }
  io::write_json(cfg.output_dir / "summary.json", bench_summary(res, cfg));
}

}  // namespace seareg
