#include <gtest/gtest.h>

#include <random>
#include <set>

#include "seareg/core/filters.hpp"
#include "seareg/scene/loop_closure.hpp"

using namespace seareg;

namespace {

SceneSpec flatSpec() {
  SceneSpec s;
  s.category = SceneCategory::Unstructured;
  s.roughness_rms = 0.0;
  s.seed = 1;
  return s;
}

Trajectory hover(double altitude) {
  const RigidTransform pose(Mat3::Identity(), Vec3(0.0, 0.0, altitude));
  return Trajectory({{0.0, pose}, {10.0, pose}});
}

// True when q lies on the seabed or on a primitive boundary within tol.
bool onSurface(const Scene& scene, const Vec3& q, double tol) {
  if (std::abs(q.z() - scene.seabed(q.x(), q.y())) < tol) return true;
  for (const auto& p : scene.primitives())
    if (p.contains(q, tol) && !p.contains(q, -tol)) return true;
  return false;
}

// Cylinder oracle: RANSAC over point pairs with normals (axis = n1 x n2,
// centre from the intersection of the projected normal lines), then an
// algebraic circle fit on the inliers in the plane normal to the axis.
double ransacCylinderRadius(const PointCloud& c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
  std::size_t best_count = 0;
  Vec3 best_axis, best_centre;
  double best_r = 0.0;
  for (int it = 0; it < 2000; ++it) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (!c.normalValid(i) || !c.normalValid(j)) continue;
    Vec3 a = c.normals[i].cross(c.normals[j]);
    if (a.norm() < 0.3) continue;
    a.normalize();
    const Mat3 proj = Mat3::Identity() - a * a.transpose();
    const Vec3 pi = proj * c.points[i], pj = proj * c.points[j];
    const Vec3 ni = (proj * c.normals[i]).normalized(), nj = (proj * c.normals[j]).normalized();
    Eigen::Matrix<double, 3, 2> m;
    m << ni, -nj;
    const Eigen::Vector2d st = m.colPivHouseholderQr().solve(pj - pi);
    const Vec3 centre = pi + st[0] * ni;
    const double r = 0.5 * ((pi - centre).norm() + (pj - centre).norm());
    if (r < 0.05 || r > 1.0) continue;
    std::size_t count = 0;
    for (const auto& p : c.points)
      if (std::abs((proj * p - centre).norm() - r) < 0.01) ++count;
    if (count > best_count) best_count = count, best_axis = a, best_centre = centre, best_r = r;
  }
  if (best_count == 0) return 0.0;
  // Kasa fit in an orthonormal basis of the plane.
  const Vec3 u = best_axis.unitOrthogonal(), v = best_axis.cross(u);
  const Mat3 proj = Mat3::Identity() - best_axis * best_axis.transpose();
  Eigen::MatrixXd a(static_cast<Eigen::Index>(best_count), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(best_count));
  Eigen::Index row = 0;
  for (const auto& p : c.points) {
    if (!(std::abs((proj * p - best_centre).norm() - best_r) < 0.01)) continue;
    const double x = p.dot(u), y = p.dot(v);
    a.row(row) << x, y, 1.0;
    b[row++] = x * x + y * y;
  }
  const Eigen::Vector3d s = a.colPivHouseholderQr().solve(b);
  const double cx = 0.5 * s[0], cy = 0.5 * s[1];
  return std::sqrt(s[2] + cx * cx + cy * cy);
}

}  // namespace

TEST(Scene, SameSeedIsBitIdentical) {
  for (auto cat : {SceneCategory::Structured, SceneCategory::SemiStructured, SceneCategory::Unstructured}) {
    SceneSpec s;
    s.category = cat;
    s.seed = 77;
    const Scene a(s), b(s);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-7.0, 7.0);
    for (int k = 0; k < 1000; ++k) {
      const double x = u(rng), y = u(rng);
      ASSERT_EQ(a.seabed(x, y), b.seabed(x, y));
    }
    ASSERT_EQ(a.primitives().size(), b.primitives().size());
    for (std::size_t k = 0; k < a.primitives().size(); ++k)
      EXPECT_EQ(a.primitives()[k].world_from_local.matrix(), b.primitives()[k].world_from_local.matrix());
  }
  SceneSpec s;
  s.seed = 5;
  SceneSpec t = s;
  t.seed = 6;
  EXPECT_NE(Scene(s).seabed(0.3, 0.4), Scene(t).seabed(0.3, 0.4));
}

TEST(Scene, CategoryContracts) {
  SceneSpec s;
  s.seed = 3;
  s.category = SceneCategory::Structured;
  s.structure = StructureKind::Pipe;
  EXPECT_EQ(Scene(s).primitives().size(), 1u);
  s.structure = StructureKind::Wreck;
  EXPECT_GE(Scene(s).primitives().size(), 1u);
  s.category = SceneCategory::SemiStructured;
  EXPECT_EQ(Scene(s).primitives().size(), static_cast<std::size_t>(s.debris_count));
  s.category = SceneCategory::Unstructured;
  EXPECT_TRUE(Scene(s).primitives().empty());
}

TEST(Scene, InvalidSpecRejected) {
  SceneSpec s;
  s.extent = 0.0;
  EXPECT_THROW(Scene{s}, Error);
  s = {};
  s.resolution = -1.0;
  EXPECT_THROW(Scene{s}, Error);
  EXPECT_THROW(parse_category("reef"), Error);
  for (auto c : {SceneCategory::Structured, SceneCategory::SemiStructured, SceneCategory::Unstructured})
    EXPECT_EQ(parse_category(to_string(c)), c);
}

TEST(Scene, PipeRadiusRecoveredByCylinderFit) {
  SceneSpec s;
  s.category = SceneCategory::Structured;
  s.structure = StructureKind::Pipe;
  s.seed = 11;
  const Scene scene(s);
  PointCloud cloud;
  for (double x = -2.5; x <= 2.5; x += 0.025)
    for (double y = -2.5; y <= 2.5; y += 0.025) {
      const Vec3 o(x, y, 5.0);
      if (const auto hit = scene.raycast(o, -Vec3::UnitZ())) cloud.points.push_back(o - hit->t * Vec3::UnitZ());
    }
  cloud = estimate_normals(cloud, 0.08, Vec3(0.0, 0.0, 10.0));
  EXPECT_NEAR(ransacCylinderRadius(cloud, 2), s.pipe_radius, 0.05 * s.pipe_radius);
}

// Exhaustive scan of 1 m x 1 m patches: a least-squares plane never fits the
// unstructured seabed to 1e-3 RMS.
TEST(Scene, UnstructuredSeabedHasNoFlatPatch) {
  SceneSpec s;
  s.category = SceneCategory::Unstructured;
  s.seed = 21;
  const Scene scene(s);
  double worst = 1e9;
  for (double cx = -2.5; cx <= 2.5; cx += 0.25)
    for (double cy = -2.5; cy <= 2.5; cy += 0.25) {
      Eigen::MatrixXd a(21 * 21, 3);
      Eigen::VectorXd z(21 * 21);
      int row = 0;
      for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) {
          const double x = cx - 0.5 + 0.05 * i, y = cy - 0.5 + 0.05 * j;
          a.row(row) << x, y, 1.0;
          z[row++] = scene.seabed(x, y);
        }
      const Eigen::Vector3d plane = a.colPivHouseholderQr().solve(z);
      const double rms = std::sqrt((a * plane - z).squaredNorm() / row);
      worst = std::min(worst, rms);
    }
  EXPECT_GT(worst, 1e-3);
}

TEST(Scan, FlatNadirRangesAreExact) {
  const Scene scene(flatSpec());
  ASSERT_EQ(scene.seabed(0.7, -0.2), 0.0);
  const SensorRig rig = default_rig();
  const Trajectory traj = hover(3.0);
  LaserModel laser;
  laser.rays = 101;
  const auto lines = simulate_scan(scene, traj, rig, 2.0, laser, 0.0, 2.0);
  ASSERT_EQ(lines.size(), 5u);
  const double laser_height = 3.0 + rig.body_from_laser.translation().z();
  for (const auto& line : lines) {
    ASSERT_EQ(line.points.size(), 101u);
    for (const auto& p : line.points) {
      const double cos_a = p.z() / p.norm();
      EXPECT_NEAR(p.norm(), laser_height / cos_a, 1e-9);
      EXPECT_EQ(p.y(), 0.0);
    }
  }
  // Outermost beams sit at the fan edge.
  EXPECT_NEAR(std::atan2(lines[0].points.front().x(), lines[0].points.front().z()), -laser.fan_half_angle, 1e-12);
}

TEST(Scan, RangeNoiseStatistics) {
  const Scene scene(flatSpec());
  const SensorRig rig = default_rig();
  LaserModel laser;
  laser.rays = 500;
  laser.range_noise = 0.01;
  const auto lines = simulate_scan(scene, hover(3.0), rig, 20.0, laser, 0.0, 9.95, 8);
  const double laser_height = 3.0 + rig.body_from_laser.translation().z();
  std::vector<double> res;
  for (const auto& line : lines)
    for (const auto& p : line.points) {
      const Vec3 b = p.normalized();
      res.push_back(p.norm() - laser_height / b.z());
    }
  ASSERT_GE(res.size(), 100000u);
  double mean = 0.0;
  for (double r : res) mean += r;
  mean /= res.size();
  double var = 0.0;
  for (double r : res) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / (res.size() - 1));
  EXPECT_GE(sd, 0.0097);
  EXPECT_LE(sd, 0.0103);
}

TEST(Scan, InvalidArguments) {
  const Scene scene(flatSpec());
  EXPECT_THROW(simulate_scan(scene, hover(3.0), default_rig(), 0.0), Error);
  LaserModel laser;
  laser.rays = 0;
  EXPECT_THROW(simulate_scan(scene, hover(3.0), default_rig(), 1.0, laser), Error);
}

class CaseFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SceneSpec s;
    s.category = SceneCategory::Structured;
    s.structure = StructureKind::Wreck;
    s.seed = 31;
    xi = Twist(deg2rad(3.0) * Vec3(0.3, -0.5, 0.8).normalized(), Vec3(0.2, -0.3, 0.1));
    perturbed = new LoopClosureCase(make_loop_closure(s, {}, xi, 31));
  }
  static void TearDownTestSuite() {
    delete perturbed;
    perturbed = nullptr;
  }
  static inline Twist xi;
  static inline LoopClosureCase* perturbed = nullptr;
};

TEST_F(CaseFixture, InitialErrorEqualsPerturbation) {
  const Twist e = se3_error(perturbed->initial(), perturbed->truth);
  EXPECT_LT((e.rot - xi.rot).norm(), 1e-9);
  EXPECT_LT((e.trans - xi.trans).norm(), 1e-9);
}

TEST_F(CaseFixture, TruthMatchesTrajectories) {
  const auto& c = *perturbed;
  const RigidTransform expected = c.pass1.pose_at(c.tau1).inverse() * c.pass2_true.pose_at(c.tau2);
  EXPECT_LT((expected.matrix() - c.truth.matrix()).norm(), 1e-12);
}

// Noiseless lines re-registered with the true trajectory land on the surface.
TEST_F(CaseFixture, ClosedLoopPointsLieOnSurface) {
  const auto& c = *perturbed;
  const Scene scene(c.scene);
  SubmapSpec spec;
  spec.loop_closure_time = c.tau2;
  spec.voxel_grid = 1e-6;
  const PointCloud sub = build_submap(c.lines2, c.pass2_true, c.rig, spec);
  const RigidTransform world_from_sub = c.pass2_true.pose_at(c.tau2);
  std::size_t off = 0;
  for (const auto& p : sub.points)
    if (!onSurface(scene, world_from_sub.apply(p), 1e-6)) ++off;
  EXPECT_EQ(off, 0u);
  EXPECT_GT(sub.size(), 10000u);
}

TEST_F(CaseFixture, TruthSuperimposesSubmaps) {
  const auto& c = *perturbed;
  const Scene scene(c.scene);
  SubmapSpec spec;
  spec.voxel_grid = 1e-6;
  spec.loop_closure_time = c.tau2;
  const PointCloud source = build_submap(c.lines2, c.pass2_true, c.rig, spec);
  const RigidTransform world_from_target = c.pass1.pose_at(c.tau1);
  std::size_t off = 0;
  for (const auto& p : source.points)
    if (!onSurface(scene, world_from_target.apply(c.truth.apply(p)), 1e-6)) ++off;
  EXPECT_EQ(off, 0u);
}

TEST_F(CaseFixture, OverlapCoversQuarterOfFootprint) {
  const auto& c = *perturbed;
  const auto sub = build_case_submaps(c);
  auto cells = [](const std::vector<Vec3>& pts, const RigidTransform& t) {
    std::set<std::pair<long, long>> s;
    for (const auto& p : pts) {
      const Vec3 q = t.apply(p);
      s.emplace(std::lround(std::floor(q.x() / 0.25)), std::lround(std::floor(q.y() / 0.25)));
    }
    return s;
  };
  const auto target = cells(sub.target.points, RigidTransform());
  const auto source = cells(sub.source.points, c.truth);
  std::size_t shared = 0;
  for (const auto& k : source) shared += target.count(k);
  EXPECT_GE(static_cast<double>(shared) / static_cast<double>(target.size()), 0.25);
}

TEST(LoopClosure, ZeroPerturbationHasZeroInitialError) {
  SceneSpec s;
  s.seed = 4;
  const auto c = make_loop_closure(s, {}, Twist(), 4);
  const Twist e = se3_error(c.initial(), c.truth);
  EXPECT_LT(e.rot.norm(), 1e-12);
  EXPECT_LT(e.trans.norm(), 1e-12);
}

TEST(LoopClosure, PerturbationBoundsEnforced) {
  SceneSpec s;
  EXPECT_THROW(make_loop_closure(s, {}, Twist(deg2rad(11.0) * Vec3::UnitX(), Vec3::Zero()), 1), Error);
  EXPECT_THROW(make_loop_closure(s, {}, Twist(Vec3::Zero(), Vec3(0.6, 0.0, 0.0)), 1), Error);
}

TEST(LoopClosure, GenerationIsDeterministic) {
  const auto suite = loop_closure_suite();
  const auto a = suite[40].make(), b = suite[40].make();
  EXPECT_EQ(a.name, suite[40].name);
  ASSERT_EQ(a.lines1.size(), b.lines1.size());
  for (std::size_t k = 0; k < a.lines1.size(); ++k) ASSERT_EQ(a.lines1[k].points, b.lines1[k].points);
  ASSERT_EQ(a.lines2.size(), b.lines2.size());
  for (std::size_t k = 0; k < a.lines2.size(); ++k) ASSERT_EQ(a.lines2[k].points, b.lines2[k].points);
  EXPECT_EQ(a.truth.matrix(), b.truth.matrix());
}

TEST(LoopClosure, ImagesArePosedInSubmapFrame) {
  SceneSpec s;
  s.seed = 8;
  CrossingGeometry g;
  g.images_per_pass = 3;
  const auto c = make_loop_closure(s, g, Twist(), 8);
  ASSERT_EQ(c.images1.size(), 3u);
  ASSERT_EQ(c.images2.size(), 3u);
  // The middle image is taken at the loop-closure time.
  EXPECT_LT((c.images1[1].submap_from_body.matrix() - Eigen::Matrix4d::Identity()).norm(), 1e-12);
  std::size_t lit = 0;
  for (auto v : c.images1[1].image.rgb) lit += v != 0;
  EXPECT_GT(lit, c.images1[1].image.rgb.size() / 2);
}

TEST(Suite, CategoryMixAndPerturbationRanges) {
  const auto suite = loop_closure_suite();
  ASSERT_EQ(suite.size(), 118u);
  int counts[3] = {0, 0, 0};
  std::set<std::string> names;
  for (const auto& r : suite) {
    ++counts[static_cast<int>(r.scene.category)];
    names.insert(r.name);
    const double t = r.perturbation.trans.norm(), a = rad2deg(r.perturbation.rot.norm());
    EXPECT_GE(t, 0.1 - 1e-12);
    EXPECT_LE(t, 0.5 + 1e-12);
    EXPECT_GE(a, 0.5 - 1e-9);
    EXPECT_LE(a, 5.0 + 1e-9);
  }
  EXPECT_EQ(counts[static_cast<int>(SceneCategory::Structured)], 28);
  EXPECT_EQ(counts[static_cast<int>(SceneCategory::SemiStructured)], 24);
  EXPECT_EQ(counts[static_cast<int>(SceneCategory::Unstructured)], 66);
  EXPECT_EQ(names.size(), 118u);
  const auto again = loop_closure_suite();
  for (std::size_t k = 0; k < suite.size(); ++k) {
    EXPECT_EQ(again[k].seed, suite[k].seed);
    EXPECT_EQ(again[k].perturbation.rot, suite[k].perturbation.rot);
  }
}
