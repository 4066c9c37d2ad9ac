#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "seareg/core/filters.hpp"
#include "seareg/core/se3.hpp"
#include "seareg/core/spatial_index.hpp"
#include "seareg/io/ply.hpp"

using namespace seareg;

namespace {

RigidTransform randomTransform(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Vec3 axis(g(rng), g(rng), g(rng));
  axis.normalize();
  const Vec3 t(g(rng), g(rng), g(rng));
  return {Eigen::AngleAxisd(u(rng), axis).toRotationMatrix(), t * 3.0};
}

std::vector<Vec3> uniformCube(std::mt19937_64& rng, std::size_t n, double side = 1.0) {
  std::uniform_real_distribution<double> u(0.0, side);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

}  // namespace

TEST(Se3, ComposeIdentityAndInverse) {
  std::mt19937_64 rng(1);
  const auto t = randomTransform(rng, 2.0);
  const auto a = compose(RigidTransform::identity(), t);
  EXPECT_TRUE(a.matrix().isApprox(t.matrix(), 1e-15));
  const auto i = compose(t, t.inverse());
  EXPECT_LT((i.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Se3, RotationAboutZ) {
  const auto rz = RigidTransform::rotationZ(deg2rad(90.0));
  const Vec3 p = rz * Vec3(1, 0, 0);
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), 1.0, 1e-15);
  EXPECT_NEAR(p.z(), 0.0, 1e-15);
}

TEST(Se3, ComposeStaysInSE3) {
  std::mt19937_64 rng(2);
  RigidTransform acc;
  for (int i = 0; i < 10000; ++i) acc = acc * randomTransform(rng, 3.0);
  EXPECT_LT(RigidTransform::orthoDrift(acc.rotation()), 1e-9);
  EXPECT_NEAR(acc.rotation().determinant(), 1.0, 1e-9);
}

TEST(Se3, LogOfIdentityIsZero) {
  const Twist x = se3_log(RigidTransform::identity());
  EXPECT_EQ(x.vector(), Vec6::Zero());
}

TEST(Se3, ExpLogRoundTripRandom) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto t = randomTransform(rng, 3.0);
    const auto back = se3_exp(se3_log(t));
    EXPECT_LT((back.matrix() - t.matrix()).cwiseAbs().maxCoeff(), 1e-9) << "trial " << i;
  }
}

TEST(Se3, LogExpSmallTwistFirstOrder) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int i = 0; i < 1000; ++i) {
    Vec6 v;
    for (int k = 0; k < 6; ++k) v[k] = g(rng);
    v *= std::uniform_real_distribution<double>(0.0, 1e-3)(rng) / v.norm();
    const Twist back = se3_log(se3_exp(Twist(v)));
    EXPECT_LT((back.vector() - v).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Se3, LogNearPiThrows) {
  const RigidTransform t(Eigen::AngleAxisd(std::numbers::pi - 1e-8, Vec3::UnitX()).toRotationMatrix(), Vec3::Zero());
  try {
    (void)se3_log(t);
    FAIL() << "expected AngleNearPi";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AngleNearPi);
  }
  // Just outside the excluded band the round trip still holds.
  const RigidTransform ok(Eigen::AngleAxisd(std::numbers::pi - 1e-3, Vec3(1, 2, 3).normalized()).toRotationMatrix(),
                          Vec3(1, -2, 0.5));
  EXPECT_LT((se3_exp(se3_log(ok)).matrix() - ok.matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Se3, ErrorOfConstructedPerturbation) {
  std::mt19937_64 rng(5);
  const auto est = randomTransform(rng, 2.0);
  const Twist xi(Vec3(0.01, -0.02, 0.03), Vec3(0.1, 0.2, -0.05));
  const auto ref = est * se3_exp(xi);
  const Twist d = se3_error(est, ref);
  EXPECT_LT((d.vector() - xi.vector()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SpatialIndex, RadiusMatchesBruteForce) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> size(1, 2000);
  std::uniform_real_distribution<double> radius(0.01, 0.3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = uniformCube(rng, size(rng));
    const SpatialIndex index(pts);
    for (int q = 0; q < 20; ++q) {
      const Vec3 query = uniformCube(rng, 1)[0];
      const double r = radius(rng);
      std::vector<std::size_t> brute;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if ((pts[i] - query).squaredNorm() <= r * r) brute.push_back(i);
      ASSERT_EQ(index.radius(query, r), brute);
    }
  }
}

TEST(SpatialIndex, KnnMatchesBruteForceWithTies) {
  std::mt19937_64 rng(7);
  // Integer lattice gives many exact distance ties.
  std::vector<Vec3> pts;
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y)
      for (int z = 0; z < 4; ++z) pts.emplace_back(x, y, z);
  std::shuffle(pts.begin(), pts.end(), rng);
  const SpatialIndex index(pts);
  for (const Vec3& q : {Vec3(3, 3, 1), Vec3(3.5, 3.5, 1.5), Vec3(0, 0, 0), Vec3(7, 2, 3)}) {
    for (std::size_t k : {1u, 4u, 7u, 19u}) {
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - q).squaredNorm(), i);
      std::sort(all.begin(), all.end());
      const auto got = index.knn(q, k);
      ASSERT_EQ(got.size(), k);
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_EQ(got[j].index, all[j].second);
        EXPECT_EQ(got[j].sq_distance, all[j].first);
      }
    }
  }
}

TEST(SpatialIndex, ResolutionOfLattice) {
  std::vector<Vec3> pts;
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y) pts.emplace_back(0.05 * x, 0.05 * y, 0.0);
  EXPECT_NEAR(SpatialIndex(pts).resolution(), 0.05, 1e-12);
}

TEST(Voxel, CubeCornersCollapseToCentre) {
  PointCloud c;
  for (int i = 0; i < 8; ++i)
    c.points.emplace_back(0.005 + 0.04 * (i & 1), 0.005 + 0.04 * ((i >> 1) & 1), 0.005 + 0.04 * ((i >> 2) & 1));
  const auto out = voxel_downsample(c, 0.05);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_LT((out.points[0] - Vec3(0.025, 0.025, 0.025)).norm(), 1e-15);
}

TEST(Voxel, EmptyInEmptyOut) {
  EXPECT_TRUE(voxel_downsample(PointCloud{}, 0.05).empty());
  EXPECT_THROW(voxel_downsample(PointCloud{}, 0.0), Error);
}

TEST(Voxel, CountMatchesIndependentHashing) {
  std::mt19937_64 rng(8);
  const PointCloud c(uniformCube(rng, 10000));
  const double grid = 0.05;
  std::set<std::tuple<long, long, long>> occupied;
  for (const auto& p : c.points)
    occupied.emplace(static_cast<long>(std::floor(p.x() / grid)), static_cast<long>(std::floor(p.y() / grid)),
                     static_cast<long>(std::floor(p.z() / grid)));
  const auto out = voxel_downsample(c, grid);
  EXPECT_EQ(out.size(), occupied.size());
}

TEST(Voxel, OutputInsideVoxelsAndAttributesAveraged) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud c(uniformCube(rng, 3000, 2.0));
    for (auto& p : c.points) p -= Vec3(1, 1, 1);
    std::vector<Vec3> n(c.size(), Vec3::UnitZ()), col(c.size(), Vec3(0.2, 0.4, 0.6));
    c.setNormals(n);
    c.setColours(col);
    const double grid = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
    const auto out = voxel_downsample(c, grid);
    EXPECT_LE(out.size(), c.size());
    std::map<VoxelKey, int> seen;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto key = voxel_key(out.points[i], grid);
      EXPECT_EQ(seen[key]++, 0) << "two outputs in one voxel";
      for (int d = 0; d < 3; ++d) {
        EXPECT_GE(out.points[i][d], static_cast<double>(key[d]) * grid);
        EXPECT_LT(out.points[i][d], static_cast<double>(key[d] + 1) * grid);
      }
      EXPECT_NEAR((out.normals[i] - Vec3::UnitZ()).norm(), 0.0, 1e-12);
      EXPECT_NEAR((out.colours[i] - Vec3(0.2, 0.4, 0.6)).norm(), 0.0, 1e-12);
    }
  }
}

TEST(Normals, PlanarGridPointsUp) {
  PointCloud c;
  for (int x = 0; x < 30; ++x)
    for (int y = 0; y < 30; ++y) c.points.emplace_back(0.05 * x, 0.05 * y, 0.0);
  const auto out = estimate_normals(c, 0.12, Vec3(0, 0, 10));
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_TRUE(out.normalValid(i));
    EXPECT_LT((out.normals[i] - Vec3::UnitZ()).norm(), 1e-6);
  }
}

TEST(Normals, SphereNormalsAntiRadialFromCentre) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  PointCloud c;
  for (int i = 0; i < 4000; ++i) c.points.push_back(Vec3(g(rng), g(rng), g(rng)).normalized());
  const auto out = estimate_normals(c, 0.25, Vec3::Zero());
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_TRUE(out.normalValid(i));
    const Vec3 analytic = -c.points[i];  // toward the centre viewpoint
    const double angle = std::acos(std::clamp(out.normals[i].dot(analytic), -1.0, 1.0));
    EXPECT_LT(rad2deg(angle), 5.0);
  }
}

TEST(Normals, TwoPointCloudFlagged) {
  PointCloud c({Vec3(0, 0, 0), Vec3(0.01, 0, 0)});
  const auto out = estimate_normals(c, 1.0, Vec3(0, 0, 1));
  EXPECT_FALSE(out.normalValid(0));
  EXPECT_FALSE(out.normalValid(1));
  EXPECT_EQ(out.normals.size(), 2u);
}

TEST(Normals, RotationEquivariant) {
  std::mt19937_64 rng(11);
  PointCloud c;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 3000; ++i) {
    const double x = u(rng), y = u(rng);
    c.points.emplace_back(x, y, 0.2 * std::sin(3 * x) * std::cos(2 * y));
  }
  const Vec3 view(0.3, -0.2, 5.0);
  const auto rot = randomTransform(rng, 3.0);
  const auto n1 = estimate_normals(c, 0.15, view);
  PointCloud rc = transformed(c, rot);
  const auto n2 = estimate_normals(rc, 0.15, rot.apply(view));
  for (std::size_t i = 0; i < c.size(); ++i) {
    ASSERT_EQ(n1.normalValid(i), n2.normalValid(i));
    if (n1.normalValid(i)) {
      EXPECT_LT((rot.rotate(n1.normals[i]) - n2.normals[i]).norm(), 1e-6);
    }
  }
}

TEST(Ply, RoundTripBothFormats) {
  std::mt19937_64 rng(12);
  PointCloud c(uniformCube(rng, 200));
  c = estimate_normals(c, 0.3, Vec3(0, 0, 5));
  std::vector<Vec3> col(c.size());
  for (auto& v : col) v = Vec3(rng() % 256, rng() % 256, rng() % 256) / 255.0;
  c.setColours(col);
  c.colour_valid[3] = 0;
  for (auto fmt : {io::PlyFormat::Ascii, io::PlyFormat::BinaryLittleEndian}) {
    std::stringstream ss;
    io::write_ply(ss, c, fmt);
    const auto back = io::read_ply(ss);
    ASSERT_EQ(back.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_LT((back.points[i] - c.points[i]).norm(), 1e-6);
      EXPECT_EQ(back.normalValid(i), c.normalValid(i));
      if (c.normalValid(i)) {
        EXPECT_LT((back.normals[i] - c.normals[i]).norm(), 1e-6);
      }
      EXPECT_EQ(back.colourValid(i), c.colourValid(i));
      if (c.colourValid(i)) {
        EXPECT_LT((back.colours[i] - c.colours[i]).norm(), 1e-9);
      }
    }
  }
}

TEST(Ply, UnknownPropertiesSkippedWithWarning) {
  std::vector<std::string> warnings;
  auto old = log::set_sink([&](std::string_view m) { warnings.emplace_back(m); });
  std::stringstream ss;
  ss << "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float intensity\n"
        "property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
        "1 99 2 3\n4 98 5 6\n3 0 1 1\n";
  const auto c = io::read_ply(ss);
  log::set_sink(old);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], Vec3(4, 5, 6));
  EXPECT_FALSE(c.hasNormals());
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(Ply, RejectsGarbage) {
  std::stringstream ss("not a ply\n");
  EXPECT_THROW(io::read_ply(ss), Error);
}
