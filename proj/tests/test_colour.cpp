#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "seareg/colour/colourize.hpp"
#include "seareg/io/image_io.hpp"

using namespace seareg;

namespace {

CameraModel vga() { return {500.0, 500.0, 320.0, 240.0, 640, 480}; }

// First hit of the ray from `o` through `p` with a sphere of radius r at the
// origin; p is visible when that first hit is p itself.
bool sphereRayVisible(const Vec3& o, const Vec3& p, double r) {
  const Vec3 d = (p - o).normalized();
  const double b = o.dot(d);
  const double c = o.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return true;
  const double t_near = -b - std::sqrt(disc);
  return std::abs(t_near - (p - o).norm()) < 1e-9 * r;
}

std::vector<Vec3> uniformSphere(std::size_t n, double r, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(r * Vec3(g(rng), g(rng), g(rng)).normalized());
  return pts;
}

}  // namespace

TEST(ConvexHull, CubeCornersAreTheOnlyVertices) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 500; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const ConvexHull hull(pts);
  const std::vector<std::size_t> expected{0, 1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(hull.vertices(), expected);
  for (const auto& p : pts) EXPECT_LE(hull.signedDistance(p), 1e-9);
}

TEST(ConvexHull, PointsOnSphereAreAllVertices) {
  const auto pts = uniformSphere(2000, 1.0, 11);
  const ConvexHull hull(pts);
  EXPECT_EQ(hull.vertices().size(), pts.size());
  // Euler: a triangulated sphere with V vertices has 2V - 4 faces.
  EXPECT_EQ(hull.faceCount(), 2 * pts.size() - 4);
}

TEST(ConvexHull, DegenerateInputsThrow) {
  const std::vector<Vec3> coplanar{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0.5, 0.2, 0}};
  try {
    ConvexHull h(coplanar);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateHull);
  }
  const std::vector<Vec3> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  EXPECT_THROW(ConvexHull h(three), Error);
}

TEST(Visibility, SinglePointIsVisible) {
  const auto v = visible_points(std::vector<Vec3>{Vec3(1, 2, 3)}, Vec3::Zero());
  EXPECT_EQ(v, std::vector<std::size_t>{0});
}

TEST(Visibility, SphereAgreesWithRayCastOracle) {
  const double r = 1.0;
  const auto pts = uniformSphere(5000, r, 21);
  const Vec3 cam(0, 0, 3 * r);
  const auto vis = visible_points(pts, cam, 2.0);
  std::vector<char> got(pts.size(), 0);
  for (auto i : vis) got[i] = 1;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) agree += (got[i] != 0) == sphereRayVisible(cam, pts[i], r);
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(pts.size()), 0.95);
}

namespace {

struct TwoPlaneResult {
  std::size_t near_visible = 0, occluded = 0, occluded_hidden = 0, free = 0, free_visible = 0, agree = 0, total = 0;
};

// Near square z = 0 on [-1,1]^2 and a far square z = -1 of half-size
// `far_half`; camera at (0,0,3). Oracle: a far point is occluded when the ray
// to it crosses z = 0 inside the near square.
TwoPlaneResult twoPlanes(double far_half, double gamma) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2500; ++i) pts.emplace_back(u(rng), u(rng), 0.0);
  for (int i = 0; i < 2500; ++i) pts.emplace_back(far_half * u(rng), far_half * u(rng), -1.0);
  const Vec3 cam(0, 0, 3);
  std::vector<char> got(pts.size(), 0);
  for (auto i : visible_points(pts, cam, gamma)) got[i] = 1;
  TwoPlaneResult r;
  r.total = pts.size();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool oracle = true;
    if (i >= 2500) {
      const Vec3 d = pts[i] - cam;
      const Vec3 hit = cam + (-cam.z() / d.z()) * d;
      oracle = !(std::abs(hit.x()) <= 1.0 && std::abs(hit.y()) <= 1.0);
      if (oracle) {
        ++r.free;
        r.free_visible += got[i];
      } else {
        ++r.occluded;
        r.occluded_hidden += got[i] == 0;
      }
    } else {
      r.near_visible += got[i];
    }
    r.agree += (got[i] != 0) == oracle;
  }
  return r;
}

}  // namespace

TEST(Visibility, TwoPlanesNearVisibleFarHidden) {
  // Far square lies inside the near square's shadow (which spans 4/3 at z = -1).
  const auto r = twoPlanes(1.2, 2.0);
  ASSERT_EQ(r.occluded, 2500u);
  EXPECT_GE(r.near_visible / 2500.0, 0.95);
  EXPECT_GE(r.occluded_hidden / 2500.0, 0.95);
  EXPECT_GE(static_cast<double>(r.agree) / static_cast<double>(r.total), 0.95);
}

TEST(Visibility, TwoPlanesPartialOcclusion) {
  // Far square larger than the shadow. Free far points just outside the
  // silhouette are partly lost to the near edge at gamma = 2 (about 80% kept).
  const auto r = twoPlanes(2.0, 2.0);
  ASSERT_GT(r.occluded, 100u);
  EXPECT_GE(r.near_visible / 2500.0, 0.95);
  EXPECT_GE(static_cast<double>(r.occluded_hidden) / static_cast<double>(r.occluded), 0.95);
  EXPECT_GE(static_cast<double>(r.free_visible) / static_cast<double>(r.free), 0.75);
}

TEST(Visibility, SubsetAndInvariantUnderRotationAboutCamera) {
  const auto pts = uniformSphere(3000, 1.0, 4);
  const Vec3 cam(0.3, -0.2, 2.5);
  const auto a = visible_points(pts, cam);
  const Mat3 r = Eigen::AngleAxisd(0.9, Vec3(1, -2, 0.5).normalized()).toRotationMatrix();
  std::vector<Vec3> rotated;
  for (const auto& p : pts) rotated.push_back(cam + r * (p - cam));
  const auto b = visible_points(rotated, cam);
  for (auto i : a) EXPECT_LT(i, pts.size());
  std::vector<std::size_t> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  // Exact in real arithmetic; allow hull-tolerance flips of near-degenerate points.
  EXPECT_LE(diff.size(), a.size() / 200);
}

TEST(Visibility, CoincidentCameraRejected) {
  EXPECT_THROW(visible_points(std::vector<Vec3>{Vec3::Zero(), Vec3(1, 0, 0)}, Vec3::Zero()), Error);
  EXPECT_THROW(visible_points(std::vector<Vec3>{}, Vec3::Zero()), Error);
}

TEST(Project, IdentityIntrinsics) {
  const CameraModel k{1.0, 1.0, 0.0, 0.0, 1, 1};
  const auto px = project(k, Vec3(0, 0, 1));
  ASSERT_TRUE(px);
  EXPECT_EQ(*px, Vec2(0, 0));
}

TEST(Project, HandEvaluatedPixelIsOutsideRaster) {
  const auto cam = vga();
  const auto raw = pinhole(cam, Vec3(1, 2, 2));
  ASSERT_TRUE(raw);
  EXPECT_DOUBLE_EQ(raw->x(), 570.0);
  EXPECT_DOUBLE_EQ(raw->y(), 740.0);
  EXPECT_FALSE(project(cam, Vec3(1, 2, 2)));
  EXPECT_FALSE(project(cam, Vec3(0, 0, -1)));
}

TEST(Project, UnprojectRoundTrip) {
  const auto cam = vga();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), z(0.2, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(u(rng), u(rng), z(rng));
    const auto px = pinhole(cam, p);
    ASSERT_TRUE(px);
    EXPECT_LT((unproject(cam, *px, p.z()) - p).norm(), 1e-6);
  }
}

TEST(GaussianWeight, PeakSigmaAndMonotone) {
  const auto cam = vga();
  EXPECT_DOUBLE_EQ(gaussian_weight(cam, Vec2(cam.cx, cam.cy), 0.25), 1.0);
  EXPECT_NEAR(gaussian_weight(cam, Vec2(cam.cx + 0.25 * cam.width, cam.cy), 0.25), std::exp(-0.5), 1e-15);
  for (int r = 0; r < 100; ++r) {
    const double a = 2.0 * M_PI * r / 100.0;
    const Vec2 dir(std::cos(a), std::sin(a));
    double prev = 2.0;
    for (double s = 0.0; s < 300.0; s += 1.0) {
      const Vec2 px = Vec2(cam.cx, cam.cy) + s * dir;
      if (!cam.inRaster(px)) break;
      const double w = gaussian_weight(cam, px, 0.25);
      EXPECT_LT(w, prev);
      prev = w;
    }
  }
}

TEST(FuseColours, HandCaseAndTrivialCases) {
  const Vec3 f = fuse_colours({{Vec3(1, 0, 0), 1.0}, {Vec3(0, 0, 1), 3.0}});
  EXPECT_LT((f - Vec3(0.25, 0.0, 0.75)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(fuse_colours({{Vec3(0.1, 0.2, 0.3), 0.7}}), Vec3(0.1, 0.2, 0.3));
  const Vec3 m = fuse_colours({{Vec3(0.1, 0.5, 0.9), 2.0}, {Vec3(0.3, 0.1, 0.0), 2.0}, {Vec3(0.2, 0.3, 0.6), 2.0}});
  EXPECT_LT((m - Vec3(0.2, 0.3, 0.5)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FuseColours, NoCandidates) {
  for (const auto& cands : {std::vector<ColourCandidate>{}, std::vector<ColourCandidate>{{Vec3(1, 1, 1), 0.0}}}) {
    try {
      (void)fuse_colours(cands);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::NoCandidates);
    }
  }
}

TEST(FuseColours, ConvexCombinationProperty) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> k(1, 8);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<ColourCandidate> cands(static_cast<std::size_t>(k(rng)));
    for (auto& c : cands) c = {Vec3(u(rng), u(rng), u(rng)), u(rng)};
    cands.front().weight += 1e-3;
    const Vec3 f = fuse_colours(cands);
    for (int ch = 0; ch < 3; ++ch) {
      double lo = 1.0, hi = 0.0;
      for (const auto& c : cands)
        if (c.weight > 0.0) {
          lo = std::min(lo, c.colour[ch]);
          hi = std::max(hi, c.colour[ch]);
        }
      ASSERT_GE(f[ch], lo);
      ASSERT_LE(f[ch], hi);
    }
  }
}

namespace {

PointCloud facingPatch(double depth, double half, int n) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      c.points.emplace_back(-half + 2.0 * half * i / (n - 1), -half + 2.0 * half * j / (n - 1), depth);
  return c;
}

Image checker(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto* p = img.at(x, y);
      p[0] = static_cast<std::uint8_t>((x * 7 + y) % 256);
      p[1] = static_cast<std::uint8_t>(((x / 16 + y / 16) % 2) * 200 + 20);
      p[2] = static_cast<std::uint8_t>((y * 3) % 256);
    }
  return img;
}

Image flat(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image img(w, h);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

}  // namespace

TEST(Colourize, SingleImageMatchesDirectLookup) {
  const auto cam = vga();
  const auto cloud = facingPatch(2.0, 0.8, 25);
  const PosedImage pi{checker(cam.width, cam.height), RigidTransform()};
  const auto out = colourize_submap(cloud, {pi}, cam, SensorRig{});
  ASSERT_EQ(out.size(), cloud.size());
  std::size_t seen = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.colourValid(i)) continue;
    ++seen;
    const Vec3 expected = pi.image.sample(*project(cam, cloud.points[i]));
    EXPECT_LT((out.colours[i] - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(seen, cloud.size());
}

TEST(Colourize, CentredViewOutweighsBorderView) {
  const auto cam = vga();
  const auto cloud = facingPatch(2.0, 0.3, 9);
  const std::size_t centre = 4 * 9 + 4;
  ASSERT_EQ(cloud.points[centre], Vec3(0, 0, 2));
  const PosedImage a{flat(cam.width, cam.height, 230, 40, 40), RigidTransform()};
  // Shifted camera sees the centre point near the left border (u = 20).
  const PosedImage b{flat(cam.width, cam.height, 40, 40, 230), RigidTransform::translation(Vec3(1.2, 0, 0))};
  const auto out = colourize_submap(cloud, {a, b}, cam, SensorRig{});
  ASSERT_TRUE(out.colourValid(centre));
  const Vec3 ca = a.image.sample(Vec2(0, 0)), cb = b.image.sample(Vec2(0, 0));
  const Vec3 got = out.colours[centre];
  EXPECT_LT((got - ca).norm(), (got - cb).norm());

  const double wa = gaussian_weight(cam, Vec2(320, 240), 0.25);
  const double wb = gaussian_weight(cam, Vec2(20, 240), 0.25);
  const Vec3 lin = (wa * srgb_to_linear(ca) + wb * srgb_to_linear(cb)) / (wa + wb);
  EXPECT_LT((got - linear_to_srgb(lin)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Colourize, NoImagesFlagsEverything) {
  const auto cloud = facingPatch(2.0, 0.5, 5);
  const auto out = colourize_submap(cloud, {}, vga(), SensorRig{});
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_FALSE(out.colourValid(i));
}

TEST(Colourize, OccludedPointsTakeNoColourFromThatView) {
  const auto cam = vga();
  auto cloud = facingPatch(2.0, 0.4, 15);
  const auto far = facingPatch(4.0, 0.1, 5);
  for (const auto& p : far.points) cloud.points.push_back(p);
  const PosedImage pi{flat(cam.width, cam.height, 100, 150, 200), RigidTransform()};
  const auto out = colourize_submap(cloud, {pi}, cam, SensorRig{});
  std::size_t hidden = 0;
  for (std::size_t i = 225; i < out.size(); ++i) hidden += !out.colourValid(i);
  EXPECT_GE(hidden, 24u);
}

TEST(Colourize, ResultIndependentOfImageOrder) {
  const auto cam = vga();
  const auto cloud = facingPatch(2.0, 0.6, 20);
  const PosedImage a{checker(cam.width, cam.height), RigidTransform()};
  const PosedImage b{flat(cam.width, cam.height, 10, 200, 90), RigidTransform::translation(Vec3(0.3, -0.2, 0))};
  const auto ab = colourize_submap(cloud, {a, b}, cam, SensorRig{});
  const auto ba = colourize_submap(cloud, {b, a}, cam, SensorRig{});
  for (std::size_t i = 0; i < cloud.size(); ++i) EXPECT_LT((ab.colours[i] - ba.colours[i]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ImageIo, PngAndPpmRoundTripWithSidecar) {
  const auto dir = std::filesystem::temp_directory_path() / "seareg_image_io";
  std::filesystem::create_directories(dir);
  const Image img = checker(37, 23);
  for (const char* name : {"a.png", "a.ppm"}) {
    const auto path = (dir / name).string();
    const PosedImage pi{img, RigidTransform(Eigen::AngleAxisd(0.4, Vec3::UnitZ()).toRotationMatrix(), Vec3(1, 2, 3))};
    io::write_posed_image(path, pi, 4.5);
    const auto back = io::read_posed_image(path);
    EXPECT_EQ(back.image.width, 37);
    EXPECT_EQ(back.image.rgb, img.rgb);
    EXPECT_LT((back.submap_from_body.matrix() - pi.submap_from_body.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(io::read_image((dir / "missing.png").string()), Error);
  std::filesystem::remove_all(dir);
}
