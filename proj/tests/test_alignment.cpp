#include <gtest/gtest.h>

#include <random>
#include <set>

#include "seareg/alignment/alignment.hpp"
#include "seareg/core/filters.hpp"

using namespace seareg;

namespace {

DescriptorSet randomSet(DescriptorKind kind, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  DescriptorSet d(kind, idx);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t r = 0; r < n; ++r)
    for (Eigen::Index k = 0; k < d.data().cols(); ++k) d.row(r)[k] = u(rng);
  return d;
}

// O(n^2) enumeration: rank every target for every source and vice versa.
std::set<std::pair<std::size_t, std::size_t>> bruteMutual(const DescriptorSet& a, const DescriptorSet& b, std::size_t k) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < a.data().cols(); ++c) s += (a.row(i)[c] - b.row(j)[c]) * (a.row(i)[c] - b.row(j)[c]);
      d[i][j] = std::sqrt(s);
    }
  auto inTopK = [&](std::size_t i, std::size_t j, bool by_row) {
    std::size_t better = 0;
    if (by_row) {
      for (std::size_t x = 0; x < m; ++x) better += d[i][x] < d[i][j] || (d[i][x] == d[i][j] && x < j);
    } else {
      for (std::size_t x = 0; x < n; ++x) better += d[x][j] < d[i][j] || (d[x][j] == d[i][j] && x < i);
    }
    return better < k;
  };
  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (inTopK(i, j, true) && inTopK(i, j, false)) cand.emplace_back(d[i][j], i, j);
  std::sort(cand.begin(), cand.end());
  std::set<std::size_t> used_a, used_b;
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (auto [dist, i, j] : cand) {
    if (used_a.count(i) || used_b.count(j)) continue;
    used_a.insert(i);
    used_b.insert(j);
    out.emplace(i, j);
  }
  return out;
}

std::set<std::pair<std::size_t, std::size_t>> asSet(const CorrespondenceSet& c) {
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (const auto& p : c.pairs) s.emplace(p.source, p.target);
  return s;
}

RigidTransform randomPose(std::mt19937_64& rng, double max_angle, double max_trans) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
  const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
  return se3_exp(Twist(max_angle * u(rng) * axis, Vec3::Zero())) * RigidTransform::translation(max_trans * u(rng) * dir);
}

PointCloud hills(double spacing = 0.05) {
  PointCloud c;
  for (double x = -2.0; x <= 2.0; x += spacing)
    for (double y = -2.0; y <= 2.0; y += spacing)
      c.points.emplace_back(x, y, -3.0 + 0.3 * std::exp(-((x - 0.5) * (x - 0.5) + y * y) / 0.4) +
                                      0.2 * std::sin(1.7 * x) * std::cos(2.3 * y) + 0.15 * std::exp(-((x + 1) * (x + 1) + (y - 1) * (y - 1)) / 0.2));
  return estimate_normals(c, 0.25, Vec3::Zero());
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Match, IdenticalSetsPairIdentity) {
  std::mt19937_64 rng(1);
  const auto a = randomSet(DescriptorKind::SHOT, 40, rng);
  const auto c = match(a, a, 1);
  ASSERT_EQ(c.size(), 40u);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(c.pairs[i].source, i);
    EXPECT_EQ(c.pairs[i].target, i);
    EXPECT_EQ(c.pairs[i].distance, 0.0);
  }
}

TEST(Match, MutualityFilter) {
  // src 0 is equidistant to both targets; tgt 1 prefers src 1, so src 0 keeps
  // a single pair with tgt 0.
  DescriptorSet src(DescriptorKind::PFH, {0, 1}), tgt(DescriptorKind::PFH, {0, 1});
  src.row(0)[0] = 0.0;
  src.row(1)[0] = 0.9;
  tgt.row(0)[0] = -1.0;
  tgt.row(1)[0] = 1.0;
  const auto c = match(src, tgt, 1);
  EXPECT_EQ(asSet(c), (std::set<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}}));
  // Without src 1, tgt 1 would also be mutual with src 0 under k = 2, but
  // uniqueness keeps one pair per row.
  DescriptorSet lone(DescriptorKind::PFH, {0});
  const auto d = match(lone, tgt, 2);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.pairs[0].source, 0u);
}

TEST(Match, EqualsBruteForceOracle) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> size(1, 300);
  for (int inst = 0; inst < 50; ++inst) {
    const auto a = randomSet(DescriptorKind::SHOT, size(rng), rng);
    const auto b = randomSet(DescriptorKind::SHOT, size(rng), rng);
    const std::size_t k = inst % 2 ? 1 : 3;
    EXPECT_EQ(asSet(match(a, b, k)), bruteMutual(a, b, k)) << "instance " << inst;
  }
}

TEST(Match, SymmetricAndUnique) {
  std::mt19937_64 rng(3);
  const auto a = randomSet(DescriptorKind::USC, 120, rng), b = randomSet(DescriptorKind::USC, 90, rng);
  for (std::size_t k : {1u, 2u, 5u}) {
    const auto ab = match(a, b, k), ba = match(b, a, k);
    std::set<std::pair<std::size_t, std::size_t>> transposed;
    for (const auto& p : ba.pairs) transposed.emplace(p.target, p.source);
    EXPECT_EQ(asSet(ab), transposed);
    std::set<std::size_t> s, t;
    for (const auto& p : ab.pairs) {
      EXPECT_TRUE(s.insert(p.source).second);
      EXPECT_TRUE(t.insert(p.target).second);
    }
  }
}

TEST(Match, EmptyRowsAndErrors) {
  std::mt19937_64 rng(4);
  auto a = randomSet(DescriptorKind::PFH, 10, rng);
  a.row(3).setZero();
  a.setEmpty(3, true);
  auto b = a;
  const auto c = match(a, b, 1);
  EXPECT_EQ(c.size(), 9u);
  for (const auto& p : c.pairs) EXPECT_NE(p.source, 3u);
  try {
    match(a, randomSet(DescriptorKind::SHOT, 5, rng));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::KindMismatch);
  }
  EXPECT_THROW(match(a, DescriptorSet(DescriptorKind::PFH, {})), Error);
}

// ---------------------------------------------------------------------------

TEST(CoarseAlign, OutlierFreeRecoversTransform) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  const RigidTransform truth = randomPose(rng, 3.0, 2.0);
  std::vector<Vec3> s, t;
  CorrespondenceSet corr;
  for (std::size_t i = 0; i < 20; ++i) {
    s.emplace_back(u(rng), u(rng), 0.3 * u(rng));
    t.push_back(truth.apply(s.back()));
    corr.pairs.push_back({i, i, 0.0});
  }
  const auto r = coarse_align(corr, s, t);
  EXPECT_LT((r.transform.matrix() - truth.matrix()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(r.inliers, 20u);
  EXPECT_EQ(r.recall, 1.0);
}

TEST(CoarseAlign, ThirtyPercentInliersWithNoise) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  std::normal_distribution<double> noise(0.0, 0.01);
  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform truth = randomPose(rng, std::numbers::pi, 1.0);
    std::vector<Vec3> s, t;
    CorrespondenceSet corr;
    for (std::size_t i = 0; i < 100; ++i) {
      s.emplace_back(u(rng), u(rng), 0.2 * u(rng));
      if (i % 10 < 3)
        t.push_back(truth.apply(s.back()) + Vec3(noise(rng), noise(rng), noise(rng)));
      else
        t.push_back(truth.apply(Vec3(u(rng), u(rng), 0.2 * u(rng))));
      corr.pairs.push_back({i, i, 0.0});
    }
    CoarseParams p;
    p.seed = 1000 + trial;
    try {
      const auto r = coarse_align(corr, s, t, p);
      const Twist e = se3_error(r.transform, truth);
      if (rad2deg(e.rot.norm()) < 2.0 && (r.transform.translation() - truth.translation()).norm() < 0.05) ++good;
      EXPECT_DOUBLE_EQ(r.recall, static_cast<double>(r.inliers) / 100.0);
    } catch (const AlignmentFailure&) {
    }
  }
  EXPECT_GE(good, 95);
}

TEST(CoarseAlign, InconsistentCorrespondencesFail) {
  const std::vector<Vec3> s{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const std::vector<Vec3> t{{5, 1, 0}, {-2, 3, 1}, {0.5, -4, 2}, {3, 3, -3}};
  CorrespondenceSet corr;
  for (std::size_t i = 0; i < 4; ++i) corr.pairs.push_back({i, i, 0.0});
  try {
    coarse_align(corr, s, t);
    FAIL();
  } catch (const AlignmentFailure& e) {
    EXPECT_EQ(e.code(), Errc::AlignmentFailed);
    EXPECT_LT(e.best().inliers, 5u);
    EXPECT_EQ(e.best().features, 4u);
  }
  corr.pairs.resize(2);
  try {
    coarse_align(corr, s, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientCorrespondences);
  }
}

TEST(CoarseAlign, DeterministicUnderSeed) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Vec3> s, t;
  CorrespondenceSet corr;
  const RigidTransform truth = randomPose(rng, 1.0, 1.0);
  for (std::size_t i = 0; i < 60; ++i) {
    s.emplace_back(u(rng), u(rng), u(rng));
    t.push_back(i % 2 ? truth.apply(s.back()) : Vec3(u(rng), u(rng), u(rng)));
    corr.pairs.push_back({i, i, 0.0});
  }
  const auto a = coarse_align(corr, s, t), b = coarse_align(corr, s, t);
  EXPECT_EQ(a.transform.matrix(), b.transform.matrix());
  EXPECT_EQ(a.inlier_pairs, b.inlier_pairs);
  EXPECT_EQ(a.iterations, b.iterations);
}

// ---------------------------------------------------------------------------

TEST(Se3Error, Properties) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform est = randomPose(rng, 2.5, 3.0), right = randomPose(rng, 2.5, 3.0);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const Twist xi(Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)));
    EXPECT_LT(se3_error(est, est).vector().norm(), 1e-12);
    EXPECT_LT((se3_error(est, est * se3_exp(xi)).vector() - xi.vector()).norm(), 1e-9);
    const RigidTransform ref = est * se3_exp(xi);
    const Twist base = se3_error(est, ref);
    // A common left factor cancels exactly; a common right factor conjugates
    // the error, which keeps both part norms.
    EXPECT_LT((se3_error(right * est, right * ref).vector() - base.vector()).norm(), 1e-9);
    const Twist conj = se3_error(est * right, ref * right);
    EXPECT_NEAR(conj.rot.norm(), base.rot.norm(), 1e-9);
    EXPECT_LT((conj.rot - right.rotation().transpose() * base.rot).norm(), 1e-9);
  }
  const Twist e = se3_error(RigidTransform(), RigidTransform::translation(Vec3(0.1, 0, 0)));
  EXPECT_EQ(e.rot.norm(), 0.0);
  EXPECT_NEAR(e.trans.norm(), 0.1, 1e-15);
}

// ---------------------------------------------------------------------------

TEST(FineAlign, AlignedCloudsStayPut) {
  const PointCloud c = hills();
  const auto r = fine_align(c, c, RigidTransform());
  EXPECT_LT((r.transform.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-6);
  ASSERT_TRUE(r.residuals);
  EXPECT_LT(r.residuals->mean, 1e-9);
  EXPECT_DOUBLE_EQ(r.recall, static_cast<double>(r.inliers) / static_cast<double>(r.features));
}

TEST(FineAlign, RecoversSmallPerturbation) {
  const PointCloud tgt = hills();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized(), dir = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Twist xi(deg2rad(5.0) * axis, 0.2 * dir);
    const RigidTransform truth = se3_exp(xi);  // maps src into tgt
    const PointCloud src = transformed(tgt, truth.inverse());
    const auto r = fine_align(src, tgt, RigidTransform());
    const Twist e = se3_error(r.transform, truth);
    EXPECT_LT(e.rot.norm(), 1e-3) << "trial " << trial;
    EXPECT_LT(e.trans.norm(), 1e-3) << "trial " << trial;
    EXPECT_TRUE(r.converged);
  }
}

TEST(FineAlign, NeverRaisesRobustCost) {
  // Source sampled on a shifted grid with noise, so no pose fits exactly.
  const PointCloud tgt = hills(0.1);
  PointCloud src = hills(0.1);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& p : src.points) p += Vec3(0.037, 0.051, noise(rng));
  const SpatialIndex index(tgt.points);
  const FineParams params;
  // Mean Cauchy cost over pairs within range whose normals agree.
  auto cost = [&](const RigidTransform& t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Vec3 p = t.apply(src.points[i]);
      const auto nn = index.knn(p, 1);
      if (nn[0].sq_distance > params.max_corr_dist * params.max_corr_dist) continue;
      const Vec3& normal = tgt.normals[nn[0].index];
      if ((t.rotation() * src.normals[i]).dot(normal) < params.normal_min_cos) continue;
      const double r = normal.dot(p - tgt.points[nn[0].index]);
      sum += std::log1p(r * r / (params.cauchy_scale * params.cauchy_scale));
      ++n;
    }
    return sum / static_cast<double>(n);
  };
  for (int trial = 0; trial < 10; ++trial) {
    const RigidTransform prior = randomPose(rng, deg2rad(3.0), 0.1);
    const auto r = fine_align(src, tgt, prior, params);
    EXPECT_LE(cost(r.transform), cost(prior)) << "trial " << trial;
  }
}

TEST(FineAlign, DisjointCloudsHaveNoOverlap) {
  const PointCloud c = hills(0.1);
  const PointCloud far = transformed(c, RigidTransform::translation(Vec3(100.0, 0.0, 0.0)));
  try {
    fine_align(far, c, RigidTransform());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoOverlap);
  }
  PointCloud bare = c;
  bare.clearNormals();
  EXPECT_THROW(fine_align(bare, bare, RigidTransform()), Error);
}

TEST(SelfConsistency, TruthAndVerticalOffset) {
  const PointCloud c = hills();
  EXPECT_LT(self_consistency(c, c, RigidTransform()).mean, 1e-6);

  PointCloud flat;
  for (double x = -2.0; x <= 2.0; x += 0.05)
    for (double y = -2.0; y <= 2.0; y += 0.05) flat.points.emplace_back(x, y, -3.0);
  flat = estimate_normals(flat, 0.2, Vec3::Zero());
  const auto s = self_consistency(flat, flat, RigidTransform::translation(Vec3(0, 0, 0.05)));
  EXPECT_NEAR(s.mean, 0.05, 0.005);
  EXPECT_NEAR(s.median, 0.05, 0.005);
  EXPECT_LE(s.median, s.p95);

  try {
    self_consistency(flat, flat, RigidTransform::translation(Vec3(0, 0, 10.0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoOverlap);
  }
}
