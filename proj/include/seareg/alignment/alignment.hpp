#pragma once

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include "seareg/core/point_cloud.hpp"
#include "seareg/core/se3.hpp"
#include "seareg/core/spatial_index.hpp"
#include "seareg/descriptors/descriptors.hpp"

namespace seareg {

/// One mutual match. `source`/`target` are row numbers in the descriptor
/// sets (equivalently, positions in the keypoint sets they were built from).
struct Correspondence {
  std::size_t source = 0;
  std::size_t target = 0;
  double distance = 0.0;

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;  // ascending (source, target)

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Point-to-plane residual summary, metres.
struct ResidualStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  std::size_t count = 0;
};

struct AlignmentReport {
  RigidTransform transform;  // source frame -> target frame
  std::size_t inliers = 0;
  std::size_t features = 0;
  double recall = 0.0;
  std::optional<Twist> error;  // se3_error against a reference, when one is known
  std::optional<ResidualStats> residuals;
  std::vector<std::size_t> inlier_pairs;  // positions in the CorrespondenceSet (coarse)
  int iterations = 0;
  bool converged = false;
  double millis = 0.0;
};

/// Thrown by coarse_align when no hypothesis reaches min_inliers; keeps the
/// best hypothesis found for diagnostics.
class AlignmentFailure : public Error {
 public:
  AlignmentFailure(const std::string& what, AlignmentReport best)
      : Error(Errc::AlignmentFailed, what), best_(std::move(best)) {}
  const AlignmentReport& best() const noexcept { return best_; }

 private:
  AlignmentReport best_;
};

// ---------------------------------------------------------------------------
// Matching

/// Mutual k-NN over descriptor distance. Rows flagged empty take no part.
/// Neighbour ranks break distance ties by row number; when k > 1 leaves a row
/// in several mutual pairs, pairs are accepted greedily by ascending distance.
inline CorrespondenceSet match(const DescriptorSet& src, const DescriptorSet& tgt, std::size_t k = 1) {
  if (src.kind() != tgt.kind()) throw Error(Errc::KindMismatch, "cannot match descriptors of different kinds");
  if (src.size() == 0 || tgt.size() == 0) throw Error(Errc::EmptyKeypointSet, "matching needs two non-empty sets");
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");

  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < src.size(); ++i)
    if (!src.emptyRow(i)) rows.push_back(i);
  for (std::size_t j = 0; j < tgt.size(); ++j)
    if (!tgt.emptyRow(j)) cols.push_back(j);
  CorrespondenceSet out;
  if (rows.empty() || cols.empty()) return out;

  const auto n = rows.size(), m = cols.size();
  Eigen::MatrixXd dist(n, m);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < m; ++b) dist(a, b) = descriptor_distance(src.row(rows[a]), tgt.row(cols[b]), src.kind());

  // rank(a, b) < k on both sides means mutual.
  auto nearest = [k](auto&& distance_to, std::size_t count) {
    std::vector<std::size_t> order(count);
    for (std::size_t x = 0; x < count; ++x) order[x] = x;
    const std::size_t keep = std::min(k, count);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t x, std::size_t y) {
                        const double dx = distance_to(x), dy = distance_to(y);
                        return dx < dy || (dx == dy && x < y);
                      });
    order.resize(keep);
    return order;
  };
  std::vector<std::vector<std::size_t>> col_nearest(m);
  for (std::size_t b = 0; b < m; ++b) col_nearest[b] = nearest([&](std::size_t a) { return dist(a, b); }, n);

  std::vector<Correspondence> mutual;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b : nearest([&](std::size_t x) { return dist(a, x); }, m))
      if (std::find(col_nearest[b].begin(), col_nearest[b].end(), a) != col_nearest[b].end())
        mutual.push_back({rows[a], cols[b], dist(a, b)});

  std::sort(mutual.begin(), mutual.end(), [](const Correspondence& x, const Correspondence& y) {
    return std::tie(x.distance, x.source, x.target) < std::tie(y.distance, y.source, y.target);
  });
  std::vector<char> src_used(src.size(), 0), tgt_used(tgt.size(), 0);
  for (const auto& c : mutual) {
    if (src_used[c.source] || tgt_used[c.target]) continue;
    src_used[c.source] = tgt_used[c.target] = 1;
    out.pairs.push_back(c);
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const Correspondence& x, const Correspondence& y) { return std::tie(x.source, x.target) < std::tie(y.source, y.target); });
  return out;
}

// ---------------------------------------------------------------------------
// Coarse alignment

struct CoarseParams {
  double inlier_threshold = 0.1;  // metres
  std::size_t min_inliers = 5;
  int max_iterations = 20000;
  double confidence = 0.999;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(inlier_threshold > 0.0)) throw Error(Errc::InvalidArgument, "inlier_threshold must be > 0");
    if (min_inliers < 3) throw Error(Errc::InvalidArgument, "min_inliers must be >= 3");
    if (max_iterations < 1) throw Error(Errc::InvalidArgument, "max_iterations must be >= 1");
    if (!(confidence > 0.0 && confidence < 1.0)) throw Error(Errc::InvalidArgument, "confidence must be in (0,1)");
  }
};

/// Least-squares rigid fit (Kabsch/Umeyama without scale): T with T*src ~ tgt.
/// Returns nullopt for fewer than three points or a degenerate (collinear) set.
inline std::optional<RigidTransform> fit_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& tgt) {
  if (src.size() != tgt.size() || src.size() < 3) return std::nullopt;
  Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    ct += tgt[i];
  }
  cs /= static_cast<double>(src.size());
  ct /= static_cast<double>(src.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h.noalias() += (src[i] - cs) * (tgt[i] - ct).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s[1] > 1e-12 * std::max(1.0, s[0]))) return std::nullopt;
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  if (!r.allFinite()) return std::nullopt;
  return RigidTransform(r, ct - r * cs);
}

namespace detail {

struct Consensus {
  std::vector<std::size_t> inliers;
  double cost = 0.0;  // truncated squared residuals, tie-breaker
};

inline Consensus consensus(const RigidTransform& t, const std::vector<Vec3>& s, const std::vector<Vec3>& d, double thr) {
  Consensus c;
  const double thr2 = thr * thr;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double e2 = (t.apply(s[i]) - d[i]).squaredNorm();
    if (e2 < thr2) {
      c.inliers.push_back(i);
      c.cost += e2;
    } else {
      c.cost += thr2;
    }
  }
  return c;
}

inline bool better(const Consensus& a, const Consensus& b) {
  return a.inliers.size() > b.inliers.size() || (a.inliers.size() == b.inliers.size() && a.cost < b.cost);
}

}  // namespace detail

/// Seeded consensus sampling over minimal three-point fits, refined on the
/// consensus set. The returned transform maps source keypoints onto target
/// keypoints. recall = inliers / |corr|.
inline AlignmentReport coarse_align(const CorrespondenceSet& corr, const std::vector<Vec3>& src_kp,
                                    const std::vector<Vec3>& tgt_kp, const CoarseParams& params = {}) {
  const auto start = std::chrono::steady_clock::now();
  params.validate();
  if (corr.size() < 3) throw Error(Errc::InsufficientCorrespondences, "coarse alignment needs at least 3 correspondences");
  std::vector<Vec3> s, d;
  s.reserve(corr.size());
  d.reserve(corr.size());
  for (const auto& c : corr.pairs) {
    if (c.source >= src_kp.size() || c.target >= tgt_kp.size())
      throw Error(Errc::OutOfRange, "correspondence refers to a missing keypoint");
    s.push_back(src_kp[c.source]);
    d.push_back(tgt_kp[c.target]);
  }
  const std::size_t n = s.size();

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  RigidTransform best_t;
  detail::Consensus best;
  best.cost = std::numeric_limits<double>::infinity();
  bool have = false;
  int needed = params.max_iterations, it = 0;
  const double min_side2 = params.inlier_threshold * params.inlier_threshold;
  for (; it < needed; ++it) {
    std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    // Sides shorter than the inlier scale give ill-conditioned rotations.
    if ((s[a] - s[b]).squaredNorm() < min_side2 || (s[a] - s[c]).squaredNorm() < min_side2 ||
        (s[b] - s[c]).squaredNorm() < min_side2)
      continue;
    const auto t = fit_rigid({s[a], s[b], s[c]}, {d[a], d[b], d[c]});
    if (!t) continue;
    auto cons = detail::consensus(*t, s, d, params.inlier_threshold);
    if (!have || detail::better(cons, best)) {
      best = std::move(cons);
      best_t = *t;
      have = true;
      const double w = static_cast<double>(best.inliers.size()) / static_cast<double>(n);
      const double miss = 1.0 - w * w * w;
      if (miss <= 0.0) {
        needed = std::min(needed, it + 1);
      } else if (miss < 1.0) {
        const double k = std::log(1.0 - params.confidence) / std::log(miss);
        needed = std::min(params.max_iterations, std::max(it + 1, static_cast<int>(std::ceil(k))));
      }
    }
  }

  // Refit on the consensus set until it stops changing.
  if (have && best.inliers.size() >= 3) {
    for (int round = 0; round < 10; ++round) {
      std::vector<Vec3> si, di;
      for (auto i : best.inliers) {
        si.push_back(s[i]);
        di.push_back(d[i]);
      }
      const auto t = fit_rigid(si, di);
      if (!t) break;
      auto cons = detail::consensus(*t, s, d, params.inlier_threshold);
      if (cons.inliers.size() < best.inliers.size()) break;
      const bool same = cons.inliers == best.inliers;
      best = std::move(cons);
      best_t = *t;
      if (same) break;
    }
  }

  AlignmentReport report;
  report.transform = best_t;
  report.features = n;
  report.inliers = have ? best.inliers.size() : 0;
  report.recall = static_cast<double>(report.inliers) / static_cast<double>(n);
  report.inlier_pairs = have ? best.inliers : std::vector<std::size_t>{};
  report.iterations = it;
  report.converged = report.inliers >= params.min_inliers;
  report.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!report.converged)
    throw AlignmentFailure("best hypothesis has " + std::to_string(report.inliers) + " inliers, need " +
                               std::to_string(params.min_inliers),
                           std::move(report));
  return report;
}

// ---------------------------------------------------------------------------
// Fine alignment and self-consistency

struct FineParams {
  double max_corr_dist = 0.25;  // metres
  int max_iterations = 50;
  double update_tolerance = 1e-6;  // norm of the twist increment
  double cauchy_scale = 0.01;      // metres
  double normal_min_cos = 0.9;     // pairs whose normals disagree more are dropped
  std::size_t min_correspondences = 100;

  void validate() const {
    if (!(max_corr_dist > 0.0)) throw Error(Errc::InvalidArgument, "max_corr_dist must be > 0");
    if (max_iterations < 1) throw Error(Errc::InvalidArgument, "max_iterations must be >= 1");
    if (!(update_tolerance > 0.0)) throw Error(Errc::InvalidArgument, "update_tolerance must be > 0");
    if (!(cauchy_scale > 0.0)) throw Error(Errc::InvalidArgument, "cauchy_scale must be > 0");
    if (!(normal_min_cos >= -1.0 && normal_min_cos <= 1.0)) throw Error(Errc::InvalidArgument, "normal_min_cos must be in [-1, 1]");
  }
};

namespace detail {

struct PlanePair {
  Vec3 p;  // transformed source point
  Vec3 q;  // target point
  Vec3 n;  // target normal
};

/// Nearest-target pairs within `max_dist`. With source normals given, pairs
/// whose rotated source normal has cosine below `min_cos` with the target
/// normal are skipped.
inline void planePairs(const std::vector<Vec3>& src, const RigidTransform& t, const PointCloud& tgt,
                       const SpatialIndex& index, double max_dist, std::vector<PlanePair>& out,
                       const std::vector<Vec3>* src_normals = nullptr, double min_cos = -1.0) {
  out.clear();
  const double max2 = max_dist * max_dist;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 p = t.apply(src[i]);
    const auto nn = index.knn(p, 1);
    if (nn.empty() || nn[0].sq_distance > max2 || !tgt.normalValid(nn[0].index)) continue;
    const Vec3& n = tgt.normals[nn[0].index];
    if (src_normals && (t.rotation() * (*src_normals)[i]).dot(n) < min_cos) continue;
    out.push_back({p, tgt.points[nn[0].index], n});
  }
}

/// Linear-interpolated quantile of sorted data, q in [0,1].
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ResidualStats summarize(std::vector<double> r) {
  ResidualStats s;
  s.count = r.size();
  if (r.empty()) return s;
  std::sort(r.begin(), r.end());
  double sum = 0.0;
  for (double v : r) sum += v;
  s.mean = sum / static_cast<double>(r.size());
  s.median = quantile(r, 0.5);
  s.p95 = quantile(r, 0.95);
  return s;
}

}  // namespace detail

/// Absolute point-to-plane residuals of `t * src` against the nearest target
/// point (with a valid normal) within `max_corr_dist`.
inline ResidualStats self_consistency(const PointCloud& src, const PointCloud& tgt, const RigidTransform& t,
                                      double max_corr_dist = 0.25, const SpatialIndex* tgt_index = nullptr) {
  if (!tgt.hasNormals()) throw Error(Errc::MissingNormals, "self-consistency needs target normals");
  if (!(max_corr_dist > 0.0)) throw Error(Errc::InvalidArgument, "max_corr_dist must be > 0");
  std::optional<SpatialIndex> own;
  if (!tgt_index) own.emplace(tgt.points);
  const SpatialIndex& index = tgt_index ? *tgt_index : *own;
  std::vector<detail::PlanePair> pairs;
  detail::planePairs(src.points, t, tgt, index, max_corr_dist, pairs);
  if (pairs.empty()) throw Error(Errc::NoOverlap, "no overlap under the given transform");
  std::vector<double> r;
  r.reserve(pairs.size());
  for (const auto& pp : pairs) r.push_back(std::abs(pp.n.dot(pp.p - pp.q)));
  return detail::summarize(std::move(r));
}

/// Point-to-plane ICP with Cauchy weights, starting from `prior`. The result
/// maps `src` into the `tgt` frame and carries self-consistency statistics.
inline AlignmentReport fine_align(const PointCloud& src, const PointCloud& tgt, const RigidTransform& prior,
                                  const FineParams& params = {}, const SpatialIndex* tgt_index = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  params.validate();
  if (!src.hasNormals() || !tgt.hasNormals()) throw Error(Errc::MissingNormals, "fine alignment needs normals on both clouds");
  std::optional<SpatialIndex> own;
  if (!tgt_index) own.emplace(tgt.points);
  const SpatialIndex& index = tgt_index ? *tgt_index : *own;

  RigidTransform t = prior;
  std::vector<detail::PlanePair> pairs;
  auto associate = [&](const RigidTransform& at, std::vector<detail::PlanePair>& out) {
    detail::planePairs(src.points, at, tgt, index, params.max_corr_dist, out, &src.normals, params.normal_min_cos);
  };
  associate(t, pairs);
  if (pairs.size() < params.min_correspondences)
    throw Error(Errc::NoOverlap, "only " + std::to_string(pairs.size()) + " correspondences at the prior");

  AlignmentReport report;
  const double c2 = params.cauchy_scale * params.cauchy_scale;
  // Mean Cauchy cost per associated pair.
  auto cost = [&](const std::vector<detail::PlanePair>& pp) {
    double sum = 0.0;
    for (const auto& x : pp) {
      const double r = x.n.dot(x.p - x.q);
      sum += std::log1p(r * r / c2);
    }
    return pp.empty() ? std::numeric_limits<double>::infinity() : sum / static_cast<double>(pp.size());
  };
  double current = cost(pairs);
  std::vector<detail::PlanePair> trial;
  int it = 0;
  for (; it < params.max_iterations; ++it) {
    if (pairs.size() < 6) break;
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Vec6 g = Vec6::Zero();
    for (const auto& pp : pairs) {
      const double r = pp.n.dot(pp.p - pp.q);
      const double w = 1.0 / (1.0 + r * r / c2);
      Vec6 j;
      j << pp.p.cross(pp.n), pp.n;
      h.noalias() += w * j * j.transpose();
      g.noalias() += w * r * j;
    }
    // Tiny damping keeps unobservable directions (flat overlap) at zero.
    h.diagonal().array() += 1e-9 * std::max(1.0, h.trace());
    Vec6 delta = -h.ldlt().solve(g);
    if (!delta.allFinite()) break;
    // Backtrack until the robust cost drops; a step that cannot lower it
    // means t is already a minimum at this association.
    bool moved = false;
    for (int halving = 0; halving < 8 && delta.norm() >= params.update_tolerance; ++halving, delta *= 0.5) {
      const RigidTransform next = se3_exp(Twist(delta)) * t;
      associate(next, trial);
      const double c = cost(trial);
      if (trial.size() >= 6 && c < current) {
        t = next;
        current = c;
        pairs.swap(trial);
        moved = true;
        break;
      }
    }
    if (!moved || delta.norm() < params.update_tolerance) {
      report.converged = true;
      ++it;
      break;
    }
  }
  report.transform = t;
  report.iterations = it;
  report.features = src.size();
  report.inliers = pairs.size();
  report.recall = static_cast<double>(report.inliers) / static_cast<double>(report.features);
  report.residuals = self_consistency(src, tgt, t, params.max_corr_dist, &index);
  report.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace seareg
