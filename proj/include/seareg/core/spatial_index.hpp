#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "seareg/core/se3.hpp"

namespace seareg {

struct Neighbour {
  std::size_t index;
  double sq_distance;
};

/// Balanced k-d tree over a fixed point set.
///
/// Query results are exact: a radius query returns every point with squared
/// distance <= r^2 in ascending index order; a k-NN query returns the k points
/// ordered by (squared distance, index). The tree copies the points, so it is
/// independent of the source container's lifetime. `resolution()` is computed
/// on first use, so concurrent readers should call it once up front.
class SpatialIndex {
 public:
  static constexpr std::size_t kLeafSize = 12;

  SpatialIndex() = default;

  explicit SpatialIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      build(0, points_.size());
      ordered_.reserve(points_.size());
      for (auto i : order_) ordered_.push_back(points_[i]);
    }
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Mean distance from each point to its nearest other point; 0 for clouds
  /// with fewer than two points.
  double resolution() const {
    if (!resolution_) resolution_ = computeResolution();
    return *resolution_;
  }

  std::vector<std::size_t> radius(const Vec3& q, double r) const {
    std::vector<std::size_t> out;
    radius(q, r, out);
    return out;
  }

  void radius(const Vec3& q, double r, std::vector<std::size_t>& out) const {
    out.clear();
    if (nodes_.empty()) return;
    radiusRec(0, q, r * r, out);
    std::sort(out.begin(), out.end());
  }

  /// Same set as `radius`, in tree order. For callers that only reduce over
  /// the neighbourhood.
  void radiusUnordered(const Vec3& q, double r, std::vector<std::size_t>& out) const {
    out.clear();
    if (nodes_.empty()) return;
    radiusRec(0, q, r * r, out);
  }

  void radiusWithDistancesUnordered(const Vec3& q, double r, std::vector<Neighbour>& out) const {
    out.clear();
    if (nodes_.empty()) return;
    radiusDistRec(0, q, r * r, out);
  }

  /// Radius query that also reports squared distances, ordered by index.
  void radiusWithDistances(const Vec3& q, double r, std::vector<Neighbour>& out) const {
    out.clear();
    if (nodes_.empty()) return;
    radiusDistRec(0, q, r * r, out);
    std::sort(out.begin(), out.end(), [](const Neighbour& a, const Neighbour& b) { return a.index < b.index; });
  }

  std::size_t radiusCount(const Vec3& q, double r) const {
    if (nodes_.empty()) return 0;
    return countRec(0, q, r * r);
  }

  std::vector<Neighbour> knn(const Vec3& q, std::size_t k) const {
    std::vector<Neighbour> heap;
    if (nodes_.empty() || k == 0) return heap;
    heap.reserve(k + 1);
    knnRec(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end(), Less{});
    return heap;
  }

 private:
  struct Node {
    double lo[3];
    double hi[3];
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };

  struct Less {
    bool operator()(const Neighbour& a, const Neighbour& b) const {
      return a.sq_distance < b.sq_distance || (a.sq_distance == b.sq_distance && a.index < b.index);
    }
  };

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    Node node;
    node.begin = static_cast<std::uint32_t>(begin);
    node.end = static_cast<std::uint32_t>(end);
    for (int d = 0; d < 3; ++d) {
      node.lo[d] = std::numeric_limits<double>::infinity();
      node.hi[d] = -std::numeric_limits<double>::infinity();
    }
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& p = points_[order_[i]];
      for (int d = 0; d < 3; ++d) {
        node.lo[d] = std::min(node.lo[d], p[d]);
        node.hi[d] = std::max(node.hi[d], p[d]);
      }
    }
    if (end - begin > kLeafSize) {
      int dim = 0;
      double spread = -1.0;
      for (int d = 0; d < 3; ++d) {
        if (node.hi[d] - node.lo[d] > spread) {
          spread = node.hi[d] - node.lo[d];
          dim = d;
        }
      }
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) { return points_[a][dim] < points_[b][dim]; });
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
    nodes_[static_cast<std::size_t>(id)] = node;
    return id;
  }

  static double boxSqDistance(const Node& n, const Vec3& q) {
    double s = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double v = q[d] < n.lo[d] ? n.lo[d] - q[d] : (q[d] > n.hi[d] ? q[d] - n.hi[d] : 0.0);
      s += v * v;
    }
    return s;
  }

  void radiusRec(std::int32_t id, const Vec3& q, double r2, std::vector<std::size_t>& out) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (boxSqDistance(n, q) > r2) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i)
        if ((ordered_[i] - q).squaredNorm() <= r2) out.push_back(order_[i]);
      return;
    }
    radiusRec(n.left, q, r2, out);
    radiusRec(n.right, q, r2, out);
  }

  void radiusDistRec(std::int32_t id, const Vec3& q, double r2, std::vector<Neighbour>& out) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (boxSqDistance(n, q) > r2) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double d2 = (ordered_[i] - q).squaredNorm();
        if (d2 <= r2) out.push_back({order_[i], d2});
      }
      return;
    }
    radiusDistRec(n.left, q, r2, out);
    radiusDistRec(n.right, q, r2, out);
  }

  std::size_t countRec(std::int32_t id, const Vec3& q, double r2) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (boxSqDistance(n, q) > r2) return 0;
    if (n.left < 0) {
      std::size_t c = 0;
      for (std::uint32_t i = n.begin; i < n.end; ++i)
        if ((ordered_[i] - q).squaredNorm() <= r2) ++c;
      return c;
    }
    return countRec(n.left, q, r2) + countRec(n.right, q, r2);
  }

  void knnRec(std::int32_t id, const Vec3& q, std::size_t k, std::vector<Neighbour>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    // Equal bound is not pruned: it may hold an equidistant point with a smaller index.
    if (heap.size() == k && boxSqDistance(n, q) > heap.front().sq_distance) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const Neighbour cand{order_[i], (ordered_[i] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), Less{});
        } else if (Less{}(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), Less{});
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), Less{});
        }
      }
      return;
    }
    const Node& l = nodes_[static_cast<std::size_t>(n.left)];
    const Node& r = nodes_[static_cast<std::size_t>(n.right)];
    if (boxSqDistance(l, q) <= boxSqDistance(r, q)) {
      knnRec(n.left, q, k, heap);
      knnRec(n.right, q, k, heap);
    } else {
      knnRec(n.right, q, k, heap);
      knnRec(n.left, q, k, heap);
    }
  }

  double computeResolution() const {
    if (points_.size() < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto nn = knn(points_[i], 2);
      for (const auto& n : nn) {
        if (n.index != i) {
          sum += std::sqrt(n.sq_distance);
          break;
        }
      }
    }
    return sum / static_cast<double>(points_.size());
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Vec3> ordered_;  // points_ permuted into tree order
  std::vector<Node> nodes_;
  mutable std::optional<double> resolution_;
};

}  // namespace seareg
