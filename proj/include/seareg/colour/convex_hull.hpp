#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "seareg/core/error.hpp"
#include "seareg/core/se3.hpp"

namespace seareg {

/// 3D convex hull by quickhull. Only the set of hull vertices is exposed;
/// points within `eps` of a hull face count as interior.
class ConvexHull {
 public:
  explicit ConvexHull(std::span<const Vec3> points) : pts_(points.begin(), points.end()) {
    if (pts_.size() < 4) throw Error(Errc::DegenerateHull, "convex hull needs at least 4 points");
    double scale = 0.0;
    for (const auto& p : pts_) scale = std::max(scale, p.cwiseAbs().maxCoeff());
    eps_ = std::max(scale, 1e-300) * 1e-12;
    build();
  }

  /// Sorted indices of the input points that are hull vertices.
  std::vector<std::size_t> vertices() const {
    std::vector<char> on(pts_.size(), 0);
    for (const auto& f : faces_)
      if (f.alive)
        for (int v : f.v) on[static_cast<std::size_t>(v)] = 1;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < on.size(); ++i)
      if (on[i]) out.push_back(i);
    return out;
  }

  std::size_t faceCount() const {
    return static_cast<std::size_t>(std::count_if(faces_.begin(), faces_.end(), [](const Face& f) { return f.alive; }));
  }

  /// Signed distance of p from the hull: > 0 outside (max over faces).
  double signedDistance(const Vec3& p) const {
    double d = -std::numeric_limits<double>::infinity();
    for (const auto& f : faces_)
      if (f.alive) d = std::max(d, f.normal.dot(p) - f.offset);
    return d;
  }

 private:
  struct Face {
    std::array<int, 3> v{};
    std::array<int, 3> nb{-1, -1, -1};  // neighbour across edge (v[i], v[i+1])
    Vec3 normal = Vec3::Zero();
    double offset = 0.0;
    std::vector<int> outside;
    bool alive = true;
    int visit = -1;
  };

  double dist(const Face& f, int p) const { return f.normal.dot(pts_[static_cast<std::size_t>(p)]) - f.offset; }

  int makeFace(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    const Vec3& pa = pts_[static_cast<std::size_t>(a)];
    Vec3 n = (pts_[static_cast<std::size_t>(b)] - pa).cross(pts_[static_cast<std::size_t>(c)] - pa);
    const double len = n.norm();
    f.normal = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    f.offset = f.normal.dot(pa);
    faces_.push_back(std::move(f));
    return static_cast<int>(faces_.size()) - 1;
  }

  void build() {
    const int n = static_cast<int>(pts_.size());
    // Initial simplex from extreme points.
    std::array<int, 6> ext{};
    for (int d = 0; d < 3; ++d) {
      int lo = 0, hi = 0;
      for (int i = 1; i < n; ++i) {
        if (pts_[static_cast<std::size_t>(i)][d] < pts_[static_cast<std::size_t>(lo)][d]) lo = i;
        if (pts_[static_cast<std::size_t>(i)][d] > pts_[static_cast<std::size_t>(hi)][d]) hi = i;
      }
      ext[static_cast<std::size_t>(2 * d)] = lo;
      ext[static_cast<std::size_t>(2 * d + 1)] = hi;
    }
    int i0 = 0, i1 = 0;
    double best = -1.0;
    for (int a : ext)
      for (int b : ext) {
        const double d = (pts_[static_cast<std::size_t>(a)] - pts_[static_cast<std::size_t>(b)]).squaredNorm();
        if (d > best) {
          best = d;
          i0 = a;
          i1 = b;
        }
      }
    if (best <= eps_ * eps_) throw Error(Errc::DegenerateHull, "all points coincide");
    const Vec3 p0 = pts_[static_cast<std::size_t>(i0)];
    const Vec3 dir = (pts_[static_cast<std::size_t>(i1)] - p0).normalized();
    int i2 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 d = pts_[static_cast<std::size_t>(i)] - p0;
      const double l = (d - d.dot(dir) * dir).squaredNorm();
      if (l > best) {
        best = l;
        i2 = i;
      }
    }
    if (best <= eps_ * eps_) throw Error(Errc::DegenerateHull, "all points collinear");
    const Vec3 pn =
        (pts_[static_cast<std::size_t>(i1)] - p0).cross(pts_[static_cast<std::size_t>(i2)] - p0).normalized();
    int i3 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double l = std::abs(pn.dot(pts_[static_cast<std::size_t>(i)] - p0));
      if (l > best) {
        best = l;
        i3 = i;
      }
    }
    if (best <= eps_) throw Error(Errc::DegenerateHull, "all points coplanar");

    // Orient so that the fourth point is below face (i0,i1,i2).
    if (pn.dot(pts_[static_cast<std::size_t>(i3)] - p0) > 0.0) std::swap(i1, i2);
    const int f0 = makeFace(i0, i1, i2);
    const int f1 = makeFace(i0, i3, i1);
    const int f2 = makeFace(i1, i3, i2);
    const int f3 = makeFace(i2, i3, i0);
    linkAll({f0, f1, f2, f3});

    for (int i = 0; i < n; ++i) {
      if (i == i0 || i == i1 || i == i2 || i == i3) continue;
      assign(i, {f0, f1, f2, f3});
    }

    std::vector<int> stack{f0, f1, f2, f3};
    int pass = 0;
    while (!stack.empty()) {
      const int fi = stack.back();
      stack.pop_back();
      if (!faces_[static_cast<std::size_t>(fi)].alive || faces_[static_cast<std::size_t>(fi)].outside.empty()) continue;
      // Farthest outside point is the eye.
      const auto& out = faces_[static_cast<std::size_t>(fi)].outside;
      int eye = out.front();
      double far = dist(faces_[static_cast<std::size_t>(fi)], eye);
      for (int p : out) {
        const double d = dist(faces_[static_cast<std::size_t>(fi)], p);
        if (d > far) {
          far = d;
          eye = p;
        }
      }
      // Visible faces by flood fill.
      ++pass;
      std::vector<int> visible{fi};
      faces_[static_cast<std::size_t>(fi)].visit = pass;
      std::vector<std::pair<int, int>> horizon;  // (visible face, edge index)
      for (std::size_t k = 0; k < visible.size(); ++k) {
        const int vf = visible[k];
        for (int e = 0; e < 3; ++e) {
          const int nf = faces_[static_cast<std::size_t>(vf)].nb[static_cast<std::size_t>(e)];
          Face& nface = faces_[static_cast<std::size_t>(nf)];
          if (nface.visit == pass) continue;
          if (dist(nface, eye) > eps_) {
            nface.visit = pass;
            visible.push_back(nf);
          }
        }
      }
      for (int vf : visible)
        for (int e = 0; e < 3; ++e) {
          const int nf = faces_[static_cast<std::size_t>(vf)].nb[static_cast<std::size_t>(e)];
          if (faces_[static_cast<std::size_t>(nf)].visit != pass) horizon.emplace_back(vf, e);
        }

      std::vector<int> orphans;
      for (int vf : visible) {
        Face& f = faces_[static_cast<std::size_t>(vf)];
        f.alive = false;
        for (int p : f.outside)
          if (p != eye) orphans.push_back(p);
        f.outside.clear();
        f.outside.shrink_to_fit();
      }

      std::vector<int> created;
      std::map<std::pair<int, int>, std::pair<int, int>> edge_owner;  // directed edge -> (face, edge idx)
      for (const auto& [vf, e] : horizon) {
        const Face& old = faces_[static_cast<std::size_t>(vf)];
        const int a = old.v[static_cast<std::size_t>(e)];
        const int b = old.v[static_cast<std::size_t>((e + 1) % 3)];
        const int across = old.nb[static_cast<std::size_t>(e)];
        const int nf = makeFace(a, b, eye);
        Face& face = faces_[static_cast<std::size_t>(nf)];
        face.nb[0] = across;
        Face& other = faces_[static_cast<std::size_t>(across)];
        for (int k = 0; k < 3; ++k)
          if (other.v[static_cast<std::size_t>(k)] == b && other.v[static_cast<std::size_t>((k + 1) % 3)] == a)
            other.nb[static_cast<std::size_t>(k)] = nf;
        edge_owner[{b, eye}] = {nf, 1};
        edge_owner[{eye, a}] = {nf, 2};
        created.push_back(nf);
      }
      for (int nf : created) {
        Face& face = faces_[static_cast<std::size_t>(nf)];
        for (int e = 1; e < 3; ++e) {
          const int a = face.v[static_cast<std::size_t>(e)];
          const int b = face.v[static_cast<std::size_t>((e + 1) % 3)];
          const auto it = edge_owner.find({b, a});
          if (it == edge_owner.end()) throw Error(Errc::DegenerateHull, "inconsistent horizon");
          face.nb[static_cast<std::size_t>(e)] = it->second.first;
        }
      }
      for (int p : orphans) assign(p, created);
      for (int nf : created)
        if (!faces_[static_cast<std::size_t>(nf)].outside.empty()) stack.push_back(nf);
    }
  }

  void linkAll(const std::vector<int>& ids) {
    std::map<std::pair<int, int>, std::pair<int, int>> owner;
    for (int f : ids)
      for (int e = 0; e < 3; ++e)
        owner[{faces_[static_cast<std::size_t>(f)].v[static_cast<std::size_t>(e)],
               faces_[static_cast<std::size_t>(f)].v[static_cast<std::size_t>((e + 1) % 3)]}] = {f, e};
    for (int f : ids)
      for (int e = 0; e < 3; ++e) {
        const int a = faces_[static_cast<std::size_t>(f)].v[static_cast<std::size_t>(e)];
        const int b = faces_[static_cast<std::size_t>(f)].v[static_cast<std::size_t>((e + 1) % 3)];
        faces_[static_cast<std::size_t>(f)].nb[static_cast<std::size_t>(e)] = owner.at({b, a}).first;
      }
  }

  void assign(int p, const std::vector<int>& candidates) {
    int best = -1;
    double bd = eps_;
    for (int f : candidates) {
      const double d = dist(faces_[static_cast<std::size_t>(f)], p);
      if (d > bd) {
        bd = d;
        best = f;
      }
    }
    if (best >= 0) faces_[static_cast<std::size_t>(best)].outside.push_back(p);
  }

  std::vector<Vec3> pts_;
  std::vector<Face> faces_;
  double eps_ = 0.0;
};

}  // namespace seareg
