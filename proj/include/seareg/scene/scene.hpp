#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "seareg/colour/camera.hpp"
#include "seareg/core/error.hpp"
#include "seareg/core/point_cloud.hpp"
#include "seareg/core/se3.hpp"

namespace seareg {

enum class SceneCategory { Structured, SemiStructured, Unstructured };

inline std::string_view to_string(SceneCategory c) {
  switch (c) {
    case SceneCategory::Structured: return "structured";
    case SceneCategory::SemiStructured: return "semi-structured";
    case SceneCategory::Unstructured: return "unstructured";
  }
  return "unknown";
}

inline SceneCategory parse_category(std::string_view s) {
  for (auto c : {SceneCategory::Structured, SceneCategory::SemiStructured, SceneCategory::Unstructured})
    if (to_string(c) == s) return c;
  throw Error(Errc::Parse, "unknown scene category '" + std::string(s) + "'");
}

enum class StructureKind { Pipe, Wreck };

struct SceneSpec {
  SceneCategory category = SceneCategory::Unstructured;
  double extent = 16.0;         // side of the square world patch, centred on the origin
  double resolution = 2000.0;   // target laser samples per square metre
  std::uint64_t seed = 0;

  double grid = 0.025;               // heightfield sample spacing
  double roughness_rms = 0.15;       // seabed height RMS
  double roughness_exponent = -2.0;  // power spectrum exponent
  double min_wavelength = 0.25;
  double max_wavelength = 8.0;
  double structured_roughness_rms = 0.03;  // near-planar seabed under pipes and wrecks

  StructureKind structure = StructureKind::Wreck;
  double pipe_radius = 0.3;
  double pipe_length = 4.0;
  Vec3 wreck_size{3.0, 1.2, 0.9};
  int debris_count = 14;

  void validate() const {
    if (!(extent > 0.0) || !(resolution > 0.0) || !(grid > 0.0))
      throw Error(Errc::InvalidArgument, "scene extent, resolution and grid must be > 0");
    if (!(roughness_rms >= 0.0) || !(structured_roughness_rms >= 0.0))
      throw Error(Errc::InvalidArgument, "roughness must be >= 0");
    if (!(min_wavelength > 0.0) || !(max_wavelength > min_wavelength))
      throw Error(Errc::InvalidArgument, "wavelength band must be 0 < min < max");
    if (!(pipe_radius > 0.0) || !(pipe_length > 0.0) || !(wreck_size.minCoeff() > 0.0) || debris_count < 0)
      throw Error(Errc::InvalidArgument, "feature inventory must be positive");
  }
};

struct RayHit {
  double t = 0.0;
  int surface = 0;  // 0 seabed, >0 primitive id (1-based)
};

/// Analytic solid placed on the seabed.
struct Primitive {
  enum class Shape { Box, Cylinder, Sphere } shape = Shape::Box;
  RigidTransform world_from_local;  // cylinder axis along local x
  Vec3 half{0.5, 0.5, 0.5};         // box half sizes; cylinder: (half length, radius, radius); sphere: radius in x
  Vec3 tint{0.5, 0.5, 0.5};         // linear RGB

  std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const {
    const RigidTransform local_from_world = world_from_local.inverse();
    const Vec3 o = local_from_world.apply(origin);
    const Vec3 d = local_from_world.rotate(dir);
    switch (shape) {
      case Shape::Box: return slab(o, d, half);
      case Shape::Sphere: return sphere(o, d, half.x());
      case Shape::Cylinder: return cylinder(o, d, half.x(), half.y());
    }
    return std::nullopt;
  }

  /// Local-frame check, used by tests and the category contract.
  bool contains(const Vec3& p, double tol = 1e-9) const {
    const Vec3 q = world_from_local.inverse().apply(p);
    switch (shape) {
      case Shape::Box: return (q.cwiseAbs() - half).maxCoeff() <= tol;
      case Shape::Sphere: return q.norm() <= half.x() + tol;
      case Shape::Cylinder: return std::abs(q.x()) <= half.x() + tol && std::hypot(q.y(), q.z()) <= half.y() + tol;
    }
    return false;
  }

 private:
  static std::optional<double> slab(const Vec3& o, const Vec3& d, const Vec3& h) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      if (std::abs(d[k]) < 1e-15) {
        if (std::abs(o[k]) > h[k]) return std::nullopt;
        continue;
      }
      double a = (-h[k] - o[k]) / d[k], b = (h[k] - o[k]) / d[k];
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
      if (t0 > t1) return std::nullopt;
    }
    return t0 > 0.0 ? std::optional<double>(t0) : std::nullopt;
  }

  static std::optional<double> sphere(const Vec3& o, const Vec3& d, double r) {
    const double b = o.dot(d), c = o.squaredNorm() - r * r;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double t = -b - std::sqrt(disc);
    return t > 0.0 ? std::optional<double>(t) : std::nullopt;
  }

  static std::optional<double> cylinder(const Vec3& o, const Vec3& d, double half_len, double r) {
    std::optional<double> best;
    auto keep = [&best](double t) {
      if (t > 0.0 && (!best || t < *best)) best = t;
    };
    const double a = d.y() * d.y() + d.z() * d.z();
    if (a > 1e-15) {
      const double b = o.y() * d.y() + o.z() * d.z();
      const double c = o.y() * o.y() + o.z() * o.z() - r * r;
      const double disc = b * b - a * c;
      if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        for (double t : {(-b - s) / a, (-b + s) / a})
          if (std::abs(o.x() + t * d.x()) <= half_len) keep(t);
      }
    }
    if (std::abs(d.x()) > 1e-15)
      for (double cap : {-half_len, half_len}) {
        const double t = (cap - o.x()) / d.x();
        const double y = o.y() + t * d.y(), z = o.z() + t * d.z();
        if (y * y + z * z <= r * r) keep(t);
      }
    return best;
  }
};

/// Seabed heightfield plus primitives, with a procedural appearance.
class Scene {
 public:
  explicit Scene(const SceneSpec& spec) : spec_(spec) {
    spec_.validate();
    std::mt19937_64 rng(spec_.seed);
    const double rms =
        spec_.category == SceneCategory::Structured ? spec_.structured_roughness_rms : spec_.roughness_rms;
    synthesizeSeabed(rng, rms);
    placePrimitives(rng);
    zmax_ = *std::max_element(height_.begin(), height_.end());
    for (const auto& p : prims_) zmax_ = std::max(zmax_, p.world_from_local.translation().z() + p.half.norm());
  }

  const SceneSpec& spec() const { return spec_; }
  const std::vector<Primitive>& primitives() const { return prims_; }

  /// Bilinear seabed height; clamped outside the patch.
  double seabed(double x, double y) const {
    const double gx = std::clamp((x + half()) / spec_.grid, 0.0, double(n_ - 1) - 1e-9);
    const double gy = std::clamp((y + half()) / spec_.grid, 0.0, double(n_ - 1) - 1e-9);
    const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
    const double fx = gx - ix, fy = gy - iy;
    const double h00 = h(ix, iy), h10 = h(ix + 1, iy), h01 = h(ix, iy + 1), h11 = h(ix + 1, iy + 1);
    return (1 - fy) * ((1 - fx) * h00 + fx * h10) + fy * ((1 - fx) * h01 + fx * h11);
  }

  /// First intersection of the ray origin + t dir (dir unit), t in (0, t_max].
  std::optional<RayHit> raycast(const Vec3& origin, const Vec3& dir, double t_max = 50.0) const {
    std::optional<RayHit> best;
    if (auto t = raycastSeabed(origin, dir, t_max)) best = RayHit{*t, 0};
    for (std::size_t k = 0; k < prims_.size(); ++k)
      if (auto t = prims_[k].intersect(origin, dir); t && *t <= t_max && (!best || *t < best->t))
        best = RayHit{*t, static_cast<int>(k) + 1};
    return best;
  }

  /// sRGB-encoded colour of a surface point.
  Vec3 appearance(const Vec3& p, int surface) const {
    Vec3 lin;
    if (surface == 0) {
      const bool check = (static_cast<long>(std::floor(p.x() / 0.5)) + static_cast<long>(std::floor(p.y() / 0.5))) & 1;
      lin = check ? Vec3(0.42, 0.36, 0.24) : Vec3(0.28, 0.25, 0.18);
    } else {
      lin = prims_[static_cast<std::size_t>(surface - 1)].tint;
    }
    const double n = 0.75 + 0.5 * valueNoise(p * 6.0);
    return linear_to_srgb(Vec3((lin * n).cwiseMin(1.0)));
  }

  /// Renders a flat-shaded view; rays that miss leave black pixels.
  Image render(const CameraModel& cam, const RigidTransform& world_from_camera) const {
    cam.validate();
    Image img(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const Vec3 d_cam = unproject(cam, Vec2(x + 0.5, y + 0.5), 1.0).normalized();
        const Vec3 o = world_from_camera.translation();
        const Vec3 d = world_from_camera.rotate(d_cam);
        const auto hit = raycast(o, d);
        if (!hit) continue;
        const Vec3 c = appearance(o + hit->t * d, hit->surface);
        auto* px = img.at(x, y);
        for (int k = 0; k < 3; ++k) px[k] = static_cast<std::uint8_t>(std::lround(std::clamp(c[k], 0.0, 1.0) * 255.0));
      }
    return img;
  }

 private:
  double half() const { return 0.5 * spec_.grid * (n_ - 1); }
  double h(int ix, int iy) const { return height_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(ix)]; }

  void synthesizeSeabed(std::mt19937_64& rng, double rms) {
    n_ = static_cast<int>(std::ceil(spec_.extent / spec_.grid)) + 1;
    if (n_ % 2) ++n_;
    const int n = n_;
    const double len = spec_.grid * n;
    std::normal_distribution<double> g;
    using C = std::complex<double>;
    std::vector<C> spec(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    const double kmin = 1.0 / spec_.max_wavelength, kmax = 1.0 / spec_.min_wavelength;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double kx = (i <= n / 2 ? i : i - n) / len;
        const double ky = (j <= n / 2 ? j : j - n) / len;
        const double k = std::hypot(kx, ky);
        const double a = g(rng), b = g(rng);
        if (k < kmin || k > kmax) continue;
        spec[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] =
            C(a, b) * std::pow(k, 0.5 * spec_.roughness_exponent);
      }
    Eigen::FFT<double> fft;
    std::vector<C> row(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      std::copy_n(spec.begin() + j * n, n, row.begin());
      fft.inv(out, row);
      std::copy_n(out.begin(), n, spec.begin() + j * n);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = spec[static_cast<std::size_t>(j * n + i)];
      fft.inv(out, row);
      for (int j = 0; j < n; ++j) spec[static_cast<std::size_t>(j * n + i)] = out[static_cast<std::size_t>(j)];
    }
    height_.resize(spec.size());
    double mean = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) mean += height_[k] = spec[k].real();
    mean /= static_cast<double>(spec.size());
    double var = 0.0;
    for (auto& v : height_) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(height_.size()));
    const double scale = sd > 0.0 ? rms / sd : 0.0;
    for (auto& v : height_) v = (v - mean) * scale;
    // Lipschitz bound of the bilinear surface, used to step rays safely.
    slope_ = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i + 1 < n; ++i) {
        slope_ = std::max(slope_, std::abs(h(i + 1, j) - h(i, j)) / spec_.grid);
        slope_ = std::max(slope_, std::abs(h(j, i + 1) - h(j, i)) / spec_.grid);
      }
    slope_ *= std::sqrt(2.0);
  }

  void placePrimitives(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double yaw = 2.0 * M_PI * u(rng);
    auto onSeabed = [&](double x, double y, double yaw_angle, double z_offset) {
      return RigidTransform(Eigen::AngleAxisd(yaw_angle, Vec3::UnitZ()).toRotationMatrix(),
                            Vec3(x, y, seabed(x, y) + z_offset));
    };
    switch (spec_.category) {
      case SceneCategory::Structured: {
        const double cx = 0.6 * (u(rng) - 0.5), cy = 0.6 * (u(rng) - 0.5);
        if (spec_.structure == StructureKind::Pipe) {
          Primitive p;
          p.shape = Primitive::Shape::Cylinder;
          p.half = Vec3(0.5 * spec_.pipe_length, spec_.pipe_radius, spec_.pipe_radius);
          p.world_from_local = onSeabed(cx, cy, yaw, 0.6 * spec_.pipe_radius);
          p.tint = Vec3(0.55, 0.22, 0.05);
          prims_.push_back(p);
        } else {
          Primitive hull;
          hull.shape = Primitive::Shape::Box;
          hull.half = 0.5 * spec_.wreck_size;
          hull.world_from_local = onSeabed(cx, cy, yaw, 0.5 * spec_.wreck_size.z() - 0.2);
          hull.tint = Vec3(0.35, 0.12, 0.06);
          prims_.push_back(hull);
          Primitive cabin;
          cabin.shape = Primitive::Shape::Box;
          cabin.half = Vec3(0.2 * spec_.wreck_size.x(), 0.3 * spec_.wreck_size.y(), 0.3 * spec_.wreck_size.z());
          cabin.world_from_local =
              hull.world_from_local *
              RigidTransform::translation(Vec3(0.2 * spec_.wreck_size.x(), 0.0, 0.5 * spec_.wreck_size.z() + cabin.half.z()));
          cabin.tint = Vec3(0.30, 0.30, 0.32);
          prims_.push_back(cabin);
        }
        break;
      }
      case SceneCategory::SemiStructured: {
        for (int k = 0; k < spec_.debris_count; ++k) {
          Primitive p;
          const double x = 5.0 * (u(rng) - 0.5), y = 5.0 * (u(rng) - 0.5);
          const double size = 0.15 + 0.35 * u(rng);
          const double a = 2.0 * M_PI * u(rng);
          const int shape = static_cast<int>(3.0 * u(rng));
          if (shape == 0) {
            p.shape = Primitive::Shape::Box;
            p.half = Vec3(size, 0.6 * size, 0.4 * size);
            p.world_from_local = onSeabed(x, y, a, 0.2 * size);
          } else if (shape == 1) {
            p.shape = Primitive::Shape::Cylinder;
            p.half = Vec3(1.5 * size, 0.35 * size, 0.35 * size);
            p.world_from_local = onSeabed(x, y, a, 0.2 * size);
          } else {
            p.shape = Primitive::Shape::Sphere;
            p.half = Vec3::Constant(0.6 * size);
            p.world_from_local = onSeabed(x, y, a, 0.1 * size);
          }
          const double grey = 0.15 + 0.3 * u(rng);
          p.tint = Vec3(grey, grey * (0.9 + 0.2 * u(rng)), grey);
          prims_.push_back(p);
        }
        break;
      }
      case SceneCategory::Unstructured: break;
    }
  }

  std::optional<double> raycastSeabed(const Vec3& o, const Vec3& d, double t_max) const {
    auto gap = [&](double t) {
      const Vec3 p = o + t * d;
      return p.z() - seabed(p.x(), p.y());
    };
    double t = 0.0;
    const double ceiling = zmax_ + spec_.grid;  // march starts strictly above the surface
    if (o.z() > ceiling) {
      if (!(d.z() < 0.0)) return std::nullopt;
      t = (o.z() - ceiling) / -d.z();
    }
    double g = gap(t);
    if (g <= 0.0) return std::nullopt;  // origin below the seabed
    // Conservative steps: the gap can shrink at most (|d_z| + slope |d_xy|) per unit t.
    const double rate = std::abs(d.z()) + slope_ * std::hypot(d.x(), d.y());
    const double min_step = 1e-3 * spec_.grid;
    while (t <= t_max) {
      const double step = std::max(g / rate, min_step);
      const double tn = t + step;
      const double gn = gap(tn);
      if (gn <= 0.0) {
        double lo = t, hi = tn;
        for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
          const double mid = 0.5 * (lo + hi);
          (gap(mid) > 0.0 ? lo : hi) = mid;
        }
        const double hit = 0.5 * (lo + hi);
        return hit <= t_max ? std::optional<double>(hit) : std::nullopt;
      }
      t = tn;
      g = gn;
    }
    return std::nullopt;
  }

  static double hash3(std::int64_t x, std::int64_t y, std::int64_t z) {
    std::uint64_t k = static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(y) * 0xC2B2AE3D27D4EB4FULL ^
                      static_cast<std::uint64_t>(z) * 0x165667B19E3779F9ULL;
    k ^= k >> 31;
    k *= 0xBF58476D1CE4E5B9ULL;
    k ^= k >> 29;
    return static_cast<double>(k >> 11) * 0x1.0p-53;
  }

  /// Trilinear value noise in [0,1].
  static double valueNoise(const Vec3& p) {
    const Vec3 f = p.array().floor();
    const Vec3 w = p - f;
    const auto ix = static_cast<std::int64_t>(f.x()), iy = static_cast<std::int64_t>(f.y()), iz = static_cast<std::int64_t>(f.z());
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int a = c & 1, b = (c >> 1) & 1, e = (c >> 2) & 1;
      acc += (a ? w.x() : 1 - w.x()) * (b ? w.y() : 1 - w.y()) * (e ? w.z() : 1 - w.z()) * hash3(ix + a, iy + b, iz + e);
    }
    return acc;
  }

  SceneSpec spec_;
  int n_ = 0;
  std::vector<double> height_;
  double slope_ = 0.0;
  double zmax_ = 0.0;
  std::vector<Primitive> prims_;
};

inline Scene generate_scene(const SceneSpec& spec) { return Scene(spec); }

}  // namespace seareg
