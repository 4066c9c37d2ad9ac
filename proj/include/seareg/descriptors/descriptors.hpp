#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seareg/core/point_cloud.hpp"
#include "seareg/core/spatial_index.hpp"
#include "seareg/keypoints/detectors.hpp"

namespace seareg {

enum class DescriptorKind { PFH, PFHRGB, SHOT, CSHOT, SC3D, USC };

inline constexpr std::array<DescriptorKind, 6> kAllDescriptors{DescriptorKind::PFH,   DescriptorKind::PFHRGB,
                                                               DescriptorKind::SHOT,  DescriptorKind::CSHOT,
                                                               DescriptorKind::SC3D,  DescriptorKind::USC};

inline std::string_view to_string(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::PFH: return "pfh";
    case DescriptorKind::PFHRGB: return "pfhrgb";
    case DescriptorKind::SHOT: return "shot";
    case DescriptorKind::CSHOT: return "cshot";
    case DescriptorKind::SC3D: return "3dsc";
    case DescriptorKind::USC: return "usc";
  }
  return "unknown";
}

inline DescriptorKind parse_descriptor(std::string_view s) {
  for (auto k : kAllDescriptors)
    if (to_string(k) == s) return k;
  throw Error(Errc::Parse, "unknown descriptor '" + std::string(s) + "'");
}

inline constexpr std::size_t descriptor_dimension(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::PFH: return 125;
    case DescriptorKind::PFHRGB: return 250;
    case DescriptorKind::SHOT: return 352;
    case DescriptorKind::CSHOT: return 1344;
    case DescriptorKind::SC3D: return 1980;
    case DescriptorKind::USC: return 1960;
  }
  return 0;
}

inline bool needs_colours(DescriptorKind k) { return k == DescriptorKind::PFHRGB || k == DescriptorKind::CSHOT; }

struct DescriptorParams {
  double support_radius = 1.0;
  double lrf_radius = 1.0;       // SHOT, CSHOT, USC
  double min_radius = 0.1;       // 3DSC, USC: innermost radial edge
  double density_radius = 0.2;   // 3DSC, USC: local point density for bin weights
  double pfh_radius = 0.5;       // PFH, PFHRGB: pair statistics need a tighter support
  std::size_t pfh_max_points = 256;  // PFH pairs are taken over an even subsample of the support
  std::size_t min_support = 5;

  static DescriptorParams defaults(double resolution) {
    if (!(resolution > 0.0)) throw Error(Errc::InvalidArgument, "resolution must be > 0");
    DescriptorParams p;
    p.support_radius = 20.0 * resolution;
    p.lrf_radius = p.support_radius;
    p.min_radius = 0.1 * p.support_radius;
    p.density_radius = 0.2 * p.support_radius;
    p.pfh_radius = 10.0 * resolution;
    return p;
  }

  void validate() const {
    for (double r : {support_radius, lrf_radius, min_radius, density_radius, pfh_radius})
      if (!(r > 0.0) || !std::isfinite(r)) throw Error(Errc::InvalidArgument, "descriptor radii must be > 0");
    if (!(min_radius < support_radius)) throw Error(Errc::InvalidArgument, "minimal radius must be below the support radius");
    if (pfh_max_points < 2) throw Error(Errc::InvalidArgument, "pfh needs at least two support points");
  }
};

/// One descriptor row per keypoint. Rows whose support was too small are
/// zero and flagged in `empty`.
class DescriptorSet {
 public:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  DescriptorSet() = default;
  DescriptorSet(DescriptorKind kind, std::vector<std::size_t> indices)
      : kind_(kind), indices_(std::move(indices)), empty_(indices_.size(), 0),
        data_(Matrix::Zero(static_cast<Eigen::Index>(indices_.size()), static_cast<Eigen::Index>(descriptor_dimension(kind)))) {}

  DescriptorKind kind() const { return kind_; }
  std::size_t dimension() const { return descriptor_dimension(kind_); }
  std::size_t size() const { return indices_.size(); }
  bool emptyRow(std::size_t r) const { return empty_[r] != 0; }
  void setEmpty(std::size_t r, bool e) { empty_[r] = e ? 1 : 0; }

  const std::vector<std::size_t>& indices() const { return indices_; }
  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }
  auto row(std::size_t r) const { return data_.row(static_cast<Eigen::Index>(r)); }
  auto row(std::size_t r) { return data_.row(static_cast<Eigen::Index>(r)); }

  double millis = 0.0;

  /// Throws InvalidArgument if the dimension table or entry constraints fail.
  void validate() const {
    if (static_cast<std::size_t>(data_.cols()) != dimension() || static_cast<std::size_t>(data_.rows()) != size())
      throw Error(Errc::DimensionMismatch, "descriptor matrix shape does not match kind");
    if (!data_.allFinite()) throw Error(Errc::InvalidArgument, "non-finite descriptor entry");
    const bool histogram = kind_ != DescriptorKind::SC3D && kind_ != DescriptorKind::USC;
    if (histogram && data_.size() > 0 && data_.minCoeff() < 0.0)
      throw Error(Errc::InvalidArgument, "negative histogram entry");
  }

 private:
  DescriptorKind kind_ = DescriptorKind::PFH;
  std::vector<std::size_t> indices_;
  std::vector<std::uint8_t> empty_;
  Matrix data_;
};

namespace detail {

inline constexpr int kPfhSplit = 5;
inline constexpr int kShotAzimuth = 8, kShotElevation = 2, kShotRadial = 2, kShotCos = 11;
inline constexpr int kShotVolumes = kShotAzimuth * kShotElevation * kShotRadial;
inline constexpr int kCshotColour = 31;
inline constexpr int kScAzimuth = 12, kScElevation = 11, kScRadial = 15;
inline constexpr int kUscAzimuth = 14, kUscElevation = 14, kUscRadial = 10;

struct PairFeatures {
  double f1, f2, f3;  // angle in [-pi, pi], two cosines in [-1, 1]
  bool swapped;
};

/// Darboux-frame features of an oriented point pair; nullopt when the frame
/// is undefined (coincident points, or the offset parallel to the normal).
inline std::optional<PairFeatures> pairFeatures(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  Vec3 d = p2 - p1;
  const double len = d.norm();
  if (!(len > 0.0)) return std::nullopt;
  const double a1 = n1.dot(d) / len, a2 = n2.dot(d) / len;
  const Vec3* src = &n1;
  const Vec3* tgt = &n2;
  double f3 = a1;
  bool swapped = false;
  if (std::acos(std::clamp(std::abs(a1), 0.0, 1.0)) > std::acos(std::clamp(std::abs(a2), 0.0, 1.0))) {
    std::swap(src, tgt);
    d = -d;
    f3 = -a2;
    swapped = true;
  }
  Vec3 v = d.cross(*src);
  const double vn = v.norm();
  if (!(vn > 1e-12 * len)) return std::nullopt;
  v /= vn;
  const Vec3 w = src->cross(v);
  return PairFeatures{std::atan2(w.dot(*tgt), src->dot(*tgt)), v.dot(*tgt), f3, swapped};
}

inline int splitBin(double f, double lo, double hi, int n) {
  const int b = static_cast<int>(std::floor(n * (f - lo) / (hi - lo)));
  return std::clamp(b, 0, n - 1);
}

inline int pfhBin(const PairFeatures& f) {
  const double pi = std::numbers::pi;
  return splitBin(f.f1, -pi, pi, kPfhSplit) + kPfhSplit * splitBin(f.f2, -1.0, 1.0, kPfhSplit) +
         kPfhSplit * kPfhSplit * splitBin(f.f3, -1.0, 1.0, kPfhSplit);
}

/// Colour pair features: per-channel normalized ratio (a - b) / (a + b) of
/// linear RGB, so equal channels land in the middle bin.
inline int rgbBin(const Vec3& a, const Vec3& b) {
  int idx = 0, scale = 1;
  for (int k = 0; k < 3; ++k) {
    const double s = a[k] + b[k];
    const double q = s > 0.0 ? (a[k] - b[k]) / s : 0.0;
    idx += scale * splitBin(q, -1.0, 1.0, kPfhSplit);
    scale *= kPfhSplit;
  }
  return idx;
}

/// Support points sorted by (float squared distance, index), then thinned to
/// at most `cap` by an even stride. The order survives rigid motion.
inline std::vector<std::size_t> evenSubsample(const std::vector<Neighbour>& nb, std::size_t cap) {
  std::vector<std::pair<float, std::size_t>> order;
  order.reserve(nb.size());
  for (const auto& n : nb) order.emplace_back(static_cast<float>(n.sq_distance), n.index);
  std::sort(order.begin(), order.end());
  std::vector<std::size_t> out;
  const std::size_t stride = (order.size() + cap - 1) / std::max<std::size_t>(cap, 1);
  for (std::size_t k = 0; k < order.size(); k += std::max<std::size_t>(stride, 1)) out.push_back(order[k].second);
  return out;
}

/// Fills PFH (and optionally the RGB half). Returns false if no pair was valid.
inline bool pfhRow(const PointCloud& c, const std::vector<std::size_t>& pts, bool rgb, Eigen::Ref<Eigen::RowVectorXd> out) {
  std::vector<double> geo(125, 0.0), col(125, 0.0);
  std::size_t pairs = 0;
  std::vector<Vec3> lin;
  if (rgb) {
    lin.reserve(pts.size());
    for (auto i : pts) lin.push_back(srgb_to_linear(c.colours[i]));
  }
  for (std::size_t a = 0; a < pts.size(); ++a) {
    const std::size_t i = pts[a];
    if (!c.normalValid(i) || (rgb && !c.colourValid(i))) continue;
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      const std::size_t j = pts[b];
      if (!c.normalValid(j) || (rgb && !c.colourValid(j))) continue;
      const auto f = pairFeatures(c.points[i], c.normals[i], c.points[j], c.normals[j]);
      if (!f) continue;
      geo[static_cast<std::size_t>(pfhBin(*f))] += 1.0;
      if (rgb) col[static_cast<std::size_t>(f->swapped ? rgbBin(lin[b], lin[a]) : rgbBin(lin[a], lin[b]))] += 1.0;
      ++pairs;
    }
  }
  if (pairs == 0) return false;
  const double scale = 100.0 / static_cast<double>(pairs);
  for (int k = 0; k < 125; ++k) out[k] = geo[static_cast<std::size_t>(k)] * scale;
  if (rgb)
    for (int k = 0; k < 125; ++k) out[125 + k] = col[static_cast<std::size_t>(k)] * scale;
  return true;
}

/// Repeatable local reference frame (rows x, y, z) from the distance-weighted
/// covariance about the keypoint, with signs fixed by the majority of the
/// support.
inline std::optional<Mat3> localFrame(const std::vector<Vec3>& pts, const std::vector<Neighbour>& nb, const Vec3& key,
                                      double radius) {
  Mat3 cov = Mat3::Zero();
  double wsum = 0.0;
  std::size_t used = 0;
  for (const auto& n : nb) {
    const double d = std::sqrt(n.sq_distance);
    if (d > radius) continue;
    const double w = radius - d;
    const Vec3 q = pts[n.index] - key;
    cov.noalias() += w * q * q.transpose();
    wsum += w;
    ++used;
  }
  if (used < 5 || !(wsum > 0.0)) return std::nullopt;
  cov /= wsum;
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  if (es.info() != Eigen::Success) return std::nullopt;
  Vec3 x = es.eigenvectors().col(2), z = es.eigenvectors().col(0);
  auto disambiguate = [&](Vec3& axis) {
    long balance = 0;
    double sum = 0.0;
    for (const auto& n : nb) {
      if (n.sq_distance > radius * radius) continue;
      const double s = (pts[n.index] - key).dot(axis);
      // Points on the plane (the keypoint itself) vote for neither sign.
      if (std::abs(s) <= 1e-12 * radius) continue;
      balance += s > 0.0 ? 1 : -1;
      sum += s;
    }
    if (balance < 0 || (balance == 0 && sum < 0.0)) axis = -axis;
  };
  disambiguate(x);
  disambiguate(z);
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  if (!r.allFinite()) return std::nullopt;
  return r;
}

/// Linear split of a continuous bin coordinate over two neighbouring bins.
struct Split {
  int lo, hi;
  double w_lo, w_hi;
};

inline Split linearSplit(double f, int n, bool wrap) {
  const double x = f * n - 0.5;
  int lo = static_cast<int>(std::floor(x));
  const double t = x - lo;
  int hi = lo + 1;
  if (wrap) {
    lo = (lo % n + n) % n;
    hi = (hi % n + n) % n;
    return {lo, hi, 1.0 - t, t};
  }
  if (lo < 0) return {0, 0, 1.0, 0.0};
  if (hi >= n) return {n - 1, n - 1, 1.0, 0.0};
  return {lo, hi, 1.0 - t, t};
}

/// CIE L*a*b* of a linear-RGB colour, scaled to roughly unit ranges.
inline Vec3 labScaled(const Vec3& lin) {
  Mat3 m;
  m << 0.4124564, 0.3575761, 0.1804375,
       0.2126729, 0.7151522, 0.0721750,
       0.0193339, 0.1191920, 0.9503041;
  Vec3 xyz = m * lin;
  xyz = xyz.cwiseQuotient(Vec3(0.95047, 1.0, 1.08883));
  auto f = [](double t) { return t > 0.008856 ? std::cbrt(t) : 7.787 * t + 16.0 / 116.0; };
  const double fx = f(xyz.x()), fy = f(xyz.y()), fz = f(xyz.z());
  return Vec3((116.0 * fy - 16.0) / 100.0, 500.0 * (fx - fy) / 120.0, 200.0 * (fy - fz) / 120.0);
}

/// SHOT-family row: spatial grid in the local frame, cosine histogram of the
/// neighbour normals against the frame's z axis, quadrilinear interpolation.
/// With `colour`, a second block of the same grid holds L1 Lab distances to
/// the keypoint colour. Each block is normalized to unit L2.
inline bool shotRow(const PointCloud& c, const std::vector<Neighbour>& nb, std::size_t key, const Mat3& frame, double radius,
                    bool colour, Eigen::Ref<Eigen::RowVectorXd> out) {
  const Vec3& kp = c.points[key];
  std::vector<double> geo(static_cast<std::size_t>(kShotVolumes * kShotCos), 0.0);
  std::vector<double> col(colour ? static_cast<std::size_t>(kShotVolumes * kCshotColour) : 0, 0.0);
  const Vec3 key_lab = colour ? labScaled(srgb_to_linear(c.colours[key])) : Vec3::Zero();
  const double pi = std::numbers::pi;
  std::size_t used = 0;
  for (const auto& n : nb) {
    if (n.index == key || !c.normalValid(n.index)) continue;
    if (colour && !c.colourValid(n.index)) continue;
    const Vec3 l = frame * (c.points[n.index] - kp);
    const double d = l.norm();
    if (!(d > 0.0) || d > radius) continue;
    const Split az = linearSplit((std::atan2(l.y(), l.x()) + pi) / (2.0 * pi), kShotAzimuth, true);
    const Split el = linearSplit((std::asin(std::clamp(l.z() / d, -1.0, 1.0)) + 0.5 * pi) / pi, kShotElevation, false);
    const Split rd = linearSplit(d / radius, kShotRadial, false);
    const double cosine = std::clamp(c.normals[n.index].dot(frame.row(2).transpose()), -1.0, 1.0);
    const Split cs = linearSplit((cosine + 1.0) / 2.0, kShotCos, false);
    std::optional<Split> cl;
    if (colour) {
      const double dist = (labScaled(srgb_to_linear(c.colours[n.index])) - key_lab).cwiseAbs().sum();
      cl = linearSplit(std::clamp(dist / 3.0, 0.0, 1.0), kCshotColour, false);
    }
    for (int ia = 0; ia < 2; ++ia)
      for (int ie = 0; ie < 2; ++ie)
        for (int ir = 0; ir < 2; ++ir) {
          const double w = (ia ? az.w_hi : az.w_lo) * (ie ? el.w_hi : el.w_lo) * (ir ? rd.w_hi : rd.w_lo);
          if (w == 0.0) continue;
          const int vol = (ia ? az.hi : az.lo) + kShotAzimuth * ((ie ? el.hi : el.lo) + kShotElevation * (ir ? rd.hi : rd.lo));
          geo[static_cast<std::size_t>(vol * kShotCos + cs.lo)] += w * cs.w_lo;
          geo[static_cast<std::size_t>(vol * kShotCos + cs.hi)] += w * cs.w_hi;
          if (cl) {
            col[static_cast<std::size_t>(vol * kCshotColour + cl->lo)] += w * cl->w_lo;
            col[static_cast<std::size_t>(vol * kCshotColour + cl->hi)] += w * cl->w_hi;
          }
        }
    ++used;
  }
  if (used < 5) return false;
  auto emit = [&](const std::vector<double>& h, Eigen::Index offset) {
    double norm = 0.0;
    for (double v : h) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) return false;
    for (std::size_t k = 0; k < h.size(); ++k) out[offset + static_cast<Eigen::Index>(k)] = h[k] / norm;
    return true;
  };
  if (!emit(geo, 0)) return false;
  if (colour && !emit(col, kShotVolumes * kShotCos)) return false;
  return true;
}

/// Spherical histogram in `frame`: azimuth fastest, then elevation, then
/// log-spaced radial shells. Each point adds 1 / (local density * cbrt(bin
/// volume)).
inline bool shapeContextRow(const PointCloud& c, const std::vector<Neighbour>& nb, std::size_t key, const Mat3& frame,
                            int n_az, int n_el, int n_rad, double rmin, double radius, const std::vector<int>& density,
                            Eigen::Ref<Eigen::RowVectorXd> out) {
  const double pi = std::numbers::pi;
  const double log_span = std::log(radius / rmin);
  std::vector<double> inv_cbrt_volume(static_cast<std::size_t>(n_el * n_rad));
  for (int r = 0; r < n_rad; ++r) {
    const double r0 = rmin * std::exp(log_span * r / n_rad), r1 = rmin * std::exp(log_span * (r + 1) / n_rad);
    for (int e = 0; e < n_el; ++e) {
      const double c0 = std::cos(pi * e / n_el), c1 = std::cos(pi * (e + 1) / n_el);
      const double v = (r1 * r1 * r1 - r0 * r0 * r0) / 3.0 * (c0 - c1) * (2.0 * pi / n_az);
      inv_cbrt_volume[static_cast<std::size_t>(e + n_el * r)] = 1.0 / std::cbrt(v);
    }
  }
  std::size_t used = 0;
  for (const auto& n : nb) {
    const Vec3 l = frame * (c.points[n.index] - c.points[key]);
    const double d = l.norm();
    if (d < rmin || d > radius) continue;
    const int r = std::clamp(static_cast<int>(std::floor(std::log(d / rmin) / log_span * n_rad)), 0, n_rad - 1);
    const int e = std::clamp(static_cast<int>(std::floor(std::acos(std::clamp(l.z() / d, -1.0, 1.0)) / pi * n_el)), 0, n_el - 1);
    const int a = std::clamp(static_cast<int>(std::floor((std::atan2(l.y(), l.x()) + pi) / (2.0 * pi) * n_az)), 0, n_az - 1);
    const double w = inv_cbrt_volume[static_cast<std::size_t>(e + n_el * r)] / std::max(density[n.index], 1);
    out[a + n_az * (e + n_el * r)] += w;
    ++used;
  }
  return used >= 5;
}

/// Deterministic azimuth offset of a 3DSC frame, in whole azimuth bins.
inline int scAzimuthOffset(std::size_t keypoint_index) {
  std::uint64_t k = keypoint_index * 0x9E3779B97F4A7C15ULL + 0x3DC;
  k ^= k >> 31;
  k *= 0xBF58476D1CE4E5B9ULL;
  k ^= k >> 29;
  return static_cast<int>(k % kScAzimuth);
}

}  // namespace detail

/// Computes one descriptor row per keypoint. Keypoint indices refer to
/// `cloud`; rows follow the keypoint order.
inline DescriptorSet describe(DescriptorKind kind, const PointCloud& cloud, const KeypointSet& keypoints,
                              const DescriptorParams& params, const SpatialIndex* prebuilt = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  params.validate();
  if (!cloud.hasNormals()) throw Error(Errc::MissingNormals, std::string(to_string(kind)) + " needs normals");
  if (needs_colours(kind) && !cloud.hasColours())
    throw Error(Errc::MissingColours, std::string(to_string(kind)) + " needs colours");
  for (auto i : keypoints.indices)
    if (i >= cloud.size()) throw Error(Errc::OutOfRange, "keypoint index outside the cloud");
  std::optional<SpatialIndex> own;
  if (!prebuilt) own.emplace(cloud.points);
  const SpatialIndex& index = prebuilt ? *prebuilt : *own;
  const bool pfh = kind == DescriptorKind::PFH || kind == DescriptorKind::PFHRGB;
  const double support_radius = pfh ? params.pfh_radius : params.support_radius;
  if (!(support_radius > index.resolution()))
    throw Error(Errc::InvalidArgument, "support radius must exceed the cloud resolution");

  DescriptorSet set(kind, keypoints.indices);
  std::vector<int> density;
  if (kind == DescriptorKind::SC3D || kind == DescriptorKind::USC) {
    density.assign(cloud.size(), -1);
  }
  std::vector<Neighbour> nb, lrf_nb;
  const double reach = pfh ? support_radius : std::max(support_radius, params.lrf_radius);
  for (std::size_t r = 0; r < set.size(); ++r) {
    const std::size_t key = keypoints.indices[r];
    const Vec3& kp = cloud.points[key];
    index.radiusWithDistances(kp, reach, nb);
    std::vector<Neighbour> support;
    support.reserve(nb.size());
    for (const auto& n : nb)
      if (n.sq_distance <= support_radius * support_radius) support.push_back(n);
    auto row = set.row(r);
    bool ok = support.size() >= params.min_support;
    if (ok) {
      switch (kind) {
        case DescriptorKind::PFH:
        case DescriptorKind::PFHRGB:
          ok = detail::pfhRow(cloud, detail::evenSubsample(support, params.pfh_max_points), kind == DescriptorKind::PFHRGB, row);
          break;
        case DescriptorKind::SHOT:
        case DescriptorKind::CSHOT: {
          const auto frame = detail::localFrame(cloud.points, nb, kp, params.lrf_radius);
          ok = frame && detail::shotRow(cloud, support, key, *frame, params.support_radius, kind == DescriptorKind::CSHOT, row);
          break;
        }
        case DescriptorKind::SC3D:
        case DescriptorKind::USC: {
          for (const auto& n : support)
            if (density[n.index] < 0) density[n.index] = static_cast<int>(index.radiusCount(cloud.points[n.index], params.density_radius));
          std::optional<Mat3> frame = detail::localFrame(cloud.points, nb, kp, params.lrf_radius);
          if (kind == DescriptorKind::SC3D && frame) {
            // Normal as the polar axis; the azimuth origin is the tangent part
            // of the local frame's x axis turned by a per-keypoint offset.
            if (!cloud.normalValid(key)) {
              frame.reset();
            } else {
              const Vec3 z = cloud.normals[key];
              Vec3 x = frame->row(0).transpose() - z * z.dot(frame->row(0).transpose());
              if (x.norm() < 1e-6) x = frame->row(1).transpose() - z * z.dot(frame->row(1).transpose());
              x.normalize();
              const double psi = 2.0 * std::numbers::pi * detail::scAzimuthOffset(key) / detail::kScAzimuth;
              const Vec3 y0 = z.cross(x);
              const Vec3 xr = std::cos(psi) * x + std::sin(psi) * y0;
              Mat3 f;
              f.row(0) = xr.transpose();
              f.row(1) = z.cross(xr).transpose();
              f.row(2) = z.transpose();
              frame = f;
            }
          }
          if (!frame) {
            ok = false;
          } else if (kind == DescriptorKind::SC3D) {
            ok = detail::shapeContextRow(cloud, support, key, *frame, detail::kScAzimuth, detail::kScElevation,
                                         detail::kScRadial, params.min_radius, params.support_radius, density, row);
          } else {
            ok = detail::shapeContextRow(cloud, support, key, *frame, detail::kUscAzimuth, detail::kUscElevation,
                                         detail::kUscRadial, params.min_radius, params.support_radius, density, row);
          }
          break;
        }
      }
    }
    if (!ok) {
      row.setZero();
      set.setEmpty(r, true);
    }
  }
  set.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return set;
}

/// Euclidean distance between two rows of the same kind. 3DSC rows are
/// compared at the best of their azimuth replications, since each keypoint's
/// azimuth origin is arbitrary.
inline double descriptor_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
                                  DescriptorKind kind) {
  if (a.size() != b.size() || static_cast<std::size_t>(a.size()) != descriptor_dimension(kind))
    throw Error(Errc::DimensionMismatch, "descriptor rows differ in dimension");
  if (kind != DescriptorKind::SC3D) return (a - b).norm();
  constexpr int n_az = detail::kScAzimuth;
  const Eigen::Index blocks = a.size() / n_az;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_az; ++s) {
    double sum = 0.0;
    for (Eigen::Index blk = 0; blk < blocks && sum < best; ++blk) {
      const Eigen::Index base = blk * n_az;
      for (int k = 0; k < n_az; ++k) {
        const double d = a[base + k] - b[base + (k + s) % n_az];
        sum += d * d;
      }
    }
    best = std::min(best, sum);
  }
  return std::sqrt(best);
}

}  // namespace seareg
