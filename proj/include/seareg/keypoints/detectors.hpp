#pragma once

#include <Eigen/Eigenvalues>
#include <array>
#include <chrono>
#include <cmath>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seareg/core/filters.hpp"
#include "seareg/core/point_cloud.hpp"
#include "seareg/core/spatial_index.hpp"

namespace seareg {

enum class DetectorKind { ISS, Harris3D, Lowe, Tomasi, Curvature, Harris6D, SIFT3D, SUSAN3D };

inline constexpr std::array<DetectorKind, 8> kAllDetectors{
    DetectorKind::ISS,       DetectorKind::Harris3D, DetectorKind::Lowe,   DetectorKind::Tomasi,
    DetectorKind::Curvature, DetectorKind::Harris6D, DetectorKind::SIFT3D, DetectorKind::SUSAN3D};

inline std::string_view to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::ISS: return "iss";
    case DetectorKind::Harris3D: return "harris3d";
    case DetectorKind::Lowe: return "lowe";
    case DetectorKind::Tomasi: return "tomasi";
    case DetectorKind::Curvature: return "curvature";
    case DetectorKind::Harris6D: return "harris6d";
    case DetectorKind::SIFT3D: return "sift3d";
    case DetectorKind::SUSAN3D: return "susan3d";
  }
  return "unknown";
}

inline DetectorKind parse_detector(std::string_view s) {
  for (auto k : kAllDetectors)
    if (to_string(k) == s) return k;
  throw Error(Errc::Parse, "unknown detector '" + std::string(s) + "'");
}

inline bool needs_normals(DetectorKind k) { return k != DetectorKind::ISS && k != DetectorKind::SIFT3D; }

/// Detector parameters. Radii are in metres; `defaults` derives them from the
/// cloud resolution.
struct DetectorParams {
  double support_radius = 0.3;
  double nms_radius = 0.2;
  double threshold = 0.0;  // minimum saliency; meaning depends on the detector
  double normal_radius = 0.5;  // used when normals must be re-estimated (noise sweep)

  double gamma21 = 0.975;
  double gamma32 = 0.975;
  std::size_t min_neighbours = 5;

  double harris_k = 0.04;
  double lowe_min_trace = 1e-4;  // Lowe's ratio is scale-free; ignore near-flat patches

  double min_scale = 0.1;
  int octaves = 3;
  int scales_per_octave = 4;
  double min_contrast = 0.0;

  double susan_distance = 1e-3;
  double susan_angular = 0.20791169081775934;  // cos 78 deg

  static DetectorParams defaults(DetectorKind kind, double resolution) {
    if (!(resolution > 0.0)) throw Error(Errc::InvalidArgument, "resolution must be > 0");
    DetectorParams p;
    p.support_radius = 6.0 * resolution;
    p.nms_radius = 4.0 * resolution;
    p.normal_radius = 10.0 * resolution;
    p.min_scale = 2.0 * resolution;
    switch (kind) {
      case DetectorKind::ISS: p.threshold = 1e-4 * p.support_radius * p.support_radius; break;
      case DetectorKind::Harris3D:
      case DetectorKind::Harris6D: p.threshold = 1e-6; break;
      case DetectorKind::Lowe: p.threshold = 0.05; break;
      case DetectorKind::Tomasi: p.threshold = 1e-4; break;
      case DetectorKind::Curvature: p.threshold = 1e-3; break;
      case DetectorKind::SIFT3D:
      case DetectorKind::SUSAN3D: p.threshold = 0.0; break;
    }
    return p;
  }

  void validate() const {
    for (double r : {support_radius, nms_radius, normal_radius, min_scale})
      if (!(r > 0.0) || !std::isfinite(r)) throw Error(Errc::InvalidArgument, "detector radii must be > 0");
    for (double t : {threshold, gamma21, gamma32, harris_k, lowe_min_trace, min_contrast, susan_distance, susan_angular})
      if (!std::isfinite(t)) throw Error(Errc::InvalidArgument, "detector thresholds must be finite");
    if (octaves < 1 || scales_per_octave < 1) throw Error(Errc::InvalidArgument, "scale pyramid must be non-empty");
  }
};

struct KeypointSet {
  DetectorKind kind = DetectorKind::ISS;
  std::vector<std::size_t> indices;  // ascending
  std::vector<Vec3> positions;
  std::vector<double> saliency;
  double millis = 0.0;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

namespace detail {

// Saliencies are compared after rounding to float so that values that agree
// to ~1e-7 relative (for instance, the same cloud in a rotated frame) order
// identically.
inline float quantize(double v) { return static_cast<float>(v); }

/// Eigenvalues of a symmetric matrix in descending order.
template <int N>
Eigen::Matrix<double, N, 1> descendingEigenvalues(const Eigen::Matrix<double, N, N>& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

template <int N>
Eigen::Matrix<double, N, N> centredCovariance(const std::vector<Eigen::Matrix<double, N, 1>>& v) {
  Eigen::Matrix<double, N, 1> mean = Eigen::Matrix<double, N, 1>::Zero();
  for (const auto& x : v) mean += x;
  mean /= static_cast<double>(v.size());
  Eigen::Matrix<double, N, N> cov = Eigen::Matrix<double, N, N>::Zero();
  for (const auto& x : v) {
    const Eigen::Matrix<double, N, 1> d = x - mean;
    cov.noalias() += d * d.transpose();
  }
  return cov / static_cast<double>(v.size());
}

/// Keeps candidates that are strict local maxima of (saliency, -index) within
/// `radius`. No two survivors lie within `radius` of each other and the result
/// does not depend on evaluation order.
inline std::vector<std::size_t> nonMaxSuppress(const SpatialIndex& index, const std::vector<std::optional<float>>& sal,
                                               double radius) {
  std::vector<std::size_t> out, nb;
  for (std::size_t i = 0; i < sal.size(); ++i) {
    if (!sal[i]) continue;
    index.radiusUnordered(index.point(i), radius, nb);
    bool best = true;
    for (auto j : nb) {
      if (j == i || !sal[j]) continue;
      if (*sal[j] > *sal[i] || (*sal[j] == *sal[i] && j < i)) {
        best = false;
        break;
      }
    }
    if (best) out.push_back(i);
  }
  return out;
}

inline std::optional<float> candidate(double saliency, double threshold) {
  if (!std::isfinite(saliency)) return std::nullopt;
  const float q = quantize(saliency);
  if (!(q > quantize(threshold))) return std::nullopt;
  return q;
}

inline std::vector<std::optional<float>> issSaliency(const PointCloud& c, const SpatialIndex& index,
                                                     const DetectorParams& p) {
  std::vector<std::optional<float>> sal(c.size());
  std::vector<std::size_t> nb;
  for (std::size_t i = 0; i < c.size(); ++i) {
    index.radiusUnordered(c.points[i], p.support_radius, nb);
    if (nb.size() < p.min_neighbours) continue;
    Vec3 mean;
    Mat3 cov;
    mean_and_covariance(c.points, nb, mean, cov);
    const Vec3 l = descendingEigenvalues<3>(cov);
    if (!(l[0] > 0.0) || !(l[1] > 0.0)) continue;
    if (!(quantize(l[1] / l[0]) < quantize(p.gamma21))) continue;
    if (!(quantize(l[2] / l[1]) < quantize(p.gamma32))) continue;
    sal[i] = candidate(l[2], p.threshold);
  }
  return sal;
}

/// Covariance-of-normals responses. Normals of a smooth patch vary within a
/// two-dimensional family, so the responses use the two largest eigenvalues.
inline std::vector<std::optional<float>> normalCornerSaliency(DetectorKind kind, const PointCloud& c,
                                                              const SpatialIndex& index, const DetectorParams& p,
                                                              const std::vector<Vec3>* gradients = nullptr) {
  std::vector<std::optional<float>> sal(c.size());
  std::vector<std::size_t> nb;
  std::vector<Vec3> n3;
  std::vector<Eigen::Matrix<double, 6, 1>> n6;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.normalValid(i)) continue;
    index.radiusUnordered(c.points[i], p.support_radius, nb);
    double l1 = 0.0, l2 = 0.0;
    if (gradients) {
      n6.clear();
      for (auto j : nb)
        if (c.normalValid(j)) {
          Eigen::Matrix<double, 6, 1> v;
          v << c.normals[j], p.support_radius * (*gradients)[j];
          n6.push_back(v);
        }
      if (n6.size() < p.min_neighbours) continue;
      const auto l = descendingEigenvalues<6>(centredCovariance<6>(n6));
      l1 = l[0];
      l2 = l[1];
    } else {
      n3.clear();
      for (auto j : nb)
        if (c.normalValid(j)) n3.push_back(c.normals[j]);
      if (n3.size() < p.min_neighbours) continue;
      const auto l = descendingEigenvalues<3>(centredCovariance<3>(n3));
      l1 = l[0];
      l2 = l[1];
    }
    const double tr = l1 + l2;
    double r = 0.0;
    switch (kind) {
      case DetectorKind::Lowe: r = tr > p.lowe_min_trace ? l1 * l2 / (tr * tr) : 0.0; break;
      case DetectorKind::Tomasi: r = l2; break;
      default: r = l1 * l2 - p.harris_k * tr * tr; break;
    }
    sal[i] = candidate(r, p.threshold);
  }
  return sal;
}

/// Luma gradient per point: least-squares fit of luma differences over the
/// support, restricted to the tangent plane.
inline std::vector<Vec3> lumaGradients(const PointCloud& c, const SpatialIndex& index, double radius) {
  std::vector<double> lum(c.size(), 0.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.colourValid(i)) lum[i] = luma(srgb_to_linear(c.colours[i]));
  std::vector<Vec3> grad(c.size(), Vec3::Zero());
  std::vector<std::size_t> nb;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.normalValid(i) || !c.colourValid(i)) continue;
    const Vec3& n = c.normals[i];
    const Mat3 proj = Mat3::Identity() - n * n.transpose();
    index.radiusUnordered(c.points[i], radius, nb);
    Mat3 a = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    for (auto j : nb) {
      if (j == i || !c.colourValid(j)) continue;
      const Vec3 d = proj * (c.points[j] - c.points[i]);
      a.noalias() += d * d.transpose();
      b += (lum[j] - lum[i]) * d;
    }
    // Solve in the tangent plane: add the normal direction to make `a` regular.
    const double scale = a.trace();
    if (!(scale > 0.0)) continue;
    const Mat3 reg = a + scale * n * n.transpose();
    Eigen::LDLT<Mat3> ldlt(reg);
    if (ldlt.info() != Eigen::Success) continue;
    const Vec3 g = proj * ldlt.solve(b);
    if (g.allFinite()) grad[i] = g;
  }
  return grad;
}

inline std::vector<std::optional<float>> curvatureSaliency(const PointCloud& c, const SpatialIndex& index,
                                                           const DetectorParams& p) {
  std::vector<std::optional<float>> sal(c.size());
  std::vector<std::size_t> nb;
  std::vector<Vec3> proj;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.normalValid(i)) continue;
    const Vec3& n = c.normals[i];
    const Mat3 tangent = Mat3::Identity() - n * n.transpose();
    index.radiusUnordered(c.points[i], p.support_radius, nb);
    proj.clear();
    for (auto j : nb)
      if (c.normalValid(j)) proj.push_back(tangent * c.normals[j]);
    if (proj.size() < p.min_neighbours) continue;
    sal[i] = candidate(descendingEigenvalues<3>(centredCovariance<3>(proj))[0], p.threshold);
  }
  return sal;
}

inline std::vector<std::optional<float>> susanSaliency(const PointCloud& c, const SpatialIndex& index,
                                                       const DetectorParams& p) {
  std::vector<std::optional<float>> sal(c.size());
  std::vector<std::size_t> nb;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.normalValid(i)) continue;
    const Vec3& n = c.normals[i];
    index.radiusUnordered(c.points[i], p.support_radius, nb);
    std::size_t total = 0, area = 0;
    Vec3 centroid = Vec3::Zero();
    for (auto j : nb) {
      if (!c.normalValid(j)) continue;
      ++total;
      if (n.dot(c.normals[j]) >= p.susan_angular) {
        ++area;
        centroid += c.points[j];
      }
    }
    if (total < p.min_neighbours) continue;
    const double ratio = static_cast<double>(area) / static_cast<double>(total);
    if (!(ratio < 0.5)) continue;
    const Vec3 offset = centroid / static_cast<double>(area) - c.points[i];
    const double len = offset.norm();
    if (!(len > p.susan_distance)) continue;
    // The USAN centroid of a true corner sits off the nucleus along the surface.
    if (std::abs(offset.dot(n)) / len > p.susan_angular) continue;
    sal[i] = candidate(0.5 - ratio, p.threshold);
  }
  return sal;
}

/// Greedy index-order Poisson-disk subsample with spacing `r`. If `weight` is
/// given, each kept point receives the number of points it blocked first.
inline std::vector<std::size_t> poissonSubsample(const SpatialIndex& index, double r,
                                                 std::vector<double>* weight = nullptr) {
  std::vector<char> blocked(index.size(), 0);
  std::vector<std::size_t> out, nb;
  if (weight) weight->clear();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (blocked[i]) continue;
    out.push_back(i);
    index.radiusUnordered(index.point(i), r, nb);
    std::size_t claimed = 0;
    for (auto j : nb)
      if (!blocked[j]) {
        blocked[j] = 1;
        ++claimed;
      }
    if (weight) weight->push_back(static_cast<double>(claimed));
  }
  return out;
}

/// Difference-of-Gaussians extrema of surface point density. Each octave is
/// evaluated on a Poisson-disk subsample whose spacing matches the octave's
/// base scale. From the second octave on, the density is carried by a
/// weighted subsample at half that spacing.
inline std::vector<std::optional<float>> siftSaliency(const PointCloud& c, const SpatialIndex& index,
                                                      const DetectorParams& p) {
  std::vector<std::optional<float>> sal(c.size());
  const int levels = p.scales_per_octave + 3;
  const auto L = static_cast<std::size_t>(levels);
  // exp(-d^2 / 2 sigma_s^2) squared is the value at s - S/2, so even S needs
  // only S/2 exponentials per neighbour.
  const int chain = p.scales_per_octave % 2 == 0 ? p.scales_per_octave / 2 : 0;
  std::vector<Neighbour> nb;
  std::vector<std::size_t> peers;
  for (int o = 0; o < p.octaves; ++o) {
    const double base = p.min_scale * std::pow(2.0, o);
    std::vector<double> sigma(L), inv2s2(L);
    for (std::size_t s = 0; s < L; ++s) {
      sigma[s] = base * std::pow(2.0, double(s) / p.scales_per_octave);
      inv2s2[s] = 1.0 / (2.0 * sigma[s] * sigma[s]);
    }
    const double reach = 3.0 * sigma.back();

    std::vector<double> carrier_weight;
    std::optional<SpatialIndex> carrier_index;
    std::vector<std::size_t> carriers;
    if (o > 0) {
      carriers = poissonSubsample(index, 0.5 * base, &carrier_weight);
      std::vector<Vec3> pts;
      pts.reserve(carriers.size());
      for (auto i : carriers) pts.push_back(c.points[i]);
      carrier_index.emplace(std::move(pts));
    }
    const SpatialIndex& density_index = carrier_index ? *carrier_index : index;

    const auto eval = poissonSubsample(index, base);
    const SpatialIndex eval_index([&] {
      std::vector<Vec3> pts;
      pts.reserve(eval.size());
      for (auto i : eval) pts.push_back(c.points[i]);
      return pts;
    }());

    // dog[e * (levels - 1) + s]
    std::vector<double> dog(eval.size() * (L - 1));
    std::vector<double> g(L), term(L);
    for (std::size_t e = 0; e < eval.size(); ++e) {
      std::fill(g.begin(), g.end(), 0.0);
      density_index.radiusWithDistancesUnordered(c.points[eval[e]], reach, nb);
      for (const auto& q : nb) {
        const double w = carrier_index ? carrier_weight[q.index] : 1.0;
        for (int s = levels - 1; s >= 0; --s) {
          const auto su = static_cast<std::size_t>(s);
          if (chain > 0 && s + chain < levels) {
            const double t = term[su + static_cast<std::size_t>(chain)];
            term[su] = t * t;
          } else {
            term[su] = std::exp(-q.sq_distance * inv2s2[su]);
          }
          g[su] += w * term[su];
        }
      }
      for (std::size_t s = 0; s < L; ++s) g[s] /= sigma[s] * sigma[s];
      for (std::size_t s = 0; s + 1 < L; ++s) dog[e * (L - 1) + s] = g[s + 1] - g[s];
    }

    auto at = [&](std::size_t e, int s) { return quantize(dog[e * static_cast<std::size_t>(levels - 1) + static_cast<std::size_t>(s)]); };
    for (std::size_t e = 0; e < eval.size(); ++e) {
      eval_index.radiusUnordered(eval_index.point(e), 2.0 * base, peers);
      for (int s = 1; s + 1 < levels - 1; ++s) {
        const float v = at(e, s);
        if (std::abs(v) < quantize(p.min_contrast)) continue;
        bool is_max = true, is_min = true;
        for (auto f : peers) {
          for (int ds = -1; ds <= 1 && (is_max || is_min); ++ds) {
            if (f == e && ds == 0) continue;
            const float w = at(f, s + ds);
            if (!(v > w)) is_max = false;
            if (!(v < w)) is_min = false;
          }
          if (!is_max && !is_min) break;
        }
        if (!is_max && !is_min) continue;
        // Saliency is scale-normalized contrast.
        const float q = quantize(std::abs(dog[e * static_cast<std::size_t>(levels - 1) + static_cast<std::size_t>(s)]) *
                                 sigma[static_cast<std::size_t>(s)] * sigma[static_cast<std::size_t>(s)]);
        auto& slot = sal[eval[e]];
        if (!slot || q > *slot) slot = q;
      }
    }
  }
  return sal;
}

}  // namespace detail

/// Runs one detector. Saliency is computed per point over the support radius,
/// thresholded, then reduced by non-max suppression.
inline KeypointSet detect(DetectorKind kind, const PointCloud& cloud, const DetectorParams& params,
                          const SpatialIndex* prebuilt = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  params.validate();
  if (cloud.size() < 10) throw Error(Errc::TooFewPoints, "detection needs at least 10 points");
  if (needs_normals(kind) && !cloud.hasNormals())
    throw Error(Errc::MissingNormals, std::string(to_string(kind)) + " needs normals");
  std::optional<SpatialIndex> own;
  if (!prebuilt) own.emplace(cloud.points);
  const SpatialIndex& index = prebuilt ? *prebuilt : *own;

  std::vector<std::optional<float>> sal;
  switch (kind) {
    case DetectorKind::ISS: sal = detail::issSaliency(cloud, index, params); break;
    case DetectorKind::Harris3D:
    case DetectorKind::Lowe:
    case DetectorKind::Tomasi: sal = detail::normalCornerSaliency(kind, cloud, index, params); break;
    case DetectorKind::Harris6D:
      if (!cloud.hasColours()) {
        static std::once_flag warned;
        std::call_once(warned, [] { log::warn("harris6d: cloud has no colours, using the geometric response only"); });
        sal = detail::normalCornerSaliency(DetectorKind::Harris3D, cloud, index, params);
      } else {
        const auto grad = detail::lumaGradients(cloud, index, params.support_radius);
        sal = detail::normalCornerSaliency(kind, cloud, index, params, &grad);
      }
      break;
    case DetectorKind::Curvature: sal = detail::curvatureSaliency(cloud, index, params); break;
    case DetectorKind::SIFT3D: sal = detail::siftSaliency(cloud, index, params); break;
    case DetectorKind::SUSAN3D: sal = detail::susanSaliency(cloud, index, params); break;
  }

  KeypointSet kp;
  kp.kind = kind;
  kp.indices = detail::nonMaxSuppress(index, sal, params.nms_radius);
  for (auto i : kp.indices) {
    kp.positions.push_back(cloud.points[i]);
    kp.saliency.push_back(*sal[i]);
  }
  kp.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return kp;
}

}  // namespace seareg
