#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "seareg/core/error.hpp"

namespace seareg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

/// Project a nearly-orthogonal matrix back onto SO(3).
inline Mat3 orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

/// Element of se(3): rotational part first, translational part second.
struct Twist {
  Vec3 rot = Vec3::Zero();    // radians
  Vec3 trans = Vec3::Zero();  // metres

  Twist() = default;
  Twist(const Vec3& r, const Vec3& t) : rot(r), trans(t) {}
  explicit Twist(const Vec6& v) : rot(v.head<3>()), trans(v.tail<3>()) {}

  Vec6 vector() const {
    Vec6 v;
    v << rot, trans;
    return v;
  }
  bool isFinite() const { return rot.allFinite() && trans.allFinite(); }
};

/// Rigid body transform in SE(3). Maps points x -> R x + t.
class RigidTransform {
 public:
  static constexpr double kOrthoTolerance = 1e-9;

  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  RigidTransform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation.allFinite() || !translation.allFinite())
      throw Error(Errc::InvalidArgument, "non-finite transform");
    if (orthoDrift(rotation_) > kOrthoTolerance) {
      if (rotation_.determinant() <= 0.0)
        throw Error(Errc::InvalidArgument, "rotation is not a proper rotation");
      rotation_ = orthonormalize(rotation_);
    }
  }

  RigidTransform(const Eigen::Quaterniond& q, const Vec3& translation)
      : RigidTransform(q.normalized().toRotationMatrix(), translation) {}

  explicit RigidTransform(const Mat4& m) : RigidTransform(Mat3(m.topLeftCorner<3, 3>()), Vec3(m.topRightCorner<3, 1>())) {}

  static RigidTransform identity() { return {}; }
  static RigidTransform translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static RigidTransform rotationZ(double radians) {
    return {Eigen::AngleAxisd(radians, Vec3::UnitZ()).toRotationMatrix(), Vec3::Zero()};
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_).normalized(); }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

  RigidTransform inverse() const {
    const Mat3 rt = rotation_.transpose();
    return RigidTransform(Unchecked{}, rt, -(rt * translation_));
  }

  /// Composition: (a * b) applies b first, then a.
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    Mat3 r = a.rotation_ * b.rotation_;
    if (orthoDrift(r) > kOrthoTolerance) r = orthonormalize(r);
    return RigidTransform(Unchecked{}, r, a.rotation_ * b.translation_ + a.translation_);
  }

  friend Vec3 operator*(const RigidTransform& t, const Vec3& p) { return t.apply(p); }

  static double orthoDrift(const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  }

  /// Rotation angle in radians, in [0, pi].
  double angle() const {
    const double s = 0.5 * vee(rotation_ - rotation_.transpose()).norm();
    const double c = std::clamp(0.5 * (rotation_.trace() - 1.0), -1.0, 1.0);
    return std::atan2(s, c);
  }

 private:
  struct Unchecked {};
  RigidTransform(Unchecked, const Mat3& r, const Vec3& t) : rotation_(r), translation_(t) {}

  Mat3 rotation_;
  Vec3 translation_;
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a * b; }

namespace detail {

// Coefficients of the SO(3) left Jacobian: J = I + b hat(w) + c hat(w)^2.
inline void jacobianCoefficients(double theta, double& a, double& b, double& c) {
  const double t2 = theta * theta;
  if (theta < 1e-4) {
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;            // sin(t)/t
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;           // (1-cos t)/t^2
    c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;   // (t-sin t)/t^3
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / t2;
    c = (theta - std::sin(theta)) / (t2 * theta);
  }
}

}  // namespace detail

inline Mat3 so3_exp(const Vec3& w) {
  double a, b, c;
  detail::jacobianCoefficients(w.norm(), a, b, c);
  const Mat3 k = hat(w);
  return Mat3::Identity() + a * k + b * k * k;
}

/// Rotation vector of R. Throws AngleNearPi within 1e-6 of pi.
inline Vec3 so3_log(const Mat3& r) {
  constexpr double kPiMargin = 1e-6;
  const Vec3 v = 0.5 * vee(r - r.transpose());  // sin(theta) * axis
  const double s = v.norm();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);
  if (theta >= std::numbers::pi - kPiMargin)
    throw Error(Errc::AngleNearPi, "rotation angle within 1e-6 of pi");
  if (theta < 1e-4) {
    // theta / sin(theta) series
    const double t2 = theta * theta;
    return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * v;
  }
  if (c > -0.9) return (theta / s) * v;
  // Near pi the antisymmetric part loses precision; take the axis from the
  // symmetric part, B = (1 - cos) a a^T.
  const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
  int k = 0;
  b.diagonal().maxCoeff(&k);
  Vec3 axis = b.col(k) / std::sqrt(b(k, k) * (1.0 - c));
  axis.normalize();
  if (axis.dot(v) < 0.0) axis = -axis;
  return theta * axis;
}

inline RigidTransform se3_exp(const Twist& x) {
  double a, b, c;
  detail::jacobianCoefficients(x.rot.norm(), a, b, c);
  const Mat3 k = hat(x.rot);
  const Mat3 kk = k * k;
  const Mat3 r = Mat3::Identity() + a * k + b * kk;
  const Mat3 j = Mat3::Identity() + b * k + c * kk;
  return RigidTransform(r, j * x.trans);
}

inline Twist se3_log(const RigidTransform& t) {
  const Vec3 w = so3_log(t.rotation());
  const double theta = w.norm();
  const Mat3 k = hat(w);
  double coeff;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    coeff = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    coeff = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
  }
  const Mat3 jinv = Mat3::Identity() - 0.5 * k + coeff * k * k;
  return Twist(w, jinv * t.translation());
}

/// Relative alignment error: log(estimate^-1 * reference).
inline Twist se3_error(const RigidTransform& estimate, const RigidTransform& reference) {
  return se3_log(estimate.inverse() * reference);
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace seareg
