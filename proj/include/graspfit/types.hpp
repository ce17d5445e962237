#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace graspfit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Rodrigues' formula, stable for small angles.
Mat3 axisAngleToMatrix(const Vec3& aa);

// Inverse of axisAngleToMatrix. Returns angle in [0, pi]; stable near 0 and pi.
Vec3 matrixToAxisAngle(const Mat3& r);

// Derivative of the rotation matrix w.r.t. one axis-angle component,
// exact for all angles (compact exponential-coordinates formula).
Mat3 rotationDerivative(const Vec3& aa, int component);

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 applyVector(const Vec3& v) const { return rotation * v; }

  RigidTransform then(const RigidTransform& inner) const {
    // (*this) o inner
    return {rotation * inner.rotation, rotation * inner.translation + translation};
  }

  RigidTransform inverse() const {
    Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  static RigidTransform identity() { return {}; }

  static RigidTransform fromAxisAngle(const Vec3& aa, const Vec3& t) {
    return {axisAngleToMatrix(aa), t};
  }

  static RigidTransform translationOnly(const Vec3& t) {
    return {Mat3::Identity(), t};
  }
};

}  // namespace graspfit
