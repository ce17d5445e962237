#include "graspfit/types.hpp"

#include <cmath>

namespace graspfit {

Mat3 axisAngleToMatrix(const Vec3& aa) {
  const double theta2 = aa.squaredNorm();
  double s, c2;  // sin(t)/t and (1-cos(t))/t^2
  if (theta2 < 1e-16) {
    s = 1.0 - theta2 / 6.0;
    c2 = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    s = std::sin(theta) / theta;
    c2 = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = skew(aa);
  return Mat3::Identity() + s * k + c2 * (k * k);
}

Vec3 matrixToAxisAngle(const Mat3& r) {
  const double tr = r.trace();
  double cosTheta = 0.5 * (tr - 1.0);
  cosTheta = std::max(-1.0, std::min(1.0, cosTheta));
  const double theta = std::acos(cosTheta);
  const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));

  if (theta < 1e-8) {
    return 0.5 * vee;
  }
  if (theta < M_PI - 1e-4) {
    return (theta / (2.0 * std::sin(theta))) * vee;
  }
  // Near pi the vee part vanishes; recover the axis from the diagonal.
  Vec3 axis;
  for (int i = 0; i < 3; ++i) {
    axis[i] = std::sqrt(std::max(0.0, (r(i, i) - cosTheta) / (1.0 - cosTheta)));
  }
  int k = 0;
  if (axis[1] > axis[k]) k = 1;
  if (axis[2] > axis[k]) k = 2;
  // Fix signs of the remaining components from the symmetric part.
  const int i1 = (k + 1) % 3, i2 = (k + 2) % 3;
  if (r(k, i1) + r(i1, k) < 0) axis[i1] = -axis[i1];
  if (r(k, i2) + r(i2, k) < 0) axis[i2] = -axis[i2];
  // Sign of the dominant component from the skew part when it is not fully
  // degenerate, so that theta slightly below pi stays consistent.
  if (vee[k] < 0) axis = -axis;
  axis.normalize();
  return theta * axis;
}

Mat3 rotationDerivative(const Vec3& aa, int component) {
  const double n2 = aa.squaredNorm();
  Vec3 e = Vec3::Zero();
  e[component] = 1.0;
  if (n2 < 1e-14) {
    return skew(e);
  }
  const Mat3 r = axisAngleToMatrix(aa);
  const Vec3 w = aa.cross((Mat3::Identity() - r) * e);
  return ((aa[component] * skew(aa) + skew(w)) / n2) * r;
}

}  // namespace graspfit
