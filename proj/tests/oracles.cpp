#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

}  // namespace

Eigen::Matrix3d rodrigues(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return std::cos(angle) * Eigen::Matrix3d::Identity() + std::sin(angle) * kx +
         (1 - std::cos(angle)) * k * k.transpose();
}

Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = r;
  m.block<3, 1>(0, 3) = t;
  return m;
}

std::vector<Eigen::Matrix4d> forwardKinematics(const HandModel& model, const HandPose& pose) {
  std::vector<Eigen::Matrix4d> world(model.joints.size());
  const double angle = pose.globalRotation.norm();
  const Eigen::Matrix3d rGlobal = angle == 0 ? Eigen::Matrix3d::Identity()
                                             : rodrigues(pose.globalRotation, angle);
  world[0] = homogeneous(rGlobal, pose.globalTranslation);
  for (std::size_t j = 1; j < model.joints.size(); ++j) {
    const graspfit::HandJoint& joint = model.joints[j];
    Eigen::Matrix4d local = homogeneous(Eigen::Matrix3d::Identity(), joint.restOffset);
    const int order[3] = {graspfit::kTwist, graspfit::kAbduction, graspfit::kFlexion};
    for (const int axis : order) {
      const double a = pose.angle(static_cast<int>(j), axis);
      local *= homogeneous(rodrigues(joint.axes.col(axis), a), Vec3::Zero());
    }
    world[j] = world[joint.parent] * local;
  }
  return world;
}

double pointTriangleDistance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Barycentric projection onto the plane; if outside, fall back to the
  // minimum over the three edge segments.
  const Vec3 n = (b - a).cross(c - a);
  const double n2 = n.squaredNorm();
  if (n2 > 0) {
    const Vec3 q = p - n * (n.dot(p - a) / n2);
    const double areaAB = n.dot((b - a).cross(q - a));
    const double areaBC = n.dot((c - b).cross(q - b));
    const double areaCA = n.dot((a - c).cross(q - c));
    if (areaAB >= 0 && areaBC >= 0 && areaCA >= 0) return (p - q).norm();
  }
  double best = kInf;
  const Vec3 edges[3][2] = {{a, b}, {b, c}, {c, a}};
  for (const auto& e : edges) {
    const Vec3 d = e[1] - e[0];
    const double len2 = d.squaredNorm();
    const double t = len2 == 0 ? 0 : std::clamp(d.dot(p - e[0]) / len2, 0.0, 1.0);
    best = std::min(best, (p - (e[0] + t * d)).norm());
  }
  return best;
}

double bruteUnsignedDistance(const TriMesh& mesh, const Vec3& p) {
  double best = kInf;
  for (const auto& tri : mesh.triangles) {
    best = std::min(best, pointTriangleDistance(p, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                                mesh.vertices[tri[2]]));
  }
  return best;
}

namespace {

// Ray-triangle via plane intersection + signed areas. Returns -1 on a clean
// miss, 1 on a clean hit, 0 when the hit grazes an edge or the plane is
// near-parallel and the parity count should not trust this ray.
int rayHit(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(dir);
  const double scale = n.norm();
  if (scale == 0) return 0;
  if (std::abs(denom) < 1e-9 * scale) return 0;
  const double t = n.dot(a - orig) / denom;
  if (std::abs(t) < 1e-12) return 0;
  if (t < 0) return -1;
  const Vec3 q = orig + t * dir;
  const double wA = n.dot((c - b).cross(q - b));
  const double wB = n.dot((a - c).cross(q - c));
  const double wC = n.dot((b - a).cross(q - a));
  const double total = wA + wB + wC;
  const double eps = 1e-9 * std::abs(total);
  if (wA > eps && wB > eps && wC > eps) return 1;
  if (wA < -eps || wB < -eps || wC < -eps) return -1;
  return 0;
}

}  // namespace

bool insideMesh(const TriMesh& mesh, const Vec3& p) {
  const Vec3 dirs[5] = {Vec3(0.9241, 0.2912, 0.2471), Vec3(-0.3161, 0.8724, 0.3731),
                        Vec3(0.1188, -0.4912, 0.8629), Vec3(-0.7301, -0.4523, -0.5121),
                        Vec3(0.5472, -0.8021, 0.2391)};
  int votesIn = 0, votesOut = 0;
  for (const Vec3& dir : dirs) {
    int hits = 0;
    bool grazing = false;
    for (const auto& tri : mesh.triangles) {
      const int h = rayHit(p, dir.normalized(), mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                           mesh.vertices[tri[2]]);
      if (h == 0) {
        grazing = true;
        break;
      }
      hits += h == 1 ? 1 : 0;
    }
    if (grazing) continue;
    (hits % 2 == 1 ? votesIn : votesOut) += 1;
    if (votesIn >= 2 || votesOut >= 2) break;
  }
  return votesIn > votesOut;
}

double bruteSignedDistance(const TriMesh& mesh, const Vec3& p) {
  const double d = bruteUnsignedDistance(mesh, p);
  return insideMesh(mesh, p) ? -d : d;
}

double mcVolume(const TriMesh& mesh, int samples, std::uint64_t seed) {
  Vec3 lo, hi;
  mesh.bounds(lo, hi);
  const Vec3 span = hi - lo;
  std::mt19937_64 gen(seed);
  int inside = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec3 p = lo + Vec3(span.x() * uniform01(gen), span.y() * uniform01(gen),
                             span.z() * uniform01(gen));
    if (insideMesh(mesh, p)) ++inside;
  }
  return span.prod() * inside / samples;
}

double mcCoverage(const TriMesh& mesh, const std::vector<graspfit::Sphere>& spheres, int samples,
                  std::uint64_t seed) {
  Vec3 lo, hi;
  mesh.bounds(lo, hi);
  const Vec3 span = hi - lo;
  std::mt19937_64 gen(seed);
  int inside = 0, covered = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec3 p = lo + Vec3(span.x() * uniform01(gen), span.y() * uniform01(gen),
                             span.z() * uniform01(gen));
    if (!insideMesh(mesh, p)) continue;
    ++inside;
    for (const auto& s : spheres) {
      if ((p - s.center).squaredNorm() <= s.radius * s.radius) {
        ++covered;
        break;
      }
    }
  }
  return inside == 0 ? 0 : static_cast<double>(covered) / inside;
}

namespace {

double nearestHitDepth(const TriMesh& mesh, const Vec3& orig, const Vec3& dir,
                       const Camera& camera) {
  double best = kInf;
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    const Vec3 n = (b - a).cross(c - a);
    const double denom = n.dot(dir);
    if (denom == 0) continue;
    const double t = n.dot(a - orig) / denom;
    if (t <= 0) continue;
    const Vec3 q = orig + t * dir;
    const double wA = n.dot((c - b).cross(q - b));
    const double wB = n.dot((a - c).cross(q - c));
    const double wC = n.dot((b - a).cross(q - a));
    const double total = wA + wB + wC;
    if (total == 0) continue;
    const bool inside = total > 0 ? (wA >= 0 && wB >= 0 && wC >= 0)
                                  : (wA <= 0 && wB <= 0 && wC <= 0);
    if (!inside) continue;
    const double depth = camera.toCamera(q).z();
    if (depth >= 1.0) best = std::min(best, depth);
  }
  return best;
}

}  // namespace

RayPixel rayCastPixel(const TriMesh* handMesh, const TriMesh* objectMesh, const Camera& camera,
                      int x, int y) {
  const Eigen::Matrix3d rt = camera.worldToCamera.rotation.transpose();
  const Vec3 orig = -(rt * camera.worldToCamera.translation);
  const Vec3 dirCam((x + 0.5 - camera.cx) / camera.fx, (y + 0.5 - camera.cy) / camera.fy, 1.0);
  const Vec3 dir = rt * dirCam;
  const double handDepth = handMesh ? nearestHitDepth(*handMesh, orig, dir, camera) : kInf;
  const double objDepth = objectMesh ? nearestHitDepth(*objectMesh, orig, dir, camera) : kInf;
  RayPixel out;
  if (handDepth == kInf && objDepth == kInf) {
    out.cls = 0;
    out.depth = kInf;
  } else if (handDepth < objDepth) {
    out.cls = 2;
    out.depth = handDepth;
  } else {
    out.cls = 1;
    out.depth = objDepth;
  }
  return out;
}

double maskEnergy(const graspfit::ConfidenceMap& map, const graspfit::LabelImage& rendered,
                  graspfit::SilhouetteForm form, double clamp) {
  double energy = 0;
  for (int y = 0; y < rendered.height; ++y) {
    for (int x = 0; x < rendered.width; ++x) {
      const int cls = static_cast<int>(rendered.at(x, y));
      switch (form) {
        case graspfit::SilhouetteForm::kNll:
          energy -= std::log(std::max(static_cast<double>(map.maps[cls].at(x, y)), clamp));
          break;
        case graspfit::SilhouetteForm::kDot:
          energy -= map.maps[cls].at(x, y);
          break;
        case graspfit::SilhouetteForm::kL2:
          for (int c = 0; c < graspfit::kClassCount; ++c) {
            const double d = map.maps[c].at(x, y) - (c == cls ? 1.0 : 0.0);
            energy += d * d;
          }
          break;
      }
    }
  }
  return energy;
}

double repulsion(const std::vector<graspfit::Sphere>& hand,
                 const std::vector<graspfit::Sphere>& object, double allowanceMm) {
  double energy = 0;
  for (const auto& h : hand) {
    for (const auto& o : object) {
      energy += std::max(0.0, h.radius + o.radius - (h.center - o.center).norm() - allowanceMm);
    }
  }
  return energy;
}

Eigen::VectorXd centralDifference(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  Eigen::VectorXd grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd plus = x, minus = x;
    plus[i] += h[i];
    minus[i] -= h[i];
    grad[i] = (f(plus) - f(minus)) / (2 * h[i]);
  }
  return grad;
}

std::pair<double, double> meanStd(const std::vector<double>& values) {
  if (values.empty()) return {0, 0};
  double mean = 0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (const double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

}  // namespace oracle
