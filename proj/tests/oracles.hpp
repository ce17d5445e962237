#pragma once

// Independent reference implementations the tests check the library against.
// Everything here is written from the definitions (homogeneous matrix
// chains, plane/barycentric ray casting, Monte-Carlo sampling) and shares no
// code with src/.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "graspfit/energy.hpp"
#include "graspfit/hand_model.hpp"
#include "graspfit/mesh.hpp"
#include "graspfit/render.hpp"
#include "graspfit/spherize.hpp"

namespace oracle {

using graspfit::Camera;
using graspfit::HandModel;
using graspfit::HandPose;
using graspfit::TriMesh;
using graspfit::Vec3;

Eigen::Matrix3d rodrigues(const Vec3& axis, double angle);
Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Vec3& t);

// Matrix-chain forward kinematics: 4x4 homogeneous transforms composed
// parent * translate(restOffset) * R_twist * R_abduction * R_flexion.
std::vector<Eigen::Matrix4d> forwardKinematics(const HandModel& model, const HandPose& pose);

double pointTriangleDistance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
double bruteUnsignedDistance(const TriMesh& mesh, const Vec3& p);

// Parity vote over several ray directions; rays with grazing hits are
// discarded before voting.
bool insideMesh(const TriMesh& mesh, const Vec3& p);
double bruteSignedDistance(const TriMesh& mesh, const Vec3& p);

// Monte-Carlo over the mesh bounding box. Returns volume in mm^3.
double mcVolume(const TriMesh& mesh, int samples, std::uint64_t seed);
// Fraction of inside-mesh samples lying in at least one sphere.
double mcCoverage(const TriMesh& mesh, const std::vector<graspfit::Sphere>& spheres, int samples,
                  std::uint64_t seed);

struct RayPixel {
  int cls = 0;       // matches PixelClass: 0 background, 1 object, 2 person
  double depth = 0;  // camera-frame z of the nearest hit, +inf if none
};
RayPixel rayCastPixel(const TriMesh* handMesh, const TriMesh* objectMesh, const Camera& camera,
                      int x, int y);

// Per-pixel silhouette sum straight from the definition.
double maskEnergy(const graspfit::ConfidenceMap& map, const graspfit::LabelImage& rendered,
                  graspfit::SilhouetteForm form, double clamp);

// Brute double loop over sphere pairs (world frames).
double repulsion(const std::vector<graspfit::Sphere>& hand,
                 const std::vector<graspfit::Sphere>& object, double allowanceMm);

// Central differences with a per-component step.
Eigen::VectorXd centralDifference(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, const Eigen::VectorXd& h);

// Mean and population standard deviation.
std::pair<double, double> meanStd(const std::vector<double>& values);

}  // namespace oracle
