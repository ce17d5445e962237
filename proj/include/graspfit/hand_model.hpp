#pragma once

#include <array>
#include <string>
#include <vector>

#include "graspfit/mesh.hpp"
#include "graspfit/types.hpp"

namespace graspfit {

inline constexpr int kJointCount = 16;        // wrist + 3 per finger
inline constexpr int kArticulatedJoints = 15;
inline constexpr int kAnglesPerJoint = 3;     // flexion, abduction, twist
inline constexpr int kJointAngleCount = kArticulatedJoints * kAnglesPerJoint;  // 45
inline constexpr int kFingerCount = 5;        // thumb, index, middle, ring, pinky

enum JointAxis { kFlexion = 0, kAbduction = 1, kTwist = 2 };

struct HandJoint {
  int parent = -1;              // -1 only for the wrist (joint 0)
  Vec3 restOffset = Vec3::Zero();  // mm, in the parent frame
  // Columns: flexion, abduction, twist axis in this joint's local frame.
  Mat3 axes = Mat3::Identity();
  // limits[axis] = {min, max} radians; unused for the wrist.
  std::array<std::array<double, 2>, 3> limits = {{{0, 0}, {0, 0}, {0, 0}}};
};

struct HandModel {
  std::vector<HandJoint> joints;  // 16, wrist first, parents before children
  TriMesh restMesh;               // mm
  // Sparse per-vertex weights: (joint, weight) pairs, each row sums to 1.
  std::vector<std::vector<std::pair<int, double>>> skinWeights;
  struct Tip {
    int joint = 0;  // distal joint the fingertip is attached to
    Vec3 offset = Vec3::Zero();  // in that joint's rest frame
  };
  std::array<Tip, kFingerCount> tips;  // thumb, index, middle, ring, pinky

  // Joint positions with identity global pose and zero angles.
  std::vector<Vec3> restPositions;

  void finalize();        // fills restPositions
  void validate() const;  // throws Error on any violated invariant
};

struct HandPose {
  Vec3 globalRotation = Vec3::Zero();     // axis-angle, radians
  Vec3 globalTranslation = Vec3::Zero();  // mm
  // (joint-1)*3 + axis, axis order flexion, abduction, twist.
  Eigen::Matrix<double, kJointAngleCount, 1> jointAngles =
      Eigen::Matrix<double, kJointAngleCount, 1>::Zero();

  double angle(int joint, int axis) const { return jointAngles[(joint - 1) * 3 + axis]; }
  void setAngle(int joint, int axis, double v) { jointAngles[(joint - 1) * 3 + axis] = v; }
  void validate() const;
};

struct ObjectPose {
  Vec3 rotation = Vec3::Zero();     // axis-angle
  Vec3 translation = Vec3::Zero();  // mm
  RigidTransform transform() const { return RigidTransform::fromAxisAngle(rotation, translation); }
  void validate() const;
};

// World transforms per joint. Transform 0 is exactly the global pose.
std::vector<RigidTransform> forwardKinematics(const HandModel& model, const HandPose& pose);

// FK with the per-joint data needed for analytic point Jacobians.
class HandKinematics {
 public:
  static constexpr int kHandParams = 6 + kJointAngleCount;  // 51

  HandKinematics(const HandModel& model, const HandPose& pose);

  const std::vector<RigidTransform>& transforms() const { return world_; }
  const RigidTransform& world(int joint) const { return world_[joint]; }
  Vec3 jointOrigin(int joint) const { return world_[joint].translation; }

  // World position of a point given in `joint`'s rest frame.
  Vec3 pointWorld(int joint, const Vec3& local) const { return world_[joint].apply(local); }

  // Transform taking a rest-pose world point rigidly attached to `joint` to
  // its posed world position. Identity at the rest pose.
  RigidTransform restToPosed(int joint) const;
  std::vector<RigidTransform> restToPosedAll() const;

  // d(world point)/d(hand params): columns 0-2 global rotation (axis-angle
  // components), 3-5 global translation, 6.. joint angles. The point is
  // rigidly attached to `joint`.
  void pointJacobian(int joint, const Vec3& xWorld,
                     Eigen::Ref<Eigen::Matrix<double, 3, kHandParams>> out) const;

  std::array<Vec3, kFingerCount> fingertips(const HandModel& model) const;

 private:
  const HandModel& model_;
  std::vector<RigidTransform> world_;
  // World direction of each elementary rotation axis, columns flex/abd/twist.
  std::vector<Mat3> axisWorld_;
  std::array<Mat3, 3> globalRotDeriv_;
  RigidTransform global_;
};

// Rest-to-posed transform per joint for a forward-kinematics result:
// world[j] composed with the inverse rest translation. Identity transforms
// at the rest pose, a uniform rigid transform for a rigidly moved hand.
std::vector<RigidTransform> restToPosed(const HandModel& model,
                                        const std::vector<RigidTransform>& world);

// Linear blend skinning: vertex = sum of skin weights times the rest vertex
// mapped by the joint's rest-to-posed transform.
TriMesh skinMesh(const HandModel& model, const std::vector<RigidTransform>& restToPosed);

// Sum of squared limit violations over all joint angles, with its exact
// gradient w.r.t. the 45 joint angles.
double limitPenalty(const HandModel& model, const HandPose& pose,
                    Eigen::Ref<Eigen::Matrix<double, kJointAngleCount, 1>> grad);
double limitPenalty(const HandModel& model, const HandPose& pose);

// Procedural capsule-per-bone model with anatomically aligned axis frames.
HandModel makeDefaultHandModel();

HandModel loadHandModel(const std::string& path);
void saveHandModel(const HandModel& model, const std::string& path);

}  // namespace graspfit
