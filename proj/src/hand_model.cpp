#include "graspfit/hand_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "graspfit/errors.hpp"

namespace graspfit {

void HandModel::finalize() {
  restPositions.assign(joints.size(), Vec3::Zero());
  for (size_t j = 1; j < joints.size(); ++j) {
    restPositions[j] = restPositions[joints[j].parent] + joints[j].restOffset;
  }
}

void HandModel::validate() const {
  if (joints.size() != kJointCount) throw Error("hand model must have 16 joints");
  if (joints[0].parent != -1) throw Error("joint 0 must be the root");
  if (joints[0].restOffset.norm() != 0.0) throw Error("wrist rest offset must be zero");
  for (size_t j = 1; j < joints.size(); ++j) {
    if (joints[j].parent < 0 || joints[j].parent >= static_cast<int>(j)) {
      throw Error("joint parents must precede children");
    }
  }
  for (size_t j = 0; j < joints.size(); ++j) {
    const Mat3& a = joints[j].axes;
    if (!a.allFinite()) throw Error("non-finite axis frame");
    const double err = (a.transpose() * a - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (err > 1e-9) {
      std::ostringstream msg;
      msg << "axis frame of joint " << j << " not orthonormal (err " << err << ")";
      throw Error(msg.str());
    }
    for (int axis = 0; axis < 3; ++axis) {
      if (joints[j].limits[axis][0] > joints[j].limits[axis][1]) {
        throw Error("joint limit min > max");
      }
    }
  }
  if (skinWeights.size() != restMesh.vertices.size()) {
    throw Error("skin weight rows must match vertex count");
  }
  for (size_t v = 0; v < skinWeights.size(); ++v) {
    double sum = 0;
    for (const auto& [j, w] : skinWeights[v]) {
      if (j < 0 || j >= kJointCount) throw Error("skin weight joint index out of range");
      if (w < 0) throw Error("skin weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      std::ostringstream msg;
      msg << "skin weight row " << v << " sums to " << sum;
      throw Error(msg.str());
    }
  }
  for (const auto& tip : tips) {
    if (tip.joint < 1 || tip.joint >= kJointCount) throw Error("tip joint index out of range");
  }
  if (restPositions.size() != joints.size()) throw Error("model not finalized");
}

void HandPose::validate() const {
  if (!globalRotation.allFinite() || !globalTranslation.allFinite() || !jointAngles.allFinite()) {
    throw Error("hand pose has non-finite values");
  }
}

void ObjectPose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error("object pose has non-finite values");
  }
}

std::vector<RigidTransform> forwardKinematics(const HandModel& model, const HandPose& pose) {
  return HandKinematics(model, pose).transforms();
}

HandKinematics::HandKinematics(const HandModel& model, const HandPose& pose) : model_(model) {
  pose.validate();
  const int n = static_cast<int>(model.joints.size());
  world_.resize(n);
  axisWorld_.resize(n);

  global_ = RigidTransform::fromAxisAngle(pose.globalRotation, pose.globalTranslation);
  world_[0] = global_;
  axisWorld_[0] = global_.rotation;

  for (int j = 1; j < n; ++j) {
    const HandJoint& joint = model.joints[j];
    const RigidTransform& parent = world_[joint.parent];
    const Vec3 origin = parent.apply(joint.restOffset);

    const double flex = pose.angle(j, kFlexion);
    const double abd = pose.angle(j, kAbduction);
    const double twist = pose.angle(j, kTwist);

    const Mat3 rTwist = axisAngleToMatrix(joint.axes.col(kTwist) * twist);
    const Mat3 rAbd = axisAngleToMatrix(joint.axes.col(kAbduction) * abd);
    const Mat3 rFlex = axisAngleToMatrix(joint.axes.col(kFlexion) * flex);

    // flexion applied first: local = twist * abd * flex
    const Mat3 local = rTwist * (rAbd * rFlex);
    world_[j].rotation = parent.rotation * local;
    world_[j].translation = origin;

    // World direction of each elementary axis at the point it applies.
    axisWorld_[j].col(kTwist) = parent.rotation * joint.axes.col(kTwist);
    axisWorld_[j].col(kAbduction) = parent.rotation * (rTwist * joint.axes.col(kAbduction));
    axisWorld_[j].col(kFlexion) = parent.rotation * (rTwist * (rAbd * joint.axes.col(kFlexion)));
  }

  for (int i = 0; i < 3; ++i) {
    globalRotDeriv_[i] = rotationDerivative(pose.globalRotation, i);
  }
}

void HandKinematics::pointJacobian(int joint, const Vec3& xWorld,
                                   Eigen::Ref<Eigen::Matrix<double, 3, kHandParams>> out) const {
  out.setZero();
  // Model-frame point: global rotation applies to it as the outermost factor.
  const Vec3 y = global_.rotation.transpose() * (xWorld - global_.translation);
  for (int i = 0; i < 3; ++i) out.col(i) = globalRotDeriv_[i] * y;
  out.block<3, 3>(0, 3).setIdentity();

  for (int k = joint; k > 0; k = model_.joints[k].parent) {
    const Vec3 lever = xWorld - world_[k].translation;
    for (int axis = 0; axis < 3; ++axis) {
      out.col(6 + (k - 1) * 3 + axis) = axisWorld_[k].col(axis).cross(lever);
    }
  }
}

std::array<Vec3, kFingerCount> HandKinematics::fingertips(const HandModel& model) const {
  std::array<Vec3, kFingerCount> tips;
  for (int f = 0; f < kFingerCount; ++f) {
    tips[f] = world_[model.tips[f].joint].apply(model.tips[f].offset);
  }
  return tips;
}

RigidTransform HandKinematics::restToPosed(int joint) const {
  return world_[joint].then(RigidTransform::translationOnly(-model_.restPositions[joint]));
}

std::vector<RigidTransform> HandKinematics::restToPosedAll() const {
  std::vector<RigidTransform> deltas(world_.size());
  for (size_t j = 0; j < world_.size(); ++j) deltas[j] = restToPosed(static_cast<int>(j));
  return deltas;
}

std::vector<RigidTransform> restToPosed(const HandModel& model,
                                        const std::vector<RigidTransform>& world) {
  if (world.size() != model.joints.size()) {
    throw DimensionMismatchError("transform count does not match joint count");
  }
  std::vector<RigidTransform> deltas(world.size());
  for (size_t j = 0; j < world.size(); ++j) {
    deltas[j] = world[j].then(RigidTransform::translationOnly(-model.restPositions[j]));
  }
  return deltas;
}

TriMesh skinMesh(const HandModel& model, const std::vector<RigidTransform>& restToPosed) {
  if (restToPosed.size() != model.joints.size()) {
    throw DimensionMismatchError("transform count does not match joint count");
  }
  TriMesh out;
  out.vertices.resize(model.restMesh.vertices.size());
  out.triangles = model.restMesh.triangles;
  for (size_t v = 0; v < model.restMesh.vertices.size(); ++v) {
    const Vec3& rest = model.restMesh.vertices[v];
    Vec3 p = Vec3::Zero();
    for (const auto& [j, w] : model.skinWeights[v]) {
      p += w * restToPosed[j].apply(rest);
    }
    out.vertices[v] = p;
  }
  return out;
}

double limitPenalty(const HandModel& model, const HandPose& pose,
                    Eigen::Ref<Eigen::Matrix<double, kJointAngleCount, 1>> grad) {
  pose.validate();
  grad.setZero();
  double energy = 0;
  for (int j = 1; j < kJointCount; ++j) {
    for (int axis = 0; axis < 3; ++axis) {
      const double theta = pose.angle(j, axis);
      const auto& lim = model.joints[j].limits[axis];
      double viol = 0;
      if (theta > lim[1]) {
        viol = theta - lim[1];
      } else if (theta < lim[0]) {
        viol = theta - lim[0];
      }
      energy += viol * viol;
      grad[(j - 1) * 3 + axis] = 2.0 * viol;
    }
  }
  return energy;
}

double limitPenalty(const HandModel& model, const HandPose& pose) {
  Eigen::Matrix<double, kJointAngleCount, 1> grad;
  return limitPenalty(model, pose, grad);
}

// ---------------------------------------------------------------------------
// Default model
// ---------------------------------------------------------------------------

namespace {

constexpr double kDeg = M_PI / 180.0;

struct FingerSpec {
  Vec3 mcp;          // first articulated joint position
  Vec3 dirs[3];      // bone directions, proximal to distal
  double lengths[3];
  double radii[3];   // capsule radii per segment
  double palmRadius; // wrist->mcp capsule
};

// All three joints of a finger share the flexion direction, taken from the
// proximal bone. Parallel flexion axes keep pure flexion in one plane; a
// per-segment axis would corkscrew a curved digit like the thumb when only
// flexion varies.
Mat3 anatomicalFrame(const Vec3& boneDir, const Vec3& proximalDir, const Vec3& palmNormal) {
  Vec3 f = proximalDir.normalized().cross(palmNormal);
  if (f.norm() < 1e-6) f = proximalDir.normalized().cross(Vec3(0, 1, 0));
  f.normalize();
  const Vec3 t = (boneDir - boneDir.dot(f) * f).normalized();
  const Vec3 a = t.cross(f);
  Mat3 axes;
  axes.col(kFlexion) = f;
  axes.col(kAbduction) = a;
  axes.col(kTwist) = t;
  return axes;
}

}  // namespace

HandModel makeDefaultHandModel() {
  // Palm in the x-y plane, fingers toward +y, palm facing +z; positive
  // flexion curls toward the palm side. Desk-scale adult hand, mm.
  const Vec3 palmNormal(0, 0, 1);

  std::array<FingerSpec, kFingerCount> fingers;
  // thumb
  fingers[0].mcp = Vec3(28, 22, -2);
  fingers[0].dirs[0] = Vec3(0.72, 0.60, 0.20).normalized();
  fingers[0].dirs[1] = Vec3(0.58, 0.76, 0.22).normalized();
  fingers[0].dirs[2] = Vec3(0.52, 0.82, 0.20).normalized();
  fingers[0].lengths[0] = 42;
  fingers[0].lengths[1] = 30;
  fingers[0].lengths[2] = 26;
  fingers[0].radii[0] = 10.5;
  fingers[0].radii[1] = 9.0;
  fingers[0].radii[2] = 8.0;
  fingers[0].palmRadius = 9.0;
  // index
  fingers[1].mcp = Vec3(32, 88, 0);
  fingers[1].dirs[0] = fingers[1].dirs[1] = fingers[1].dirs[2] = Vec3(0.08, 1, 0).normalized();
  fingers[1].lengths[0] = 44;
  fingers[1].lengths[1] = 26;
  fingers[1].lengths[2] = 23;
  fingers[1].radii[0] = 8.5;
  fingers[1].radii[1] = 7.5;
  fingers[1].radii[2] = 6.8;
  fingers[1].palmRadius = 10.0;
  // middle
  fingers[2].mcp = Vec3(10, 92, 0);
  fingers[2].dirs[0] = fingers[2].dirs[1] = fingers[2].dirs[2] = Vec3(0, 1, 0);
  fingers[2].lengths[0] = 46;
  fingers[2].lengths[1] = 30;
  fingers[2].lengths[2] = 25;
  fingers[2].radii[0] = 8.5;
  fingers[2].radii[1] = 7.5;
  fingers[2].radii[2] = 6.8;
  fingers[2].palmRadius = 10.0;
  // ring
  fingers[3].mcp = Vec3(-12, 88, 0);
  fingers[3].dirs[0] = fingers[3].dirs[1] = fingers[3].dirs[2] = Vec3(-0.08, 1, 0).normalized();
  fingers[3].lengths[0] = 42;
  fingers[3].lengths[1] = 28;
  fingers[3].lengths[2] = 24;
  fingers[3].radii[0] = 8.0;
  fingers[3].radii[1] = 7.0;
  fingers[3].radii[2] = 6.4;
  fingers[3].palmRadius = 10.0;
  // pinky
  fingers[4].mcp = Vec3(-32, 78, 0);
  fingers[4].dirs[0] = fingers[4].dirs[1] = fingers[4].dirs[2] = Vec3(-0.16, 1, 0).normalized();
  fingers[4].lengths[0] = 34;
  fingers[4].lengths[1] = 22;
  fingers[4].lengths[2] = 20;
  fingers[4].radii[0] = 7.0;
  fingers[4].radii[1] = 6.3;
  fingers[4].radii[2] = 5.6;
  fingers[4].palmRadius = 9.0;

  HandModel model;
  model.joints.resize(kJointCount);
  model.joints[0].parent = -1;
  model.joints[0].axes = Mat3::Identity();

  const std::array<std::array<double, 2>, 3> fingerLimits = {
      {{-10 * kDeg, 100 * kDeg}, {-25 * kDeg, 25 * kDeg}, {-15 * kDeg, 15 * kDeg}}};
  const std::array<std::array<double, 2>, 3> thumbCmcLimits = {
      {{-30 * kDeg, 100 * kDeg}, {-40 * kDeg, 40 * kDeg}, {-30 * kDeg, 30 * kDeg}}};

  std::array<std::array<Vec3, 4>, kFingerCount> chain;  // mcp, pip, dip, tip positions
  for (int f = 0; f < kFingerCount; ++f) {
    chain[f][0] = fingers[f].mcp;
    for (int s = 0; s < 3; ++s) {
      chain[f][s + 1] = chain[f][s] + fingers[f].lengths[s] * fingers[f].dirs[s];
    }
    for (int s = 0; s < 3; ++s) {
      const int j = 1 + f * 3 + s;
      HandJoint& joint = model.joints[j];
      joint.parent = s == 0 ? 0 : j - 1;
      joint.restOffset = s == 0 ? chain[f][0] : Vec3(chain[f][s] - chain[f][s - 1]);
      joint.axes = anatomicalFrame(fingers[f].dirs[s], fingers[f].dirs[0], palmNormal);
      joint.limits = (f == 0 && s == 0) ? thumbCmcLimits : fingerLimits;
    }
    model.tips[f].joint = 1 + f * 3 + 2;
    model.tips[f].offset = chain[f][3] - chain[f][2];
  }

  // Capsule-per-bone surface: 5 palm capsules from the wrist, then 3 per
  // finger, all with one-hot skin weights on their bone's joint.
  const int radial = 10, capRings = 1;
  auto addCapsule = [&](const Vec3& p0, const Vec3& p1, double radius, int joint) {
    const TriMesh capsule = makeCapsule(p0, p1, radius, radial, capRings);
    const int base = model.restMesh.vertexCount();
    model.restMesh.appendMesh(capsule);
    model.skinWeights.resize(model.restMesh.vertices.size());
    for (int v = base; v < model.restMesh.vertexCount(); ++v) {
      model.skinWeights[v] = {{joint, 1.0}};
    }
  };

  for (int f = 0; f < kFingerCount; ++f) {
    // Shorten the palm capsule a little so its cap does not swallow the MCP.
    const Vec3 toMcp = chain[f][0];
    addCapsule(Vec3(0, -6, 0), toMcp - 6.0 * toMcp.normalized(), fingers[f].palmRadius, 0);
  }
  for (int f = 0; f < kFingerCount; ++f) {
    for (int s = 0; s < 3; ++s) {
      addCapsule(chain[f][s], chain[f][s + 1], fingers[f].radii[s], 1 + f * 3 + s);
    }
  }

  model.finalize();
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void formatFail(const std::string& path, const std::string& what) {
  throw ParseError(path + ": " + what);
}

}  // namespace

HandModel loadHandModel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open hand model: " + path);
  HandModel model;

  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "handmodel" || version != 1) {
    formatFail(path, "expected 'handmodel 1' header");
  }

  auto expectSection = [&](const char* name, int& count) {
    if (!(in >> tag >> count) || tag != name || count < 0) {
      formatFail(path, std::string("expected section '") + name + " <count>'");
    }
  };

  int nJoints = 0;
  expectSection("joints", nJoints);
  model.joints.resize(nJoints);
  for (int j = 0; j < nJoints; ++j) {
    int idx;
    HandJoint joint;
    if (!(in >> tag >> idx) || tag != "joint" || idx != j) formatFail(path, "bad joint line");
    in >> joint.parent;
    for (int k = 0; k < 3; ++k) in >> joint.restOffset[k];
    for (int col = 0; col < 3; ++col) {
      for (int k = 0; k < 3; ++k) in >> joint.axes(k, col);
    }
    for (int axis = 0; axis < 3; ++axis) in >> joint.limits[axis][0] >> joint.limits[axis][1];
    if (!in) formatFail(path, "truncated joint line");
    model.joints[j] = joint;
  }

  int nTips = 0;
  expectSection("tips", nTips);
  if (nTips != kFingerCount) formatFail(path, "expected 5 tips");
  for (int f = 0; f < nTips; ++f) {
    int finger;
    if (!(in >> tag >> finger) || tag != "tip" || finger != f) formatFail(path, "bad tip line");
    in >> model.tips[f].joint;
    for (int k = 0; k < 3; ++k) in >> model.tips[f].offset[k];
    if (!in) formatFail(path, "truncated tip line");
  }

  int nVerts = 0;
  expectSection("vertices", nVerts);
  model.restMesh.vertices.resize(nVerts);
  for (int v = 0; v < nVerts; ++v) {
    if (!(in >> tag) || tag != "v") formatFail(path, "bad vertex line");
    for (int k = 0; k < 3; ++k) in >> model.restMesh.vertices[v][k];
    if (!in) formatFail(path, "truncated vertex line");
  }

  int nTris = 0;
  expectSection("triangles", nTris);
  model.restMesh.triangles.resize(nTris);
  for (int t = 0; t < nTris; ++t) {
    auto& tri = model.restMesh.triangles[t];
    if (!(in >> tag >> tri[0] >> tri[1] >> tri[2]) || tag != "t") {
      formatFail(path, "bad triangle line");
    }
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nVerts) formatFail(path, "triangle index out of range");
    }
  }

  int nWeights = 0;
  expectSection("weights", nWeights);
  if (nWeights != nVerts) formatFail(path, "weight rows must match vertex count");
  model.skinWeights.resize(nWeights);
  for (int v = 0; v < nWeights; ++v) {
    int count;
    if (!(in >> tag >> count) || tag != "w" || count < 1) formatFail(path, "bad weight line");
    model.skinWeights[v].resize(count);
    for (int k = 0; k < count; ++k) {
      in >> model.skinWeights[v][k].first >> model.skinWeights[v][k].second;
    }
    if (!in) formatFail(path, "truncated weight line");
  }

  model.finalize();
  try {
    model.validate();
  } catch (const Error& e) {
    formatFail(path, e.what());
  }
  return model;
}

void saveHandModel(const HandModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write hand model: " + path);
  char buf[512];
  out << "handmodel 1\n";
  out << "joints " << model.joints.size() << "\n";
  for (size_t j = 0; j < model.joints.size(); ++j) {
    const HandJoint& joint = model.joints[j];
    out << "joint " << j << ' ' << joint.parent;
    std::snprintf(buf, sizeof(buf), " %.17g %.17g %.17g", joint.restOffset.x(),
                  joint.restOffset.y(), joint.restOffset.z());
    out << buf;
    for (int col = 0; col < 3; ++col) {
      std::snprintf(buf, sizeof(buf), " %.17g %.17g %.17g", joint.axes(0, col),
                    joint.axes(1, col), joint.axes(2, col));
      out << buf;
    }
    for (int axis = 0; axis < 3; ++axis) {
      std::snprintf(buf, sizeof(buf), " %.17g %.17g", joint.limits[axis][0],
                    joint.limits[axis][1]);
      out << buf;
    }
    out << '\n';
  }
  out << "tips " << kFingerCount << "\n";
  for (int f = 0; f < kFingerCount; ++f) {
    std::snprintf(buf, sizeof(buf), "tip %d %d %.17g %.17g %.17g\n", f, model.tips[f].joint,
                  model.tips[f].offset.x(), model.tips[f].offset.y(), model.tips[f].offset.z());
    out << buf;
  }
  out << "vertices " << model.restMesh.vertexCount() << "\n";
  for (const auto& v : model.restMesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  out << "triangles " << model.restMesh.triangleCount() << "\n";
  for (const auto& t : model.restMesh.triangles) {
    out << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  out << "weights " << model.skinWeights.size() << "\n";
  for (const auto& row : model.skinWeights) {
    out << "w " << row.size();
    for (const auto& [j, w] : row) {
      std::snprintf(buf, sizeof(buf), " %d %.17g", j, w);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace graspfit
