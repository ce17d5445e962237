#include <cmath>

#include "doctest.h"
#include "graspfit/hand_model.hpp"
#include "graspfit/rng.hpp"
#include "oracles.hpp"

using namespace graspfit;

namespace {

HandPose randomPose(Rng& rng, const HandModel& model, double boundaryMarginRad) {
  HandPose pose;
  pose.globalRotation = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  pose.globalTranslation = Vec3(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50));
  for (int j = 1; j < kJointCount; ++j) {
    for (int axis = 0; axis < kAnglesPerJoint; ++axis) {
      const auto& lim = model.joints[j].limits[axis];
      // Out-of-range draws are fine; only boundary-adjacent ones are not.
      double a;
      do {
        a = rng.uniform(lim[0] - 0.5, lim[1] + 0.5);
      } while (std::abs(a - lim[0]) < boundaryMarginRad || std::abs(a - lim[1]) < boundaryMarginRad);
      pose.setAngle(j, axis, a);
    }
  }
  return pose;
}

}  // namespace

TEST_CASE("forward kinematics: identity pose leaves every joint at its rest position") {
  const HandModel model = makeDefaultHandModel();
  const HandPose pose;
  const auto world = forwardKinematics(model, pose);
  REQUIRE(world.size() == static_cast<std::size_t>(kJointCount));
  for (int j = 0; j < kJointCount; ++j) {
    CHECK((world[j].translation - model.restPositions[j]).norm() == 0.0);
    CHECK((world[j].rotation - Mat3::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("forward kinematics: a pure translation shifts every rest position") {
  const HandModel model = makeDefaultHandModel();
  HandPose pose;
  pose.globalTranslation = Vec3(10, 0, 0);
  const auto world = forwardKinematics(model, pose);
  for (int j = 0; j < kJointCount; ++j) {
    const Vec3 expected = model.restPositions[j] + Vec3(10, 0, 0);
    CHECK((world[j].translation - expected).norm() < 1e-12);
  }
}

TEST_CASE("forward kinematics: bent index finger matches the matrix-chain reference") {
  const HandModel model = makeDefaultHandModel();
  HandPose pose;
  pose.setAngle(4, kFlexion, M_PI / 2);  // index proximal
  const HandKinematics kin(model, pose);
  const auto ref = oracle::forwardKinematics(model, pose);
  const HandModel::Tip& tip = model.tips[1];
  const Vec3 got = kin.pointWorld(tip.joint, tip.offset);
  const Eigen::Vector4d h = ref[tip.joint] * Eigen::Vector4d(tip.offset.x(), tip.offset.y(),
                                                             tip.offset.z(), 1.0);
  CHECK((got - h.head<3>()).norm() < 1e-9);
}

TEST_CASE("forward kinematics: all joints match the matrix-chain reference on random poses") {
  const HandModel model = makeDefaultHandModel();
  Rng rng(401);
  for (int trial = 0; trial < 20; ++trial) {
    const HandPose pose = randomPose(rng, model, 0);
    const auto world = forwardKinematics(model, pose);
    const auto ref = oracle::forwardKinematics(model, pose);
    for (int j = 0; j < kJointCount; ++j) {
      CHECK((world[j].rotation - ref[j].block<3, 3>(0, 0)).norm() < 1e-9);
      CHECK((world[j].translation - ref[j].block<3, 1>(0, 3)).norm() < 1e-9);
    }
  }
}

TEST_CASE("forward kinematics: a global pre-rotation left-composes with every joint transform") {
  const HandModel model = makeDefaultHandModel();
  Rng rng(402);
  const HandPose pose = randomPose(rng, model, 0);
  const auto base = forwardKinematics(model, pose);

  const Vec3 preAa(0.3, -0.2, 0.5);
  const RigidTransform pre = RigidTransform::fromAxisAngle(preAa, Vec3::Zero());
  HandPose rotated = pose;
  rotated.globalRotation =
      matrixToAxisAngle(pre.rotation * axisAngleToMatrix(pose.globalRotation));
  rotated.globalTranslation = pre.rotation * pose.globalTranslation;
  const auto composed = forwardKinematics(model, rotated);

  for (int j = 0; j < kJointCount; ++j) {
    const RigidTransform expected = pre.then(base[j]);
    CHECK((composed[j].rotation - expected.rotation).norm() < 1e-9);
    CHECK((composed[j].translation - expected.translation).norm() < 1e-9);
  }
}

TEST_CASE("skinning: identity transforms reproduce the rest mesh exactly") {
  const HandModel model = makeDefaultHandModel();
  const std::vector<RigidTransform> identity(kJointCount, RigidTransform::identity());
  const TriMesh posed = skinMesh(model, identity);
  REQUIRE(posed.vertexCount() == model.restMesh.vertexCount());
  for (int v = 0; v < posed.vertexCount(); ++v) {
    CHECK((posed.vertices[v] - model.restMesh.vertices[v]).norm() == 0);
  }
}

TEST_CASE("skinning: a uniform rigid transform on all joints moves the whole mesh rigidly") {
  const HandModel model = makeDefaultHandModel();
  const RigidTransform rigid = RigidTransform::fromAxisAngle(Vec3(0.4, 0.1, -0.7), Vec3(5, -3, 8));
  const TriMesh posed = skinMesh(model, std::vector<RigidTransform>(kJointCount, rigid));
  for (int v = 0; v < posed.vertexCount(); ++v) {
    CHECK((posed.vertices[v] - rigid.apply(model.restMesh.vertices[v])).norm() < 1e-9);
  }
}

TEST_CASE("skinning: rest-to-posed transforms of a rigidly moved hand are that rigid motion") {
  const HandModel model = makeDefaultHandModel();
  HandPose pose;
  pose.globalRotation = Vec3(0.4, 0.1, -0.7);
  pose.globalTranslation = Vec3(5, -3, 8);
  const RigidTransform rigid = RigidTransform::fromAxisAngle(pose.globalRotation,
                                                             pose.globalTranslation);
  const auto deltas = restToPosed(model, forwardKinematics(model, pose));
  for (int j = 0; j < kJointCount; ++j) {
    CHECK((deltas[j].rotation - rigid.rotation).norm() < 1e-12);
    CHECK((deltas[j].translation - rigid.translation).norm() < 1e-9);
  }
}

TEST_CASE("skinning: weight one on a single joint follows that joint's rigid motion") {
  HandModel model = makeDefaultHandModel();
  // Four probe vertices, all bound to the index proximal joint.
  model.restMesh.vertices = {Vec3(30, 95, 5), Vec3(25, 100, 0), Vec3(35, 90, -5), Vec3(28, 97, 2)};
  model.restMesh.triangles = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
  model.skinWeights.assign(4, {{4, 1.0}});

  HandPose pose;
  pose.globalRotation = Vec3(0, 0, M_PI / 2);  // 90 degrees about z
  const TriMesh posed = skinMesh(model, restToPosed(model, forwardKinematics(model, pose)));
  for (int v = 0; v < 4; ++v) {
    const Vec3& r = model.restMesh.vertices[v];
    const Vec3 expected(-r.y(), r.x(), r.z());  // hand-computed 90 degree turn
    CHECK((posed.vertices[v] - expected).norm() < 1e-9);
  }
}

TEST_CASE("skinning: every posed vertex is a convex combination of its joint candidates") {
  const HandModel model = makeDefaultHandModel();
  Rng rng(403);
  const HandPose pose = randomPose(rng, model, 0);
  const auto deltas = restToPosed(model, forwardKinematics(model, pose));
  const TriMesh posed = skinMesh(model, deltas);
  for (int v = 0; v < posed.vertexCount(); ++v) {
    Vec3 lo = Vec3::Constant(1e18), hi = Vec3::Constant(-1e18);
    Vec3 blended = Vec3::Zero();
    double weightSum = 0;
    for (const auto& [joint, w] : model.skinWeights[v]) {
      CHECK(w >= 0);
      const Vec3 candidate = deltas[joint].apply(model.restMesh.vertices[v]);
      lo = lo.cwiseMin(candidate);
      hi = hi.cwiseMax(candidate);
      blended += w * candidate;
      weightSum += w;
    }
    CHECK(weightSum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((posed.vertices[v] - blended).norm() < 1e-9);
    for (int k = 0; k < 3; ++k) {
      CHECK(posed.vertices[v][k] >= lo[k] - 1e-9);
      CHECK(posed.vertices[v][k] <= hi[k] + 1e-9);
    }
  }
}

TEST_CASE("skinning: pure flexion keeps finger vertices near their flexion plane") {
  const HandModel model = makeDefaultHandModel();
  for (int f = 0; f < kFingerCount; ++f) {
    const int mcp = 1 + 3 * f;
    // World flexion axis at zero pose equals the local axis (identity FK).
    const Vec3 normal = model.joints[mcp].axes.col(kFlexion).normalized();

    // Vertices dominated by this finger's joints.
    std::vector<int> fingerVerts;
    for (int v = 0; v < model.restMesh.vertexCount(); ++v) {
      double w = 0;
      for (const auto& [joint, weight] : model.skinWeights[v]) {
        if (joint >= mcp && joint <= mcp + 2) w += weight;
      }
      if (w > 0.99) fingerVerts.push_back(v);
    }
    REQUIRE(!fingerVerts.empty());

    const double fingerLength = (model.restPositions[mcp + 2] - model.restPositions[mcp]).norm() +
                                model.tips[f].offset.norm();
    double worst = 0;
    for (double s = 0; s <= 1.0001; s += 0.125) {
      HandPose pose;
      for (int j = mcp; j <= mcp + 2; ++j) {
        const auto& lim = model.joints[j].limits[kFlexion];
        pose.setAngle(j, kFlexion, lim[0] + s * (lim[1] - lim[0]));
      }
      const TriMesh posed = skinMesh(model, restToPosed(model, forwardKinematics(model, pose)));
      for (const int v : fingerVerts) {
        const double dev = std::abs(normal.dot(posed.vertices[v] - model.restMesh.vertices[v]));
        worst = std::max(worst, dev);
      }
    }
    CHECK(worst < 0.2 * fingerLength);
  }
}

TEST_CASE("limit penalty: zero at limit midpoints") {
  const HandModel model = makeDefaultHandModel();
  HandPose pose;
  for (int j = 1; j < kJointCount; ++j) {
    for (int axis = 0; axis < kAnglesPerJoint; ++axis) {
      const auto& lim = model.joints[j].limits[axis];
      pose.setAngle(j, axis, 0.5 * (lim[0] + lim[1]));
    }
  }
  CHECK(limitPenalty(model, pose) == 0);
}

TEST_CASE("limit penalty: quadratic hinge on a single violation") {
  const HandModel model = makeDefaultHandModel();
  HandPose pose;
  pose.setAngle(7, kFlexion, model.joints[7].limits[kFlexion][1] + 0.1);
  CHECK(limitPenalty(model, pose) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("limit penalty: gradient matches central finite differences") {
  const HandModel model = makeDefaultHandModel();
  Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    const HandPose pose = randomPose(rng, model, 1e-3);
    Eigen::Matrix<double, kJointAngleCount, 1> grad;
    limitPenalty(model, pose, grad);

    const auto f = [&](const Eigen::VectorXd& x) {
      HandPose p = pose;
      p.jointAngles = x;
      return limitPenalty(model, p);
    };
    const Eigen::VectorXd fd = oracle::centralDifference(
        f, pose.jointAngles, Eigen::VectorXd::Constant(kJointAngleCount, 1e-6));
    for (int i = 0; i < kJointAngleCount; ++i) {
      const double scale = std::max(1.0, std::abs(fd[i]));
      CHECK(std::abs(grad[i] - fd[i]) / scale < 1e-5);
    }
  }
}

TEST_CASE("hand model: default model passes its own validation and round-trips through disk") {
  const HandModel model = makeDefaultHandModel();
  model.validate();
  REQUIRE(model.joints.size() == static_cast<std::size_t>(kJointCount));

  const std::string path = "hand_roundtrip.txt";
  saveHandModel(model, path);
  const HandModel loaded = loadHandModel(path);
  loaded.validate();
  REQUIRE(loaded.restMesh.vertexCount() == model.restMesh.vertexCount());
  for (int j = 0; j < kJointCount; ++j) {
    CHECK(loaded.joints[j].parent == model.joints[j].parent);
    CHECK((loaded.joints[j].restOffset - model.joints[j].restOffset).norm() == 0);
    CHECK((loaded.joints[j].axes - model.joints[j].axes).norm() == 0);
    for (int axis = 0; axis < 3; ++axis) {
      CHECK(loaded.joints[j].limits[axis][0] == model.joints[j].limits[axis][0]);
      CHECK(loaded.joints[j].limits[axis][1] == model.joints[j].limits[axis][1]);
    }
  }
  for (int v = 0; v < model.restMesh.vertexCount(); ++v) {
    CHECK((loaded.restMesh.vertices[v] - model.restMesh.vertices[v]).norm() == 0);
  }
  CHECK(loaded.skinWeights == model.skinWeights);
  for (int f = 0; f < kFingerCount; ++f) {
    CHECK(loaded.tips[f].joint == model.tips[f].joint);
    CHECK((loaded.tips[f].offset - model.tips[f].offset).norm() == 0);
  }
}
