#include "graspfit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "graspfit/errors.hpp"
#include "graspfit/mesh_io.hpp"
#include "graspfit/rng.hpp"
#include "graspfit/spherize.hpp"

namespace graspfit {

void SyntheticScene::validate() const {
  if (frames < 1) throw Error("scene needs at least one frame");
  if (cameraCount < 1) throw Error("scene needs at least one camera");
  if (imageSize < 8) throw Error("image size too small");
  if (!(focalPx > 0) || !(cameraDistanceMm > 0)) throw Error("camera parameters must be positive");
  if (keypointSigmaMm < 0 || blurSigmaPx < 0 || flipRate < 0 || flipRate > 1) {
    throw Error("noise parameters out of range");
  }
  if (perturbRotationRad < 0 || perturbTranslationMm < 0 || perturbAngleRad < 0) {
    throw Error("perturbation magnitudes must be nonnegative");
  }
  if (clearanceMm <= 0) throw Error("clearance must be positive");
}

SyntheticScene sceneFromConfig(const Config& config) {
  SyntheticScene scene;
  const double deg = M_PI / 180.0;
  scene.frames = config.getInt("frames", scene.frames);
  scene.seed = static_cast<std::uint64_t>(config.getInt("seed", static_cast<int>(scene.seed)));
  scene.object = config.getString("object", scene.object);
  scene.cameraCount = config.getInt("cameras", scene.cameraCount);
  scene.imageSize = config.getInt("image_size", scene.imageSize);
  scene.focalPx = config.getDouble("focal_px", scene.focalPx);
  scene.cameraDistanceMm = config.getDouble("camera_distance_mm", scene.cameraDistanceMm);
  scene.keypointSigmaMm = config.getDouble("noise_keypoint_sigma_mm", scene.keypointSigmaMm);
  scene.blurSigmaPx = config.getDouble("noise_blur_sigma_px", scene.blurSigmaPx);
  scene.flipRate = config.getDouble("noise_flip_rate", scene.flipRate);
  scene.perturbRotationRad =
      config.getDouble("perturb_rotation_deg", scene.perturbRotationRad / deg) * deg;
  scene.perturbTranslationMm =
      config.getDouble("perturb_translation_mm", scene.perturbTranslationMm);
  scene.perturbAngleRad = config.getDouble("perturb_angle_deg", scene.perturbAngleRad / deg) * deg;
  scene.thumbTwistGtRad =
      config.getDouble("thumb_twist_gt_deg", scene.thumbTwistGtRad / deg) * deg;
  scene.thumbFlexScale = config.getDouble("thumb_flex_scale", scene.thumbFlexScale);
  scene.clearanceMm = config.getDouble("clearance_mm", scene.clearanceMm);
  scene.validate();
  return scene;
}

TriMesh makeSceneObject(const std::string& spec) {
  if (spec.rfind("sphere:", 0) == 0) {
    const double r = std::stod(spec.substr(7));
    if (r <= 0) throw ParseError("object sphere radius must be positive");
    return makeIcoSphere(r, 2);
  }
  if (spec.rfind("cylinder:", 0) == 0) {
    std::istringstream args(spec.substr(9));
    double r, h;
    char comma;
    if (!(args >> r >> comma >> h) || r <= 0 || h <= 0) {
      throw ParseError("expected cylinder:<radius>,<height>");
    }
    // Centered like the analytic objects so ring cameras frame it.
    TriMesh mesh = makeCylinder(r, h, 24, 4);
    for (auto& v : mesh.vertices) v.z() -= h / 2;
    return mesh;
  }
  return loadMesh(spec);
}

CanonicalGrasp makeCanonicalGrasp(const HandModel& model, const SphereSet& handSpheres,
                                  const TriMesh& objectMesh, double allowanceMm,
                                  double clearanceMm, double thumbTwistRad,
                                  double thumbFlexScale) {
  const double deg = M_PI / 180.0;
  CanonicalGrasp grasp;
  HandPose& pose = grasp.hand;
  // Fingers curl toward +z; the thumb opposes from the side.
  const double flex[3] = {35 * deg, 40 * deg, 20 * deg};
  for (int f = 1; f < kFingerCount; ++f) {
    for (int s = 0; s < 3; ++s) pose.setAngle(1 + f * 3 + s, kFlexion, flex[s]);
  }
  pose.setAngle(1, kFlexion, thumbFlexScale * 25 * deg);
  pose.setAngle(2, kFlexion, thumbFlexScale * 20 * deg);
  pose.setAngle(3, kFlexion, thumbFlexScale * 15 * deg);
  pose.setAngle(1, kTwist, thumbTwistRad);

  const HandKinematics kin(model, pose);
  const auto tips = kin.fingertips(model);
  Vec3 tipCentroid = Vec3::Zero();
  for (const auto& t : tips) tipCentroid += t;
  tipCentroid /= kFingerCount;

  double boundingRadius = 0;
  for (const auto& v : objectMesh.vertices) boundingRadius = std::max(boundingRadius, v.norm());

  // Push the object center from the fingertip centroid along the palm normal
  // until every hand sphere clears the object's bounding sphere; the minimal
  // offset is the largest upper root over the per-sphere quadratics.
  const Vec3 dir(0, 0, 1);
  const SphereSet posed = poseSpheres(handSpheres, kin.restToPosedAll());
  double offset = 0;
  for (const auto& s : posed.spheres) {
    const double clear = s.radius + boundingRadius - allowanceMm + clearanceMm;
    const Vec3 rel = tipCentroid - s.center;
    const double b = dir.dot(rel);
    const double c = rel.squaredNorm() - clear * clear;
    const double disc = b * b - c;
    if (disc <= 0) continue;  // never closer than `clear` along this line
    offset = std::max(offset, -b + std::sqrt(disc));
  }
  const Vec3 objectCenter = tipCentroid + offset * dir;
  grasp.object.translation = objectCenter;

  // The minimal offset leaves only the binding sphere at the clearance
  // boundary; the other fingers would float free and never engage the
  // repulsion hinge. Conform the grasp so every finger grips: swing each
  // finger's base abduction toward the object, then curl its flexion triple
  // until its spheres reach the clearance boundary. All trial poses keep
  // every sphere clear, so the grasp still has zero repulsion energy.
  for (int f = 0; f < kFingerCount; ++f) {
    const int mcp = 1 + f * 3;
    const double base[3] = {pose.angle(mcp + 0, kFlexion), pose.angle(mcp + 1, kFlexion),
                            pose.angle(mcp + 2, kFlexion)};
    auto slackAt = [&](double abd, double s) {
      HandPose trial = pose;
      trial.setAngle(mcp, kAbduction, abd);
      for (int k = 0; k < 3; ++k) trial.setAngle(mcp + k, kFlexion, s * base[k]);
      const HandKinematics trialKin(model, trial);
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& sphere : handSpheres.spheres) {
        if (sphere.joint < mcp || sphere.joint > mcp + 2) continue;
        const Vec3 center = trialKin.restToPosed(sphere.joint).apply(sphere.center);
        const double slack = (center - objectCenter).norm() -
                             (sphere.radius + boundingRadius - allowanceMm) - clearanceMm;
        worst = std::min(worst, slack);
      }
      return worst;
    };

    // Abduction: grid scan inside the limits for the closest approach that
    // still clears.
    const double abdMin = model.joints[mcp].limits[kAbduction][0] + 0.02;
    const double abdMax = model.joints[mcp].limits[kAbduction][1] - 0.02;
    double bestAbd = pose.angle(mcp, kAbduction);
    double bestSlack = slackAt(bestAbd, 1.0);
    for (int i = 0; i <= 100; ++i) {
      const double abd = abdMin + (abdMax - abdMin) * i / 100.0;
      const double slack = slackAt(abd, 1.0);
      if (slack >= 0 && slack < bestSlack) {
        bestSlack = slack;
        bestAbd = abd;
      }
    }
    if (bestSlack < 0) continue;  // base pose already binding, leave as is
    pose.setAngle(mcp, kAbduction, bestAbd);

    // Flexion: march toward first contact. Past it the tip can arc around
    // the far side and read as clear again, so sample before bisecting; when
    // the arc never touches, settle for its closest clear point.
    double lo = 1.0, hi = 0, bestS = 1.0;
    double bestFlexSlack = slackAt(bestAbd, 1.0);
    for (double s = 1.02; s <= 2.2; s += 0.02) {
      const double slack = slackAt(bestAbd, s);
      if (slack < 0) {
        hi = s;
        break;
      }
      lo = s;
      if (slack < bestFlexSlack) {
        bestFlexSlack = slack;
        bestS = s;
      }
    }
    if (hi > 0) {
      for (int it = 0; it < 48; ++it) {
        const double mid = 0.5 * (lo + hi);
        (slackAt(bestAbd, mid) >= 0 ? lo : hi) = mid;
      }
      bestS = lo;
    }
    for (int k = 0; k < 3; ++k) pose.setAngle(mcp + k, kFlexion, bestS * base[k]);
  }
  return grasp;
}

std::vector<Camera> makeRingCameras(const Vec3& target, int count, double distanceMm,
                                    double focalPx, int imageSize) {
  std::vector<Camera> cameras;
  cameras.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double azimuth = 2 * M_PI * k / count;
    const Vec3 dir = Vec3(std::cos(azimuth), std::sin(azimuth), 0.7).normalized();
    cameras.push_back(
        lookAtCamera(target + distanceMm * dir, target, Vec3(0, 0, 1), focalPx, imageSize,
                     imageSize));
  }
  return cameras;
}

ConfidenceMap blurConfidence(const ConfidenceMap& map, double sigmaPx) {
  if (sigmaPx <= 0) return map;
  const int radius = static_cast<int>(std::ceil(3 * sigmaPx));
  std::vector<double> kernel(2 * radius + 1);
  double kernelSum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigmaPx * sigmaPx));
    kernelSum += kernel[i + radius];
  }
  for (double& k : kernel) k /= kernelSum;

  const int w = map.width(), h = map.height();
  ConfidenceMap out;
  for (int c = 0; c < kClassCount; ++c) {
    ImageF tmp(w, h), dst(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * map.maps[c].at(std::clamp(x + i, 0, w - 1), y);
        }
        tmp.at(x, y) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1));
        }
        dst.at(x, y) = static_cast<float>(acc);
      }
    }
    out.maps[c] = dst;
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0;
      for (int c = 0; c < kClassCount; ++c) sum += out.maps[c].at(x, y);
      for (int c = 0; c < kClassCount; ++c) {
        out.maps[c].at(x, y) = static_cast<float>(out.maps[c].at(x, y) / sum);
      }
    }
  }
  return out;
}

namespace {

std::uint64_t mixSeed(std::uint64_t seed, int frame) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(frame + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Vec3 randomDirection(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-9);
  return v.normalized();
}

}  // namespace

FrameData generateFrame(const SyntheticScene& scene, const HandModel& model,
                        const SphereSet& handSpheres, const TriMesh& objectMesh, int frame) {
  scene.validate();
  FrameData data;

  const CanonicalGrasp grasp =
      makeCanonicalGrasp(model, handSpheres, objectMesh, 2.0, scene.clearanceMm,
                         scene.thumbTwistGtRad, scene.thumbFlexScale);
  packState(grasp.hand, grasp.object, data.groundTruth);

  const HandKinematics kin(model, grasp.hand);
  Vec3 center = grasp.object.translation;
  for (const auto& t : kin.transforms()) center += t.translation;
  center /= static_cast<double>(kin.transforms().size()) + 1;
  data.cameras = makeRingCameras(center, scene.cameraCount, scene.cameraDistanceMm, scene.focalPx,
                                 scene.imageSize);

  Rng rng(mixSeed(scene.seed, frame));

  // Draw order is fixed: init perturbation, keypoint noise, label flips.
  HandPose initHand = grasp.hand;
  ObjectPose initObject = grasp.object;
  {
    const Vec3 axis = randomDirection(rng);
    const double angle = rng.uniform(0, scene.perturbRotationRad);
    const Mat3 r = axisAngleToMatrix(axis * angle) * axisAngleToMatrix(initHand.globalRotation);
    initHand.globalRotation = matrixToAxisAngle(r);
    const Vec3 dir = randomDirection(rng);
    initHand.globalTranslation += rng.uniform(0, scene.perturbTranslationMm) * dir;
    for (int i = 0; i < kJointAngleCount; ++i) {
      initHand.jointAngles[i] += rng.uniform(-scene.perturbAngleRad, scene.perturbAngleRad);
    }
  }
  packState(initHand, initObject, data.init);

  for (int j = 0; j < kKeypointCount; ++j) {
    Vec3 target = keypointWorld(model, kin, j);
    for (int k = 0; k < 3; ++k) target[k] += rng.normal(0, scene.keypointSigmaMm);
    data.keypointTargets[j] = target;
  }

  const TriMesh posedHand = skinMesh(model, kin.restToPosedAll());
  const TriMesh posedObject = objectMesh.transformed(grasp.object.transform());
  for (const Camera& cam : data.cameras) {
    LabelImage labels = rasterize(&posedHand, &posedObject, cam);
    if (scene.flipRate > 0) {
      for (auto& cls : labels.label) {
        if (rng.uniform01() < scene.flipRate) {
          const int other = rng.uniformInt(0, 1);
          const int current = static_cast<int>(cls);
          cls = static_cast<PixelClass>((current + 1 + other) % kClassCount);
        }
      }
    }
    data.confidences.push_back(blurConfidence(oneHotConfidence(labels), scene.blurSigmaPx));
  }
  return data;
}

void saveKeypoints(const KeypointsByFrame& keypoints, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write keypoints: " + path);
  out << "frame,joint,x,y,z\n";
  char buf[256];
  for (const auto& [frame, joints] : keypoints) {
    for (const auto& [joint, p] : joints) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", frame, joint, p.x(), p.y(),
                    p.z());
      out << buf;
    }
  }
}

KeypointsByFrame loadKeypoints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open keypoints: " + path);
  KeypointsByFrame keypoints;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line[0] == '#' || line.rfind("frame", 0) == 0) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream row(line);
    int frame, joint;
    Vec3 p;
    if (!(row >> frame >> joint >> p.x() >> p.y() >> p.z())) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": expected frame, joint, x, y, z");
    }
    keypoints[frame][joint] = p;
  }
  return keypoints;
}

}  // namespace graspfit
