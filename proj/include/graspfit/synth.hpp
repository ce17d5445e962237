#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "graspfit/config.hpp"
#include "graspfit/energy.hpp"
#include "graspfit/hand_model.hpp"
#include "graspfit/mesh.hpp"
#include "graspfit/render.hpp"
#include "graspfit/types.hpp"

namespace graspfit {

struct SyntheticScene {
  int frames = 20;
  std::uint64_t seed = 1;
  std::string object = "sphere:30";  // sphere:R, cylinder:R,H or a mesh path
  int cameraCount = 5;
  int imageSize = 64;
  double focalPx = 110;
  double cameraDistanceMm = 600;
  double keypointSigmaMm = 0;
  double blurSigmaPx = 0;
  double flipRate = 0;
  double perturbRotationRad = 10 * M_PI / 180;
  double perturbTranslationMm = 20;
  double perturbAngleRad = 15 * M_PI / 180;
  // Nonzero builds the ground truth with this thumb-base twist, beyond the
  // default limit, to provoke the failure mode joint limits prevent.
  double thumbTwistGtRad = 0;
  // Scales the canonical thumb flexion angles. A straighter thumb keeps the
  // twist provocation nearly aligned with its own keypoints.
  double thumbFlexScale = 1.0;
  double clearanceMm = 0.5;  // grasp margin on top of the repulsion allowance

  void validate() const;
};

SyntheticScene sceneFromConfig(const Config& config);

TriMesh makeSceneObject(const std::string& spec);

// Curled-finger grasp around the object: the hand pose is fixed, the object
// is centered on the fingertip centroid and pushed along the palm normal by
// the smallest offset that clears every hand sphere by `clearance` beyond
// the repulsion allowance (so the grasp has exactly zero repulsion energy).
struct CanonicalGrasp {
  HandPose hand;
  ObjectPose object;
};
CanonicalGrasp makeCanonicalGrasp(const HandModel& model, const SphereSet& handSpheres,
                                  const TriMesh& objectMesh, double allowanceMm,
                                  double clearanceMm, double thumbTwistRad = 0,
                                  double thumbFlexScale = 1.0);

std::vector<Camera> makeRingCameras(const Vec3& target, int count, double distanceMm,
                                    double focalPx, int imageSize);

// Everything one refinement frame consumes, plus the ground truth it is
// checked against. Cameras and ground truth depend only on the scene; noise
// and the perturbed init are drawn from the scene seed mixed with the frame.
struct FrameData {
  std::vector<Camera> cameras;
  ConfidenceMaps confidences;
  std::map<int, Vec3> keypointTargets;
  ParamVector groundTruth = ParamVector::Zero();
  ParamVector init = ParamVector::Zero();
};

FrameData generateFrame(const SyntheticScene& scene, const HandModel& model,
                        const SphereSet& handSpheres, const TriMesh& objectMesh, int frame);

// Separable Gaussian blur followed by per-pixel renormalization to the
// simplex; sigma 0 returns the input unchanged.
ConfidenceMap blurConfidence(const ConfidenceMap& map, double sigmaPx);

// Keypoint target csv: frame, joint, x, y, z per line.
using KeypointsByFrame = std::map<int, std::map<int, Vec3>>;
void saveKeypoints(const KeypointsByFrame& keypoints, const std::string& path);
KeypointsByFrame loadKeypoints(const std::string& path);

}  // namespace graspfit
