#pragma once

#include <map>
#include <string>
#include <vector>

#include "graspfit/hand_model.hpp"
#include "graspfit/image.hpp"
#include "graspfit/render.hpp"
#include "graspfit/spherize.hpp"
#include "graspfit/types.hpp"

namespace graspfit {

inline constexpr int kParamCount = 57;  // 6 hand global + 45 angles + 6 object
using ParamVector = Eigen::Matrix<double, kParamCount, 1>;

// Per-camera class confidences; indexed by PixelClass.
struct ConfidenceMap {
  ImageF maps[kClassCount];

  int width() const { return maps[0].width(); }
  int height() const { return maps[0].height(); }
  float at(PixelClass cls, int x, int y) const { return maps[static_cast<int>(cls)].at(x, y); }

  // Shared dimensions, values in [0,1], per-pixel sum 1 within 1e-4.
  void validate() const;
};

using ConfidenceMaps = std::vector<ConfidenceMap>;  // one entry per camera

// One-hot maps agreeing with the rendered labels.
ConfidenceMap oneHotConfidence(const LabelImage& labels);

// Raw planar float32 file: 8-byte header (width, height as little-endian
// u32), then 3 planes in class order object, person, background.
void saveConfidenceRaw(const ConfidenceMap& map, const std::string& path);
ConfidenceMap loadConfidenceRaw(const std::string& path);
// PGM triplet: value / 65535 = probability.
void saveConfidencePgm(const ConfidenceMap& map, const std::string& pathObject,
                       const std::string& pathPerson, const std::string& pathBackground);
ConfidenceMap loadConfidencePgm(const std::string& pathObject, const std::string& pathPerson,
                                const std::string& pathBackground);

// Class-index remap onto {object, person, background}, for collapsing a
// many-class segmenter's output. Text file lines: `<class-id> <target>`.
struct RemapTable {
  std::map<int, PixelClass> target;  // ids absent from the table -> background
};
RemapTable loadRemapTable(const std::string& path);
// Sums confidence planes (plane index = class id) into the 3 classes.
ConfidenceMap remapConfidence(const std::vector<ImageF>& planes, const RemapTable& table);

enum class SilhouetteForm { kNll, kDot, kL2 };
SilhouetteForm silhouetteFormFromString(const std::string& name);

inline constexpr double kConfidenceClamp = 1e-6;

// Sum over pixels of the chosen per-pixel score against the rendered class;
// lower is better for every form. Throws DimensionMismatchError.
double silhouetteEnergy(const ConfidenceMap& map, const LabelImage& rendered,
                        SilhouetteForm form = SilhouetteForm::kNll,
                        double clamp = kConfidenceClamp);
double silhouetteEnergy(const ConfidenceMaps& maps, const std::vector<LabelImage>& rendered,
                        SilhouetteForm form = SilhouetteForm::kNll,
                        double clamp = kConfidenceClamp);

// Hinge overlap energy between two sphere sets in a common frame:
// sum over pairs of max(0, r_h + r_o - |c_h - c_o| - allowance).
// Gradients are w.r.t. the world-frame centers.
double repulsionEnergy(const SphereSet& hand, const SphereSet& object, double allowanceMm,
                       std::vector<Vec3>* gradHand = nullptr,
                       std::vector<Vec3>* gradObject = nullptr);

// Keypoint indices 0..15 address joint origins, 16..20 the five fingertips
// (16 + finger). Tips are included so the distal angles, which move no joint
// origin, are still anchored.
constexpr int kKeypointCount = kJointCount + kFingerCount;

Vec3 keypointWorld(const HandModel& model, const HandKinematics& kin, int index);

// Sum of squared distances between selected keypoints and target points.
// Gradient entries are w.r.t. the world keypoint positions, zero without a
// target. Throws BadIndexError.
double keypointEnergy(const HandModel& model, const HandKinematics& kin,
                      const std::map<int, Vec3>& targets,
                      std::vector<Vec3>* gradPoints = nullptr);

// Defaults tuned on the synthetic suite. The limit weight must dominate the
// keypoint pull of a whole finger (2*sum(lever^2), order 1e3 mm^2/rad) for
// out-of-range equilibria to sit within a degree or two of the limit.
struct EnergyWeights {
  double keypoint = 1.0;
  double repulsion = 5.0;
  double limit = 1e4;
  double silhouette = 0.01;
};

struct EnergyTermConfig {
  EnergyWeights weights;
  SilhouetteForm silhouetteForm = SilhouetteForm::kNll;
  double allowanceMm = 2.0;  // allowed penetration in the repulsion hinge
  double confidenceClamp = kConfidenceClamp;
  bool enableSilhouette = true;
  bool enableRepulsion = true;
  bool enableLimits = true;
  bool enableKeypoints = true;
  // Central differences over all 57 parameters for the silhouette term;
  // otherwise that term contributes value only.
  bool silhouetteFiniteDiff = false;
  double silhouetteFdStep = 1e-2;
};

// Everything constant over one refinement: model, sphere sets in their rest
// frames, object mesh, cameras + confidences, keypoint targets.
struct EnergyContext {
  const HandModel* model = nullptr;
  SphereSet handSpheres;    // rest-mesh-frame centers with attach joints
  SphereSet objectSpheres;  // object-frame centers
  const TriMesh* objectMesh = nullptr;
  std::vector<Camera> cameras;
  ConfidenceMaps confidences;  // parallel to cameras
  std::map<int, Vec3> keypointTargets;
  EnergyTermConfig config;
};

struct EnergyReport {
  double silhouette = 0, repulsion = 0, limit = 0, keypoint = 0;
  double total = 0;
  ParamVector gradient = ParamVector::Zero();
};

void packState(const HandPose& hand, const ObjectPose& object, ParamVector& out);
void unpackState(const ParamVector& in, HandPose& hand, ObjectPose& object);

// Weighted sum of the enabled terms with its gradient over the packed
// parameters. The silhouette term has no analytic gradient (hard rasterizer)
// and contributes value only unless silhouetteFiniteDiff is set.
EnergyReport totalEnergy(const EnergyContext& ctx, const ParamVector& params);
// Value-only evaluation (skips Jacobian assembly; used by line search).
double totalEnergyValue(const EnergyContext& ctx, const ParamVector& params);

}  // namespace graspfit
