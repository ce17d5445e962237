#include "graspfit/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "graspfit/errors.hpp"

namespace graspfit {

void ConfidenceMap::validate() const {
  const int w = width(), h = height();
  for (int c = 1; c < kClassCount; ++c) {
    if (!maps[c].sameSize(w, h)) throw DimensionMismatchError("confidence planes differ in size");
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0;
      for (int c = 0; c < kClassCount; ++c) {
        const float v = maps[c].at(x, y);
        if (!(v >= 0.0f && v <= 1.0f)) throw Error("confidence value outside [0, 1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-4) {
        std::ostringstream msg;
        msg << "confidence simplex violated at (" << x << ", " << y << "): sum " << sum;
        throw Error(msg.str());
      }
    }
  }
}

ConfidenceMap oneHotConfidence(const LabelImage& labels) {
  ConfidenceMap map;
  for (int c = 0; c < kClassCount; ++c) map.maps[c] = ImageF(labels.width, labels.height, 0.0f);
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      map.maps[static_cast<int>(labels.at(x, y))].at(x, y) = 1.0f;
    }
  }
  return map;
}

namespace {

void writeU32Le(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t readU32Le(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

void saveConfidenceRaw(const ConfidenceMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write confidence map: " + path);
  writeU32Le(out, static_cast<std::uint32_t>(map.width()));
  writeU32Le(out, static_cast<std::uint32_t>(map.height()));
  static_assert(sizeof(float) == 4);
  for (int c = 0; c < kClassCount; ++c) {
    for (const float v : map.maps[c].data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      writeU32Le(out, bits);
    }
  }
}

ConfidenceMap loadConfidenceRaw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open confidence map: " + path);
  const std::uint32_t w = readU32Le(in), h = readU32Le(in);
  if (!in || w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) {
    throw ParseError(path + ": bad raw confidence header");
  }
  ConfidenceMap map;
  for (int c = 0; c < kClassCount; ++c) {
    map.maps[c] = ImageF(static_cast<int>(w), static_cast<int>(h));
    for (float& v : map.maps[c].data()) {
      const std::uint32_t bits = readU32Le(in);
      std::memcpy(&v, &bits, 4);
    }
  }
  if (!in) throw ParseError(path + ": truncated raw confidence data");
  map.validate();
  return map;
}

void saveConfidencePgm(const ConfidenceMap& map, const std::string& pathObject,
                       const std::string& pathPerson, const std::string& pathBackground) {
  const std::string* paths[kClassCount] = {&pathObject, &pathPerson, &pathBackground};
  for (int c = 0; c < kClassCount; ++c) {
    ImageU16 img(map.width(), map.height());
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      img.data()[i] = static_cast<std::uint16_t>(
          std::clamp(std::floor(map.maps[c].data()[i] * 65535.0 + 0.5), 0.0, 65535.0));
    }
    savePgm16(img, *paths[c]);
  }
}

ConfidenceMap loadConfidencePgm(const std::string& pathObject, const std::string& pathPerson,
                                const std::string& pathBackground) {
  const std::string* paths[kClassCount] = {&pathObject, &pathPerson, &pathBackground};
  ConfidenceMap map;
  for (int c = 0; c < kClassCount; ++c) {
    const ImageU16 img = loadPgm16(*paths[c]);
    map.maps[c] = ImageF(img.width(), img.height());
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      map.maps[c].data()[i] = static_cast<float>(img.data()[i] / 65535.0);
    }
  }
  map.validate();
  return map;
}

RemapTable loadRemapTable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open remap table: " + path);
  RemapTable table;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    int id;
    std::string target;
    if (!(row >> id)) continue;  // blank
    if (!(row >> target)) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": missing target class");
    }
    PixelClass cls;
    if (target == "object") {
      cls = PixelClass::kObject;
    } else if (target == "person") {
      cls = PixelClass::kPerson;
    } else if (target == "background") {
      cls = PixelClass::kBackground;
    } else {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": unknown target '" + target + "'");
    }
    if (!table.target.emplace(id, cls).second) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": duplicate class id");
    }
  }
  return table;
}

ConfidenceMap remapConfidence(const std::vector<ImageF>& planes, const RemapTable& table) {
  if (planes.empty()) throw DimensionMismatchError("no confidence planes to remap");
  const int w = planes[0].width(), h = planes[0].height();
  ConfidenceMap map;
  for (int c = 0; c < kClassCount; ++c) map.maps[c] = ImageF(w, h, 0.0f);
  for (std::size_t id = 0; id < planes.size(); ++id) {
    if (!planes[id].sameSize(w, h)) throw DimensionMismatchError("remap planes differ in size");
    const auto it = table.target.find(static_cast<int>(id));
    const int c = static_cast<int>(it == table.target.end() ? PixelClass::kBackground : it->second);
    for (std::size_t i = 0; i < planes[id].data().size(); ++i) {
      map.maps[c].data()[i] += planes[id].data()[i];
    }
  }
  return map;
}

SilhouetteForm silhouetteFormFromString(const std::string& name) {
  if (name == "nll") return SilhouetteForm::kNll;
  if (name == "dot") return SilhouetteForm::kDot;
  if (name == "l2") return SilhouetteForm::kL2;
  throw ParseError("unknown silhouette_form '" + name + "' (expected nll, dot or l2)");
}

double silhouetteEnergy(const ConfidenceMap& map, const LabelImage& rendered, SilhouetteForm form,
                        double clamp) {
  if (map.width() != rendered.width || map.height() != rendered.height) {
    throw DimensionMismatchError("confidence map and rendering differ in size");
  }
  double energy = 0;
  for (int y = 0; y < rendered.height; ++y) {
    for (int x = 0; x < rendered.width; ++x) {
      const PixelClass cls = rendered.at(x, y);
      const double s = map.at(cls, x, y);
      switch (form) {
        case SilhouetteForm::kNll:
          energy -= std::log(std::max(s, clamp));
          break;
        case SilhouetteForm::kDot:
          energy -= s;
          break;
        case SilhouetteForm::kL2:
          for (int c = 0; c < kClassCount; ++c) {
            const double target = c == static_cast<int>(cls) ? 1.0 : 0.0;
            const double d = map.maps[c].at(x, y) - target;
            energy += d * d;
          }
          break;
      }
    }
  }
  return energy;
}

double silhouetteEnergy(const ConfidenceMaps& maps, const std::vector<LabelImage>& rendered,
                        SilhouetteForm form, double clamp) {
  if (maps.size() != rendered.size()) {
    throw DimensionMismatchError("camera count mismatch between confidences and renderings");
  }
  double energy = 0;
  for (std::size_t v = 0; v < maps.size(); ++v) {
    energy += silhouetteEnergy(maps[v], rendered[v], form, clamp);
  }
  return energy;
}

double repulsionEnergy(const SphereSet& hand, const SphereSet& object, double allowanceMm,
                       std::vector<Vec3>* gradHand, std::vector<Vec3>* gradObject) {
  if (gradHand) gradHand->assign(hand.spheres.size(), Vec3::Zero());
  if (gradObject) gradObject->assign(object.spheres.size(), Vec3::Zero());
  double energy = 0;
  for (std::size_t i = 0; i < hand.spheres.size(); ++i) {
    const Sphere& a = hand.spheres[i];
    for (std::size_t j = 0; j < object.spheres.size(); ++j) {
      const Sphere& b = object.spheres[j];
      const Vec3 delta = a.center - b.center;
      const double d = delta.norm();
      const double overlap = a.radius + b.radius - d - allowanceMm;
      if (overlap <= 0) continue;
      energy += overlap;
      if (d > 1e-12 && (gradHand || gradObject)) {
        const Vec3 dir = delta / d;
        if (gradHand) (*gradHand)[i] -= dir;
        if (gradObject) (*gradObject)[j] += dir;
      }
    }
  }
  return energy;
}

Vec3 keypointWorld(const HandModel& model, const HandKinematics& kin, int index) {
  if (index < 0 || index >= kKeypointCount) {
    throw BadIndexError("keypoint index " + std::to_string(index) + " out of range");
  }
  if (index < kJointCount) return kin.jointOrigin(index);
  const HandModel::Tip& tip = model.tips[index - kJointCount];
  return kin.pointWorld(tip.joint, tip.offset);
}

double keypointEnergy(const HandModel& model, const HandKinematics& kin,
                      const std::map<int, Vec3>& targets, std::vector<Vec3>* gradPoints) {
  if (gradPoints) gradPoints->assign(kKeypointCount, Vec3::Zero());
  double energy = 0;
  for (const auto& [k, target] : targets) {
    const Vec3 residual = keypointWorld(model, kin, k) - target;
    energy += residual.squaredNorm();
    if (gradPoints) (*gradPoints)[k] += 2.0 * residual;
  }
  return energy;
}

void packState(const HandPose& hand, const ObjectPose& object, ParamVector& out) {
  out.segment<3>(0) = hand.globalRotation;
  out.segment<3>(3) = hand.globalTranslation;
  out.segment<kJointAngleCount>(6) = hand.jointAngles;
  out.segment<3>(51) = object.rotation;
  out.segment<3>(54) = object.translation;
}

void unpackState(const ParamVector& in, HandPose& hand, ObjectPose& object) {
  hand.globalRotation = in.segment<3>(0);
  hand.globalTranslation = in.segment<3>(3);
  hand.jointAngles = in.segment<kJointAngleCount>(6);
  object.rotation = in.segment<3>(51);
  object.translation = in.segment<3>(54);
}

namespace {

double silhouetteValue(const EnergyContext& ctx, const HandKinematics& kin,
                       const RigidTransform& objectTransform) {
  const TriMesh posedHand = skinMesh(*ctx.model, kin.restToPosedAll());
  TriMesh posedObject;
  const TriMesh* objectPtr = nullptr;
  if (ctx.objectMesh) {
    posedObject = ctx.objectMesh->transformed(objectTransform);
    objectPtr = &posedObject;
  }
  double energy = 0;
  for (std::size_t v = 0; v < ctx.cameras.size(); ++v) {
    const LabelImage rendered = rasterize(&posedHand, objectPtr, ctx.cameras[v]);
    energy += silhouetteEnergy(ctx.confidences[v], rendered, ctx.config.silhouetteForm,
                               ctx.config.confidenceClamp);
  }
  return energy;
}

double silhouetteAt(const EnergyContext& ctx, const ParamVector& params) {
  HandPose hand;
  ObjectPose object;
  unpackState(params, hand, object);
  const HandKinematics kin(*ctx.model, hand);
  return silhouetteValue(ctx, kin, object.transform());
}

}  // namespace

EnergyReport totalEnergy(const EnergyContext& ctx, const ParamVector& params) {
  const EnergyTermConfig& cfg = ctx.config;
  EnergyReport report;

  HandPose hand;
  ObjectPose object;
  unpackState(params, hand, object);
  const HandKinematics kin(*ctx.model, hand);
  const RigidTransform objectTransform = object.transform();

  Eigen::Matrix<double, 3, HandKinematics::kHandParams> jac;

  if (cfg.enableLimits) {
    Eigen::Matrix<double, kJointAngleCount, 1> grad;
    report.limit = limitPenalty(*ctx.model, hand, grad);
    report.gradient.segment<kJointAngleCount>(6) += cfg.weights.limit * grad;
  }

  if (cfg.enableKeypoints && !ctx.keypointTargets.empty()) {
    std::vector<Vec3> gradPoints;
    report.keypoint = keypointEnergy(*ctx.model, kin, ctx.keypointTargets, &gradPoints);
    for (const auto& [k, target] : ctx.keypointTargets) {
      (void)target;
      const int joint = k < kJointCount ? k : ctx.model->tips[k - kJointCount].joint;
      kin.pointJacobian(joint, keypointWorld(*ctx.model, kin, k), jac);
      report.gradient.segment<HandKinematics::kHandParams>(0) +=
          cfg.weights.keypoint * (jac.transpose() * gradPoints[k]);
    }
  }

  if (cfg.enableRepulsion && !ctx.handSpheres.spheres.empty() &&
      !ctx.objectSpheres.spheres.empty()) {
    const SphereSet handWorld = poseSpheres(ctx.handSpheres, kin.restToPosedAll());
    const SphereSet objectWorld = poseSpheres(ctx.objectSpheres, objectTransform);
    std::vector<Vec3> gradHand, gradObject;
    report.repulsion =
        repulsionEnergy(handWorld, objectWorld, cfg.allowanceMm, &gradHand, &gradObject);

    for (std::size_t i = 0; i < handWorld.spheres.size(); ++i) {
      if (gradHand[i].isZero()) continue;
      kin.pointJacobian(ctx.handSpheres.spheres[i].joint, handWorld.spheres[i].center, jac);
      report.gradient.segment<HandKinematics::kHandParams>(0) +=
          cfg.weights.repulsion * (jac.transpose() * gradHand[i]);
    }
    std::array<Mat3, 3> objRotDeriv;
    for (int i = 0; i < 3; ++i) objRotDeriv[i] = rotationDerivative(object.rotation, i);
    for (std::size_t j = 0; j < objectWorld.spheres.size(); ++j) {
      if (gradObject[j].isZero()) continue;
      const Vec3& local = ctx.objectSpheres.spheres[j].center;
      for (int i = 0; i < 3; ++i) {
        report.gradient[51 + i] += cfg.weights.repulsion * (objRotDeriv[i] * local).dot(gradObject[j]);
      }
      report.gradient.segment<3>(54) += cfg.weights.repulsion * gradObject[j];
    }
  }

  if (cfg.enableSilhouette && !ctx.cameras.empty()) {
    report.silhouette = silhouetteValue(ctx, kin, objectTransform);
    if (cfg.silhouetteFiniteDiff) {
      ParamVector probe = params;
      for (int i = 0; i < kParamCount; ++i) {
        const double h = cfg.silhouetteFdStep;
        probe[i] = params[i] + h;
        const double plus = silhouetteAt(ctx, probe);
        probe[i] = params[i] - h;
        const double minus = silhouetteAt(ctx, probe);
        probe[i] = params[i];
        report.gradient[i] += cfg.weights.silhouette * (plus - minus) / (2 * h);
      }
    }
  }

  report.total = cfg.weights.silhouette * report.silhouette +
                 cfg.weights.repulsion * report.repulsion + cfg.weights.limit * report.limit +
                 cfg.weights.keypoint * report.keypoint;
  return report;
}

double totalEnergyValue(const EnergyContext& ctx, const ParamVector& params) {
  const EnergyTermConfig& cfg = ctx.config;
  HandPose hand;
  ObjectPose object;
  unpackState(params, hand, object);
  const HandKinematics kin(*ctx.model, hand);
  const RigidTransform objectTransform = object.transform();

  // Terms and the final sum mirror totalEnergy exactly so line-search values
  // and report totals agree to the last bit.
  double silhouette = 0, repulsion = 0, limit = 0, keypoint = 0;
  if (cfg.enableLimits) limit = limitPenalty(*ctx.model, hand);
  if (cfg.enableKeypoints && !ctx.keypointTargets.empty()) {
    keypoint = keypointEnergy(*ctx.model, kin, ctx.keypointTargets);
  }
  if (cfg.enableRepulsion && !ctx.handSpheres.spheres.empty() &&
      !ctx.objectSpheres.spheres.empty()) {
    repulsion = repulsionEnergy(poseSpheres(ctx.handSpheres, kin.restToPosedAll()),
                                poseSpheres(ctx.objectSpheres, objectTransform), cfg.allowanceMm);
  }
  if (cfg.enableSilhouette && !ctx.cameras.empty()) {
    silhouette = silhouetteValue(ctx, kin, objectTransform);
  }
  return cfg.weights.silhouette * silhouette + cfg.weights.repulsion * repulsion +
         cfg.weights.limit * limit + cfg.weights.keypoint * keypoint;
}

}  // namespace graspfit
