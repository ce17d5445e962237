#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "graspfit/config.hpp"
#include "graspfit/contact.hpp"
#include "graspfit/energy.hpp"
#include "graspfit/errors.hpp"
#include "graspfit/mesh_io.hpp"
#include "graspfit/optimize.hpp"
#include "graspfit/render.hpp"
#include "graspfit/spherize.hpp"
#include "graspfit/synth.hpp"

namespace fs = std::filesystem;
using namespace graspfit;

namespace {

constexpr double kHandVoxelMm = 2.0;
constexpr int kSpheresPerBone = 4;
constexpr double kObjectVoxelMm = 4.0;

std::string frameTag(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", frame);
  return buf;
}

// ---------------------------------------------------------------------------
// weights / optimizer config
// ---------------------------------------------------------------------------

void loadEnergyConfig(const Config& cfg, EnergyTermConfig& terms, OptimizerConfig& opt) {
  const char* weightKeys[] = {"w_keypoint", "w_repulsion", "w_limit", "w_silhouette"};
  double* weightSlots[] = {&terms.weights.keypoint, &terms.weights.repulsion,
                           &terms.weights.limit, &terms.weights.silhouette};
  for (int i = 0; i < 4; ++i) {
    *weightSlots[i] = cfg.getDouble(weightKeys[i], *weightSlots[i]);
    if (*weightSlots[i] < 0) {
      throw ParseError(cfg.name() + ": field '" + weightKeys[i] + "' must be nonnegative");
    }
  }
  terms.silhouetteForm =
      silhouetteFormFromString(cfg.getString("silhouette_form", "nll"));
  terms.allowanceMm = cfg.getDouble("allowance_mm", terms.allowanceMm);
  if (terms.allowanceMm < 0) {
    throw ParseError(cfg.name() + ": field 'allowance_mm' must be nonnegative");
  }
  terms.confidenceClamp = cfg.getDouble("p_min", terms.confidenceClamp);
  terms.enableSilhouette = cfg.getBool("enable_silhouette", terms.enableSilhouette);
  terms.enableRepulsion = cfg.getBool("enable_repulsion", terms.enableRepulsion);
  terms.enableLimits = cfg.getBool("enable_limits", terms.enableLimits);
  terms.enableKeypoints = cfg.getBool("enable_keypoints", terms.enableKeypoints);
  terms.silhouetteFiniteDiff = cfg.getBool("silhouette_fd", terms.silhouetteFiniteDiff);
  terms.silhouetteFdStep = cfg.getDouble("silhouette_fd_step", terms.silhouetteFdStep);

  opt.maxIterations = cfg.getInt("max_iterations", opt.maxIterations);
  opt.initialStep = cfg.getDouble("initial_step", opt.initialStep);
  opt.stepDecay = cfg.getDouble("step_decay", opt.stepDecay);
  opt.tolerance = cfg.getDouble("tolerance", opt.tolerance);
  opt.toleranceWindow = cfg.getInt("tolerance_window", opt.toleranceWindow);
  opt.rotationScale = cfg.getDouble("rotation_scale", opt.rotationScale);
  opt.translationScale = cfg.getDouble("translation_scale", opt.translationScale);
  opt.angleScale = cfg.getDouble("angle_scale", opt.angleScale);
  opt.validate();
}

// ---------------------------------------------------------------------------
// spherize
// ---------------------------------------------------------------------------

int runSpherize(const std::string& meshPath, const std::string& handPath, double voxel,
                double coverage, int maxSpheres, int perBone, const std::string& outPath) {
  SphereSet set;
  double reportedCoverage = 0;
  if (!handPath.empty()) {
    const HandModel model = loadHandModel(handPath);
    set = spherizeHand(model, voxel, perBone);
    reportedCoverage = sampleCoverage(model.restMesh, set, 4000, true);
  } else {
    const TriMesh mesh = loadMesh(meshPath);
    PackOptions options;
    options.coverageTarget = coverage;
    options.maxSpheres = maxSpheres;
    set = spherizeMesh(mesh, voxel, options);
    reportedCoverage = sampleCoverage(mesh, set);
  }
  saveSphereSet(set, outPath);
  double maxRadius = 0;
  for (const auto& s : set.spheres) maxRadius = std::max(maxRadius, s.radius);
  std::printf("spheres %d coverage %.4f max_radius %.3f\n", set.count(), reportedCoverage,
              maxRadius);
  return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SceneAssets {
  SyntheticScene scene;
  HandModel model;
  TriMesh objectMesh;
  SphereSet handSpheres;
  SphereSet objectSpheres;
};

SceneAssets loadSceneAssets(const std::string& scenePath, const std::string& handPath,
                            std::uint64_t seedOverride, bool haveSeedOverride) {
  SceneAssets assets;
  assets.scene = sceneFromConfig(Config::load(scenePath));
  if (haveSeedOverride) assets.scene.seed = seedOverride;
  assets.model = handPath.empty() ? makeDefaultHandModel() : loadHandModel(handPath);
  assets.objectMesh = makeSceneObject(assets.scene.object);
  assets.handSpheres = spherizeHand(assets.model, kHandVoxelMm, kSpheresPerBone);
  assets.objectSpheres = spherizeMesh(assets.objectMesh, kObjectVoxelMm, PackOptions{});
  return assets;
}

int runSynth(const std::string& scenePath, const std::string& handPath, const std::string& outDir,
             std::uint64_t seedOverride, bool haveSeedOverride) {
  const SceneAssets assets =
      loadSceneAssets(scenePath, handPath, seedOverride, haveSeedOverride);
  fs::create_directories(outDir);

  KeypointsByFrame keypoints;
  std::map<int, ParamVector> gt, init;
  FingertipAnnotations annotations;
  std::vector<Camera> cameras;
  for (int frame = 0; frame < assets.scene.frames; ++frame) {
    const FrameData data =
        generateFrame(assets.scene, assets.model, assets.handSpheres, assets.objectMesh, frame);
    cameras = data.cameras;
    keypoints[frame] = data.keypointTargets;
    gt[frame] = data.groundTruth;
    init[frame] = data.init;
    for (std::size_t cam = 0; cam < data.confidences.size(); ++cam) {
      const std::string path =
          (fs::path(outDir) / ("conf_f" + frameTag(frame) + "_c" + std::to_string(cam) + ".raw"))
              .string();
      saveConfidenceRaw(data.confidences[cam], path);
    }
    HandPose hand;
    ObjectPose object;
    unpackState(data.groundTruth, hand, object);
    annotations[frame] = HandKinematics(assets.model, hand).fingertips(assets.model);
  }
  saveCameras(cameras, (fs::path(outDir) / "cameras.txt").string());
  saveKeypoints(keypoints, (fs::path(outDir) / "keypoints.csv").string());
  savePoses(gt, (fs::path(outDir) / "gt.txt").string());
  savePoses(init, (fs::path(outDir) / "init.txt").string());
  saveAnnotations(annotations, (fs::path(outDir) / "annotations.csv").string());
  fs::copy_file(scenePath, fs::path(outDir) / "scene.cfg", fs::copy_options::overwrite_existing);
  std::printf("frames %d cameras %zu\n", assets.scene.frames, cameras.size());
  return 0;
}

// ---------------------------------------------------------------------------
// refine
// ---------------------------------------------------------------------------

struct FrameInput {
  int frame = 0;
  ConfidenceMaps confidences;
  std::map<int, Vec3> keypointTargets;
  ParamVector init = ParamVector::Zero();
};

struct RefineInputs {
  SceneAssets assets;
  std::vector<Camera> cameras;
  std::vector<FrameInput> frames;
};

RefineInputs loadRefineScene(const std::string& scenePath, const std::string& handPath,
                             std::uint64_t seedOverride, bool haveSeedOverride) {
  RefineInputs inputs;
  inputs.assets = loadSceneAssets(scenePath, handPath, seedOverride, haveSeedOverride);
  for (int frame = 0; frame < inputs.assets.scene.frames; ++frame) {
    const FrameData data = generateFrame(inputs.assets.scene, inputs.assets.model,
                                         inputs.assets.handSpheres, inputs.assets.objectMesh,
                                         frame);
    inputs.cameras = data.cameras;
    FrameInput f;
    f.frame = frame;
    f.confidences = data.confidences;
    f.keypointTargets = data.keypointTargets;
    f.init = data.init;
    inputs.frames.push_back(std::move(f));
  }
  return inputs;
}

RefineInputs loadRefineFrames(const std::string& dir, const std::string& handPath,
                              const std::string& objectSpec) {
  RefineInputs inputs;
  const fs::path base(dir);
  const std::string scenePath = (base / "scene.cfg").string();
  if (!fs::exists(scenePath)) {
    throw ParseError(dir + ": missing scene.cfg (produced by the synth command)");
  }
  inputs.assets.scene = sceneFromConfig(Config::load(scenePath));
  inputs.assets.model = handPath.empty() ? makeDefaultHandModel() : loadHandModel(handPath);
  const std::string spec = objectSpec.empty() ? inputs.assets.scene.object : objectSpec;
  inputs.assets.objectMesh = makeSceneObject(spec);
  inputs.assets.handSpheres = spherizeHand(inputs.assets.model, kHandVoxelMm, kSpheresPerBone);
  inputs.assets.objectSpheres =
      spherizeMesh(inputs.assets.objectMesh, kObjectVoxelMm, PackOptions{});

  inputs.cameras = loadCameras((base / "cameras.txt").string());
  const auto init = loadPoses((base / "init.txt").string());
  const auto keypoints = loadKeypoints((base / "keypoints.csv").string());
  for (const auto& [frame, state] : init) {
    FrameInput f;
    f.frame = frame;
    f.init = state;
    const auto kp = keypoints.find(frame);
    if (kp != keypoints.end()) f.keypointTargets = kp->second;
    for (std::size_t cam = 0; cam < inputs.cameras.size(); ++cam) {
      const std::string path =
          (base / ("conf_f" + frameTag(frame) + "_c" + std::to_string(cam) + ".raw")).string();
      f.confidences.push_back(loadConfidenceRaw(path));
    }
    inputs.frames.push_back(std::move(f));
  }
  return inputs;
}

int runRefine(const RefineInputs& inputs, const std::string& weightsPath,
              const std::string& outDir, bool freeObject, int jobs) {
  EnergyTermConfig terms;
  OptimizerConfig opt;
  if (!weightsPath.empty()) loadEnergyConfig(Config::load(weightsPath), terms, opt);
  if (!freeObject) {
    for (int i = 51; i < kParamCount; ++i) opt.frozen[i] = true;
  }

  fs::create_directories(outDir);
  std::vector<OptimizeResult> results(inputs.frames.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < inputs.frames.size(); i = next.fetch_add(1)) {
      const FrameInput& f = inputs.frames[i];
      EnergyContext ctx;
      ctx.model = &inputs.assets.model;
      ctx.handSpheres = inputs.assets.handSpheres;
      ctx.objectSpheres = inputs.assets.objectSpheres;
      ctx.objectMesh = &inputs.assets.objectMesh;
      ctx.cameras = inputs.cameras;
      ctx.confidences = f.confidences;
      ctx.keypointTargets = f.keypointTargets;
      ctx.config = terms;
      results[i] = minimizeEnergy(ctx, f.init, opt);
    }
  };
  const int threadCount = std::max(
      1, jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency()));
  if (threadCount == 1 || inputs.frames.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threadCount; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::map<int, ParamVector> poses;
  bool allConverged = true;
  std::vector<FrameSummary> summary;
  for (std::size_t i = 0; i < inputs.frames.size(); ++i) {
    const int frame = inputs.frames[i].frame;
    const OptimizeResult& r = results[i];
    poses[frame] = r.state;
    saveTrace(r.trace, (fs::path(outDir) / ("trace_" + frameTag(frame) + ".csv")).string());
    summary.push_back({frame, r.status, r.iterations, r.trace.back().total});
    if (r.status != OptimizeStatus::kConverged) allConverged = false;
  }
  saveRefineSummary(summary, (fs::path(outDir) / "summary.csv").string());
  savePoses(poses, (fs::path(outDir) / "poses.txt").string());
  std::printf("frames %zu converged %s\n", inputs.frames.size(), allConverged ? "all" : "some");
  return allConverged ? 0 : 3;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int runEvaluate(const std::string& posesPath, const std::string& handPath,
                const std::string& objectSpec, const std::string& annotationsPath,
                double threshold, const std::string& outDir) {
  const auto poses = loadPoses(posesPath);
  const HandModel model = handPath.empty() ? makeDefaultHandModel() : loadHandModel(handPath);
  const TriMesh objectMesh = makeSceneObject(objectSpec);
  requireWatertight(objectMesh, "evaluate object");
  const MeshBVH objectBvh(objectMesh);

  fs::create_directories(outDir);
  std::vector<int> frameIds;
  std::vector<ContactMap> maps;
  std::map<int, HandPose> handPoses;
  for (const auto& [frame, state] : poses) {
    HandPose hand;
    ObjectPose object;
    unpackState(state, hand, object);
    handPoses[frame] = hand;
    const TriMesh posedHand = skinMesh(model, restToPosed(model, forwardKinematics(model, hand)));
    // Distances are rigid-invariant: evaluating the hand in the object's rest
    // frame reuses one BVH for every frame.
    const TriMesh handInObjectFrame = posedHand.transformed(object.transform().inverse());
    frameIds.push_back(frame);
    maps.push_back(contactMap(handInObjectFrame, objectBvh, threshold));
  }
  if (maps.empty()) throw ParseError(posesPath + ": no frames to evaluate");

  savePerFrameCsv(frameIds, maps, (fs::path(outDir) / "per_frame.csv").string());
  const ContactMap agg = aggregate(maps);
  saveAggregateCsv(agg, (fs::path(outDir) / "aggregate.csv").string());
  exportContactVisual(agg, model.restMesh, (fs::path(outDir) / "contact.ply").string());
  std::printf("frames %zu contact_fraction %.4f penetration %.3f +- %.3f mm\n", maps.size(),
              agg.contactFraction(), agg.penetrationMean, agg.penetrationStd);

  if (!annotationsPath.empty()) {
    const FingertipAnnotations annotations = loadAnnotations(annotationsPath);
    const FingertipEval eval = fingertipAccuracy(model, handPoses, annotations);
    saveFingertipCsv(eval, (fs::path(outDir) / "fingertips.csv").string());
    std::printf("fingertips %.2f, %.2f\n", eval.meanMm, eval.stdMm);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

int runCompare(const std::string& dirA, const std::string& dirB, const std::string& outDir) {
  const ContactMap a = loadAggregateCsv((fs::path(dirA) / "aggregate.csv").string());
  const ContactMap b = loadAggregateCsv((fs::path(dirB) / "aggregate.csv").string());
  if (a.fraction.size() != b.fraction.size()) {
    throw MixedTopologyError("evaluations disagree on hand vertex count");
  }
  fs::create_directories(outDir);
  const std::vector<CompareRow> rows = {
      {"contact_fraction", a.contactFraction(), b.contactFraction(),
       b.contactFraction() - a.contactFraction()},
      {"penetration_mean", a.penetrationMean, b.penetrationMean,
       b.penetrationMean - a.penetrationMean},
      {"penetration_std", a.penetrationStd, b.penetrationStd,
       b.penetrationStd - a.penetrationStd}};
  saveCompareReport(rows, (fs::path(outDir) / "report.csv").string());
  for (const auto& [dir, name] : {std::pair{dirA, "contact_a.ply"}, {dirB, "contact_b.ply"}}) {
    const fs::path src = fs::path(dir) / "contact.ply";
    if (fs::exists(src)) {
      fs::copy_file(src, fs::path(outDir) / name, fs::copy_options::overwrite_existing);
    }
  }
  std::printf("contact_fraction_delta %.6f penetration_mean_delta %.6f\n",
              b.contactFraction() - a.contactFraction(), b.penetrationMean - a.penetrationMean);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hand-object grasp refinement and audit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  bool haveSeed = false;
  app.add_option("--seed", seed, "override the scene seed")->each([&](const std::string&) {
    haveSeed = true;
  });
  int jobs = 0;
  app.add_option("--jobs", jobs, "frame-level parallelism (default: all cores)");

  auto* sphCmd = app.add_subcommand("spherize", "pack a mesh interior with spheres");
  std::string sphMesh, sphHand, sphOut;
  double sphVoxel = 4.0, sphCoverage = 0.93;
  int sphMax = 128, sphPerBone = kSpheresPerBone;
  sphCmd->add_option("mesh", sphMesh, "OBJ or PLY mesh");
  sphCmd->add_option("--hand", sphHand, "hand model file (per-bone spherization)");
  sphCmd->add_option("--voxel", sphVoxel, "voxel size, mm");
  sphCmd->add_option("--coverage", sphCoverage, "interior coverage target");
  sphCmd->add_option("--max-spheres", sphMax, "sphere budget");
  sphCmd->add_option("--per-bone", sphPerBone, "spheres per bone (hand mode)");
  sphCmd->add_option("-o,--output", sphOut, "output sphere-set file")->required();

  auto* synthCmd = app.add_subcommand("synth", "generate a synthetic grasp dataset");
  std::string synScene, synHand, synOut;
  synthCmd->add_option("--scene", synScene, "scene config")->required();
  synthCmd->add_option("--hand", synHand, "hand model file (default: built-in)");
  synthCmd->add_option("-o,--output", synOut, "output directory")->required();

  auto* refineCmd = app.add_subcommand("refine", "refine grasp poses");
  std::string refScene, refFrames, refHand, refObject, refWeights, refOut;
  bool refFreeObject = false;
  refineCmd->add_option("--scene", refScene, "scene config (frames generated in memory)");
  refineCmd->add_option("--frames", refFrames, "frame directory written by synth");
  refineCmd->add_option("--hand", refHand, "hand model file (default: built-in)");
  refineCmd->add_option("--object", refObject, "object mesh or sphere:R/cylinder:R,H spec");
  refineCmd->add_option("--weights", refWeights, "weights + optimizer config");
  refineCmd->add_flag("--free-object", refFreeObject, "also optimize the object pose");
  refineCmd->add_option("-o,--output", refOut, "output directory")->required();

  auto* evalCmd = app.add_subcommand("evaluate", "contact maps and fingertip accuracy");
  std::string evalPoses, evalHand, evalObject, evalAnnotations, evalOut;
  double evalThreshold = kContactThresholdMm;
  evalCmd->add_option("--poses", evalPoses, "pose file")->required();
  evalCmd->add_option("--hand", evalHand, "hand model file (default: built-in)");
  evalCmd->add_option("--object", evalObject, "object mesh or spec")->required();
  evalCmd->add_option("--annotations", evalAnnotations, "fingertip annotation csv");
  evalCmd->add_option("--threshold", evalThreshold, "contact threshold, mm");
  evalCmd->add_option("-o,--output", evalOut, "output directory")->required();

  auto* cmpCmd = app.add_subcommand("compare", "compare two evaluation outputs");
  std::string cmpA, cmpB, cmpOut;
  cmpCmd->add_option("evalA", cmpA, "first evaluation directory")->required();
  cmpCmd->add_option("evalB", cmpB, "second evaluation directory")->required();
  cmpCmd->add_option("-o,--output", cmpOut, "output directory")->required();

  try {
    app.parse(argc, argv);

    if (sphCmd->parsed()) {
      if (sphMesh.empty() == sphHand.empty()) {
        throw ParseError("spherize needs either a mesh argument or --hand, not both");
      }
      return runSpherize(sphMesh, sphHand, sphVoxel, sphCoverage, sphMax, sphPerBone, sphOut);
    }
    if (synthCmd->parsed()) {
      return runSynth(synScene, synHand, synOut, seed, haveSeed);
    }
    if (refineCmd->parsed()) {
      if (refScene.empty() == refFrames.empty()) {
        throw ParseError("refine needs exactly one of --scene or --frames");
      }
      const RefineInputs inputs =
          refScene.empty() ? loadRefineFrames(refFrames, refHand, refObject)
                           : loadRefineScene(refScene, refHand, seed, haveSeed);
      return runRefine(inputs, refWeights, refOut, refFreeObject, jobs);
    }
    if (evalCmd->parsed()) {
      return runEvaluate(evalPoses, evalHand, evalObject, evalAnnotations, evalThreshold, evalOut);
    }
    if (cmpCmd->parsed()) {
      return runCompare(cmpA, cmpB, cmpOut);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const NonWatertightError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& [a, b] : e.bad_edges) {
      std::cerr << "  open edge " << a << " - " << b << "\n";
    }
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
