#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "graspfit/energy.hpp"
#include "graspfit/types.hpp"

namespace graspfit {

struct OptimizerConfig {
  int maxIterations = 400;
  double initialStep = 0.05;
  double stepDecay = 0.5;      // backtracking factor
  double armijoC = 1e-4;
  double tolerance = 1e-6;     // relative energy change
  int toleranceWindow = 5;     // consecutive accepted steps below tolerance
  // Per-block step scales; the descent direction is the negative gradient
  // with each block multiplied by its scale. Defaults equilibrate the blocks
  // of the keypoint term, whose curvature in mm-scale scenes is roughly 2N
  // per translation axis but 2*sum(lever^2) for rotations and angles.
  double rotationScale = 2e-4;    // rad (hand and object rotation blocks)
  double translationScale = 1.0;  // mm
  double angleScale = 5e-3;       // rad
  std::array<bool, kParamCount> frozen{};  // frozen entries never change

  void validate() const;  // throws Error on non-positive fields
};

struct TraceRecord {
  int iteration = 0;
  double silhouette = 0, repulsion = 0, limit = 0, keypoint = 0;
  double total = 0;
  double step = 0;      // accepted step length (0 for the initial record)
  double gradInf = 0;   // max |gradient| over free parameters
};

using Trace = std::vector<TraceRecord>;
void saveTrace(const Trace& trace, const std::string& path);
Trace loadTrace(const std::string& path);

enum class OptimizeStatus { kConverged, kMaxIterations, kNonFinite };
const char* toString(OptimizeStatus status);
OptimizeStatus statusFromString(const std::string& name);  // throws ParseError

// Per-frame refinement outcome, one row of the refine summary file.
struct FrameSummary {
  int frame = 0;
  OptimizeStatus status = OptimizeStatus::kConverged;
  int iterations = 0;
  double finalTotal = 0;
};
void saveRefineSummary(const std::vector<FrameSummary>& rows, const std::string& path);
std::vector<FrameSummary> loadRefineSummary(const std::string& path);

struct OptimizeResult {
  ParamVector state = ParamVector::Zero();
  Trace trace;
  OptimizeStatus status = OptimizeStatus::kConverged;
  int iterations = 0;
};

// Pose file: one frame per line, the frame id followed by the 57 packed
// parameters, whitespace separated.
void savePoses(const std::map<int, ParamVector>& poses, const std::string& path);
std::map<int, ParamVector> loadPoses(const std::string& path);

// Gradient descent with Armijo backtracking over the packed 57 parameters.
// The two axis-angle rotation blocks step multiplicatively (the increment
// rotation composes with the current one) so steps behave near the +-pi
// boundary. Accepted energies are monotone non-increasing; the silhouette
// term participates through the line-search energy even without a gradient.
OptimizeResult minimizeEnergy(const EnergyContext& ctx, const ParamVector& start,
                              const OptimizerConfig& config);

}  // namespace graspfit
