#include "graspfit/optimize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "graspfit/errors.hpp"

namespace graspfit {

void OptimizerConfig::validate() const {
  if (maxIterations <= 0) throw Error("maxIterations must be positive");
  if (!(initialStep > 0)) throw Error("initialStep must be positive");
  if (!(stepDecay > 0) || stepDecay >= 1) throw Error("stepDecay must be in (0, 1)");
  if (!(armijoC > 0)) throw Error("armijoC must be positive");
  if (!(tolerance > 0)) throw Error("tolerance must be positive");
  if (toleranceWindow <= 0) throw Error("toleranceWindow must be positive");
  if (!(rotationScale > 0) || !(translationScale > 0) || !(angleScale > 0)) {
    throw Error("step scales must be positive");
  }
}

const char* toString(OptimizeStatus status) {
  switch (status) {
    case OptimizeStatus::kConverged: return "converged";
    case OptimizeStatus::kMaxIterations: return "max_iterations";
    case OptimizeStatus::kNonFinite: return "non_finite";
  }
  return "unknown";
}

void saveTrace(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace: " + path);
  out << "iteration,silhouette,repulsion,limit,keypoint,total,step,grad_inf\n";
  char buf[512];
  for (const TraceRecord& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                  r.silhouette, r.repulsion, r.limit, r.keypoint, r.total, r.step, r.gradInf);
    out << buf;
  }
}

Trace loadTrace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "iteration,silhouette,repulsion,limit,keypoint,total,step,grad_inf") {
    throw ParseError(path + ": bad trace header");
  }
  Trace trace;
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream row(line);
    TraceRecord r;
    if (!(row >> r.iteration >> r.silhouette >> r.repulsion >> r.limit >> r.keypoint >> r.total >>
          r.step >> r.gradInf)) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": bad trace row");
    }
    trace.push_back(r);
  }
  return trace;
}

OptimizeStatus statusFromString(const std::string& name) {
  if (name == "converged") return OptimizeStatus::kConverged;
  if (name == "max_iterations") return OptimizeStatus::kMaxIterations;
  if (name == "non_finite") return OptimizeStatus::kNonFinite;
  throw ParseError("unknown optimizer status: " + name);
}

void saveRefineSummary(const std::vector<FrameSummary>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write summary: " + path);
  out << "frame,status,iterations,final_total\n";
  char buf[128];
  for (const FrameSummary& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%d,%.17g\n", r.frame, toString(r.status), r.iterations,
                  r.finalTotal);
    out << buf;
  }
}

std::vector<FrameSummary> loadRefineSummary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open summary: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "frame,status,iterations,final_total") {
    throw ParseError(path + ": bad summary header");
  }
  std::vector<FrameSummary> rows;
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream row(line);
    FrameSummary r;
    std::string status;
    if (!(row >> r.frame >> status >> r.iterations >> r.finalTotal)) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": bad summary row");
    }
    r.status = statusFromString(status);
    rows.push_back(r);
  }
  return rows;
}

void savePoses(const std::map<int, ParamVector>& poses, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write poses: " + path);
  char buf[64];
  for (const auto& [frame, state] : poses) {
    out << frame;
    for (int i = 0; i < kParamCount; ++i) {
      std::snprintf(buf, sizeof(buf), " %.17g", state[i]);
      out << buf;
    }
    out << '\n';
  }
}

std::map<int, ParamVector> loadPoses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open poses: " + path);
  std::map<int, ParamVector> poses;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    int frame;
    if (!(row >> frame)) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": expected frame id");
    }
    ParamVector state;
    for (int i = 0; i < kParamCount; ++i) {
      if (!(row >> state[i])) {
        throw ParseError(path + ":" + std::to_string(lineNo) + ": expected 57 values, got " +
                         std::to_string(i));
      }
    }
    if (!poses.emplace(frame, state).second) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": duplicate frame id");
    }
  }
  return poses;
}

namespace {

constexpr double kMinStep = 1e-12;

// A rotation block moves as a whole; freezing any of its three components
// freezes the block (component-wise freezes are not meaningful for the
// multiplicative update).
bool blockFrozen(const std::array<bool, kParamCount>& frozen, int offset) {
  return frozen[offset] || frozen[offset + 1] || frozen[offset + 2];
}

ParamVector stepScales(const OptimizerConfig& cfg) {
  ParamVector s;
  s.segment<3>(0).setConstant(cfg.rotationScale);
  s.segment<3>(3).setConstant(cfg.translationScale);
  s.segment<kJointAngleCount>(6).setConstant(cfg.angleScale);
  s.segment<3>(51).setConstant(cfg.rotationScale);
  s.segment<3>(54).setConstant(cfg.translationScale);
  return s;
}

// x + alpha * d, except the two axis-angle blocks compose multiplicatively:
// R_new = R(alpha * d_block) * R(x_block).
ParamVector takeStep(const ParamVector& x, const ParamVector& d, double alpha,
                     const std::array<bool, kParamCount>& frozen) {
  ParamVector out = x;
  for (int i = 0; i < kParamCount; ++i) {
    if (frozen[i] || (i >= 0 && i < 3) || (i >= 51 && i < 54)) continue;
    out[i] = x[i] + alpha * d[i];
  }
  for (const int offset : {0, 51}) {
    if (blockFrozen(frozen, offset)) continue;
    const Vec3 delta = alpha * d.segment<3>(offset);
    if (delta.isZero()) continue;
    const Mat3 r = axisAngleToMatrix(delta) * axisAngleToMatrix(x.segment<3>(offset));
    out.segment<3>(offset) = matrixToAxisAngle(r);
  }
  return out;
}

}  // namespace

OptimizeResult minimizeEnergy(const EnergyContext& ctx, const ParamVector& start,
                              const OptimizerConfig& config) {
  config.validate();
  const ParamVector scales = stepScales(config);

  OptimizeResult result;
  result.state = start;

  EnergyReport report = totalEnergy(ctx, start);
  double f = totalEnergyValue(ctx, start);

  auto maskedGradient = [&](const EnergyReport& rep) {
    ParamVector g = rep.gradient;
    for (int i = 0; i < kParamCount; ++i) {
      if (config.frozen[i]) g[i] = 0;
    }
    if (blockFrozen(config.frozen, 0)) g.segment<3>(0).setZero();
    if (blockFrozen(config.frozen, 51)) g.segment<3>(51).setZero();
    return g;
  };

  ParamVector g = maskedGradient(report);
  auto record = [&](int iteration, double step) {
    result.trace.push_back({iteration, report.silhouette, report.repulsion, report.limit,
                            report.keypoint, f, step, g.cwiseAbs().maxCoeff()});
  };
  record(0, 0.0);

  if (!std::isfinite(f) || !g.allFinite()) {
    result.status = OptimizeStatus::kNonFinite;
    return result;
  }

  double alphaPrev = config.initialStep;
  int belowTolerance = 0;
  result.status = OptimizeStatus::kMaxIterations;

  for (int iter = 1; iter <= config.maxIterations; ++iter) {
    result.iterations = iter;
    const ParamVector d = -(scales.cwiseProduct(g));
    const double dirDeriv = g.dot(d);  // <= 0
    if (dirDeriv == 0.0) {
      result.status = OptimizeStatus::kConverged;
      break;
    }

    double alpha = std::min(config.initialStep, alphaPrev * 2.0);
    bool accepted = false;
    ParamVector xNew;
    double fNew = 0;
    while (alpha >= kMinStep) {
      xNew = takeStep(result.state, d, alpha, config.frozen);
      fNew = totalEnergyValue(ctx, xNew);
      if (std::isfinite(fNew) && fNew <= f + config.armijoC * alpha * dirDeriv) {
        accepted = true;
        break;
      }
      alpha *= config.stepDecay;
    }
    if (!accepted) {
      result.status = OptimizeStatus::kConverged;
      break;
    }

    const double relChange = (f - fNew) / std::max(1.0, std::abs(f));
    belowTolerance = relChange < config.tolerance ? belowTolerance + 1 : 0;

    result.state = xNew;
    f = fNew;
    alphaPrev = alpha;
    report = totalEnergy(ctx, result.state);
    g = maskedGradient(report);
    record(iter, alpha);

    if (!std::isfinite(f) || !g.allFinite()) {
      result.status = OptimizeStatus::kNonFinite;
      break;
    }
    if (belowTolerance >= config.toleranceWindow) {
      result.status = OptimizeStatus::kConverged;
      break;
    }
  }
  return result;
}

}  // namespace graspfit
