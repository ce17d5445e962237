#include "graspfit/contact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "graspfit/errors.hpp"
#include "graspfit/mesh_io.hpp"

namespace graspfit {

double signedDistance(const Vec3& point, const MeshBVH& bvh) {
  const double d = bvh.unsignedDistance(point);
  return bvh.insideByParity(point) ? -d : d;
}

double signedDistance(const Vec3& point, const TriMesh& mesh) {
  requireWatertight(mesh, "signed distance");
  return signedDistance(point, MeshBVH(mesh));
}

int ContactMap::contactCount() const {
  return static_cast<int>(std::count_if(fraction.begin(), fraction.end(),
                                        [](double f) { return f > 0; }));
}

double ContactMap::contactFraction() const {
  if (fraction.empty()) return 0;
  double sum = 0;
  for (const double f : fraction) sum += f;
  return sum / static_cast<double>(fraction.size());
}

ContactMap contactMap(const TriMesh& handMesh, const MeshBVH& objectBvh, double thresholdMm) {
  ContactMap map;
  map.fraction.resize(handMesh.vertices.size());
  double penetrationSum = 0;
  int penetrating = 0;
  for (std::size_t v = 0; v < handMesh.vertices.size(); ++v) {
    const double distance = objectBvh.unsignedDistance(handMesh.vertices[v]);
    map.fraction[v] = distance < thresholdMm ? 1.0 : 0.0;
    if (objectBvh.insideByParity(handMesh.vertices[v])) {
      penetrationSum += distance;
      ++penetrating;
    }
  }
  map.penetrationMean = penetrating > 0 ? penetrationSum / penetrating : 0.0;
  map.penetrationStd = 0.0;
  map.frames = 1;
  return map;
}

ContactMap contactMap(const TriMesh& handMesh, const TriMesh& objectMesh, double thresholdMm) {
  requireWatertight(objectMesh, "contact map object");
  return contactMap(handMesh, MeshBVH(objectMesh), thresholdMm);
}

ContactMap aggregate(const std::vector<ContactMap>& maps) {
  if (maps.empty()) throw Error("nothing to aggregate");
  const std::size_t n = maps[0].fraction.size();
  for (const ContactMap& m : maps) {
    if (m.fraction.size() != n) {
      throw MixedTopologyError("contact maps disagree on vertex count");
    }
  }
  ContactMap out;
  out.fraction.assign(n, 0.0);
  for (const ContactMap& m : maps) {
    for (std::size_t v = 0; v < n; ++v) out.fraction[v] += m.fraction[v];
  }
  for (double& f : out.fraction) f /= static_cast<double>(maps.size());

  double mean = 0;
  for (const ContactMap& m : maps) mean += m.penetrationMean;
  mean /= static_cast<double>(maps.size());
  double var = 0;
  for (const ContactMap& m : maps) {
    var += (m.penetrationMean - mean) * (m.penetrationMean - mean);
  }
  out.penetrationMean = mean;
  out.penetrationStd = std::sqrt(var / static_cast<double>(maps.size()));
  out.frames = static_cast<int>(maps.size());
  return out;
}

FingertipEval fingertipAccuracy(const HandModel& model, const std::map<int, HandPose>& poses,
                                const FingertipAnnotations& annotations) {
  FingertipEval eval;
  for (const auto& [frame, tips] : annotations) {
    const auto it = poses.find(frame);
    if (it == poses.end()) {
      throw MissingFrameError("no predicted pose for annotated frame " + std::to_string(frame));
    }
    const HandKinematics kin(model, it->second);
    const auto predicted = kin.fingertips(model);
    for (int f = 0; f < kFingerCount; ++f) {
      eval.entries.push_back({frame, f, (predicted[f] - tips[f]).norm()});
    }
  }
  if (!eval.entries.empty()) {
    double mean = 0;
    for (const auto& e : eval.entries) mean += e.errorMm;
    mean /= static_cast<double>(eval.entries.size());
    double var = 0;
    for (const auto& e : eval.entries) var += (e.errorMm - mean) * (e.errorMm - mean);
    eval.meanMm = mean;
    eval.stdMm = std::sqrt(var / static_cast<double>(eval.entries.size()));
  }
  return eval;
}

std::array<unsigned char, 3> contactColor(double fraction) {
  const double clamped = std::clamp(fraction, 0.0, 1.0);
  const auto red = static_cast<unsigned char>(std::floor(255.0 * clamped + 0.5));
  return {red, 0, static_cast<unsigned char>(255 - red)};
}

void exportContactVisual(const ContactMap& map, const TriMesh& handMesh, const std::string& path) {
  if (map.fraction.size() != handMesh.vertices.size()) {
    throw MixedTopologyError("contact map does not match mesh vertex count");
  }
  std::vector<std::array<unsigned char, 3>> colors(map.fraction.size());
  for (std::size_t v = 0; v < map.fraction.size(); ++v) colors[v] = contactColor(map.fraction[v]);
  savePlyWithColors(handMesh, colors, path);
}

void savePerFrameCsv(const std::vector<int>& frameIds, const std::vector<ContactMap>& maps,
                     const std::string& path) {
  if (frameIds.size() != maps.size()) throw DimensionMismatchError("frame id count mismatch");
  std::vector<PerFrameRow> rows(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    rows[i] = {frameIds[i], maps[i].contactCount(), maps[i].penetrationMean};
  }
  savePerFrameCsv(rows, path);
}

void savePerFrameCsv(const std::vector<PerFrameRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write csv: " + path);
  out << "frame,contacts,mean_penetration\n";
  char buf[128];
  for (const PerFrameRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", r.frame, r.contacts, r.meanPenetration);
    out << buf;
  }
}

std::vector<PerFrameRow> loadPerFrameCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "frame,contacts,mean_penetration") {
    throw ParseError(path + ": bad per-frame header");
  }
  std::vector<PerFrameRow> rows;
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream row(line);
    PerFrameRow r;
    if (!(row >> r.frame >> r.contacts >> r.meanPenetration)) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": bad per-frame row");
    }
    rows.push_back(r);
  }
  return rows;
}

void saveAggregateCsv(const ContactMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write csv: " + path);
  char buf[256];
  out << "frames,vertices,contact_fraction,penetration_mean,penetration_std\n";
  std::snprintf(buf, sizeof(buf), "%d,%zu,%.17g,%.17g,%.17g\n", map.frames, map.fraction.size(),
                map.contactFraction(), map.penetrationMean, map.penetrationStd);
  out << buf;
  out << "vertex,fraction\n";
  for (std::size_t v = 0; v < map.fraction.size(); ++v) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", v, map.fraction[v]);
    out << buf;
  }
}

ContactMap loadAggregateCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "frames,vertices,contact_fraction,penetration_mean,penetration_std") {
    throw ParseError(path + ": bad aggregate header");
  }
  if (!std::getline(in, line)) throw ParseError(path + ": missing summary row");
  ContactMap map;
  std::size_t vertices = 0;
  double contactFraction = 0;
  {
    std::istringstream row(line);
    char comma;
    if (!(row >> map.frames >> comma >> vertices >> comma >> contactFraction >> comma >>
          map.penetrationMean >> comma >> map.penetrationStd)) {
      throw ParseError(path + ": bad summary row");
    }
  }
  if (!std::getline(in, line) || line != "vertex,fraction") {
    throw ParseError(path + ": bad per-vertex header");
  }
  map.fraction.resize(vertices);
  for (std::size_t v = 0; v < vertices; ++v) {
    if (!std::getline(in, line)) throw ParseError(path + ": truncated per-vertex rows");
    std::istringstream row(line);
    std::size_t idx;
    char comma;
    if (!(row >> idx >> comma >> map.fraction[v]) || idx != v) {
      throw ParseError(path + ": bad per-vertex row " + std::to_string(v));
    }
  }
  return map;
}

void saveFingertipCsv(const FingertipEval& eval, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write csv: " + path);
  char buf[128];
  out << "frame,finger,error_mm\n";
  for (const auto& e : eval.entries) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", e.frame, e.finger, e.errorMm);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean_mm,%.17g\nstd_mm,%.17g\n", eval.meanMm, eval.stdMm);
  out << buf;
}

FingertipEval loadFingertipCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "frame,finger,error_mm") {
    throw ParseError(path + ": bad fingertip header");
  }
  FingertipEval eval;
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream row(line);
    std::string first;
    row >> first;
    if (first == "mean_mm") {
      if (!(row >> eval.meanMm)) throw ParseError(path + ": bad mean row");
    } else if (first == "std_mm") {
      if (!(row >> eval.stdMm)) throw ParseError(path + ": bad std row");
    } else {
      FingertipEval::Entry e;
      e.frame = std::stoi(first);
      if (!(row >> e.finger >> e.errorMm)) {
        throw ParseError(path + ":" + std::to_string(lineNo) + ": bad fingertip row");
      }
      eval.entries.push_back(e);
    }
  }
  return eval;
}

FingertipAnnotations loadAnnotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open annotations: " + path);
  FingertipAnnotations annotations;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line[0] == '#' || line.rfind("frame", 0) == 0) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream row(line);
    int frame, finger;
    Vec3 p;
    if (!(row >> frame >> finger >> p.x() >> p.y() >> p.z())) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": expected frame, finger, x, y, z");
    }
    if (finger < 0 || finger >= kFingerCount) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": finger index out of range");
    }
    annotations[frame][finger] = p;
  }
  return annotations;
}

void saveAnnotations(const FingertipAnnotations& annotations, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write annotations: " + path);
  out << "frame,finger,x,y,z\n";
  char buf[256];
  for (const auto& [frame, tips] : annotations) {
    for (int f = 0; f < kFingerCount; ++f) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", frame, f, tips[f].x(),
                    tips[f].y(), tips[f].z());
      out << buf;
    }
  }
}

void saveCompareReport(const std::vector<CompareRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report: " + path);
  out << "metric,a,b,delta\n";
  char buf[256];
  for (const CompareRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", r.metric.c_str(), r.a, r.b, r.delta);
    out << buf;
  }
}

std::vector<CompareRow> loadCompareReport(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open report: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "metric,a,b,delta") {
    throw ParseError(path + ": bad report header");
  }
  std::vector<CompareRow> rows;
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream row(line);
    CompareRow r;
    if (!(row >> r.metric >> r.a >> r.b >> r.delta)) {
      throw ParseError(path + ":" + std::to_string(lineNo) + ": bad report row");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace graspfit
