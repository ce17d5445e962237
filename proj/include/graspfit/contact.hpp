#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "graspfit/bvh.hpp"
#include "graspfit/hand_model.hpp"
#include "graspfit/mesh.hpp"
#include "graspfit/types.hpp"

namespace graspfit {

inline constexpr double kContactThresholdMm = 4.0;

// Negative inside: magnitude is the min distance to the surface, sign from
// the ray-parity inside test. The mesh must be watertight.
double signedDistance(const Vec3& point, const MeshBVH& bvh);
double signedDistance(const Vec3& point, const TriMesh& mesh);

// Per-hand-vertex contact against one object, or an aggregate over frames.
// For a single frame every fraction is 0 or 1 and penetrationStd is 0; after
// aggregation fractions average the flags and the penetration statistics are
// the mean/std over the per-frame means.
struct ContactMap {
  std::vector<double> fraction;
  double penetrationMean = 0;  // mm, over penetrating vertices (0 if none)
  double penetrationStd = 0;   // mm
  int frames = 1;

  int contactCount() const;       // vertices with fraction > 0
  double contactFraction() const; // mean of per-vertex fractions
};

ContactMap contactMap(const TriMesh& handMesh, const MeshBVH& objectBvh,
                      double thresholdMm = kContactThresholdMm);
ContactMap contactMap(const TriMesh& handMesh, const TriMesh& objectMesh,
                      double thresholdMm = kContactThresholdMm);

// Throws MixedTopologyError when vertex counts differ.
ContactMap aggregate(const std::vector<ContactMap>& maps);

struct FingertipEval {
  struct Entry {
    int frame = 0;
    int finger = 0;   // 0 thumb .. 4 pinky
    double errorMm = 0;
  };
  std::vector<Entry> entries;
  double meanMm = 0;
  double stdMm = 0;  // population std over all (frame, finger) entries
};

using FingertipAnnotations = std::map<int, std::array<Vec3, kFingerCount>>;

// Euclidean error between FK fingertips of the predicted poses and the
// annotations. Every annotated frame needs a pose (MissingFrameError).
FingertipEval fingertipAccuracy(const HandModel& model, const std::map<int, HandPose>& poses,
                                const FingertipAnnotations& annotations);

// Per-vertex color on a blue-to-red ramp: red = round(255 * fraction),
// blue = 255 - red, green = 0 (half-up rounding).
std::array<unsigned char, 3> contactColor(double fraction);
void exportContactVisual(const ContactMap& map, const TriMesh& handMesh, const std::string& path);

// frame, contacts, mean penetration per line.
struct PerFrameRow {
  int frame = 0;
  int contacts = 0;
  double meanPenetration = 0;
};
void savePerFrameCsv(const std::vector<int>& frameIds, const std::vector<ContactMap>& maps,
                     const std::string& path);
void savePerFrameCsv(const std::vector<PerFrameRow>& rows, const std::string& path);
std::vector<PerFrameRow> loadPerFrameCsv(const std::string& path);
// Summary line plus one fraction line per vertex.
void saveAggregateCsv(const ContactMap& map, const std::string& path);
ContactMap loadAggregateCsv(const std::string& path);

void saveFingertipCsv(const FingertipEval& eval, const std::string& path);
FingertipEval loadFingertipCsv(const std::string& path);
FingertipAnnotations loadAnnotations(const std::string& path);
void saveAnnotations(const FingertipAnnotations& annotations, const std::string& path);

// Comparison report row: one metric with its value in each evaluation and
// the difference b - a.
struct CompareRow {
  std::string metric;
  double a = 0, b = 0, delta = 0;
};
void saveCompareReport(const std::vector<CompareRow>& rows, const std::string& path);
std::vector<CompareRow> loadCompareReport(const std::string& path);

}  // namespace graspfit
