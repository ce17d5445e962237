#pragma once

#include <limits>
#include <vector>

#include "graspfit/mesh.hpp"
#include "graspfit/types.hpp"

namespace graspfit {

// Closest point to p on triangle (a,b,c).
Vec3 closestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Moeller-Trumbore. Returns true on a hit with t > tMin; fills t.
// grazing is set when the hit is numerically marginal (near-parallel ray or
// hit near the triangle boundary) and parity counting should not trust it.
bool rayTriangle(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c,
                 double& t, bool& grazing, double tMin = 0.0);

// Generalized winding number (solid-angle sum / 4pi). For a consistently
// oriented watertight surface this counts how many times the surface wraps
// the point; > 0.5 means inside. Exact for unions of closed components.
double windingNumber(const TriMesh& mesh, const Vec3& p);

// Axis-aligned-box BVH over mesh triangles. The mesh must outlive the BVH.
class MeshBVH {
 public:
  explicit MeshBVH(const TriMesh& mesh);

  // Min distance from p to the surface; optionally the closest point.
  double unsignedDistance(const Vec3& p, Vec3* closest = nullptr) const;

  // Number of ray hits with t > 0. Returns -1 if any hit was grazing and the
  // count cannot be trusted.
  int countRayHits(const Vec3& orig, const Vec3& dir) const;

  // Parity inside-test for a single closed surface. Tries a fixed sequence
  // of directions until one gives a clean count.
  bool insideByParity(const Vec3& p) const;

  const TriMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // internal children, or
    int begin = 0, end = 0;     // leaf triangle range in order_
  };

  int build(int begin, int end, std::vector<Vec3>& centroids);
  void distanceRec(int node, const Vec3& p, double& best, Vec3& bestPoint) const;
  void rayRec(int node, const Vec3& orig, const Vec3& dir, const Vec3& invDir, int& hits,
              bool& anyGrazing) const;

  const TriMesh& mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

}  // namespace graspfit
