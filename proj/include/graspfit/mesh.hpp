#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "graspfit/types.hpp"

namespace graspfit {

struct TriMesh {
  std::vector<Vec3> vertices;                // mm
  std::vector<std::array<int, 3>> triangles;

  int vertexCount() const { return static_cast<int>(vertices.size()); }
  int triangleCount() const { return static_cast<int>(triangles.size()); }

  void appendMesh(const TriMesh& other);
  TriMesh transformed(const RigidTransform& t) const;

  void bounds(Vec3& lo, Vec3& hi) const;
  double surfaceArea() const;
};

// Edges not shared by exactly two triangles (empty means watertight).
// Degenerate triangles (repeated vertex indices) are reported through the
// same list as self-edges.
std::vector<std::pair<int, int>> nonManifoldEdges(const TriMesh& mesh);
bool isWatertight(const TriMesh& mesh);
// Throws NonWatertightError listing the offending edges.
void requireWatertight(const TriMesh& mesh, const std::string& what);

// FNV-1a over vertex coordinates and triangle indices; used to tag derived
// files (sphere sets) with their source mesh.
std::uint64_t meshHash(const TriMesh& mesh);

// Procedural shapes, all watertight and centered as documented per shape.
TriMesh makeBox(const Vec3& sizeMm, const Vec3& center = Vec3::Zero());
TriMesh makeIcoSphere(double radiusMm, int subdivisions, const Vec3& center = Vec3::Zero());
// Closed cylinder along +z, base at z=0.
TriMesh makeCylinder(double radiusMm, double heightMm, int radialSegments, int heightSegments);
// Capsule from p0 to p1: cylinder body with hemispherical caps.
TriMesh makeCapsule(const Vec3& p0, const Vec3& p1, double radiusMm, int radialSegments,
                    int capRings);

}  // namespace graspfit
