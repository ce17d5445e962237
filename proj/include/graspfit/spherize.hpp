#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graspfit/hand_model.hpp"
#include "graspfit/mesh.hpp"
#include "graspfit/types.hpp"

namespace graspfit {

struct Sphere {
  Vec3 center = Vec3::Zero();  // mm, in the source-mesh frame
  double radius = 0;           // mm
  int joint = -1;              // attach joint for hand sets, -1 otherwise
};

struct SphereSet {
  std::vector<Sphere> spheres;
  std::uint64_t sourceHash = 0;

  int count() const { return static_cast<int>(spheres.size()); }
  bool isHandSet() const;  // true when every sphere has an attach joint
};

// Interior occupancy plus distance-to-surface at interior voxel centers.
struct VoxelGrid {
  Vec3 origin = Vec3::Zero();  // min corner of voxel (0,0,0)
  double voxelSize = 0;
  int nx = 0, ny = 0, nz = 0;
  std::vector<std::uint8_t> inside;  // z-major: ((z*ny)+y)*nx+x
  std::vector<double> distance;      // valid where inside, else 0

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * ny + y) * nx + x;
  }
  Vec3 center(int x, int y, int z) const {
    return origin + voxelSize * Vec3(x + 0.5, y + 0.5, z + 0.5);
  }
  std::size_t interiorCount() const;
};

// Scanline ray-parity occupancy with one voxel of outside margin around the
// mesh bounds. Throws NonWatertightError on open meshes.
VoxelGrid voxelize(const TriMesh& mesh, double voxelSize);

struct PackOptions {
  double coverageTarget = 0.93;  // fraction of interior voxels
  int maxSpheres = 128;
};

// Greedy maximal-inscribed-sphere packing. A sphere is placed at the
// uncovered interior voxel with the largest distance-field value (ties by
// lowest z, then y, then x), radius equal to that distance; voxels whose
// centers fall inside it count as covered. Throws EmptyInteriorError.
SphereSet packSpheres(const VoxelGrid& grid, const PackOptions& options);

// Fraction of interior voxel centers covered by the set.
double voxelCoverage(const VoxelGrid& grid, const SphereSet& set);

// Fraction of a seeded interior point sample covered by the set. Insideness
// is ray parity unless byWinding is set; parity requires one watertight
// shell, the winding test also accepts unions of overlapping closed shells
// (hand rest meshes).
double sampleCoverage(const TriMesh& mesh, const SphereSet& set, int samples = 40000,
                      bool byWinding = false);

// voxelize + packSpheres + source hash. Escalates the voxel-count target and
// refines the grid until a seeded interior sample reaches the requested
// coverage; a set that exhausts the sphere budget is returned as is.
SphereSet spherizeMesh(const TriMesh& mesh, double voxelSize, const PackOptions& options);

// Spherizes each connected component of the rest mesh separately and attaches
// the result to the joint with the largest summed skin weight over the
// component. Centers stay in the rest-mesh frame; posing with the rest-to-
// posed transforms of an FK result tracks the skinned surface.
SphereSet spherizeHand(const HandModel& model, double voxelSize, int spheresPerBone);

// World-frame set for a hand. `transforms` are rest-to-posed transforms per
// attach joint (see restToPosed in hand_model.hpp).
SphereSet poseSpheres(const SphereSet& set, const std::vector<RigidTransform>& transforms);
// World-frame set for an object: one rigid transform for all spheres.
SphereSet poseSpheres(const SphereSet& set, const RigidTransform& transform);

void saveSphereSet(const SphereSet& set, const std::string& path);
SphereSet loadSphereSet(const std::string& path);

}  // namespace graspfit
