#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "doctest.h"
#include "graspfit/bvh.hpp"
#include "graspfit/errors.hpp"
#include "graspfit/hand_model.hpp"
#include "graspfit/mesh.hpp"
#include "graspfit/mesh_io.hpp"
#include "graspfit/rng.hpp"
#include "graspfit/spherize.hpp"
#include "oracles.hpp"

using namespace graspfit;

namespace {

std::string dataPath(const char* name) { return std::string(GRASPFIT_DATA_DIR "/") + name; }

// Rescales one coordinate axis onto exactly [-halfExtent, halfExtent],
// pinning the extremal vertices so the bound is attained as a machine
// number, not merely approached.
void snapAxis(TriMesh& mesh, int axis, double halfExtent) {
  double lo = mesh.vertices[0][axis], hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = std::min(lo, v[axis]);
    hi = std::max(hi, v[axis]);
  }
  for (auto& v : mesh.vertices) {
    double c = -halfExtent + (v[axis] - lo) * (2 * halfExtent / (hi - lo));
    c = std::clamp(c, -halfExtent, halfExtent);
    if (v[axis] == lo) c = -halfExtent;
    if (v[axis] == hi) c = halfExtent;
    v[axis] = c;
  }
}

// Asymmetrically warped blob with half-extents 70, 50, 30. The warp kills
// every mesh symmetry, so greedy packing never has to break a tie between
// equivalent voxels; the snapped bounds are multiples of the 5 mm voxel, so
// a 90 degree rotation lands the voxel grid on the same world lattice.
TriMesh makeWarpedBlob() {
  TriMesh mesh = makeIcoSphere(50, 2);
  for (auto& v : mesh.vertices) {
    const Vec3 p = v;
    v.x() += 6 * std::sin(0.03 * p.y()) + 3 * std::cos(0.05 * p.z());
    v.y() += 5 * std::sin(0.04 * p.z() + 1.0);
    v.z() += 4 * std::sin(0.02 * p.x() + 2.0);
  }
  snapAxis(mesh, 0, 70);
  snapAxis(mesh, 1, 50);
  snapAxis(mesh, 2, 30);
  return mesh;
}

Vec3 rotZ90(const Vec3& p) { return Vec3(-p.y(), p.x(), p.z()); }

bool lexLess(const Sphere& a, const Sphere& b) {
  if (a.center.x() != b.center.x()) return a.center.x() < b.center.x();
  if (a.center.y() != b.center.y()) return a.center.y() < b.center.y();
  if (a.center.z() != b.center.z()) return a.center.z() < b.center.z();
  return a.radius < b.radius;
}

// Containment within `slack`, checked on sampled sphere-surface points: each
// must sit inside the mesh volume (winding) or within slack of its surface.
// Works for the hand's union of overlapping capsules, where distance to the
// nearest triangle says nothing about containment.
double containmentViolation(const Sphere& sphere, const TriMesh& mesh, const MeshBVH& bvh,
                            const TriMesh& dirs) {
  double worst = 0;
  for (const auto& d : dirs.vertices) {
    const Vec3 p = sphere.center + sphere.radius * d.normalized();
    if (windingNumber(mesh, p) > 0.5) continue;
    worst = std::max(worst, bvh.unsignedDistance(p));
  }
  return worst;
}

}  // namespace

TEST_CASE("voxelize: 100 mm cube at 10 mm voxels") {
  const TriMesh cube = makeBox(Vec3(100, 100, 100));
  const VoxelGrid grid = voxelize(cube, 10);

  const auto interior = grid.interiorCount();
  CHECK(interior >= 900);
  CHECK(interior <= 1100);

  // Distance at the interior voxel nearest the cube center.
  double bestDist = 0, bestOff = std::numeric_limits<double>::infinity();
  for (int z = 0; z < grid.nz; ++z) {
    for (int y = 0; y < grid.ny; ++y) {
      for (int x = 0; x < grid.nx; ++x) {
        if (!grid.inside[grid.index(x, y, z)]) continue;
        const double off = grid.center(x, y, z).norm();
        if (off < bestOff) {
          bestOff = off;
          bestDist = grid.distance[grid.index(x, y, z)];
        }
      }
    }
  }
  CHECK(bestDist == doctest::Approx(50).epsilon(0.2));
}

TEST_CASE("voxelize: sphere of radius 50 has max distance near the radius") {
  const TriMesh sphere = makeIcoSphere(50, 3);
  const VoxelGrid grid = voxelize(sphere, 10);
  double maxDist = 0;
  for (std::size_t i = 0; i < grid.distance.size(); ++i) {
    maxDist = std::max(maxDist, grid.distance[i]);
  }
  CHECK(std::abs(maxDist - 50) <= 10);
}

TEST_CASE("voxelize: interior volume of the bundled cube matches Monte-Carlo") {
  const TriMesh cube = loadMesh(dataPath("cube.obj"));
  const VoxelGrid grid = voxelize(cube, 4);
  const double voxelVolume = grid.interiorCount() * 4.0 * 4.0 * 4.0;
  const double mc = oracle::mcVolume(cube, 1000000, 17);
  CHECK(voxelVolume == doctest::Approx(mc).epsilon(0.05));
}

TEST_CASE("voxelize: open mesh is rejected with the offending edges") {
  const TriMesh open = loadMesh(dataPath("open_cube.obj"));
  try {
    voxelize(open, 10);
    FAIL("expected NonWatertightError");
  } catch (const NonWatertightError& e) {
    CHECK(!e.bad_edges.empty());
  }
}

TEST_CASE("pack: half-coverage sphere packing starts with the inscribed sphere") {
  const TriMesh sphere = makeIcoSphere(50, 3);
  const VoxelGrid grid = voxelize(sphere, 10);
  const SphereSet set = packSpheres(grid, {0.5, 128});
  REQUIRE(set.count() >= 1);
  CHECK(set.spheres[0].center.norm() <= 10);
  CHECK(std::abs(set.spheres[0].radius - 50) <= 10);
}

TEST_CASE("pack: single sphere in a cube reaches half the edge length") {
  const TriMesh cube = makeBox(Vec3(100, 100, 100));
  const SphereSet set = packSpheres(voxelize(cube, 10), {0.99, 1});
  REQUIRE(set.count() == 1);
  CHECK(std::abs(set.spheres[0].radius - 50) <= 10);
}

TEST_CASE("pack: cylinder coverage target 0.9 verified by Monte-Carlo") {
  // The budget is set high enough that the packer stops on coverage, not on
  // sphere count.
  const TriMesh cylinder = loadMesh(dataPath("cylinder.obj"));
  const SphereSet set = spherizeMesh(cylinder, 4, {0.9, 4096});
  CHECK(set.count() < 4096);
  const double coverage = oracle::mcCoverage(cylinder, set.spheres, 40000, 99);
  CHECK(coverage >= 0.9);
}

TEST_CASE("pack: exhausted sphere budget is returned as is") {
  const TriMesh cylinder = loadMesh(dataPath("cylinder.obj"));
  const SphereSet set = spherizeMesh(cylinder, 4, {0.9, 16});
  CHECK(set.count() == 16);
}

TEST_CASE("pack: no interior voxels is an error") {
  const TriMesh tiny = makeIcoSphere(1.0, 1);
  const VoxelGrid grid = voxelize(tiny, 10);
  CHECK(grid.interiorCount() == 0);
  CHECK_THROWS_AS(packSpheres(grid, {0.9, 128}), EmptyInteriorError);
}

TEST_CASE("pack: increasing the coverage target never drops spheres") {
  const VoxelGrid grid = voxelize(loadMesh(dataPath("cylinder.obj")), 4);
  int last = 0;
  for (const double target : {0.5, 0.7, 0.9, 0.93, 0.99}) {
    const SphereSet set = packSpheres(grid, {target, 128});
    CHECK(set.count() >= last);
    last = set.count();
  }
}

TEST_CASE("pack: axis-aligned rotation commutes with packing exactly") {
  const TriMesh mesh = makeWarpedBlob();
  TriMesh rotated = mesh;
  for (auto& v : rotated.vertices) v = rotZ90(v);

  const PackOptions options{0.9, 64};
  SphereSet setA = packSpheres(voxelize(mesh, 5), options);
  SphereSet setB = packSpheres(voxelize(rotated, 5), options);
  REQUIRE(setA.count() == setB.count());
  for (auto& s : setA.spheres) s.center = rotZ90(s.center);
  std::sort(setA.spheres.begin(), setA.spheres.end(), lexLess);
  std::sort(setB.spheres.begin(), setB.spheres.end(), lexLess);
  for (int i = 0; i < setA.count(); ++i) {
    CHECK(setA.spheres[i].center == setB.spheres[i].center);
    CHECK(setA.spheres[i].radius == setB.spheres[i].radius);
  }
}

TEST_CASE("sphere sets: centers inside and spheres contained within the slack") {
  const TriMesh dirs = makeIcoSphere(1, 1);
  for (const char* name : {"cube.obj", "sphere50.obj", "cylinder.obj"}) {
    const TriMesh mesh = loadMesh(dataPath(name));
    const SphereSet set = spherizeMesh(mesh, 4, PackOptions{});
    const MeshBVH bvh(mesh);
    REQUIRE(set.count() >= 1);
    for (const auto& s : set.spheres) {
      CHECK(s.radius > 0);
      CHECK(bvh.insideByParity(s.center));
      CHECK(oracle::insideMesh(mesh, s.center));
      CHECK(containmentViolation(s, mesh, bvh, dirs) <= 0.5 + 1e-9);
    }
  }
}

TEST_CASE("sphere sets: hand spheres sit inside the rest mesh") {
  const HandModel model = makeDefaultHandModel();
  const SphereSet set = spherizeHand(model, 2, 4);
  REQUIRE(set.isHandSet());
  const MeshBVH bvh(model.restMesh);
  const TriMesh dirs = makeIcoSphere(1, 1);
  for (const auto& s : set.spheres) {
    CHECK(s.joint >= 0);
    CHECK(s.joint < kJointCount);
    // The rest mesh is a union of overlapping closed capsules, so parity is
    // unusable; the winding number counts every enclosing capsule.
    CHECK(windingNumber(model.restMesh, s.center) > 0.5);
    CHECK(containmentViolation(s, model.restMesh, bvh, dirs) <= 0.5 + 1e-9);
  }
}

TEST_CASE("sphere sets: posed hand spheres stay inside the skinned mesh") {
  const HandModel model = makeDefaultHandModel();
  const SphereSet set = spherizeHand(model, 2, 4);
  const TriMesh dirs = makeIcoSphere(1, 1);
  Rng rng(4242);
  for (int trial = 0; trial < 3; ++trial) {
    HandPose pose;
    pose.globalRotation = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    pose.globalTranslation = Vec3(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-60, 60));
    for (int j = 1; j < kJointCount; ++j) {
      for (int axis = 0; axis < 3; ++axis) {
        const auto& lim = model.joints[j].limits[axis];
        pose.setAngle(j, axis, rng.uniform(lim[0], lim[1]));
      }
    }
    const HandKinematics kin(model, pose);
    const SphereSet posed = poseSpheres(set, kin.restToPosedAll());
    const TriMesh skinned = skinMesh(model, kin.restToPosedAll());
    const MeshBVH bvh(skinned);
    for (const auto& s : posed.spheres) {
      CHECK(containmentViolation(s, skinned, bvh, dirs) <= 2 * 0.5 + 1e-9);
    }
  }
}

TEST_CASE("pose spheres: identity, translation and rotation") {
  const SphereSet set = spherizeMesh(makeBox(Vec3(60, 80, 40)), 5, PackOptions{});

  const SphereSet same = poseSpheres(set, RigidTransform::identity());
  REQUIRE(same.count() == set.count());
  for (int i = 0; i < set.count(); ++i) {
    CHECK(same.spheres[i].center == set.spheres[i].center);
    CHECK(same.spheres[i].radius == set.spheres[i].radius);
  }

  const Vec3 tau(7, -3, 11);
  const SphereSet shifted = poseSpheres(set, RigidTransform::translationOnly(tau));
  for (int i = 0; i < set.count(); ++i) {
    CHECK((shifted.spheres[i].center - (set.spheres[i].center + tau)).norm() == 0.0);
  }

  const RigidTransform rot = RigidTransform::fromAxisAngle(Vec3(0, 0, M_PI / 2), Vec3::Zero());
  const Eigen::Matrix3d ref = oracle::rodrigues(Vec3(0, 0, 1), M_PI / 2);
  const SphereSet spun = poseSpheres(set, rot);
  for (int i = 0; i < set.count(); ++i) {
    const Vec3 expected = ref * set.spheres[i].center;
    CHECK((spun.spheres[i].center - expected).norm() < 1e-12);
    CHECK(spun.spheres[i].radius == set.spheres[i].radius);
  }
}

TEST_CASE("pose spheres: hand transforms follow the kinematic chain") {
  const HandModel model = makeDefaultHandModel();
  const SphereSet set = spherizeHand(model, 2, 4);
  HandPose pose;
  pose.globalRotation = Vec3(0.3, -0.2, 0.5);
  pose.globalTranslation = Vec3(12, -8, 30);
  for (int j = 1; j < kJointCount; ++j) {
    pose.setAngle(j, kFlexion, 0.1 + 0.01 * j);
    pose.setAngle(j, kAbduction, -0.05);
  }
  const HandKinematics kin(model, pose);
  const SphereSet posed = poseSpheres(set, kin.restToPosedAll());

  const auto ref = oracle::forwardKinematics(model, pose);
  for (int i = 0; i < set.count(); ++i) {
    const Sphere& s = set.spheres[i];
    const Eigen::Matrix4d delta =
        ref[s.joint] * oracle::homogeneous(Eigen::Matrix3d::Identity(),
                                           -model.restPositions[s.joint]);
    const Eigen::Vector4d h = delta * Eigen::Vector4d(s.center.x(), s.center.y(), s.center.z(), 1);
    CHECK((posed.spheres[i].center - h.head<3>()).norm() < 1e-9);
  }
}

TEST_CASE("sphere sets: text round trip is bit exact") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "graspfit_spherize_test";
  fs::create_directories(dir);

  const SphereSet object = spherizeMesh(loadMesh(dataPath("cylinder.obj")), 4, PackOptions{});
  const SphereSet hand = spherizeHand(makeDefaultHandModel(), 2, 4);
  for (const SphereSet* set : {&object, &hand}) {
    const std::string path = (dir / "set.txt").string();
    saveSphereSet(*set, path);
    const SphereSet back = loadSphereSet(path);
    CHECK(back.sourceHash == set->sourceHash);
    REQUIRE(back.count() == set->count());
    for (int i = 0; i < set->count(); ++i) {
      CHECK(back.spheres[i].center == set->spheres[i].center);
      CHECK(back.spheres[i].radius == set->spheres[i].radius);
      CHECK(back.spheres[i].joint == set->spheres[i].joint);
    }
    const std::string again = (dir / "set2.txt").string();
    saveSphereSet(back, again);
    std::ifstream a(path), b(again);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
  fs::remove_all(dir);
}
