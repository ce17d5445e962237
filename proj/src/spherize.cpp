#include "graspfit/spherize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "graspfit/bvh.hpp"
#include "graspfit/errors.hpp"
#include "graspfit/rng.hpp"

namespace graspfit {

bool SphereSet::isHandSet() const {
  if (spheres.empty()) return false;
  for (const auto& s : spheres) {
    if (s.joint < 0) return false;
  }
  return true;
}

std::size_t VoxelGrid::interiorCount() const {
  return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), std::uint8_t(1)));
}

namespace {

// Intersections of a +x ray with the whole mesh, as sorted x coordinates.
// Returns false when any hit is too marginal to trust for parity.
bool rowCrossings(const TriMesh& mesh, const Vec3& origin, std::vector<double>& xs) {
  xs.clear();
  const Vec3 dir(1, 0, 0);
  for (const auto& tri : mesh.triangles) {
    double t;
    bool grazing;
    if (rayTriangle(origin, dir, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                    mesh.vertices[tri[2]], t, grazing, -1.0)) {
      if (grazing) return false;
      xs.push_back(origin.x() + t);
    } else if (grazing) {
      return false;
    }
  }
  std::sort(xs.begin(), xs.end());
  return xs.size() % 2 == 0;
}

}  // namespace

VoxelGrid voxelize(const TriMesh& mesh, double voxelSize) {
  if (voxelSize <= 0) throw Error("voxel size must be positive");
  requireWatertight(mesh, "voxelize");

  Vec3 lo, hi;
  mesh.bounds(lo, hi);

  VoxelGrid grid;
  grid.voxelSize = voxelSize;
  grid.origin = lo - Vec3::Constant(voxelSize);
  grid.nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / voxelSize)) + 2;
  grid.ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / voxelSize)) + 2;
  grid.nz = static_cast<int>(std::ceil((hi.z() - lo.z()) / voxelSize)) + 2;
  grid.inside.assign(static_cast<std::size_t>(grid.nx) * grid.ny * grid.nz, 0);
  grid.distance.assign(grid.inside.size(), 0.0);

  MeshBVH bvh(mesh);

  // Parity along +x per (y, z) row. The ray origin is jittered off the row of
  // voxel centers by distinct irrational fractions of the voxel so it cannot
  // hit triangle edges and vertices that happen to lie on the lattice.
  std::vector<double> xs;
  const double baseJy = voxelSize * 1.4142135623730951e-6;
  const double baseJz = voxelSize * 1.7320508075688772e-6;
  for (int z = 0; z < grid.nz; ++z) {
    for (int y = 0; y < grid.ny; ++y) {
      bool clean = false;
      for (int attempt = 0; attempt < 8 && !clean; ++attempt) {
        const double scale = attempt * attempt + 1;
        const Vec3 origin = grid.center(0, y, z) +
                            Vec3(-voxelSize, baseJy * scale, baseJz * scale);
        clean = rowCrossings(mesh, origin, xs);
      }
      if (!clean) {
        // Marginal geometry on every jitter; fall back to winding numbers.
        for (int x = 0; x < grid.nx; ++x) {
          grid.inside[grid.index(x, y, z)] = windingNumber(mesh, grid.center(x, y, z)) > 0.5;
        }
        continue;
      }
      std::size_t k = 0;
      for (int x = 0; x < grid.nx; ++x) {
        const double cx = grid.center(x, y, z).x();
        while (k < xs.size() && xs[k] < cx) ++k;
        grid.inside[grid.index(x, y, z)] = k % 2 == 1;
      }
    }
  }

  for (int z = 0; z < grid.nz; ++z) {
    for (int y = 0; y < grid.ny; ++y) {
      for (int x = 0; x < grid.nx; ++x) {
        const std::size_t i = grid.index(x, y, z);
        if (grid.inside[i]) grid.distance[i] = bvh.unsignedDistance(grid.center(x, y, z));
      }
    }
  }
  return grid;
}

SphereSet packSpheres(const VoxelGrid& grid, const PackOptions& options) {
  std::vector<std::size_t> interior;
  for (std::size_t i = 0; i < grid.inside.size(); ++i) {
    if (grid.inside[i] && grid.distance[i] > 0) interior.push_back(i);
  }
  if (interior.empty()) throw EmptyInteriorError("no interior voxels to pack");

  std::vector<std::uint8_t> covered(grid.inside.size(), 0);
  std::size_t coveredCount = 0;

  auto coordsOf = [&](std::size_t i, int& x, int& y, int& z) {
    x = static_cast<int>(i % grid.nx);
    y = static_cast<int>((i / grid.nx) % grid.ny);
    z = static_cast<int>(i / (static_cast<std::size_t>(grid.nx) * grid.ny));
  };

  SphereSet set;
  while (static_cast<int>(set.spheres.size()) < options.maxSpheres &&
         static_cast<double>(coveredCount) < options.coverageTarget * interior.size()) {
    std::size_t best = interior.size();
    double bestDist = 0;
    for (std::size_t k = 0; k < interior.size(); ++k) {
      const std::size_t i = interior[k];
      if (!covered[i] && grid.distance[i] > bestDist) {
        bestDist = grid.distance[i];
        best = k;  // ascending z-major scan keeps the lowest (z, y, x) tie
      }
    }
    if (best == interior.size()) break;

    int bx, by, bz;
    coordsOf(interior[best], bx, by, bz);
    Sphere s;
    s.center = grid.center(bx, by, bz);
    s.radius = bestDist;
    set.spheres.push_back(s);

    const double r2 = s.radius * s.radius;
    const int reach = static_cast<int>(std::floor(s.radius / grid.voxelSize)) + 1;
    for (int z = std::max(0, bz - reach); z <= std::min(grid.nz - 1, bz + reach); ++z) {
      for (int y = std::max(0, by - reach); y <= std::min(grid.ny - 1, by + reach); ++y) {
        for (int x = std::max(0, bx - reach); x <= std::min(grid.nx - 1, bx + reach); ++x) {
          const std::size_t i = grid.index(x, y, z);
          if (!covered[i] && grid.inside[i] &&
              (grid.center(x, y, z) - s.center).squaredNorm() <= r2) {
            covered[i] = 1;
            ++coveredCount;
          }
        }
      }
    }
  }
  return set;
}

double voxelCoverage(const VoxelGrid& grid, const SphereSet& set) {
  std::size_t interior = 0, covered = 0;
  for (int z = 0; z < grid.nz; ++z) {
    for (int y = 0; y < grid.ny; ++y) {
      for (int x = 0; x < grid.nx; ++x) {
        const std::size_t i = grid.index(x, y, z);
        if (!grid.inside[i] || grid.distance[i] <= 0) continue;
        ++interior;
        const Vec3 c = grid.center(x, y, z);
        for (const auto& s : set.spheres) {
          if ((c - s.center).squaredNorm() <= s.radius * s.radius) {
            ++covered;
            break;
          }
        }
      }
    }
  }
  return interior == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(interior);
}

namespace {

// Seeded rejection sample of interior points. Insideness is ray parity unless
// byWinding is set; parity requires one watertight shell, the winding test
// also accepts unions of overlapping closed shells (hand rest meshes).
std::vector<Vec3> interiorSamples(const TriMesh& mesh, int wanted, bool byWinding) {
  const MeshBVH bvh(mesh);
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  Rng rng(0x5eedc07e);
  std::vector<Vec3> samples;
  for (long attempt = 0; attempt < 80L * wanted && samples.size() < std::size_t(wanted);
       ++attempt) {
    const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                 rng.uniform(lo.z(), hi.z()));
    const bool inside = byWinding ? windingNumber(mesh, p) > 0.5 : bvh.insideByParity(p);
    if (inside) samples.push_back(p);
  }
  return samples;
}

double coveredFraction(const std::vector<Vec3>& samples, const SphereSet& set) {
  if (samples.empty()) return 1.0;
  std::size_t covered = 0;
  for (const Vec3& p : samples) {
    for (const auto& s : set.spheres) {
      if ((p - s.center).squaredNorm() <= s.radius * s.radius) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(samples.size());
}

}  // namespace

double sampleCoverage(const TriMesh& mesh, const SphereSet& set, int samples, bool byWinding) {
  return coveredFraction(interiorSamples(mesh, samples, byWinding), set);
}

SphereSet spherizeMesh(const TriMesh& mesh, double voxelSize, const PackOptions& options) {
  // The requested coverage is checked against a seeded interior point sample,
  // not just the voxel-center count. The voxel target escalates until the
  // sample clears the request; if the voxel target saturates first, the grid
  // is refined and packing restarts. A set that exhausts the sphere budget is
  // returned as is.
  std::vector<Vec3> samples;
  bool sampled = false;
  auto measured = [&](const SphereSet& candidate) {
    if (!sampled) {
      samples = interiorSamples(mesh, 40000, false);
      sampled = true;
    }
    return coveredFraction(samples, candidate);
  };

  SphereSet set;
  double voxel = voxelSize;
  for (int refinement = 0;; ++refinement) {
    const VoxelGrid grid = voxelize(mesh, voxel);
    double target = options.coverageTarget;
    for (;;) {
      set = packSpheres(grid, {target, options.maxSpheres});
      if (set.count() >= options.maxSpheres) break;
      if (measured(set) >= options.coverageTarget + 0.01) break;
      if (target >= 0.999) break;
      target = std::min(0.999, target + 0.02);
    }
    if (set.count() >= options.maxSpheres || refinement >= 2) break;
    if (measured(set) >= options.coverageTarget + 0.01) break;
    voxel /= 2;
  }
  set.sourceHash = meshHash(mesh);
  return set;
}

namespace {

std::vector<std::vector<int>> connectedComponents(const TriMesh& mesh) {
  std::vector<int> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& tri : mesh.triangles) {
    parent[find(tri[0])] = find(tri[1]);
    parent[find(tri[1])] = find(tri[2]);
  }
  std::map<int, int> rootToComponent;
  std::vector<std::vector<int>> components;
  for (int v = 0; v < mesh.vertexCount(); ++v) {
    const int root = find(v);
    auto [it, inserted] = rootToComponent.emplace(root, components.size());
    if (inserted) components.emplace_back();
    components[it->second].push_back(v);
  }
  return components;
}

}  // namespace

SphereSet spherizeHand(const HandModel& model, double voxelSize, int spheresPerBone) {
  const TriMesh& mesh = model.restMesh;
  const auto components = connectedComponents(mesh);

  SphereSet set;
  set.sourceHash = meshHash(mesh);
  for (const auto& componentVerts : components) {
    std::vector<int> remap(mesh.vertices.size(), -1);
    TriMesh part;
    for (const int v : componentVerts) {
      remap[v] = part.vertexCount();
      part.vertices.push_back(mesh.vertices[v]);
    }
    for (const auto& tri : mesh.triangles) {
      if (remap[tri[0]] >= 0) {
        part.triangles.push_back({remap[tri[0]], remap[tri[1]], remap[tri[2]]});
      }
    }

    std::vector<double> jointWeight(model.joints.size(), 0.0);
    for (const int v : componentVerts) {
      for (const auto& [j, w] : model.skinWeights[v]) jointWeight[j] += w;
    }
    const int joint = static_cast<int>(
        std::max_element(jointWeight.begin(), jointWeight.end()) - jointWeight.begin());

    PackOptions options;
    options.coverageTarget = 1.0;  // bone capsules are small; cap by count
    options.maxSpheres = spheresPerBone;
    SphereSet bone = packSpheres(voxelize(part, voxelSize), options);
    for (auto& s : bone.spheres) {
      s.joint = joint;
      set.spheres.push_back(s);
    }
  }
  return set;
}

SphereSet poseSpheres(const SphereSet& set, const std::vector<RigidTransform>& transforms) {
  SphereSet out = set;
  for (auto& s : out.spheres) {
    if (s.joint < 0 || s.joint >= static_cast<int>(transforms.size())) {
      throw BadIndexError("sphere attach joint out of range");
    }
    s.center = transforms[s.joint].apply(s.center);
  }
  return out;
}

SphereSet poseSpheres(const SphereSet& set, const RigidTransform& transform) {
  SphereSet out = set;
  for (auto& s : out.spheres) s.center = transform.apply(s.center);
  return out;
}

void saveSphereSet(const SphereSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write sphere set: " + path);
  char buf[256];
  out << "spheres " << set.spheres.size() << "\n";
  std::snprintf(buf, sizeof(buf), "meshhash %016llx\n",
                static_cast<unsigned long long>(set.sourceHash));
  out << buf;
  for (const auto& s : set.spheres) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g", s.center.x(), s.center.y(),
                  s.center.z(), s.radius);
    out << buf;
    if (s.joint >= 0) out << ' ' << s.joint;
    out << '\n';
  }
}

SphereSet loadSphereSet(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sphere set: " + path);
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "spheres") {
    throw ParseError(path + ": expected 'spheres <count>' header");
  }
  std::string hashHex;
  if (!(in >> tag >> hashHex) || tag != "meshhash") {
    throw ParseError(path + ": expected 'meshhash <hex>' header");
  }
  SphereSet set;
  set.sourceHash = std::stoull(hashHex, nullptr, 16);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    Sphere s;
    if (!(row >> s.center.x() >> s.center.y() >> s.center.z() >> s.radius)) {
      throw ParseError(path + ": bad sphere line '" + line + "'");
    }
    row >> s.joint;
    if (s.radius <= 0) throw ParseError(path + ": sphere radius must be positive");
    set.spheres.push_back(s);
  }
  if (set.spheres.size() != count) {
    std::ostringstream msg;
    msg << path << ": header says " << count << " spheres, found " << set.spheres.size();
    throw ParseError(msg.str());
  }
  return set;
}

}  // namespace graspfit
