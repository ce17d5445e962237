#include "graspfit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "graspfit/errors.hpp"

namespace graspfit {

void TriMesh::appendMesh(const TriMesh& other) {
  const int base = vertexCount();
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  triangles.reserve(triangles.size() + other.triangles.size());
  for (const auto& t : other.triangles) {
    triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
}

TriMesh TriMesh::transformed(const RigidTransform& t) const {
  TriMesh out;
  out.vertices.reserve(vertices.size());
  for (const auto& v : vertices) out.vertices.push_back(t.apply(v));
  out.triangles = triangles;
  return out;
}

void TriMesh::bounds(Vec3& lo, Vec3& hi) const {
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

double TriMesh::surfaceArea() const {
  double area = 0;
  for (const auto& t : triangles) {
    const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
    const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
    area += 0.5 * e1.cross(e2).norm();
  }
  return area;
}

std::vector<std::pair<int, int>> nonManifoldEdges(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> count;
  std::vector<std::pair<int, int>> bad;
  for (const auto& t : mesh.triangles) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      bad.emplace_back(t[0], t[0] == t[1] ? t[1] : t[2]);
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      count[{std::min(a, b), std::max(a, b)}] += 1;
    }
  }
  for (const auto& [edge, n] : count) {
    if (n != 2) bad.push_back(edge);
  }
  std::sort(bad.begin(), bad.end());
  bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
  return bad;
}

bool isWatertight(const TriMesh& mesh) { return nonManifoldEdges(mesh).empty(); }

void requireWatertight(const TriMesh& mesh, const std::string& what) {
  auto bad = nonManifoldEdges(mesh);
  if (bad.empty()) return;
  std::ostringstream msg;
  msg << what << ": mesh is not watertight, " << bad.size() << " bad edge(s):";
  const size_t shown = std::min<size_t>(bad.size(), 16);
  for (size_t i = 0; i < shown; ++i) msg << " (" << bad[i].first << "," << bad[i].second << ")";
  if (bad.size() > shown) msg << " ...";
  throw NonWatertightError(msg.str(), std::move(bad));
}

std::uint64_t meshHash(const TriMesh& mesh) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& v : mesh.vertices) {
    double c[3] = {v.x(), v.y(), v.z()};
    mix(c, sizeof(c));
  }
  for (const auto& t : mesh.triangles) {
    std::int32_t idx[3] = {t[0], t[1], t[2]};
    mix(idx, sizeof(idx));
  }
  return h;
}

TriMesh makeBox(const Vec3& size, const Vec3& center) {
  TriMesh m;
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back(center + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                                       (i & 4) ? h.z() : -h.z()));
  }
  // Each face split into two triangles, outward winding.
  const int faces[6][4] = {
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
  };
  for (const auto& f : faces) {
    m.triangles.push_back({f[0], f[1], f[2]});
    m.triangles.push_back({f[0], f[2], f[3]});
  }
  return m;
}

TriMesh makeIcoSphere(double radius, int subdivisions, const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> tris = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : verts) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 v = (verts[a] + verts[b]).normalized();
      verts.push_back(v);
      int idx = static_cast<int>(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(tris.size() * 4);
    for (const auto& tr : tris) {
      const int a = mid(tr[0], tr[1]), b = mid(tr[1], tr[2]), c = mid(tr[2], tr[0]);
      next.push_back({tr[0], a, c});
      next.push_back({tr[1], b, a});
      next.push_back({tr[2], c, b});
      next.push_back({a, b, c});
    }
    tris = std::move(next);
  }

  TriMesh m;
  m.vertices.reserve(verts.size());
  for (const auto& v : verts) m.vertices.push_back(center + radius * v);
  m.triangles = std::move(tris);
  return m;
}

TriMesh makeCylinder(double radius, double height, int radialSegments, int heightSegments) {
  TriMesh m;
  const int n = radialSegments;
  for (int r = 0; r <= heightSegments; ++r) {
    const double z = height * r / heightSegments;
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * M_PI * i / n;
      m.vertices.push_back({radius * std::cos(a), radius * std::sin(a), z});
    }
  }
  const int bottomCenter = m.vertexCount();
  m.vertices.push_back({0, 0, 0});
  const int topCenter = m.vertexCount();
  m.vertices.push_back({0, 0, height});

  for (int r = 0; r < heightSegments; ++r) {
    for (int i = 0; i < n; ++i) {
      const int i1 = (i + 1) % n;
      const int a = r * n + i, b = r * n + i1, c = (r + 1) * n + i, d = (r + 1) * n + i1;
      m.triangles.push_back({a, b, d});
      m.triangles.push_back({a, d, c});
    }
  }
  for (int i = 0; i < n; ++i) {
    const int i1 = (i + 1) % n;
    m.triangles.push_back({bottomCenter, i1, i});
    m.triangles.push_back({topCenter, heightSegments * n + i, heightSegments * n + i1});
  }
  return m;
}

TriMesh makeCapsule(const Vec3& p0, const Vec3& p1, double radius, int radialSegments,
                    int capRings) {
  const Vec3 axis = p1 - p0;
  const double len = axis.norm();
  Vec3 z = len > 1e-12 ? Vec3(axis / len) : Vec3(0, 0, 1);
  Vec3 ref = std::abs(z.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  const Vec3 x = z.cross(ref).normalized();
  const Vec3 y = z.cross(x);

  TriMesh m;
  const int n = radialSegments;
  // Rings from bottom pole to top pole. Ring latitude angle runs
  // -pi/2 .. 0 on the bottom cap, 0 .. pi/2 on the top cap.
  std::vector<double> lat, along;  // latitude, position along axis (0 or len)
  for (int r = capRings; r >= 1; --r) {
    lat.push_back(-0.5 * M_PI * r / (capRings + 1));
    along.push_back(0.0);
  }
  lat.push_back(0.0);
  along.push_back(0.0);
  lat.push_back(0.0);
  along.push_back(len);
  for (int r = 1; r <= capRings; ++r) {
    lat.push_back(0.5 * M_PI * r / (capRings + 1));
    along.push_back(len);
  }

  const int bottomPole = 0;
  m.vertices.push_back(p0 - radius * z);
  for (size_t r = 0; r < lat.size(); ++r) {
    const double c = std::cos(lat[r]), s = std::sin(lat[r]);
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * M_PI * i / n;
      const Vec3 radial = std::cos(a) * x + std::sin(a) * y;
      m.vertices.push_back(p0 + along[r] * z + radius * (c * radial + s * z));
    }
  }
  const int topPole = m.vertexCount();
  m.vertices.push_back(p1 + radius * z);

  auto ring = [&](int r, int i) { return 1 + r * n + (i % n); };
  for (int i = 0; i < n; ++i) {
    m.triangles.push_back({bottomPole, ring(0, i + 1), ring(0, i)});
  }
  const int rings = static_cast<int>(lat.size());
  for (int r = 0; r + 1 < rings; ++r) {
    for (int i = 0; i < n; ++i) {
      m.triangles.push_back({ring(r, i), ring(r, i + 1), ring(r + 1, i + 1)});
      m.triangles.push_back({ring(r, i), ring(r + 1, i + 1), ring(r + 1, i)});
    }
  }
  for (int i = 0; i < n; ++i) {
    m.triangles.push_back({topPole, ring(rings - 1, i), ring(rings - 1, i + 1)});
  }
  return m;
}

}  // namespace graspfit
