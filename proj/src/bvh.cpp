#include "graspfit/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace graspfit {

Vec3 closestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

bool rayTriangle(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c,
                 double& t, bool& grazing, double tMin) {
  grazing = false;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  const double scale = e1.norm() * e2.norm() * dir.norm();
  if (std::abs(det) < 1e-12 * scale) {
    grazing = true;  // near-parallel; caller decides
    return false;
  }
  const double invDet = 1.0 / det;
  const Vec3 tvec = orig - a;
  const double u = tvec.dot(pvec) * invDet;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * invDet;
  const double eps = 1e-10;
  if (u < -eps || v < -eps || u + v > 1 + eps) return false;
  t = e2.dot(qvec) * invDet;
  if (t <= tMin) return false;
  if (u < eps || v < eps || u + v > 1 - eps || t < tMin + eps * (1 + std::abs(tMin))) {
    grazing = true;
  }
  return true;
}

double windingNumber(const TriMesh& mesh, const Vec3& p) {
  // Van Oosterom & Strackee solid-angle sum.
  double total = 0;
  for (const auto& tr : mesh.triangles) {
    const Vec3 a = mesh.vertices[tr[0]] - p;
    const Vec3 b = mesh.vertices[tr[1]] - p;
    const Vec3 c = mesh.vertices[tr[2]] - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * M_PI);
}

MeshBVH::MeshBVH(const TriMesh& mesh) : mesh_(mesh) {
  const int n = mesh.triangleCount();
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  if (n == 0) return;
  std::vector<Vec3> centroids(n);
  for (int i = 0; i < n; ++i) {
    const auto& t = mesh.triangles[i];
    centroids[i] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
  }
  nodes_.reserve(2 * n);
  build(0, n, centroids);
}

int MeshBVH::build(int begin, int end, std::vector<Vec3>& centroids) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (int i = begin; i < end; ++i) {
    const auto& t = mesh_.triangles[order_[i]];
    for (int k = 0; k < 3; ++k) {
      node.lo = node.lo.cwiseMin(mesh_.vertices[t[k]]);
      node.hi = node.hi.cwiseMax(mesh_.vertices[t[k]]);
    }
  }
  const int idx = static_cast<int>(nodes_.size());
  nodes_.push_back(node);

  if (end - begin <= 4) {
    nodes_[idx].begin = begin;
    nodes_[idx].end = end;
    return idx;
  }

  Vec3 clo = Vec3::Constant(std::numeric_limits<double>::infinity()), chi = -clo;
  for (int i = begin; i < end; ++i) {
    clo = clo.cwiseMin(centroids[order_[i]]);
    chi = chi.cwiseMax(centroids[order_[i]]);
  }
  int axis = 0;
  const Vec3 ext = chi - clo;
  if (ext.y() > ext.x()) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;

  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (centroids[a][axis] != centroids[b][axis]) {
                       return centroids[a][axis] < centroids[b][axis];
                     }
                     return a < b;
                   });

  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[idx].left = left;
  nodes_[idx].right = right;
  return idx;
}

namespace {

double boxDistanceSq(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d2 = 0;
  for (int k = 0; k < 3; ++k) {
    const double d = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
    d2 += d * d;
  }
  return d2;
}

bool rayBox(const Vec3& orig, const Vec3& invDir, const Vec3& lo, const Vec3& hi) {
  double t0 = 0, t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    double a = (lo[k] - orig[k]) * invDir[k];
    double b = (hi[k] - orig[k]) * invDir[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

void MeshBVH::distanceRec(int ni, const Vec3& p, double& best, Vec3& bestPoint) const {
  const Node& node = nodes_[ni];
  if (boxDistanceSq(p, node.lo, node.hi) >= best * best) return;
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const auto& t = mesh_.triangles[order_[i]];
      const Vec3 q = closestPointOnTriangle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                            mesh_.vertices[t[2]]);
      const double d = (q - p).norm();
      if (d < best) {
        best = d;
        bestPoint = q;
      }
    }
    return;
  }
  const double dl = boxDistanceSq(p, nodes_[node.left].lo, nodes_[node.left].hi);
  const double dr = boxDistanceSq(p, nodes_[node.right].lo, nodes_[node.right].hi);
  if (dl < dr) {
    distanceRec(node.left, p, best, bestPoint);
    distanceRec(node.right, p, best, bestPoint);
  } else {
    distanceRec(node.right, p, best, bestPoint);
    distanceRec(node.left, p, best, bestPoint);
  }
}

double MeshBVH::unsignedDistance(const Vec3& p, Vec3* closest) const {
  if (nodes_.empty()) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  Vec3 bestPoint = Vec3::Zero();
  distanceRec(0, p, best, bestPoint);
  if (closest) *closest = bestPoint;
  return best;
}

void MeshBVH::rayRec(int ni, const Vec3& orig, const Vec3& dir, const Vec3& invDir, int& hits,
                     bool& anyGrazing) const {
  const Node& node = nodes_[ni];
  if (!rayBox(orig, invDir, node.lo, node.hi)) return;
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const auto& t = mesh_.triangles[order_[i]];
      double tt;
      bool grazing;
      if (rayTriangle(orig, dir, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]],
                      tt, grazing)) {
        ++hits;
      }
      if (grazing) anyGrazing = true;
    }
    return;
  }
  rayRec(node.left, orig, dir, invDir, hits, anyGrazing);
  rayRec(node.right, orig, dir, invDir, hits, anyGrazing);
}

int MeshBVH::countRayHits(const Vec3& orig, const Vec3& dir) const {
  if (nodes_.empty()) return 0;
  Vec3 invDir;
  for (int k = 0; k < 3; ++k) {
    invDir[k] = dir[k] != 0 ? 1.0 / dir[k] : std::numeric_limits<double>::infinity();
  }
  int hits = 0;
  bool anyGrazing = false;
  rayRec(0, orig, dir, invDir, hits, anyGrazing);
  return anyGrazing ? -1 : hits;
}

bool MeshBVH::insideByParity(const Vec3& p) const {
  // Fixed irrational-ish directions; the first clean count wins.
  static const Vec3 dirs[] = {
      Vec3(0.577215664901532, 0.301029995663981, 0.760906245273913).normalized(),
      Vec3(-0.414213562373095, 0.693147180559945, 0.541324854612918).normalized(),
      Vec3(0.267949192431123, -0.832554611157698, 0.485868271756644).normalized(),
      Vec3(0.912931182772389, 0.172717921573567, -0.369742129813348).normalized(),
      Vec3(-0.618033988749895, -0.214319743377536, 0.756392930651707).normalized(),
  };
  for (const auto& d : dirs) {
    const int hits = countRayHits(p, d);
    if (hits >= 0) return (hits % 2) == 1;
  }
  // Degenerate in every direction; fall back to winding number.
  return windingNumber(mesh_, p) > 0.5;
}

}  // namespace graspfit
