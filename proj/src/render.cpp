#include "graspfit/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "graspfit/errors.hpp"

namespace graspfit {

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw DegenerateCameraError("focal length must be positive");
  if (width <= 0 || height <= 0) throw DegenerateCameraError("image size must be positive");
  if (!(cx >= 0) || cx >= width || !(cy >= 0) || cy >= height) {
    throw DegenerateCameraError("principal point must lie inside the image");
  }
  if (!worldToCamera.rotation.allFinite() || !worldToCamera.translation.allFinite()) {
    throw DegenerateCameraError("non-finite extrinsics");
  }
}

Camera lookAtCamera(const Vec3& position, const Vec3& target, const Vec3& up, double focalPx,
                    int width, int height) {
  const Vec3 forward = (target - position).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3(1, 0, 0));
  right.normalize();
  const Vec3 down = forward.cross(right);  // +y in image coordinates

  Camera cam;
  cam.fx = cam.fy = focalPx;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  cam.worldToCamera = {r, -(r * position)};
  return cam;
}

namespace {

constexpr double kZNear = 1.0;  // mm

// Clips a camera-frame triangle against z >= kZNear (Sutherland-Hodgman),
// then appends the resulting fan to `out`.
void clipNear(const Vec3& a, const Vec3& b, const Vec3& c, std::vector<Vec3>& poly,
              std::vector<std::array<Vec3, 3>>& out) {
  poly.clear();
  const Vec3 in[3] = {a, b, c};
  for (int i = 0; i < 3; ++i) {
    const Vec3& cur = in[i];
    const Vec3& prev = in[(i + 2) % 3];
    const bool curIn = cur.z() >= kZNear;
    const bool prevIn = prev.z() >= kZNear;
    if (curIn != prevIn) {
      const double s = (kZNear - prev.z()) / (cur.z() - prev.z());
      poly.push_back(prev + s * (cur - prev));
    }
    if (curIn) poly.push_back(cur);
  }
  for (std::size_t i = 2; i < poly.size(); ++i) {
    out.push_back({poly[0], poly[i - 1], poly[i]});
  }
}

void rasterizeMesh(const TriMesh& mesh, PixelClass cls, const Camera& cam, LabelImage& img) {
  std::vector<Vec3> camVerts(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    camVerts[i] = cam.toCamera(mesh.vertices[i]);
  }

  std::vector<Vec3> poly;
  std::vector<std::array<Vec3, 3>> clipped;
  for (const auto& tri : mesh.triangles) {
    clipped.clear();
    clipNear(camVerts[tri[0]], camVerts[tri[1]], camVerts[tri[2]], poly, clipped);
    for (const auto& t : clipped) {
      Eigen::Vector2d s[3];
      double invZ[3];
      for (int i = 0; i < 3; ++i) {
        s[i] = cam.project(t[i]);
        invZ[i] = 1.0 / t[i].z();
      }
      const double area = (s[1].x() - s[0].x()) * (s[2].y() - s[0].y()) -
                          (s[1].y() - s[0].y()) * (s[2].x() - s[0].x());
      if (std::abs(area) < 1e-12) continue;

      const double xMin = std::min({s[0].x(), s[1].x(), s[2].x()});
      const double xMax = std::max({s[0].x(), s[1].x(), s[2].x()});
      const double yMin = std::min({s[0].y(), s[1].y(), s[2].y()});
      const double yMax = std::max({s[0].y(), s[1].y(), s[2].y()});
      const int x0 = std::max(0, static_cast<int>(std::floor(xMin - 0.5)));
      const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(xMax - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::floor(yMin - 0.5)));
      const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(yMax - 0.5)));

      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double px = x + 0.5, py = y + 0.5;
          const double w0 = ((s[1].x() - px) * (s[2].y() - py) - (s[1].y() - py) * (s[2].x() - px)) / area;
          const double w1 = ((s[2].x() - px) * (s[0].y() - py) - (s[2].y() - py) * (s[0].x() - px)) / area;
          const double w2 = 1.0 - w0 - w1;
          if (w0 < 0 || w1 < 0 || w2 < 0) continue;
          // 1/z is affine in screen space, so this is perspective correct.
          const double z = 1.0 / (w0 * invZ[0] + w1 * invZ[1] + w2 * invZ[2]);
          const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
          if (z < img.depth[i]) {
            img.depth[i] = z;
            img.label[i] = cls;
          }
        }
      }
    }
  }
}

}  // namespace

LabelImage rasterize(const TriMesh* handMesh, const TriMesh* objectMesh, const Camera& camera) {
  camera.validate();
  LabelImage img(camera.width, camera.height);
  if (objectMesh) rasterizeMesh(*objectMesh, PixelClass::kObject, camera, img);
  if (handMesh) rasterizeMesh(*handMesh, PixelClass::kPerson, camera, img);
  return img;
}

void saveLabelPgm(const LabelImage& image, const std::string& path) {
  ImageU8 out(image.width, image.height);
  for (std::size_t i = 0; i < image.label.size(); ++i) {
    switch (image.label[i]) {
      case PixelClass::kBackground: out.data()[i] = 0; break;
      case PixelClass::kObject: out.data()[i] = 128; break;
      case PixelClass::kPerson: out.data()[i] = 255; break;
    }
  }
  savePgm8(out, path);
}

LabelImage loadLabelPgm(const std::string& path) {
  const ImageU8 in = loadPgm8(path);
  LabelImage img(in.width(), in.height());
  for (std::size_t i = 0; i < img.label.size(); ++i) {
    switch (in.data()[i]) {
      case 0: img.label[i] = PixelClass::kBackground; break;
      case 128: img.label[i] = PixelClass::kObject; break;
      case 255: img.label[i] = PixelClass::kPerson; break;
      default: throw ParseError(path + ": label value must be 0, 128 or 255");
    }
    if (img.label[i] != PixelClass::kBackground) img.depth[i] = 0;
  }
  return img;
}

void saveDepthPgm(const LabelImage& image, const std::string& path) {
  ImageU16 out(image.width, image.height);
  for (std::size_t i = 0; i < image.depth.size(); ++i) {
    const double d = image.depth[i];
    if (!std::isfinite(d)) {
      out.data()[i] = 0;
    } else {
      out.data()[i] = static_cast<std::uint16_t>(
          std::clamp(std::floor(d * 10.0 + 0.5), 1.0, 65535.0));
    }
  }
  savePgm16(out, path);
}

void saveCameras(const std::vector<Camera>& cameras, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write cameras: " + path);
  char buf[512];
  out << "cameras " << cameras.size() << "\n";
  for (const Camera& cam : cameras) {
    std::snprintf(buf, sizeof(buf), "intrinsics %.17g %.17g %.17g %.17g %d %d\n", cam.fx, cam.fy,
                  cam.cx, cam.cy, cam.width, cam.height);
    out << buf;
    out << "extrinsics";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof(buf), " %.17g", cam.worldToCamera.rotation(r, c));
        out << buf;
      }
    }
    for (int k = 0; k < 3; ++k) {
      std::snprintf(buf, sizeof(buf), " %.17g", cam.worldToCamera.translation[k]);
      out << buf;
    }
    out << '\n';
  }
}

std::vector<Camera> loadCameras(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open cameras: " + path);
  std::string tag;
  int count = 0;
  if (!(in >> tag >> count) || tag != "cameras" || count < 0) {
    throw ParseError(path + ": expected 'cameras <count>' header");
  }
  std::vector<Camera> cameras(count);
  for (Camera& cam : cameras) {
    if (!(in >> tag) || tag != "intrinsics") throw ParseError(path + ": expected intrinsics");
    in >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height;
    if (!(in >> tag) || tag != "extrinsics") throw ParseError(path + ": expected extrinsics");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) in >> cam.worldToCamera.rotation(r, c);
    }
    for (int k = 0; k < 3; ++k) in >> cam.worldToCamera.translation[k];
    if (!in) throw ParseError(path + ": truncated camera block");
    cam.validate();
  }
  return cameras;
}

}  // namespace graspfit
