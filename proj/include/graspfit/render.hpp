#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "graspfit/image.hpp"
#include "graspfit/mesh.hpp"
#include "graspfit/types.hpp"

namespace graspfit {

enum class PixelClass : std::uint8_t { kBackground = 0, kObject = 1, kPerson = 2 };
inline constexpr int kClassCount = 3;

struct Camera {
  double fx = 0, fy = 0;  // focal length, pixels
  double cx = 0, cy = 0;  // principal point, pixels
  int width = 0, height = 0;
  RigidTransform worldToCamera;  // mm; camera looks along +z

  void validate() const;  // throws DegenerateCameraError

  Vec3 toCamera(const Vec3& world) const { return worldToCamera.apply(world); }
  // Pixel coordinates of a camera-frame point (z > 0).
  Eigen::Vector2d project(const Vec3& cam) const {
    return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
  }
};

// Camera at `position` looking at `target`, `up` fixing the roll.
Camera lookAtCamera(const Vec3& position, const Vec3& target, const Vec3& up, double focalPx,
                    int width, int height);

struct LabelImage {
  int width = 0, height = 0;
  std::vector<PixelClass> label;
  std::vector<double> depth;  // mm, +inf where background

  LabelImage() = default;
  LabelImage(int w, int h)
      : width(w),
        height(h),
        label(static_cast<std::size_t>(w) * h, PixelClass::kBackground),
        depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()) {}

  PixelClass at(int x, int y) const { return label[static_cast<std::size_t>(y) * width + x]; }
  double depthAt(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
};

// Z-buffered rasterization of the object then the hand; nearest surface wins
// per pixel center, sampled at (x + 0.5, y + 0.5). Either mesh may be null.
LabelImage rasterize(const TriMesh* handMesh, const TriMesh* objectMesh, const Camera& camera);

// 8-bit labels: background 0, object 128, person 255.
void saveLabelPgm(const LabelImage& image, const std::string& path);
LabelImage loadLabelPgm(const std::string& path);
// 16-bit depth in 0.1 mm units, 0 = background; values saturate at 6553.5 mm.
void saveDepthPgm(const LabelImage& image, const std::string& path);

// Text serialization of camera intrinsics + extrinsics, one camera per block.
void saveCameras(const std::vector<Camera>& cameras, const std::string& path);
std::vector<Camera> loadCameras(const std::string& path);

}  // namespace graspfit
