// Regenerates the bundled meshes and the default hand model file under a
// target directory. Run from the repository root:
//
//   build/tools/graspfit_make_assets data
#include <cstdio>
#include <filesystem>

#include "graspfit/hand_model.hpp"
#include "graspfit/mesh.hpp"
#include "graspfit/mesh_io.hpp"

using namespace graspfit;

int main(int argc, char** argv) {
  const std::string outDir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(outDir);
  auto path = [&](const char* name) { return outDir + "/" + name; };

  saveObj(makeBox(Vec3(100, 100, 100)), path("cube.obj"));
  saveObj(makeIcoSphere(50, 3), path("sphere50.obj"));

  // Desk-object scale cylinder, centered like the sphere and cube.
  TriMesh cylinder = makeCylinder(32, 180, 24, 6);
  for (auto& v : cylinder.vertices) v.z() -= 90;
  saveObj(cylinder, path("cylinder.obj"));

  // Cube with one face left open, for watertightness error paths.
  TriMesh open = makeBox(Vec3(100, 100, 100));
  open.triangles.resize(open.triangles.size() - 2);
  saveObj(open, path("open_cube.obj"));

  saveHandModel(makeDefaultHandModel(), path("hand_default.txt"));

  std::printf("assets written to %s\n", outDir.c_str());
  return 0;
}
