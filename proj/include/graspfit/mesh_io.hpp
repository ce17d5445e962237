#pragma once

#include <array>
#include <string>

#include "graspfit/mesh.hpp"

namespace graspfit {

// Loads OBJ or ASCII PLY depending on the file extension.
TriMesh loadMesh(const std::string& path);

TriMesh loadObj(const std::string& path);
void saveObj(const TriMesh& mesh, const std::string& path);

TriMesh loadPly(const std::string& path);
void savePly(const TriMesh& mesh, const std::string& path);

// PLY with per-vertex uchar colors (contact visualizations).
void savePlyWithColors(const TriMesh& mesh, const std::vector<std::array<unsigned char, 3>>& colors,
                       const std::string& path);
TriMesh loadPlyWithColors(const std::string& path,
                          std::vector<std::array<unsigned char, 3>>& colors);

}  // namespace graspfit
