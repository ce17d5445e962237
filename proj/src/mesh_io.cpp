#include "graspfit/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "graspfit/errors.hpp"

namespace graspfit {

namespace {

std::string lowerExt(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  return ext;
}

[[noreturn]] void parseFail(const std::string& path, int line, const std::string& what) {
  std::ostringstream msg;
  msg << path << ":" << line << ": " << what;
  throw ParseError(msg.str());
}

}  // namespace

TriMesh loadMesh(const std::string& path) {
  const std::string ext = lowerExt(path);
  if (ext == "ply") return loadPly(path);
  return loadObj(path);
}

TriMesh loadObj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file: " + path);
  TriMesh mesh;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z())) parseFail(path, lineNo, "bad vertex line");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "i", "i/t", "i/t/n", "i//n"
        const auto slash = tok.find('/');
        const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        int i = 0;
        try {
          i = std::stoi(head);
        } catch (const std::exception&) {
          parseFail(path, lineNo, "bad face index '" + tok + "'");
        }
        if (i < 0) i = mesh.vertexCount() + 1 + i;  // negative OBJ indices
        if (i < 1 || i > mesh.vertexCount()) parseFail(path, lineNo, "face index out of range");
        idx.push_back(i - 1);
      }
      if (idx.size() < 3) parseFail(path, lineNo, "face with fewer than 3 vertices");
      for (size_t k = 2; k < idx.size(); ++k) {
        mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
      }
    }
    // Ignore vn/vt/usemtl/etc.
  }
  return mesh;
}

void saveObj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file: " + path);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

namespace {

TriMesh loadPlyImpl(const std::string& path, std::vector<std::array<unsigned char, 3>>* colors) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file: " + path);
  std::string line;
  int lineNo = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) parseFail(path, lineNo, "unexpected end of file");
    ++lineNo;
  };
  next();
  if (line != "ply") parseFail(path, lineNo, "missing ply magic");

  int nVerts = -1, nFaces = -1;
  int vertexProps = 0;
  bool inVertexElement = false;
  bool ascii = false;
  while (true) {
    next();
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "format") {
      std::string fmt;
      ss >> fmt;
      ascii = (fmt == "ascii");
    } else if (tag == "element") {
      std::string name;
      int count;
      ss >> name >> count;
      if (name == "vertex") {
        nVerts = count;
        inVertexElement = true;
      } else {
        if (name == "face") nFaces = count;
        inVertexElement = false;
      }
    } else if (tag == "property") {
      if (inVertexElement) ++vertexProps;
    } else if (tag == "end_header") {
      break;
    } else if (tag == "comment" || tag == "obj_info") {
      continue;
    }
  }
  if (!ascii) parseFail(path, lineNo, "only ascii ply is supported");
  if (nVerts < 0 || nFaces < 0) parseFail(path, lineNo, "missing vertex or face element");
  if (colors && vertexProps < 6) parseFail(path, lineNo, "vertices carry no color properties");

  TriMesh mesh;
  mesh.vertices.reserve(nVerts);
  if (colors) colors->reserve(nVerts);
  for (int i = 0; i < nVerts; ++i) {
    next();
    std::istringstream ss(line);
    Vec3 v;
    if (!(ss >> v.x() >> v.y() >> v.z())) parseFail(path, lineNo, "bad vertex line");
    mesh.vertices.push_back(v);
    if (colors) {
      int r, g, b;
      if (!(ss >> r >> g >> b)) parseFail(path, lineNo, "bad vertex color");
      colors->push_back({static_cast<unsigned char>(r), static_cast<unsigned char>(g),
                         static_cast<unsigned char>(b)});
    }
  }
  for (int i = 0; i < nFaces; ++i) {
    next();
    std::istringstream ss(line);
    int n;
    if (!(ss >> n) || n < 3) parseFail(path, lineNo, "bad face line");
    std::vector<int> idx(n);
    for (int k = 0; k < n; ++k) {
      if (!(ss >> idx[k]) || idx[k] < 0 || idx[k] >= nVerts) {
        parseFail(path, lineNo, "face index out of range");
      }
    }
    for (int k = 2; k < n; ++k) mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
  }
  return mesh;
}

}  // namespace

TriMesh loadPly(const std::string& path) { return loadPlyImpl(path, nullptr); }

TriMesh loadPlyWithColors(const std::string& path,
                          std::vector<std::array<unsigned char, 3>>& colors) {
  colors.clear();
  return loadPlyImpl(path, &colors);
}

namespace {

void writePlyHeader(std::ofstream& out, int nVerts, int nFaces, bool colors) {
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << nVerts << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (colors) {
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  out << "element face " << nFaces << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
}

}  // namespace

void savePly(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file: " + path);
  writePlyHeader(out, mesh.vertexCount(), mesh.triangleCount(), false);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.triangles) {
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
}

void savePlyWithColors(const TriMesh& mesh, const std::vector<std::array<unsigned char, 3>>& colors,
                       const std::string& path) {
  if (colors.size() != mesh.vertices.size()) {
    throw DimensionMismatchError("color count does not match vertex count");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file: " + path);
  writePlyHeader(out, mesh.vertexCount(), mesh.triangleCount(), true);
  char buf[160];
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    const auto& c = colors[i];
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d %d %d\n", v.x(), v.y(), v.z(), c[0], c[1],
                  c[2]);
    out << buf;
  }
  for (const auto& t : mesh.triangles) {
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
}

}  // namespace graspfit
