#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "secad/meshmetrics.hpp"

namespace secad {

Vec3 TriangleMesh::triangle_normal(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vec3& a = vertices[static_cast<std::size_t>(tri[0])];
  const Vec3& b = vertices[static_cast<std::size_t>(tri[1])];
  const Vec3& c = vertices[static_cast<std::size_t>(tri[2])];
  return (b - a).cross(c - a).normalized();
}

double TriangleMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vec3& a = vertices[static_cast<std::size_t>(tri[0])];
  const Vec3& b = vertices[static_cast<std::size_t>(tri[1])];
  const Vec3& c = vertices[static_cast<std::size_t>(tri[2])];
  return 0.5 * (b - a).cross(c - a).norm();
}

double TriangleMesh::area() const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
  return a;
}

double TriangleMesh::volume() const {
  double v = 0.0;
  for (const auto& tri : triangles)
    v += vertices[static_cast<std::size_t>(tri[0])].dot(
        vertices[static_cast<std::size_t>(tri[1])].cross(vertices[static_cast<std::size_t>(tri[2])]));
  return v / 6.0;
}

int TriangleMesh::euler_characteristic() const {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : triangles)
    for (int i = 0; i < 3; ++i) edges.emplace(std::min(t[i], t[(i + 1) % 3]), std::max(t[i], t[(i + 1) % 3]));
  return static_cast<int>(vertices.size()) - static_cast<int>(edges.size()) + static_cast<int>(triangles.size());
}

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross2(b - a, c - a);
  return (v > 0) - (v < 0);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
         p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1), o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1), o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

bool in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  return cross2(b - a, p - a) >= 0 && cross2(c - b, p - b) >= 0 && cross2(a - c, p - c) >= 0;
}

}  // namespace

bool polygon_self_intersects(const Polyline& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share a vertex by construction.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return true;
    }
  return false;
}

std::vector<std::array<int, 3>> triangulate_polygon(const Polyline& polygon) {
  std::vector<std::array<int, 3>> tris;
  std::vector<int> idx(polygon.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  if (signed_area(polygon) < 0) std::reverse(idx.begin(), idx.end());
  auto at = [&](int i) -> const Vec2& { return polygon[static_cast<std::size_t>(i)]; };

  while (idx.size() > 3) {
    const std::size_t n = idx.size();
    std::size_t ear = n;
    for (std::size_t i = 0; i < n && ear == n; ++i) {
      const int a = idx[(i + n - 1) % n], b = idx[i], c = idx[(i + 1) % n];
      if (cross2(at(b) - at(a), at(c) - at(b)) <= 0) continue;
      bool blocked = false;
      for (std::size_t j = 0; j < n && !blocked; ++j) {
        const int p = idx[j];
        if (p == a || p == b || p == c) continue;
        blocked = in_triangle(at(p), at(a), at(b), at(c));
      }
      if (!blocked) ear = i;
    }
    // Only degenerate (collinear) input can get here; clip anyway.
    if (ear == n) ear = 0;
    const int a = idx[(ear + n - 1) % n], b = idx[ear], c = idx[(ear + 1) % n];
    if (cross2(at(b) - at(a), at(c) - at(a)) > 0) tris.push_back({a, b, c});
    idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(ear));
  }
  if (idx.size() == 3 && cross2(at(idx[1]) - at(idx[0]), at(idx[2]) - at(idx[0])) > 0)
    tris.push_back({idx[0], idx[1], idx[2]});
  return tris;
}

TriangleMesh extrude_polygon(const Polyline& polygon, double half_height, const Vec3& center,
                             const Eigen::Quaterniond& rotation) {
  if (polygon.size() < 3) throw ValidationError("extrusion needs at least 3 vertices");
  if (polygon_self_intersects(polygon)) throw ValidationError("self-intersecting sketch polygon");
  Polyline ccw = polygon;
  if (signed_area(ccw) < 0) std::reverse(ccw.begin(), ccw.end());
  const int n = static_cast<int>(ccw.size());
  const Mat3 rot = rotation.toRotationMatrix();

  TriangleMesh mesh;
  for (double z : {-half_height, half_height})
    for (const auto& p : ccw) mesh.vertices.push_back(rot * Vec3(p.x(), p.y(), z) + center);
  for (const auto& t : triangulate_polygon(ccw)) {
    mesh.triangles.push_back({t[0], t[2], t[1]});          // bottom faces -z
    mesh.triangles.push_back({t[0] + n, t[1] + n, t[2] + n});  // top faces +z
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    mesh.triangles.push_back({i, j, j + n});
    mesh.triangles.push_back({i, j + n, i + n});
  }
  return mesh;
}

std::vector<PrimitiveMesh> mesh_primitives(const CSGTree& tree, int curve_samples, std::vector<std::string>* warnings) {
  std::vector<PrimitiveMesh> out;
  for (const auto& cyl : tree.cylinders)
    for (const auto& prim : cyl.primitives) {
      const Polyline poly = prim.loop.sample(curve_samples);
      if (polygon_self_intersects(poly)) {
        if (warnings) warnings->push_back("primitive " + std::to_string(prim.id) + ": self-intersecting loop, skipped");
        continue;
      }
      PrimitiveMesh pm;
      pm.primitive = prim.id;
      pm.head = prim.head;
      pm.additive = prim.additive();
      pm.mesh = extrude_polygon(poly, prim.half_height, prim.center, prim.rotation);
      out.push_back(std::move(pm));
    }
  return out;
}

TriangleMesh merge_meshes(const std::vector<TriangleMesh>& meshes) {
  TriangleMesh out;
  for (const auto& m : meshes) {
    const int base = static_cast<int>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
    for (const auto& t : m.triangles) out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return out;
}

std::string mesh_to_obj(const TriangleMesh& mesh) {
  std::string out;
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out += buf;
  }
  return out;
}

TriangleMesh mesh_from_obj(const std::string& text) {
  TriangleMesh mesh;
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw FormatError("malformed OBJ vertex", line_offset);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string tok;
      while (ls >> tok) {
        int idx = 0;
        try {
          idx = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw FormatError("malformed OBJ face", line_offset);
        }
        if (idx < 0) idx += static_cast<int>(mesh.vertices.size()) + 1;
        if (idx < 1 || idx > static_cast<int>(mesh.vertices.size()))
          throw FormatError("OBJ face index out of range", line_offset);
        face.push_back(idx - 1);
      }
      if (face.size() < 3) throw FormatError("OBJ face with fewer than 3 vertices", line_offset);
      for (std::size_t i = 1; i + 1 < face.size(); ++i) mesh.triangles.push_back({face[0], face[i], face[i + 1]});
    }
  }
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << mesh_to_obj(mesh);
  if (!out) throw IoError("failed writing " + path.string());
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return mesh_from_obj(ss.str());
}

}  // namespace secad
