#include <algorithm>
#include <unordered_map>

#include "secad/meshmetrics.hpp"
#include "secad/parallel.hpp"

namespace secad {

namespace {

// Corner c sits at (c & 1, (c >> 1) & 1, (c >> 2) & 1).
constexpr std::array<std::array<int, 2>, 12> kEdges{{{0, 1},
                                                     {2, 3},
                                                     {4, 5},
                                                     {6, 7},
                                                     {0, 2},
                                                     {1, 3},
                                                     {4, 6},
                                                     {5, 7},
                                                     {0, 4},
                                                     {1, 5},
                                                     {2, 6},
                                                     {3, 7}}};

// Face corners counter-clockwise when seen from outside the cube.
constexpr std::array<std::array<int, 4>, 6> kFaces{
    {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}}};

int edge_index(int a, int b) {
  for (int e = 0; e < 12; ++e)
    if ((kEdges[e][0] == a && kEdges[e][1] == b) || (kEdges[e][0] == b && kEdges[e][1] == a)) return e;
  return -1;
}

// Each face contributes segments from the crossing where its boundary walk
// enters the inside to the crossing where it leaves; diagonal inside corners
// stay separated. Adjacent cubes see the same face decision, and the segments
// chain into cycles whose fans face away from the inside.
std::vector<std::array<int, 3>> build_case(int mask) {
  std::array<int, 12> next;
  next.fill(-1);
  for (const auto& face : kFaces) {
    std::vector<std::pair<int, bool>> crossings;  // (edge, entering)
    for (int i = 0; i < 4; ++i) {
      const int a = face[i], b = face[(i + 1) % 4];
      const bool ia = (mask >> a) & 1, ib = (mask >> b) & 1;
      if (ia != ib) crossings.emplace_back(edge_index(a, b), ib);
    }
    if (crossings.empty()) continue;
    // Rotate so the walk starts with an entering crossing.
    while (!crossings.front().second) std::rotate(crossings.begin(), crossings.begin() + 1, crossings.end());
    for (std::size_t i = 0; i < crossings.size(); i += 2) next[crossings[i].first] = crossings[i + 1].first;
  }
  std::vector<std::array<int, 3>> tris;
  std::array<bool, 12> used{};
  for (int start = 0; start < 12; ++start) {
    if (next[start] < 0 || used[start]) continue;
    std::vector<int> cycle;
    for (int e = start; !used[e]; e = next[e]) {
      used[e] = true;
      cycle.push_back(e);
    }
    for (std::size_t i = 1; i + 1 < cycle.size(); ++i) tris.push_back({cycle[0], cycle[i], cycle[i + 1]});
  }
  return tris;
}

}  // namespace

const std::array<std::vector<std::array<int, 3>>, 256>& marching_cubes_table() {
  static const auto table = [] {
    std::array<std::vector<std::array<int, 3>>, 256> t;
    for (int m = 0; m < 256; ++m) t[m] = build_case(m);
    return t;
  }();
  return table;
}

TriangleMesh marching_cubes(const ScalarField& field, const MarchingCubesOptions& opts) {
  const int res = opts.res;
  if (res < 2) throw ValidationError("marching cubes resolution must be >= 2");
  const auto& table = marching_cubes_table();
  const auto r = static_cast<std::size_t>(res);
  auto coord = [&](int i) { return -0.5 + (i + 0.5) / res; };

  std::vector<double> values(r * r * r);
  {
    std::vector<Vec3> slice(r * r);
    for (int k = 0; k < res; ++k) {
      for (int j = 0; j < res; ++j)
        for (int i = 0; i < res; ++i) slice[static_cast<std::size_t>(j) * r + i] = Vec3(coord(i), coord(j), coord(k));
      field(slice, std::span<double>(values.data() + static_cast<std::size_t>(k) * r * r, r * r));
    }
  }
  auto node = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * r + j) * r + i; };
  auto inside = [&](double v) { return opts.inside_above ? v > opts.iso : v < opts.iso; };

  // Lattice edges are keyed by (node, axis) so that neighbouring cells weld.
  const int corner_offset[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                                   {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
  std::vector<std::vector<std::array<std::uint64_t, 3>>> slab_tris(r - 1);
  parallel_for(r - 1, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    auto& out = slab_tris[kk];
    for (int j = 0; j + 1 < res; ++j)
      for (int i = 0; i + 1 < res; ++i) {
        int mask = 0;
        for (int c = 0; c < 8; ++c)
          if (inside(values[node(i + corner_offset[c][0], j + corner_offset[c][1], k + corner_offset[c][2])]))
            mask |= 1 << c;
        if (mask == 0 || mask == 255) continue;
        for (const auto& tri : table[static_cast<std::size_t>(mask)]) {
          std::array<std::uint64_t, 3> keys;
          for (int v = 0; v < 3; ++v) {
            const auto& e = kEdges[static_cast<std::size_t>(tri[v])];
            const int* a = corner_offset[e[0]];
            const int* b = corner_offset[e[1]];
            const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
            const std::size_t base =
                node(i + std::min(a[0], b[0]), j + std::min(a[1], b[1]), k + std::min(a[2], b[2]));
            keys[v] = static_cast<std::uint64_t>(base) * 3 + static_cast<std::uint64_t>(axis);
          }
          out.push_back(keys);
        }
      }
  });

  auto position = [&](std::uint64_t key) {
    const std::size_t n0 = key / 3;
    const int axis = static_cast<int>(key % 3);
    const int i = static_cast<int>(n0 % r), j = static_cast<int>((n0 / r) % r), k = static_cast<int>(n0 / (r * r));
    const int i1 = i + (axis == 0), j1 = j + (axis == 1), k1 = k + (axis == 2);
    const double va = values[n0], vb = values[node(i1, j1, k1)];
    const double t = std::clamp((opts.iso - va) / (vb - va), 0.0, 1.0);
    const Vec3 pa(coord(i), coord(j), coord(k)), pb(coord(i1), coord(j1), coord(k1));
    return Vec3(pa + t * (pb - pa));
  };
  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, int> index;
  auto vertex = [&](std::uint64_t key, const Vec3& p) {
    auto [it, fresh] = index.try_emplace(key, static_cast<int>(mesh.vertices.size()));
    if (fresh) mesh.vertices.push_back(p);
    return it->second;
  };
  for (const auto& slab : slab_tris)
    for (const auto& keys : slab) {
      const Vec3 a = position(keys[0]), b = position(keys[1]), c = position(keys[2]);
      if ((b - a).cross(c - a).squaredNorm() <= 1e-30) continue;
      mesh.triangles.push_back({vertex(keys[0], a), vertex(keys[1], b), vertex(keys[2], c)});
    }
  return mesh;
}

}  // namespace secad
