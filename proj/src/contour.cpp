#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "secad/extract.hpp"

namespace secad {

double signed_area(const Polyline& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

bool point_in_polygon(const Polyline& poly, const Vec2& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

namespace {

// Cell corners: 0 (I, J), 1 (I+1, J), 2 (I+1, J+1), 3 (I, J+1).
// Cell edges: 0 bottom (c0-c1), 1 right (c1-c2), 2 top (c3-c2), 3 left (c0-c3).
constexpr std::array<std::array<int, 2>, 4> kCornerEdges{{{0, 3}, {0, 1}, {1, 2}, {2, 3}}};
constexpr std::array<std::array<double, 2>, 4> kCornerPos{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
constexpr std::array<std::array<double, 2>, 4> kEdgeMid{{{0.5, 0}, {1, 0.5}, {0.5, 1}, {0, 0.5}}};

struct Segment {
  int from, to;  // cell edge indices, inside region on the left
};

// Orients the segment between edges a and b so that `corner` lies on the
// requested side.
Segment orient(int a, int b, int corner, bool corner_inside) {
  const double dx = kEdgeMid[b][0] - kEdgeMid[a][0], dy = kEdgeMid[b][1] - kEdgeMid[a][1];
  const double cx = kCornerPos[corner][0] - kEdgeMid[a][0], cy = kCornerPos[corner][1] - kEdgeMid[a][1];
  const bool left = dx * cy - dy * cx > 0;
  return left == corner_inside ? Segment{a, b} : Segment{b, a};
}

Segment cut_corner(int corner, bool corner_inside) {
  return orient(kCornerEdges[corner][0], kCornerEdges[corner][1], corner, corner_inside);
}

std::vector<Segment> cell_segments(const std::array<bool, 4>& in, bool center_inside) {
  const int count = in[0] + in[1] + in[2] + in[3];
  std::vector<Segment> out;
  if (count == 0 || count == 4) return out;
  if (count == 1 || count == 3) {
    const bool lone = count == 1;
    for (int c = 0; c < 4; ++c)
      if (in[c] == lone) out.push_back(cut_corner(c, lone));
    return out;
  }
  if (in[0] == in[2]) {
    // Saddle: separate whichever pair the center does not belong to.
    for (int c = 0; c < 4; ++c)
      if (in[c] != center_inside) out.push_back(cut_corner(c, in[c]));
    return out;
  }
  // Two adjacent inside corners: a single segment through the two crossed edges.
  std::array<int, 2> edges{};
  int k = 0;
  for (int e = 0; e < 4; ++e) {
    const int a = e == 2 ? 3 : e, b = e == 3 ? 3 : (e == 2 ? 2 : e + 1);
    const int ca = e == 3 ? 0 : a, cb = b;
    if (in[ca] != in[cb]) edges[static_cast<std::size_t>(k++)] = e;
  }
  int inside_corner = 0;
  while (!in[inside_corner]) ++inside_corner;
  out.push_back(orient(edges[0], edges[1], inside_corner, true));
  return out;
}

}  // namespace

LoopHierarchy trace_loops(const ProfileRaster& raster, double iso, std::size_t min_vertices, double min_area_cells) {
  const int res = raster.res;
  const int w = res + 2;  // padded node lattice
  auto node_value = [&](int I, int J) {
    if (I < 1 || J < 1 || I > res || J > res) return iso + 1.0;
    return raster.value(I - 1, J - 1);
  };
  auto node_pos = [&](int I, int J) {
    return Vec2(-raster.half_x + (I - 0.5) * raster.cell_x(), -raster.half_y + (J - 0.5) * raster.cell_y());
  };
  auto is_pad = [&](int I, int J) { return I < 1 || J < 1 || I > res || J > res; };
  for (double v : raster.values)
    if (!std::isfinite(v)) throw ValidationError("profile raster contains non-finite values");

  // Global edge id: horizontal edge (I,J)-(I+1,J) -> 2*(J*w+I); vertical (I,J)-(I,J+1) -> 2*(J*w+I)+1.
  auto edge_id = [&](int I, int J, int e) -> long {
    switch (e) {
      case 0: return 2L * (static_cast<long>(J) * w + I);
      case 1: return 2L * (static_cast<long>(J) * w + I + 1) + 1;
      case 2: return 2L * (static_cast<long>(J + 1) * w + I);
      default: return 2L * (static_cast<long>(J) * w + I) + 1;
    }
  };
  std::unordered_map<long, long> next;
  for (int J = 0; J + 1 < w; ++J)
    for (int I = 0; I + 1 < w; ++I) {
      const std::array<double, 4> v{node_value(I, J), node_value(I + 1, J), node_value(I + 1, J + 1), node_value(I, J + 1)};
      const std::array<bool, 4> in{v[0] < iso, v[1] < iso, v[2] < iso, v[3] < iso};
      const bool center_in = 0.25 * (v[0] + v[1] + v[2] + v[3]) < iso;
      for (const auto& seg : cell_segments(in, center_in)) next[edge_id(I, J, seg.from)] = edge_id(I, J, seg.to);
    }

  auto edge_vertex = [&](long id, bool& clipped) {
    const long base = id / 2;
    const int I = static_cast<int>(base % w), J = static_cast<int>(base / w);
    const int I2 = (id % 2 == 0) ? I + 1 : I;
    const int J2 = (id % 2 == 0) ? J : J + 1;
    const double a = node_value(I, J), b = node_value(I2, J2);
    const double t = (iso - a) / (b - a);
    Vec2 p = node_pos(I, J) + t * (node_pos(I2, J2) - node_pos(I, J));
    if (is_pad(I, J) || is_pad(I2, J2)) clipped = true;
    p.x() = std::clamp(p.x(), -raster.half_x, raster.half_x);
    p.y() = std::clamp(p.y(), -raster.half_y, raster.half_y);
    return p;
  };

  std::vector<long> starts;
  starts.reserve(next.size());
  for (const auto& [from, _] : next) starts.push_back(from);
  std::sort(starts.begin(), starts.end());
  std::unordered_map<long, bool> visited;
  LoopHierarchy out;
  const double cell_area = raster.cell_x() * raster.cell_y();
  for (long s : starts) {
    if (visited[s]) continue;
    Loop loop;
    long cur = s;
    while (!visited[cur]) {
      visited[cur] = true;
      loop.points.push_back(edge_vertex(cur, loop.clipped));
      auto it = next.find(cur);
      if (it == next.end()) break;
      cur = it->second;
    }
    // Drop consecutive duplicates (iso exactly at a node).
    Polyline clean;
    for (const auto& p : loop.points)
      if (clean.empty() || (p - clean.back()).norm() > 1e-12) clean.push_back(p);
    while (clean.size() > 1 && (clean.front() - clean.back()).norm() <= 1e-12) clean.pop_back();
    loop.points = std::move(clean);
    if (loop.points.size() < min_vertices) continue;
    if (std::abs(signed_area(loop.points)) < min_area_cells * cell_area) continue;
    out.clipped = out.clipped || loop.clipped;
    out.loops.push_back(std::move(loop));
  }

  // Containment forest: parent is the smallest enclosing loop.
  const std::size_t n = out.loops.size();
  std::vector<double> areas(n);
  for (std::size_t i = 0; i < n; ++i) areas[i] = std::abs(signed_area(out.loops[i].points));
  for (std::size_t i = 0; i < n; ++i) {
    int depth = 0, parent = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !point_in_polygon(out.loops[j].points, out.loops[i].points.front())) continue;
      ++depth;
      if (parent < 0 || areas[j] < areas[static_cast<std::size_t>(parent)]) parent = static_cast<int>(j);
    }
    out.loops[i].depth = depth;
    out.loops[i].parent = parent;
  }
  for (auto& loop : out.loops) {
    const bool ccw = signed_area(loop.points) > 0;
    if (ccw != (loop.depth % 2 == 0)) std::reverse(loop.points.begin(), loop.points.end());
  }
  return out;
}

}  // namespace secad
