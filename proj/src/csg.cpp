#include <algorithm>
#include <cmath>
#include <map>

#include "secad/extract.hpp"
#include "secad/parallel.hpp"

namespace secad {

ExtractedSketch extract_sketch(const ModelView& m, int head, const ExtrusionBox& box, const ExtractConfig& cfg) {
  ExtractedSketch out;
  out.head = head;
  out.box = box;
  out.raster = raster_profile(m, head, box, cfg.raster_res, cfg.window_margin);
  if (!out.raster) {
    out.warnings.push_back("head " + std::to_string(head) + ": degenerate extrusion box, skipped");
    return out;
  }
  out.hierarchy = trace_loops(*out.raster);
  if (out.hierarchy.clipped)
    out.warnings.push_back("head " + std::to_string(head) + ": contour clipped at the raster window");
  const double cell2 = out.raster->cell_x() * out.raster->cell_y();
  for (std::size_t i = 0; i < out.hierarchy.loops.size(); ++i) {
    const Loop& loop = out.hierarchy.loops[i];
    out.dominant.push_back(dominant_points(loop.points));
    const double s = cfg.smoothing_factor * static_cast<double>(loop.points.size()) * cell2;
    try {
      SplineFit fit = fit_bspline(loop.points, s, out.dominant.back());
      fit.spline.depth = loop.depth;
      out.splines.push_back(std::move(fit.spline));
    } catch (const FitError& e) {
      out.warnings.push_back("head " + std::to_string(head) + ": loop " + std::to_string(i) + " dropped (" + e.what() +
                             ")");
    }
  }
  return out;
}

std::vector<ExtractedSketch> extract_sketches(const ModelView& m, const ExtractConfig& cfg) {
  const auto boxes = decode_boxes(m);
  std::vector<ExtractedSketch> out(boxes.size());
  parallel_for(boxes.size(), [&](std::size_t i) { out[i] = extract_sketch(m, static_cast<int>(i), boxes[i], cfg); });
  return out;
}

CSGTree assemble(const std::vector<ExtractedSketch>& sketches, int curve_samples) {
  CSGTree tree;
  int next_id = 0;
  for (const auto& sk : sketches) {
    if (sk.splines.empty()) continue;
    Cylinder cyl;
    cyl.head = sk.head;
    cyl.box = sk.box;
    // Stable by depth so that ids do not depend on tracing order within a level.
    std::vector<const BSplineLoop*> loops;
    for (const auto& s : sk.splines) loops.push_back(&s);
    std::stable_sort(loops.begin(), loops.end(), [](auto* a, auto* b) { return a->depth < b->depth; });
    for (const BSplineLoop* s : loops) {
      CylinderPrimitive p;
      p.id = next_id++;
      p.head = sk.head;
      p.depth = s->depth;
      p.loop = *s;
      p.polygon = s->sample(curve_samples);
      p.half_height = sk.box.half_height();
      p.center = sk.box.center;
      p.rotation = sk.box.rotation;
      cyl.primitives.push_back(std::move(p));
    }
    tree.cylinders.push_back(std::move(cyl));
  }
  return tree;
}

bool Cylinder::contains(const Vec3& world) const {
  const Vec3 local = box.to_local(world);
  if (!(std::abs(local.z()) < box.half_height())) return false;
  const Vec2 p(local.x(), local.y());
  bool inside = false;
  for (const auto& prim : primitives)
    if (point_in_polygon(prim.polygon, p)) inside = !inside;
  return inside;
}

namespace {

CsgNode leaf(int id) {
  CsgNode n;
  n.primitive = id;
  return n;
}

CsgNode combine(CsgNode::Op op, std::vector<CsgNode> children) {
  if (children.size() == 1) return std::move(children.front());
  CsgNode n;
  n.op = op;
  n.children = std::move(children);
  return n;
}

std::optional<CsgNode> cylinder_node(const Cylinder& cyl) {
  std::map<int, std::vector<CsgNode>> by_depth;
  for (const auto& p : cyl.primitives) by_depth[p.depth].push_back(leaf(p.id));
  std::optional<CsgNode> cur;
  for (auto& [depth, nodes] : by_depth) {
    CsgNode group = combine(CsgNode::Op::Union, std::move(nodes));
    if (depth % 2 == 0) {
      cur = cur ? combine(CsgNode::Op::Union, {std::move(*cur), std::move(group)}) : std::move(group);
    } else if (cur) {
      cur = combine(CsgNode::Op::Difference, {std::move(*cur), std::move(group)});
    }
  }
  return cur;
}

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  void add(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
};

Aabb bounds(const Cylinder& c) {
  Aabb box;
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (const auto& prim : c.primitives)
    for (const auto& p : prim.polygon) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  const double h = c.box.half_height();
  for (int k = 0; k < 8; ++k) {
    const Vec3 local((k & 1) ? hi.x() : lo.x(), (k & 2) ? hi.y() : lo.y(), (k & 4) ? h : -h);
    box.add(c.box.to_world(local));
  }
  return box;
}

struct OverlapCounts {
  std::size_t a = 0, b = 0, both = 0;
  double coefficient() const {
    const std::size_t lo = std::min(a, b);
    return lo == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(lo);
  }
};

OverlapCounts overlap_counts(const Cylinder& a, const Cylinder& b, std::size_t samples, std::uint64_t seed) {
  OverlapCounts out;
  if (a.primitives.empty() || b.primitives.empty()) return out;
  Aabb box = bounds(a);
  const Aabb bb = bounds(b);
  box.add(bb.lo);
  box.add(bb.hi);
  const std::uint64_t key = counter_hash(seed, static_cast<std::uint64_t>(a.head), static_cast<std::uint64_t>(b.head));
  const Vec3 ext = box.hi - box.lo;
  for (std::size_t i = 0; i < samples; ++i) {
    const Vec3 p = box.lo + Vec3(counter_uniform(key, i, 0), counter_uniform(key, i, 1), counter_uniform(key, i, 2))
                                .cwiseProduct(ext);
    const bool in_a = a.contains(p), in_b = b.contains(p);
    out.a += in_a;
    out.b += in_b;
    out.both += in_a && in_b;
  }
  return out;
}

}  // namespace

std::optional<CsgNode> csg_nodes(const CSGTree& tree) {
  std::vector<CsgNode> parts;
  for (const auto& cyl : tree.cylinders)
    if (auto n = cylinder_node(cyl)) parts.push_back(std::move(*n));
  if (parts.empty()) return std::nullopt;
  return combine(CsgNode::Op::Union, std::move(parts));
}

double overlap_coefficient(const Cylinder& a, const Cylinder& b, std::size_t samples, std::uint64_t seed) {
  return overlap_counts(a, b, samples, seed).coefficient();
}

CSGTree postprocess(const CSGTree& tree, std::size_t mc_samples, std::uint64_t seed, double min_height,
                    double overlap_threshold, PostprocessReport* report) {
  CSGTree out;
  for (const auto& cyl : tree.cylinders) {
    const double height = 2.0 * cyl.box.half_height();
    if (height < min_height) {
      if (report)
        report->removed.push_back("cylinder " + std::to_string(cyl.head) + ": height " + std::to_string(height) +
                                  " below " + std::to_string(min_height));
      continue;
    }
    out.cylinders.push_back(cyl);
  }

  for (;;) {
    const std::size_t n = out.cylinders.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<OverlapCounts> counts(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
      counts[p] = overlap_counts(out.cylinders[pairs[p].first], out.cylinders[pairs[p].second], mc_samples, seed);
    });
    std::ptrdiff_t best = -1;
    for (std::size_t p = 0; p < pairs.size(); ++p)
      if (counts[p].coefficient() > overlap_threshold &&
          (best < 0 || counts[p].coefficient() > counts[static_cast<std::size_t>(best)].coefficient()))
        best = static_cast<std::ptrdiff_t>(p);
    if (best < 0) break;
    const auto& c = counts[static_cast<std::size_t>(best)];
    const auto [i, j] = pairs[static_cast<std::size_t>(best)];
    // Sample counts share one bounding box, so they compare volumes.
    const std::size_t drop = c.b <= c.a ? j : i;
    if (report)
      report->removed.push_back("cylinder " + std::to_string(out.cylinders[drop].head) + ": overlap " +
                                std::to_string(c.coefficient()) + " with cylinder " +
                                std::to_string(out.cylinders[drop == i ? j : i].head));
    out.cylinders.erase(out.cylinders.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  return out;
}

std::size_t primitive_count(const CSGTree& tree) {
  std::size_t n = 0;
  for (const auto& c : tree.cylinders) n += c.primitives.size();
  return n;
}

std::vector<std::uint8_t> rasterize_loops(const std::vector<BSplineLoop>& loops, const ProfileRaster& raster,
                                          int samples_per_loop) {
  std::vector<Polyline> polys;
  for (const auto& l : loops) polys.push_back(l.sample(samples_per_loop));
  std::vector<std::uint8_t> out(static_cast<std::size_t>(raster.res) * raster.res, 0);
  parallel_for(static_cast<std::size_t>(raster.res), [&](std::size_t j) {
    for (int i = 0; i < raster.res; ++i) {
      const Vec2 p = raster.cell_center(i, static_cast<int>(j));
      bool inside = false;
      for (const auto& poly : polys)
        if (point_in_polygon(poly, p)) inside = !inside;
      out[j * static_cast<std::size_t>(raster.res) + static_cast<std::size_t>(i)] = inside;
    }
  });
  return out;
}

}  // namespace secad
