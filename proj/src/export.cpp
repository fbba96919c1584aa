#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "secad/extract.hpp"

namespace secad {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string point(const Vec2& p) { return num(p.x()) + " " + num(-p.y()); }

nlohmann::json csg_node_json(const CsgNode& n) {
  if (n.op == CsgNode::Op::Leaf) return {{"leaf", n.primitive}};
  nlohmann::json children = nlohmann::json::array();
  for (const auto& c : n.children) children.push_back(csg_node_json(c));
  return {{"op", n.op == CsgNode::Op::Union ? "union" : "difference"}, {"children", children}};
}

}  // namespace

// Plane y points up; SVG y points down, hence the flipped coordinates.
std::string sketch_svg(const ExtractedSketch& sketch) {
  const double hx = sketch.raster ? sketch.raster->half_x : 0.5 * sketch.box.length();
  const double hy = sketch.raster ? sketch.raster->half_y : 0.5 * sketch.box.width();
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << num(-hx) << " " << num(-hy) << " " << num(2 * hx)
      << " " << num(2 * hy) << "\">\n";
  if (!sketch.splines.empty()) {
    out << "<path fill=\"#888\" fill-rule=\"evenodd\" stroke=\"black\" stroke-width=\"" << num(hx / 200) << "\" d=\"";
    for (const auto& s : sketch.splines) {
      const auto segs = s.bezier_segments();
      out << "M " << point(segs.front()[0]);
      for (const auto& b : segs) out << " C " << point(b[1]) << " " << point(b[2]) << " " << point(b[3]);
      out << " Z ";
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string sketches_json(const std::vector<ExtractedSketch>& sketches) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& sk : sketches) {
    const auto& b = sk.box;
    nlohmann::json loops = nlohmann::json::array();
    for (const auto& s : sk.splines) {
      nlohmann::json ctrl = nlohmann::json::array();
      for (const auto& p : s.control) ctrl.push_back({p.x(), p.y()});
      loops.push_back({{"depth", s.depth}, {"control_points", ctrl}, {"knots", s.knot_vector()}});
    }
    arr.push_back({{"head", sk.head},
                   {"center", {b.center.x(), b.center.y(), b.center.z()}},
                   {"rotation", {b.rotation.w(), b.rotation.x(), b.rotation.y(), b.rotation.z()}},
                   {"size", {{"l", b.length()}, {"w", b.width()}, {"h", b.half_height()}}},
                   {"loops", loops},
                   {"warnings", sk.warnings}});
  }
  return nlohmann::json{{"sketches", arr}}.dump(2) + "\n";
}

std::string csg_json(const CSGTree& tree) {
  const auto root = csg_nodes(tree);
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& c : tree.cylinders)
    for (const auto& p : c.primitives)
      prims.push_back({{"id", p.id},
                       {"head", p.head},
                       {"depth", p.depth},
                       {"role", p.additive() ? "additive" : "subtractive"},
                       {"half_height", p.half_height}});
  nlohmann::json doc{{"primitives", prims}, {"tree", root ? csg_node_json(*root) : nlohmann::json(nullptr)}};
  return doc.dump(2) + "\n";
}

}  // namespace secad
