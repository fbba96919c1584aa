#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>

#include "secad/extract.hpp"
#include "support.hpp"

using namespace secad;

namespace {

ProfileRaster circle_raster(double r, int res = 256, double half = 0.5) {
  return make_raster(res, half, half, [r](const Vec2& p) { return p.norm() - r; });
}

ProfileRaster annulus_raster(double outer, double inner, int res = 256, double half = 0.5) {
  return make_raster(res, half, half, [=](const Vec2& p) { return std::max(p.norm() - outer, inner - p.norm()); });
}

std::vector<BSplineLoop> fit_loops(const ProfileRaster& raster) {
  const LoopHierarchy h = trace_loops(raster);
  std::vector<BSplineLoop> out;
  for (const auto& loop : h.loops) {
    const double s = 0.25 * static_cast<double>(loop.points.size()) * raster.cell_x() * raster.cell_y();
    SplineFit fit = fit_bspline(loop.points, s, dominant_points(loop.points));
    fit.spline.depth = loop.depth;
    out.push_back(fit.spline);
  }
  return out;
}

double round_trip_iou(const ProfileRaster& raster) {
  const auto mask = rasterize_loops(fit_loops(raster), raster);
  std::size_t inter = 0, uni = 0;
  for (int j = 0; j < raster.res; ++j)
    for (int i = 0; i < raster.res; ++i) {
      const bool a = raster.value(i, j) < 0.0, b = mask[static_cast<std::size_t>(j) * raster.res + i] != 0;
      inter += a && b;
      uni += a || b;
    }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Lattice boundary of an axis-aligned square, `side` unit steps per edge, CCW.
Polyline digital_square(int side) {
  Polyline p;
  for (int i = 0; i < side; ++i) p.emplace_back(i, 0);
  for (int i = 0; i < side; ++i) p.emplace_back(side, i);
  for (int i = 0; i < side; ++i) p.emplace_back(side - i, side);
  for (int i = 0; i < side; ++i) p.emplace_back(0, side - i);
  return p;
}

ExtractedSketch sketch_from(const ProfileRaster& raster, int head, const ExtrusionBox& box) {
  ExtractedSketch s;
  s.head = head;
  s.box = box;
  s.raster = raster;
  s.hierarchy = trace_loops(raster);
  s.splines = fit_loops(raster);
  return s;
}

Cylinder disk_cylinder(int head, double r, double h, const Vec3& center = Vec3::Zero()) {
  ExtrusionBox box;
  box.size = Vec3(2 * r, 2 * r, h);
  box.center = center;
  Cylinder c;
  c.head = head;
  c.box = box;
  CylinderPrimitive p;
  p.id = head;
  p.head = head;
  p.polygon = fixtures::circle_polyline(r, 96);
  p.half_height = h;
  p.center = center;
  c.primitives.push_back(p);
  return c;
}

}  // namespace

TEST(Raster, CellCentersAndSampling) {
  const ProfileRaster r = make_raster(4, 1.0, 0.5, [](const Vec2& p) { return 2 * p.x() + p.y(); });
  EXPECT_EQ(r.cell_center(0, 0), Vec2(-0.75, -0.375));
  EXPECT_EQ(r.value(3, 1), 2 * 0.75 - 0.125);
  // Bilinear sampling reproduces an affine field between cell centers.
  EXPECT_NEAR(r.sample(Vec2(0.1, 0.05)), 0.25, 1e-15);
  EXPECT_EQ(r.sample(Vec2(5.0, 0.0)), r.sample(Vec2(0.75, 0.0)));
}

TEST(Contour, CircleGivesOneOuterLoop) {
  const ProfileRaster r = circle_raster(0.3);
  const LoopHierarchy h = trace_loops(r);
  ASSERT_EQ(h.loops.size(), 1u);
  EXPECT_FALSE(h.clipped);
  EXPECT_EQ(h.loops[0].depth, 0);
  EXPECT_EQ(h.loops[0].parent, -1);
  EXPECT_GT(signed_area(h.loops[0].points), 0.0);
  EXPECT_NEAR(signed_area(h.loops[0].points), M_PI * 0.09, 0.002);
  for (const auto& p : h.loops[0].points) EXPECT_NEAR(p.norm(), 0.3, 0.5 * r.cell_x());
}

TEST(Contour, AnnulusGivesHoleWithParent) {
  const LoopHierarchy h = trace_loops(annulus_raster(0.35, 0.15));
  ASSERT_EQ(h.loops.size(), 2u);
  const Loop& outer = h.loops[0].depth == 0 ? h.loops[0] : h.loops[1];
  const Loop& inner = h.loops[0].depth == 0 ? h.loops[1] : h.loops[0];
  EXPECT_EQ(inner.depth, 1);
  EXPECT_EQ(&h.loops[static_cast<std::size_t>(inner.parent)], &outer);
  EXPECT_GT(signed_area(outer.points), 0.0);
  EXPECT_LT(signed_area(inner.points), 0.0);
}

TEST(Contour, NoiseAndClipping) {
  // A blob below the area threshold is dropped.
  const LoopHierarchy tiny = trace_loops(circle_raster(0.004));
  EXPECT_TRUE(tiny.loops.empty());
  // A region crossing the window edge is reported as clipped.
  const ProfileRaster big = make_raster(64, 0.5, 0.5, [](const Vec2& p) { return p.x() - 0.2; });
  EXPECT_TRUE(trace_loops(big).clipped);
  // Constant fields have no contour.
  EXPECT_TRUE(trace_loops(make_raster(32, 0.5, 0.5, [](const Vec2&) { return 1.0; })).loops.empty());
}

TEST(Contour, PointInPolygon) {
  const Polyline sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  EXPECT_TRUE(point_in_polygon(sq, Vec2(0.5, 0.5)));
  EXPECT_FALSE(point_in_polygon(sq, Vec2(1.5, 0.5)));
  EXPECT_EQ(signed_area(sq), 1.0);
}

TEST(Simplify, DigitalSquareKeepsExactlyTheCorners) {
  const Polyline sq = digital_square(20);
  const auto d = dominant_points(sq);
  const std::vector<std::size_t> corners{0, 20, 40, 60};
  EXPECT_EQ(d, corners);
  const Polyline s = simplify_loop(sq);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[1], Vec2(20, 0));
}

TEST(Simplify, SmoothLoopFallsBackToAtLeastFourPoints) {
  const auto d = dominant_points(fixtures::circle_polyline(10.0, 80));
  EXPECT_GE(d.size(), 4u);
  EXPECT_TRUE(std::is_sorted(d.begin(), d.end()));
}

TEST(BSpline, CircleFitMeetsTheSmoothingBudget) {
  const Polyline c = fixtures::circle_polyline(0.3, 200);
  const double s = 0.25 * 200 * 1e-6;
  const SplineFit fit = fit_bspline(c, s);
  EXPECT_LE(fit.residual, s);
  double sq = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) sq += (fit.spline.evaluate(fit.params[i]) - c[i]).squaredNorm();
  EXPECT_NEAR(sq, fit.residual, 1e-12);
  EXPECT_LE(std::sqrt(sq / 200), std::sqrt(s / 200) + 1e-15);
  // A huge budget keeps the minimal knot count.
  EXPECT_EQ(fit_bspline(c, 1e9).spline.control.size(), 4u);
}

TEST(BSpline, KnotVectorAndBezierSegments) {
  const SplineFit fit = fit_bspline(fixtures::circle_polyline(0.3, 120, Vec2(0.1, -0.05)), 1e-6);
  const BSplineLoop& b = fit.spline;
  const std::size_t m = b.breaks.size();
  const auto knots = b.knot_vector();
  ASSERT_EQ(knots.size(), m + 7);
  for (std::size_t i = 0; i + m < knots.size(); ++i) EXPECT_NEAR(knots[i + m], knots[i] + b.period, 1e-12);
  const auto segs = b.bezier_segments();
  ASSERT_EQ(segs.size(), m);
  for (std::size_t s = 0; s < m; ++s) {
    const double a = knots[s + 3], e = knots[s + 4];
    for (double u : {0.0, 0.3, 0.7, 1.0}) {
      const auto& q = segs[s];
      const double v = 1 - u;
      const Vec2 bez = v * v * v * q[0] + 3 * v * v * u * q[1] + 3 * v * u * u * q[2] + u * u * u * q[3];
      EXPECT_LT((bez - b.evaluate(a + u * (e - a))).norm(), 1e-12);
    }
    // Consecutive segments join.
    EXPECT_LT((segs[s][3] - segs[(s + 1) % m][0]).norm(), 1e-12);
  }
}

TEST(BSpline, DegenerateInputsThrow) {
  EXPECT_THROW(fit_bspline({{0, 0}, {1, 0}, {1, 1}}, 1.0), FitError);
  Polyline line;
  for (int i = 0; i < 10; ++i) line.emplace_back(i, 2 * i);
  EXPECT_THROW(fit_bspline(line, 0.0), FitError);
}

TEST(BSpline, RasterRoundTripIou) {
  EXPECT_GE(round_trip_iou(circle_raster(0.3)), 0.98);
  EXPECT_GE(round_trip_iou(annulus_raster(0.35, 0.15)), 0.98);
}

TEST(Assemble, IdsDepthOrderAndRoles) {
  ExtrusionBox box;
  const ExtractedSketch annulus = sketch_from(annulus_raster(0.35, 0.15), 0, box);
  ExtractedSketch empty;
  empty.head = 1;
  const ExtractedSketch disk = sketch_from(circle_raster(0.2), 2, box);
  const CSGTree tree = assemble({annulus, empty, disk}, 64);
  ASSERT_EQ(tree.cylinders.size(), 2u);
  EXPECT_EQ(primitive_count(tree), 3u);
  const auto& prims = tree.cylinders[0].primitives;
  EXPECT_EQ(prims[0].id, 0);
  EXPECT_EQ(prims[0].depth, 0);
  EXPECT_TRUE(prims[0].additive());
  EXPECT_EQ(prims[1].id, 1);
  EXPECT_FALSE(prims[1].additive());
  EXPECT_EQ(prims[0].polygon.size(), 64u);
  EXPECT_EQ(tree.cylinders[1].primitives[0].id, 2);
  EXPECT_EQ(tree.cylinders[1].head, 2);

  const auto root = csg_nodes(tree);
  ASSERT_TRUE(root.has_value());
  EXPECT_EQ(root->op, CsgNode::Op::Union);
  ASSERT_EQ(root->children.size(), 2u);
  EXPECT_EQ(root->children[0].op, CsgNode::Op::Difference);
  EXPECT_EQ(root->children[0].children[0].primitive, 0);
  EXPECT_EQ(root->children[0].children[1].primitive, 1);
  EXPECT_EQ(root->children[1].op, CsgNode::Op::Leaf);
  EXPECT_FALSE(csg_nodes(CSGTree{}).has_value());

  // Containment respects the hole and the extrusion height.
  const Cylinder& c = tree.cylinders[0];
  EXPECT_TRUE(c.contains(Vec3(0.25, 0.0, 0.0)));
  EXPECT_FALSE(c.contains(Vec3(0.0, 0.0, 0.0)));
  EXPECT_FALSE(c.contains(Vec3(0.25, 0.0, 0.3)));

  const auto doc = nlohmann::json::parse(csg_json(tree));
  EXPECT_EQ(doc["tree"]["op"], "union");
  EXPECT_EQ(doc["primitives"][1]["role"], "subtractive");
  EXPECT_TRUE(nlohmann::json::parse(csg_json(CSGTree{}))["tree"].is_null());
}

TEST(Postprocess, HeightRuleOverlapRuleAndIdempotence) {
  CSGTree tree;
  tree.cylinders.push_back(disk_cylinder(0, 0.2, 0.1));
  tree.cylinders.push_back(disk_cylinder(1, 0.2, 0.0025));  // 2h = 0.005
  tree.cylinders.push_back(disk_cylinder(2, 0.2, 0.1));     // duplicate of 0
  tree.cylinders.push_back(disk_cylinder(3, 0.1, 0.1, Vec3(0.3, 0.3, 0.0)));
  PostprocessReport report;
  const CSGTree once = postprocess(tree, 20000, 3, 0.01, 0.95, &report);
  ASSERT_EQ(once.cylinders.size(), 2u);
  EXPECT_EQ(report.removed.size(), 2u);
  EXPECT_NE(report.removed[0].find("height"), std::string::npos);
  EXPECT_NE(report.removed[1].find("overlap"), std::string::npos);
  EXPECT_EQ(once.cylinders[1].head, 3);

  PostprocessReport again;
  const CSGTree twice = postprocess(once, 20000, 3, 0.01, 0.95, &again);
  EXPECT_TRUE(again.removed.empty());
  ASSERT_EQ(twice.cylinders.size(), once.cylinders.size());
  for (std::size_t i = 0; i < twice.cylinders.size(); ++i) EXPECT_EQ(twice.cylinders[i].head, once.cylinders[i].head);
}

TEST(Postprocess, OverlapCoefficientEstimates) {
  const Cylinder a = disk_cylinder(0, 0.2, 0.1), b = disk_cylinder(1, 0.1, 0.1);
  // b lies inside a, so the coefficient is 1 however the volumes compare.
  EXPECT_DOUBLE_EQ(overlap_coefficient(a, b, 20000, 1), 1.0);
  const Cylinder far = disk_cylinder(2, 0.1, 0.1, Vec3(0.0, 0.0, 0.4));
  EXPECT_EQ(overlap_coefficient(a, far, 20000, 1), 0.0);
  EXPECT_EQ(overlap_coefficient(a, b, 5000, 9), overlap_coefficient(a, b, 5000, 9));
}

TEST(Export, SvgAndJson) {
  ExtrusionBox box;
  const ExtractedSketch s = sketch_from(annulus_raster(0.35, 0.15), 0, box);
  const std::string svg = sketch_svg(s);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("fill-rule=\"evenodd\""), std::string::npos);
  EXPECT_EQ(std::count(svg.begin(), svg.end(), 'Z'), 2);
  const auto doc = nlohmann::json::parse(sketches_json({s}));
  ASSERT_EQ(doc["sketches"].size(), 1u);
  const auto& loops = doc["sketches"][0]["loops"];
  ASSERT_EQ(loops.size(), 2u);
  EXPECT_EQ(loops[0]["knots"].size(), loops[0]["control_points"].size() + 7);
  EXPECT_EQ(doc["sketches"][0]["rotation"][0], 1.0);
}
