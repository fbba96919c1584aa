#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "secad/error.hpp"
#include "secad/model.hpp"

namespace secad {

using Polyline = std::vector<Vec2>;

struct ExtractConfig {
  int raster_res = 256;
  double window_margin = 1.2;
  // Spline smoothing budget per vertex, in squared raster cells.
  double smoothing_factor = 0.25;
  std::size_t mc_samples = 100000;
  double min_height = 0.01;
  double overlap_threshold = 0.95;
  int curve_samples = 128;
  std::uint64_t seed = 7;
};

// Sketch distance sampled at cell centers of the window
// [-half_x, half_x] x [-half_y, half_y]; value(i, j) with i along x.
struct ProfileRaster {
  int res = 0;
  double half_x = 0.0;
  double half_y = 0.0;
  std::vector<double> values;

  double cell_x() const { return 2.0 * half_x / res; }
  double cell_y() const { return 2.0 * half_y / res; }
  double value(int i, int j) const { return values[static_cast<std::size_t>(j) * res + i]; }
  Vec2 cell_center(int i, int j) const {
    return {-half_x + (i + 0.5) * cell_x(), -half_y + (j + 0.5) * cell_y()};
  }
  // Bilinear interpolation between cell centers, clamped at the border.
  double sample(const Vec2& p) const;
};

ProfileRaster make_raster(int res, double half_x, double half_y, const std::function<double(const Vec2&)>& field);

// Returns nullopt for a degenerate box (window with no area).
std::optional<ProfileRaster> raster_profile(const ModelView& m, int head, const ExtrusionBox& box, int res,
                                            double margin = 1.2);

struct Loop {
  Polyline points;
  int parent = -1;
  int depth = 0;
  bool clipped = false;
};

struct LoopHierarchy {
  std::vector<Loop> loops;
  bool clipped = false;  // some contour reached the window boundary
};

double signed_area(const Polyline& poly);
bool point_in_polygon(const Polyline& poly, const Vec2& p);

// Iso-contours (inside = value < iso) with hierarchy and normalized orientation.
LoopHierarchy trace_loops(const ProfileRaster& raster, double iso = 0.0, std::size_t min_vertices = 8,
                          double min_area_cells = 4.0);

// Dominant points of a closed digital curve by region-of-support, k-cosine
// significance and non-maxima suppression. Returns increasing vertex indices.
std::vector<std::size_t> dominant_points(const Polyline& closed);
Polyline simplify_loop(const Polyline& closed);

class FitError : public Error {
 public:
  using Error::Error;
};

// Closed cubic B-spline with periodic knots. Breakpoints u_0 < ... < u_{m-1}
// lie in [u_0, u_0 + period); the control polygon has m points.
struct BSplineLoop {
  std::vector<Vec2> control;
  std::vector<double> breaks;
  double period = 1.0;
  int depth = 0;

  Vec2 evaluate(double t) const;
  Polyline sample(int count) const;
  // One cubic Bezier (p0, p1, p2, p3) per knot span.
  std::vector<std::array<Vec2, 4>> bezier_segments() const;
  // Full periodic knot vector u_{-3} .. u_{m+3}.
  std::vector<double> knot_vector() const;
};

struct SplineFit {
  BSplineLoop spline;
  double residual = 0.0;  // sum of squared distances at data parameters
  std::vector<double> params;
};

// Least-squares periodic cubic spline on chord-length parameters; knots are
// added where residuals concentrate until the residual is at most `smoothing`.
// `seed_vertices` (e.g. dominant points) place the initial knots.
SplineFit fit_bspline(const Polyline& closed, double smoothing, const std::vector<std::size_t>& seed_vertices = {});

struct CylinderPrimitive {
  int id = 0;
  int head = 0;
  int depth = 0;
  BSplineLoop loop;
  Polyline polygon;  // sampled loop, plane coordinates
  double half_height = 0.0;
  Vec3 center = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  bool additive() const { return depth % 2 == 0; }
};

// Primitives of one extrusion box, combined by depth parity.
struct Cylinder {
  int head = 0;
  ExtrusionBox box;
  std::vector<CylinderPrimitive> primitives;

  // |z_local| < h and the point lies inside an odd number of loops.
  bool contains(const Vec3& world) const;
};

struct CSGTree {
  std::vector<Cylinder> cylinders;
};

struct CsgNode {
  enum class Op { Union, Difference, Leaf };
  Op op = Op::Leaf;
  std::vector<CsgNode> children;
  int primitive = -1;
};

// Union over cylinders; each cylinder alternates union/difference by depth.
// Returns nullopt for an empty tree.
std::optional<CsgNode> csg_nodes(const CSGTree& tree);

struct ExtractedSketch {
  int head = 0;
  ExtrusionBox box;
  std::optional<ProfileRaster> raster;
  LoopHierarchy hierarchy;
  std::vector<BSplineLoop> splines;
  std::vector<std::vector<std::size_t>> dominant;
  std::vector<std::string> warnings;
};

ExtractedSketch extract_sketch(const ModelView& m, int head, const ExtrusionBox& box, const ExtractConfig& cfg);
std::vector<ExtractedSketch> extract_sketches(const ModelView& m, const ExtractConfig& cfg);

CSGTree assemble(const std::vector<ExtractedSketch>& sketches, int curve_samples = 128);

struct PostprocessReport {
  std::vector<std::string> removed;
};

CSGTree postprocess(const CSGTree& tree, std::size_t mc_samples, std::uint64_t seed, double min_height = 0.01,
                    double overlap_threshold = 0.95, PostprocessReport* report = nullptr);

// V(A n B) / min(V(A), V(B)) by Monte Carlo over the pair's bounding box.
double overlap_coefficient(const Cylinder& a, const Cylinder& b, std::size_t samples, std::uint64_t seed);

std::size_t primitive_count(const CSGTree& tree);

// Rasterize spline loops (even-odd) onto the raster's cell centers.
std::vector<std::uint8_t> rasterize_loops(const std::vector<BSplineLoop>& loops, const ProfileRaster& raster,
                                          int samples_per_loop = 512);

// Exports.
std::string sketch_svg(const ExtractedSketch& sketch);
std::string sketches_json(const std::vector<ExtractedSketch>& sketches);
std::string csg_json(const CSGTree& tree);

}  // namespace secad
