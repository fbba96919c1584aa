#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "secad/extract.hpp"
#include "secad/model.hpp"

namespace secad {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  Vec3 triangle_normal(std::size_t t) const;  // unit, right-hand rule
  double triangle_area(std::size_t t) const;
  double area() const;
  double volume() const;  // divergence theorem, positive for outward orientation
  int euler_characteristic() const;
};

// Evaluates values for a batch of points.
using ScalarField = std::function<void(std::span<const Vec3> points, std::span<double> values)>;

struct MarchingCubesOptions {
  double iso = 0.0;
  int res = 128;
  // true: inside where value > iso (occupancy); false: inside where value < iso (SDF).
  bool inside_above = false;
};

// Samples the field at res^3 lattice points -0.5 + (i + 0.5) / res and
// polygonizes with a 256-case table. Shared edge vertices are welded.
TriangleMesh marching_cubes(const ScalarField& field, const MarchingCubesOptions& opts);

// Triangle lists for each of the 256 corner configurations (edge indices).
const std::array<std::vector<std::array<int, 3>>, 256>& marching_cubes_table();

// Capped prism over a simple polygon, extruded +-h along the box z axis.
// Throws ValidationError for a self-intersecting polygon.
TriangleMesh extrude_polygon(const Polyline& polygon, double half_height, const Vec3& center,
                             const Eigen::Quaterniond& rotation);

// Ear clipping of a simple CCW polygon; returns index triples.
std::vector<std::array<int, 3>> triangulate_polygon(const Polyline& polygon);
bool polygon_self_intersects(const Polyline& polygon);

struct PrimitiveMesh {
  int primitive = 0;
  int head = 0;
  bool additive = true;
  TriangleMesh mesh;
};

std::vector<PrimitiveMesh> mesh_primitives(const CSGTree& tree, int curve_samples,
                                           std::vector<std::string>* warnings = nullptr);

struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
};

SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

// Uniform hash grid for nearest-neighbor and radius queries over a fixed point set.
class PointIndex {
 public:
  explicit PointIndex(const std::vector<Vec3>& points);
  // Nearest point (lowest index among exact ties) and squared distance.
  std::pair<std::size_t, double> nearest(const Vec3& q) const;
  // Calls fn(index) for all points with |p - q| <= radius.
  void for_each_within(const Vec3& q, double radius, const std::function<void(std::size_t)>& fn) const;

 private:
  std::array<long, 3> cell_of(const Vec3& p) const;
  std::size_t slot(long i, long j, long k) const;

  const std::vector<Vec3>& points_;
  Vec3 origin_;
  double cell_ = 1.0;
  std::array<long, 3> dims_{};
  std::vector<std::uint32_t> starts_;
  std::vector<std::uint32_t> order_;
};

// Symmetric mean of squared nearest distances, x1000.
double chamfer(const std::vector<Vec3>& p, const std::vector<Vec3>& g);
// Unscaled symmetric chamfer.
double chamfer_raw(const std::vector<Vec3>& p, const std::vector<Vec3>& g);

double normal_consistency(const SurfaceSamples& p, const SurfaceSamples& g);

struct MetricsConfig {
  double edge_distance = 0.01;
  double edge_tau = 0.1;
  std::size_t n_cd = 8192;
  std::size_t n_ecd = 12000;
  std::uint64_t seed = 11;
};

// Indices of samples with a neighbor within `distance` whose normal dot < tau.
std::vector<std::size_t> edge_points(const SurfaceSamples& s, double distance, double tau);

// x100; nullopt when either side has no edge points.
std::optional<double> edge_chamfer(const TriangleMesh& p, const TriangleMesh& g, const MetricsConfig& cfg);
std::optional<double> edge_chamfer(const SurfaceSamples& p, const SurfaceSamples& g, const MetricsConfig& cfg);

struct MetricsReport {
  double cd = 0.0;
  std::optional<double> ecd;
  double nc = 0.0;
  std::size_t p_count = 0;
};

MetricsReport evaluate_meshes(const TriangleMesh& pred, const TriangleMesh& gt, const MetricsConfig& cfg,
                              std::size_t p_count = 0);
std::string metrics_json(const MetricsReport& r, const MetricsConfig& cfg);

std::string mesh_to_obj(const TriangleMesh& mesh);
TriangleMesh mesh_from_obj(const std::string& text);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
TriangleMesh load_obj(const std::filesystem::path& path);
TriangleMesh merge_meshes(const std::vector<TriangleMesh>& meshes);

}  // namespace secad
