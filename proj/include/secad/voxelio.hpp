#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace secad {

using Vec3 = Eigen::Vector3d;

// Binary occupancy on a dim^3 lattice covering the world cube [-0.5, 0.5]^3.
// Voxel (i, j, k) has its center at -0.5 + (i + 0.5) / dim along each axis;
// storage is x-fastest, then y, then z.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(int dim);
  VoxelGrid(int dim, std::vector<std::uint8_t> occupancy);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return occupancy_.size(); }
  const std::vector<std::uint8_t>& data() const noexcept { return occupancy_; }

  std::size_t index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dim_) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dim_) * k);
  }
  std::uint8_t at(int i, int j, int k) const noexcept { return occupancy_[index(i, j, k)]; }
  void set(int i, int j, int k, bool v) noexcept { occupancy_[index(i, j, k)] = v ? 1 : 0; }

  double voxel_size() const noexcept { return 1.0 / dim_; }
  Vec3 center(int i, int j, int k) const noexcept;
  std::size_t occupied_count() const noexcept;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  int dim_ = 0;
  std::vector<std::uint8_t> occupancy_;
};

// SECV container: "SECV", u8 version (1), u32 LE dim, dim^3 bytes of 0/1.
VoxelGrid load_voxels(const std::filesystem::path& path);
VoxelGrid parse_voxels(const std::vector<std::uint8_t>& bytes);
void save_voxels(const VoxelGrid& grid, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_voxels(const VoxelGrid& grid);

namespace shapes {

struct Cuboid {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.25);
};

struct Cylinder {
  Vec3 center = Vec3::Zero();
  double radius = 0.25;
  double half_height = 0.25;
  int axis = 2;  // 0 = x, 1 = y, 2 = z
};

// Plate centered at the origin, thin along z, with a circular through-hole along z.
struct PlateWithHole {
  Vec3 half_extents{0.22, 0.22, 0.1};
  double hole_radius = 0.1;
};

// Union of two overlapping cuboids.
struct LBracket {
  Cuboid first;
  Cuboid second;
};

}  // namespace shapes

using ShapeSpec = std::variant<shapes::Cuboid, shapes::Cylinder, shapes::PlateWithHole, shapes::LBracket>;

// Analytic inside test shared by synthesize_shape and tests.
bool shape_contains(const ShapeSpec& spec, const Vec3& p);
void validate_shape(const ShapeSpec& spec);
VoxelGrid synthesize_shape(const ShapeSpec& spec, int dim);

// JSON document: {"kind": "cuboid" | "cylinder" | "plate_with_hole" | "l_bracket", ...}.
ShapeSpec shape_from_json(const std::string& text);

// Trilinear interpolation over voxel centers, zero outside the lattice.
double occupancy_at(const VoxelGrid& grid, const Vec3& p);
// Trilinear value and its gradient with respect to p (piecewise linear).
double occupancy_at(const VoxelGrid& grid, const Vec3& p, Vec3* gradient);
// Value of the voxel containing p, zero outside the cube.
double occupancy_nearest(const VoxelGrid& grid, const Vec3& p);

struct SampleBatch {
  std::vector<Vec3> points;
  std::vector<double> targets;
  std::size_t size() const noexcept { return points.size(); }
};

// Voxels whose 5^3 neighborhood contains a voxel of the other occupancy value.
std::vector<std::uint32_t> near_surface_voxels(const VoxelGrid& grid, int band = 2);

SampleBatch sample_points(const VoxelGrid& grid, std::size_t n, double near_ratio, std::uint64_t seed);
// Same as above with a precomputed near-surface list.
SampleBatch sample_points(const VoxelGrid& grid, const std::vector<std::uint32_t>& near, std::size_t n,
                          double near_ratio, std::uint64_t seed);

// Throws UnusableSupervisionError unless the grid has both occupied and empty voxels.
void require_mixed_occupancy(const VoxelGrid& grid);

}  // namespace secad
