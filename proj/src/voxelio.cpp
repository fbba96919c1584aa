#include "secad/voxelio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "secad/error.hpp"
#include "secad/parallel.hpp"

namespace secad {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'C', 'V'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderSize = 9;

}  // namespace

VoxelGrid::VoxelGrid(int dim) : dim_(dim) {
  if (dim < 2) throw ValidationError("voxel grid dim must be >= 2, got " + std::to_string(dim));
  occupancy_.assign(static_cast<std::size_t>(dim) * dim * dim, 0);
}

VoxelGrid::VoxelGrid(int dim, std::vector<std::uint8_t> occupancy) : dim_(dim), occupancy_(std::move(occupancy)) {
  if (dim < 2) throw ValidationError("voxel grid dim must be >= 2, got " + std::to_string(dim));
  if (occupancy_.size() != static_cast<std::size_t>(dim) * dim * dim)
    throw ValidationError("occupancy size does not match dim^3");
  for (auto v : occupancy_)
    if (v > 1) throw ValidationError("occupancy values must be 0 or 1");
}

Vec3 VoxelGrid::center(int i, int j, int k) const noexcept {
  const double s = 1.0 / dim_;
  return {-0.5 + (i + 0.5) * s, -0.5 + (j + 0.5) * s, -0.5 + (k + 0.5) * s};
}

std::size_t VoxelGrid::occupied_count() const noexcept {
  return static_cast<std::size_t>(std::count(occupancy_.begin(), occupancy_.end(), std::uint8_t{1}));
}

std::vector<std::uint8_t> serialize_voxels(const VoxelGrid& grid) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + grid.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion);
  const auto dim = static_cast<std::uint32_t>(grid.dim());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((dim >> (8 * b)) & 0xffu));
  out.insert(out.end(), grid.data().begin(), grid.data().end());
  return out;
}

VoxelGrid parse_voxels(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw FormatError("truncated SECV header", bytes.size());
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) throw FormatError("bad SECV magic", 0);
  if (bytes.size() < 5) throw FormatError("truncated SECV header", bytes.size());
  if (bytes[4] != kVersion) throw FormatError("unsupported SECV version " + std::to_string(bytes[4]), 4);
  if (bytes.size() < kHeaderSize) throw FormatError("truncated SECV header", bytes.size());
  std::uint32_t dim = 0;
  for (int b = 0; b < 4; ++b) dim |= static_cast<std::uint32_t>(bytes[5 + b]) << (8 * b);
  if (dim < 2 || dim > 512) throw FormatError("SECV dim " + std::to_string(dim) + " outside [2, 512]", 5);
  const std::size_t count = static_cast<std::size_t>(dim) * dim * dim;
  if (bytes.size() < kHeaderSize + count) throw FormatError("truncated SECV payload", bytes.size());
  if (bytes.size() > kHeaderSize + count) throw FormatError("trailing bytes after SECV payload", kHeaderSize + count);
  std::vector<std::uint8_t> occ(bytes.begin() + kHeaderSize, bytes.end());
  for (std::size_t i = 0; i < occ.size(); ++i)
    if (occ[i] > 1) throw FormatError("occupancy byte is not 0 or 1", kHeaderSize + i);
  return VoxelGrid(static_cast<int>(dim), std::move(occ));
}

VoxelGrid load_voxels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open voxel file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_voxels(bytes);
}

void save_voxels(const VoxelGrid& grid, const std::filesystem::path& path) {
  const auto bytes = serialize_voxels(grid);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write voxel file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

namespace {

bool cuboid_contains(const shapes::Cuboid& c, const Vec3& p) {
  return ((p - c.center).cwiseAbs().array() <= c.half_extents.array()).all();
}

void validate_cuboid(const shapes::Cuboid& c) {
  if (!(c.half_extents.array() > 0.0).all()) throw ValidationError("cuboid half-extents must be positive");
}

struct Contains {
  const Vec3& p;
  bool operator()(const shapes::Cuboid& c) const { return cuboid_contains(c, p); }
  bool operator()(const shapes::Cylinder& c) const {
    const Vec3 d = p - c.center;
    const double axial = d[c.axis];
    const double radial2 = d.squaredNorm() - axial * axial;
    return std::abs(axial) <= c.half_height && radial2 <= c.radius * c.radius;
  }
  bool operator()(const shapes::PlateWithHole& s) const {
    if (!(p.cwiseAbs().array() <= s.half_extents.array()).all()) return false;
    return p.x() * p.x() + p.y() * p.y() > s.hole_radius * s.hole_radius;
  }
  bool operator()(const shapes::LBracket& s) const {
    return cuboid_contains(s.first, p) || cuboid_contains(s.second, p);
  }
};

struct Validate {
  void operator()(const shapes::Cuboid& c) const { validate_cuboid(c); }
  void operator()(const shapes::Cylinder& c) const {
    if (!(c.radius > 0) || !(c.half_height > 0)) throw ValidationError("cylinder radius and half-height must be positive");
    if (c.axis < 0 || c.axis > 2) throw ValidationError("cylinder axis must be 0, 1 or 2");
  }
  void operator()(const shapes::PlateWithHole& s) const {
    if (!(s.half_extents.array() > 0.0).all()) throw ValidationError("plate half-extents must be positive");
    if (!(s.hole_radius > 0)) throw ValidationError("hole radius must be positive");
    if (s.hole_radius >= std::min(s.half_extents.x(), s.half_extents.y()))
      throw ValidationError("hole radius must be smaller than the plate half-extents");
  }
  void operator()(const shapes::LBracket& s) const {
    validate_cuboid(s.first);
    validate_cuboid(s.second);
    if (!((s.first.center - s.second.center).cwiseAbs().array() <=
          (s.first.half_extents + s.second.half_extents).array())
             .all())
      throw ValidationError("l_bracket cuboids must overlap");
  }
};

}  // namespace

bool shape_contains(const ShapeSpec& spec, const Vec3& p) { return std::visit(Contains{p}, spec); }

void validate_shape(const ShapeSpec& spec) { std::visit(Validate{}, spec); }

VoxelGrid synthesize_shape(const ShapeSpec& spec, int dim) {
  validate_shape(spec);
  VoxelGrid grid(dim);
  for (int k = 0; k < dim; ++k)
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i) grid.set(i, j, k, shape_contains(spec, grid.center(i, j, k)));
  return grid;
}

namespace {

Vec3 vec3_field(const nlohmann::json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number()) return Vec3::Constant(v.get<double>());
  if (!v.is_array() || v.size() != 3) throw ValidationError(std::string("field '") + key + "' must be a 3-vector");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ValidationError("unknown shape field '" + key + "'");
  }
}

shapes::Cuboid cuboid_from(const nlohmann::json& j) {
  reject_unknown(j, {"kind", "center", "half_extents"});
  shapes::Cuboid c;
  c.center = vec3_field(j, "center", c.center);
  c.half_extents = vec3_field(j, "half_extents", c.half_extents);
  return c;
}

}  // namespace

ShapeSpec shape_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("shape JSON parse error: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ValidationError("shape JSON must be an object with a string 'kind'");
  const auto kind = j["kind"].get<std::string>();
  ShapeSpec spec;
  try {
    if (kind == "cuboid") {
      spec = cuboid_from(j);
    } else if (kind == "cylinder") {
      reject_unknown(j, {"kind", "center", "radius", "half_height", "axis"});
      shapes::Cylinder c;
      c.center = vec3_field(j, "center", c.center);
      c.radius = j.value("radius", c.radius);
      c.half_height = j.value("half_height", c.half_height);
      c.axis = j.value("axis", c.axis);
      spec = c;
    } else if (kind == "plate_with_hole") {
      reject_unknown(j, {"kind", "half_extents", "hole_radius"});
      shapes::PlateWithHole p;
      p.half_extents = vec3_field(j, "half_extents", p.half_extents);
      p.hole_radius = j.value("hole_radius", p.hole_radius);
      spec = p;
    } else if (kind == "l_bracket") {
      reject_unknown(j, {"kind", "first", "second"});
      if (!j.contains("first") || !j.contains("second"))
        throw ValidationError("l_bracket needs 'first' and 'second' cuboids");
      spec = shapes::LBracket{cuboid_from(j["first"]), cuboid_from(j["second"])};
    } else {
      throw ValidationError("unknown shape kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid shape field: ") + e.what());
  }
  validate_shape(spec);
  return spec;
}

double occupancy_at(const VoxelGrid& grid, const Vec3& p) { return occupancy_at(grid, p, nullptr); }

double occupancy_at(const VoxelGrid& grid, const Vec3& p, Vec3* gradient) {
  if (gradient) gradient->setZero();
  if ((p.array().abs() > 0.5).any()) return 0.0;
  const int dim = grid.dim();
  const Vec3 u = (p.array() + 0.5) * dim - 0.5;
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(u[a]);
    base[a] = static_cast<int>(f);
    frac[a] = u[a] - f;
  }
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int bit[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
    const int i = base[0] + bit[0], j = base[1] + bit[1], k = base[2] + bit[2];
    if (i < 0 || j < 0 || k < 0 || i >= dim || j >= dim || k >= dim) continue;
    if (!grid.at(i, j, k)) continue;
    double w[3], dw[3];
    for (int a = 0; a < 3; ++a) {
      w[a] = bit[a] ? frac[a] : 1 - frac[a];
      dw[a] = (bit[a] ? 1.0 : -1.0) * dim;
    }
    acc += w[0] * w[1] * w[2];
    if (gradient) {
      (*gradient)[0] += dw[0] * w[1] * w[2];
      (*gradient)[1] += w[0] * dw[1] * w[2];
      (*gradient)[2] += w[0] * w[1] * dw[2];
    }
  }
  return acc;
}

double occupancy_nearest(const VoxelGrid& grid, const Vec3& p) {
  if ((p.array().abs() > 0.5).any()) return 0.0;
  const int dim = grid.dim();
  int idx[3];
  for (int a = 0; a < 3; ++a) idx[a] = std::clamp(static_cast<int>(std::floor((p[a] + 0.5) * dim)), 0, dim - 1);
  return grid.at(idx[0], idx[1], idx[2]);
}

void require_mixed_occupancy(const VoxelGrid& grid) {
  const auto occupied = grid.occupied_count();
  if (occupied == 0) throw UnusableSupervisionError("voxel grid has no occupied voxels");
  if (occupied == grid.size()) throw UnusableSupervisionError("voxel grid has no empty voxels");
}

std::vector<std::uint32_t> near_surface_voxels(const VoxelGrid& grid, int band) {
  const int dim = grid.dim();
  std::vector<std::uint32_t> near;
  for (int k = 0; k < dim; ++k)
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i) {
        const auto v = grid.at(i, j, k);
        bool hit = false;
        for (int dk = -band; dk <= band && !hit; ++dk)
          for (int dj = -band; dj <= band && !hit; ++dj)
            for (int di = -band; di <= band && !hit; ++di) {
              const int a = i + di, b = j + dj, c = k + dk;
              if (a < 0 || b < 0 || c < 0 || a >= dim || b >= dim || c >= dim) continue;
              hit = grid.at(a, b, c) != v;
            }
        if (hit) near.push_back(static_cast<std::uint32_t>(grid.index(i, j, k)));
      }
  return near;
}

SampleBatch sample_points(const VoxelGrid& grid, std::size_t n, double near_ratio, std::uint64_t seed) {
  require_mixed_occupancy(grid);
  return sample_points(grid, near_surface_voxels(grid), n, near_ratio, seed);
}

SampleBatch sample_points(const VoxelGrid& grid, const std::vector<std::uint32_t>& near, std::size_t n,
                          double near_ratio, std::uint64_t seed) {
  require_mixed_occupancy(grid);
  if (!(near_ratio >= 0.0 && near_ratio <= 1.0)) throw ValidationError("near_ratio must lie in [0, 1]");
  const std::size_t near_count = near.empty() ? 0 : static_cast<std::size_t>(std::ceil(near_ratio * n));
  const int dim = grid.dim();
  const std::size_t total = grid.size();
  SampleBatch batch;
  batch.points.resize(n);
  batch.targets.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t voxel;
    if (s < near_count) {
      voxel = near[std::min<std::size_t>(near.size() - 1,
                                         static_cast<std::size_t>(counter_uniform(seed, s, 0) * near.size()))];
    } else {
      voxel = std::min<std::size_t>(total - 1, static_cast<std::size_t>(counter_uniform(seed, s, 0) * total));
    }
    const int i = static_cast<int>(voxel % dim);
    const int j = static_cast<int>((voxel / dim) % dim);
    const int k = static_cast<int>(voxel / (static_cast<std::size_t>(dim) * dim));
    const double h = grid.voxel_size();
    Vec3 p(-0.5 + (i + counter_uniform(seed, s, 1)) * h, -0.5 + (j + counter_uniform(seed, s, 2)) * h,
           -0.5 + (k + counter_uniform(seed, s, 3)) * h);
    batch.points[s] = p;
    batch.targets[s] = grid.at(i, j, k);
  }
  return batch;
}

}  // namespace secad
