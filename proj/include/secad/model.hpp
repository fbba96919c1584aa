#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <span>
#include <vector>

#include "secad/fieldops.hpp"
#include "secad/netcore.hpp"
#include "secad/voxelio.hpp"

namespace secad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mat2X = Eigen::Matrix<double, 2, Eigen::Dynamic>;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

struct ModelConfig {
  int num_cylinders = 4;
  int hidden = 128;
  int latent_dim = 256;
  int num_codes = 1;  // > 1 only for the shared-decoder mode

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Raw box-head outputs per cylinder, in this order.
inline constexpr int kBoxRawSize = 10;  // size(3), center(3), quaternion(4)
inline constexpr double kSizeFloor = 1e-3;
inline constexpr double kQuatNormFloor = 1e-8;
inline constexpr int kSketchLayers = 4;

// Oriented extrusion box; size = (length, width, half-height).
struct ExtrusionBox {
  Vec3 size = Vec3(0.5, 0.5, 0.25);
  Vec3 center = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  double length() const { return size.x(); }
  double width() const { return size.y(); }
  double half_height() const { return size.z(); }
  Mat3 rotation_matrix() const;
  // Sketch-plane normal: box +z in world coordinates.
  Vec3 axis() const { return rotation_matrix().col(2); }

  // r^-1 (x - c): sketch-plane coordinates in (x, y), signed height in z.
  Vec3 to_local(const Vec3& x) const { return rotation_matrix().transpose() * (x - center); }
  Vec3 to_world(const Vec3& local) const { return rotation_matrix() * local + center; }
};

// Rotation matrix of a unit quaternion (w, x, y, z) written out explicitly.
Mat3 quaternion_matrix(double w, double x, double y, double z);

// The decoder: latent code table, linear box head, one coordinate MLP per cylinder.
class SecadModel {
 public:
  SecadModel() = default;
  explicit SecadModel(const ModelConfig& cfg);

  // Deterministic initialization; see README for the scheme.
  void initialize(std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  std::span<const double> code(int index) const;
  std::span<double> code(int index);

 private:
  ModelConfig cfg_;
  ParameterStore params_;
};

// Regresses every sketch head (active code 0) towards the cone
// slope * (|p| - radius) so that training starts from a closed profile. The
// default slope keeps eta * s small over the whole window, so occupancy is not
// saturated anywhere and holes can still open. Codes and boxes are untouched.
struct SketchPrefit {
  int steps = 300;
  int grid = 24;
  double extent = 0.35;
  double radius = 0.2;
  double slope = 0.1;
  double lr = 1e-3;
};
void prefit_sketch_heads(SecadModel& model, const SketchPrefit& opts = {});

// Builds the parameter layout for a config (all zeros).
ParameterStore make_parameter_layout(const ModelConfig& cfg);

std::string head_segment(int head, const char* what);

// A read-only binding of parameters to a config and an active latent code.
// `code_override` substitutes an external latent vector (interpolation).
struct ModelView {
  const ModelConfig& cfg;
  const ParameterStore& params;
  int code_index = 0;
  const Vec* code_override = nullptr;

  Eigen::Map<const Vec> code() const;
};

std::vector<ExtrusionBox> decode_boxes(const ModelView& m);
Vec3 transform_point(const ExtrusionBox& box, const Vec3& x);

// Clamped sketch distance of head i at plane points (2 x n).
RowVec sketch_sdf(const ModelView& m, int head, const Mat2X& plane_points);
double sketch_sdf(const ModelView& m, int head, const Vec2& p);

struct ForwardResult {
  Vec occupancy;     // n, soft union
  Mat cylinder_sdf;  // N x n, extruded distances
};

ForwardResult model_forward(const ModelView& m, const FieldParams& field, const std::vector<Vec3>& points);

// Per-head activation cache for one chunk of points.
struct HeadCache {
  Mat a0, h1, a1, h2, a2, h3;
  RowVec pre;  // last affine output before the clamp
  RowVec s;    // clamped output
};

// Per-evaluation constants: W0_code * z + b0 for each head.
std::vector<Vec> head_code_bias(const ModelView& m);

void head_forward(const ModelView& m, int head, const Vec& code_bias, const Mat2X& plane, HeadCache& cache);

// Accumulates parameter gradients (including the active latent code) for
// ds = dL/d(clamped output); returns dL/d(plane) when requested.
void head_backward(const ModelView& m, int head, const Mat2X& plane, const HeadCache& cache, const RowVec& ds,
                   std::span<double> grads, Mat2X* dplane);

// Reverse-mode through decode_boxes: per box gradients with respect to the
// decoded size, center and rotation matrix.
struct BoxGrad {
  Vec3 size = Vec3::Zero();
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Zero();
};
void decode_boxes_backward(const ModelView& m, const std::vector<BoxGrad>& box_grads, std::span<double> grads);

}  // namespace secad
