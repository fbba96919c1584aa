#include "secad/model.hpp"

#include <cmath>
#include <random>

#include "secad/error.hpp"
#include "secad/parallel.hpp"

namespace secad {

namespace {

using RowMap = Eigen::Map<const RowMat>;
using RowMapMut = Eigen::Map<RowMat>;
using VecMap = Eigen::Map<const Vec>;
using VecMapMut = Eigen::Map<Vec>;

constexpr Eigen::Index kForwardChunk = 1024;

RowMap weight(const ModelView& m, const std::string& name, int rows, int cols) {
  return RowMap(m.params.view(name).data(), rows, cols);
}

RowMapMut grad_weight(const ModelView& m, std::span<double> grads, const std::string& name, int rows, int cols) {
  const auto& seg = m.params.segment(name);
  return RowMapMut(grads.data() + seg.offset, rows, cols);
}

VecMapMut grad_vec(const ModelView& m, std::span<double> grads, const std::string& name) {
  const auto& seg = m.params.segment(name);
  return VecMapMut(grads.data() + seg.offset, static_cast<Eigen::Index>(seg.size));
}

template <typename Derived>
auto softplus_array(const Eigen::ArrayBase<Derived>& x) {
  return x.max(0.0) + (-x.abs()).exp().log1p();
}

template <typename Derived>
auto sigmoid_array(const Eigen::ArrayBase<Derived>& x) {
  return 1.0 / (1.0 + (-x).exp());
}

double inverse_softplus(double y) { return std::log(std::expm1(y)); }

}  // namespace

Mat3 quaternion_matrix(double w, double x, double y, double z) {
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 ExtrusionBox::rotation_matrix() const {
  return quaternion_matrix(rotation.w(), rotation.x(), rotation.y(), rotation.z());
}

std::string head_segment(int head, const char* what) { return "head" + std::to_string(head) + "." + what; }

ParameterStore make_parameter_layout(const ModelConfig& cfg) {
  if (cfg.num_cylinders < 1) throw ValidationError("num_cylinders must be >= 1");
  if (cfg.hidden < 1 || cfg.latent_dim < 1 || cfg.num_codes < 1) throw ValidationError("model sizes must be positive");
  ParameterStore p;
  const int n = cfg.num_cylinders, h = cfg.hidden, l = cfg.latent_dim;
  p.add("codes", {cfg.num_codes, l});
  p.add("box.weight", {n * kBoxRawSize, l});
  p.add("box.bias", {n * kBoxRawSize});
  for (int i = 0; i < n; ++i) {
    p.add(head_segment(i, "w0"), {h, 2 + l});
    p.add(head_segment(i, "b0"), {h});
    p.add(head_segment(i, "w1"), {h, h});
    p.add(head_segment(i, "b1"), {h});
    p.add(head_segment(i, "w2"), {h, h});
    p.add(head_segment(i, "b2"), {h});
    p.add(head_segment(i, "w3"), {1, h});
    p.add(head_segment(i, "b3"), {1});
  }
  return p;
}

SecadModel::SecadModel(const ModelConfig& cfg) : cfg_(cfg), params_(make_parameter_layout(cfg)) {}

void SecadModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill_normal = [&](std::span<double> v, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : v) x = dist(rng);
  };
  auto fill_uniform = [&](std::span<double> v, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : v) x = dist(rng);
  };
  const int n = cfg_.num_cylinders, h = cfg_.hidden, l = cfg_.latent_dim;

  fill_normal(params_.view("codes"), 0.01);
  fill_uniform(params_.view("box.weight"), 1e-2);
  auto bias = params_.view("box.bias");
  for (int i = 0; i < n; ++i) {
    double* b = bias.data() + i * kBoxRawSize;
    b[0] = inverse_softplus(0.5 - kSizeFloor);
    b[1] = inverse_softplus(0.5 - kSizeFloor);
    b[2] = inverse_softplus(0.25 - kSizeFloor);
    b[3] = b[4] = b[5] = 0.0;
    b[6] = 1.0;
    b[7] = b[8] = b[9] = 0.0;
  }
  for (int i = 0; i < n; ++i) {
    // Wide coordinate columns give the softplus layers enough spatial
    // variation to represent a closed profile; code columns use fan-in L.
    auto w0 = params_.view(head_segment(i, "w0"));
    std::normal_distribution<double> coord(0.0, 10.0);
    std::normal_distribution<double> latent(0.0, std::sqrt(2.0 / l));
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < 2 + l; ++c) w0[static_cast<std::size_t>(r) * (2 + l) + c] = c < 2 ? coord(rng) : latent(rng);
    fill_normal(params_.view(head_segment(i, "w1")), std::sqrt(2.0 / h));
    fill_normal(params_.view(head_segment(i, "w2")), std::sqrt(2.0 / h));
    // Small output layer keeps the head inside the clamp before the prefit.
    fill_normal(params_.view(head_segment(i, "w3")), 0.01 * std::sqrt(1.0 / h));
  }
  prefit_sketch_heads(*this);
}

void prefit_sketch_heads(SecadModel& model, const SketchPrefit& opts) {
  const ModelConfig& cfg = model.config();
  const int side = opts.grid;
  Mat2X plane(2, side * side);
  RowVec target(side * side);
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i) {
      const Vec2 p(-opts.extent + (i + 0.5) * 2.0 * opts.extent / side, -opts.extent + (j + 0.5) * 2.0 * opts.extent / side);
      plane.col(j * side + i) = p;
      target[j * side + i] = opts.slope * (p.norm() - opts.radius);
    }
  const double inv_n = 1.0 / static_cast<double>(plane.cols());

  AdamState adam = AdamState::for_params(model.params(), opts.lr, 0.9, 0.999);
  ParamBuffer grads(model.params().size());
  const auto codes = model.params().segment("codes");
  HeadCache cache;
  for (int step = 0; step < opts.steps; ++step) {
    std::fill(grads.begin(), grads.end(), 0.0);
    const ModelView view{cfg, model.params(), 0};
    const auto bias = head_code_bias(view);
    for (int k = 0; k < cfg.num_cylinders; ++k) {
      head_forward(view, k, bias[static_cast<std::size_t>(k)], plane, cache);
      const RowVec ds = 2.0 * inv_n * (cache.s - target);
      head_backward(view, k, plane, cache, ds, grads, nullptr);
    }
    std::fill(grads.begin() + static_cast<std::ptrdiff_t>(codes.offset),
              grads.begin() + static_cast<std::ptrdiff_t>(codes.offset + codes.size), 0.0);
    adam_step(model.params(), grads, adam);
  }
}

std::span<const double> SecadModel::code(int index) const {
  return params_.view("codes").subspan(static_cast<std::size_t>(index) * cfg_.latent_dim, cfg_.latent_dim);
}

std::span<double> SecadModel::code(int index) {
  return params_.view("codes").subspan(static_cast<std::size_t>(index) * cfg_.latent_dim, cfg_.latent_dim);
}

Eigen::Map<const Vec> ModelView::code() const {
  if (code_override) return Eigen::Map<const Vec>(code_override->data(), code_override->size());
  if (code_index < 0 || code_index >= cfg.num_codes) throw ContractError("latent code index out of range");
  return Eigen::Map<const Vec>(params.view("codes").data() + static_cast<std::size_t>(code_index) * cfg.latent_dim,
                               cfg.latent_dim);
}

std::vector<ExtrusionBox> decode_boxes(const ModelView& m) {
  const int n = m.cfg.num_cylinders;
  const Vec raw = weight(m, "box.weight", n * kBoxRawSize, m.cfg.latent_dim) * m.code() +
                  VecMap(m.params.view("box.bias").data(), n * kBoxRawSize);
  std::vector<ExtrusionBox> boxes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* r = raw.data() + i * kBoxRawSize;
    auto& box = boxes[static_cast<std::size_t>(i)];
    for (int a = 0; a < 3; ++a) box.size[a] = softplus(r[a]) + kSizeFloor;
    for (int a = 0; a < 3; ++a) box.center[a] = 0.5 * std::tanh(r[3 + a]);
    const double norm = std::max(std::sqrt(r[6] * r[6] + r[7] * r[7] + r[8] * r[8] + r[9] * r[9]), kQuatNormFloor);
    box.rotation = Eigen::Quaterniond(r[6] / norm, r[7] / norm, r[8] / norm, r[9] / norm);
  }
  return boxes;
}

Vec3 transform_point(const ExtrusionBox& box, const Vec3& x) { return box.to_local(x); }

void decode_boxes_backward(const ModelView& m, const std::vector<BoxGrad>& box_grads, std::span<double> grads) {
  const int n = m.cfg.num_cylinders, l = m.cfg.latent_dim;
  const auto code = m.code();
  const auto w = weight(m, "box.weight", n * kBoxRawSize, l);
  const Vec raw = w * code + VecMap(m.params.view("box.bias").data(), n * kBoxRawSize);
  Vec draw = Vec::Zero(n * kBoxRawSize);
  for (int i = 0; i < n; ++i) {
    const double* r = raw.data() + i * kBoxRawSize;
    double* d = draw.data() + i * kBoxRawSize;
    const auto& g = box_grads[static_cast<std::size_t>(i)];
    for (int a = 0; a < 3; ++a) d[a] = g.size[a] * sigmoid(r[a]);
    for (int a = 0; a < 3; ++a) {
      const double t = std::tanh(r[3 + a]);
      d[3 + a] = g.center[a] * 0.5 * (1.0 - t * t);
    }
    const double raw_norm = std::sqrt(r[6] * r[6] + r[7] * r[7] + r[8] * r[8] + r[9] * r[9]);
    const double norm = std::max(raw_norm, kQuatNormFloor);
    const double qw = r[6] / norm, qx = r[7] / norm, qy = r[8] / norm, qz = r[9] / norm;
    const Mat3& G = g.rotation;
    double dq[4];
    dq[0] = 2 * (-qz * G(0, 1) + qy * G(0, 2) + qz * G(1, 0) - qx * G(1, 2) - qy * G(2, 0) + qx * G(2, 1));
    dq[1] = 2 * (qy * G(0, 1) + qz * G(0, 2) + qy * G(1, 0) - 2 * qx * G(1, 1) - qw * G(1, 2) + qz * G(2, 0) +
                 qw * G(2, 1) - 2 * qx * G(2, 2));
    dq[2] = 2 * (-2 * qy * G(0, 0) + qx * G(0, 1) + qw * G(0, 2) + qx * G(1, 0) + qz * G(1, 2) - qw * G(2, 0) +
                 qz * G(2, 1) - 2 * qy * G(2, 2));
    dq[3] = 2 * (-2 * qz * G(0, 0) - qw * G(0, 1) + qx * G(0, 2) + qw * G(1, 0) - 2 * qz * G(1, 1) + qy * G(1, 2) +
                 qx * G(2, 0) + qy * G(2, 1));
    if (raw_norm > kQuatNormFloor) {
      const double q[4] = {qw, qx, qy, qz};
      const double dot = q[0] * dq[0] + q[1] * dq[1] + q[2] * dq[2] + q[3] * dq[3];
      for (int a = 0; a < 4; ++a) d[6 + a] = (dq[a] - q[a] * dot) / norm;
    } else {
      for (int a = 0; a < 4; ++a) d[6 + a] = dq[a] / kQuatNormFloor;
    }
  }
  grad_weight(m, grads, "box.weight", n * kBoxRawSize, l).noalias() += draw * code.transpose();
  grad_vec(m, grads, "box.bias") += draw;
  if (!m.code_override) {
    const auto& seg = m.params.segment("codes");
    VecMapMut(grads.data() + seg.offset + static_cast<std::size_t>(m.code_index) * l, l).noalias() +=
        w.transpose() * draw;
  }
}

std::vector<Vec> head_code_bias(const ModelView& m) {
  const int h = m.cfg.hidden, l = m.cfg.latent_dim;
  const auto code = m.code();
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(m.cfg.num_cylinders));
  for (int i = 0; i < m.cfg.num_cylinders; ++i) {
    const auto w0 = weight(m, head_segment(i, "w0"), h, 2 + l);
    out.push_back(w0.rightCols(l) * code + VecMap(m.params.view(head_segment(i, "b0")).data(), h));
  }
  return out;
}

void head_forward(const ModelView& m, int head, const Vec& code_bias, const Mat2X& plane, HeadCache& c) {
  const int h = m.cfg.hidden, l = m.cfg.latent_dim;
  const auto w0 = weight(m, head_segment(head, "w0"), h, 2 + l);
  const auto w1 = weight(m, head_segment(head, "w1"), h, h);
  const auto w2 = weight(m, head_segment(head, "w2"), h, h);
  const auto w3 = weight(m, head_segment(head, "w3"), 1, h);
  const VecMap b1(m.params.view(head_segment(head, "b1")).data(), h);
  const VecMap b2(m.params.view(head_segment(head, "b2")).data(), h);
  const double b3 = m.params.view(head_segment(head, "b3"))[0];

  c.a0.noalias() = w0.leftCols(2) * plane;
  c.a0.colwise() += code_bias;
  c.h1 = softplus_array(c.a0.array()).matrix();
  c.a1.noalias() = w1 * c.h1;
  c.a1.colwise() += b1;
  c.h2 = softplus_array(c.a1.array()).matrix();
  c.a2.noalias() = w2 * c.h2;
  c.a2.colwise() += b2;
  c.h3 = softplus_array(c.a2.array()).matrix();
  c.pre.noalias() = w3 * c.h3;
  c.pre.array() += b3;
  c.s = c.pre.array().max(-1.0).min(1.0).matrix();
}

void head_backward(const ModelView& m, int head, const Mat2X& plane, const HeadCache& c, const RowVec& ds,
                   std::span<double> grads, Mat2X* dplane) {
  const int h = m.cfg.hidden, l = m.cfg.latent_dim;
  const auto w0 = weight(m, head_segment(head, "w0"), h, 2 + l);
  const auto w1 = weight(m, head_segment(head, "w1"), h, h);
  const auto w2 = weight(m, head_segment(head, "w2"), h, h);
  const auto w3 = weight(m, head_segment(head, "w3"), 1, h);

  const RowVec g3 = (c.pre.array() >= -1.0 && c.pre.array() <= 1.0).select(ds.array(), 0.0).matrix();
  grad_weight(m, grads, head_segment(head, "w3"), 1, h).noalias() += g3 * c.h3.transpose();
  grad_vec(m, grads, head_segment(head, "b3"))[0] += g3.sum();

  Mat g2 = (w3.transpose() * g3).array() * sigmoid_array(c.a2.array());
  grad_weight(m, grads, head_segment(head, "w2"), h, h).noalias() += g2 * c.h2.transpose();
  grad_vec(m, grads, head_segment(head, "b2")) += g2.rowwise().sum();

  Mat g1 = (w2.transpose() * g2).array() * sigmoid_array(c.a1.array());
  grad_weight(m, grads, head_segment(head, "w1"), h, h).noalias() += g1 * c.h1.transpose();
  grad_vec(m, grads, head_segment(head, "b1")) += g1.rowwise().sum();

  Mat g0 = (w1.transpose() * g1).array() * sigmoid_array(c.a0.array());
  const Vec g0_sum = g0.rowwise().sum();
  auto dw0 = grad_weight(m, grads, head_segment(head, "w0"), h, 2 + l);
  dw0.leftCols(2).noalias() += g0 * plane.transpose();
  const auto code = m.code();
  dw0.rightCols(l).noalias() += g0_sum * code.transpose();
  grad_vec(m, grads, head_segment(head, "b0")) += g0_sum;
  if (!m.code_override) {
    const auto& seg = m.params.segment("codes");
    VecMapMut(grads.data() + seg.offset + static_cast<std::size_t>(m.code_index) * l, l).noalias() +=
        w0.rightCols(l).transpose() * g0_sum;
  }
  if (dplane) dplane->noalias() = w0.leftCols(2).transpose() * g0;
}

RowVec sketch_sdf(const ModelView& m, int head, const Mat2X& plane_points) {
  if (head < 0 || head >= m.cfg.num_cylinders) throw ContractError("sketch head index out of range");
  const auto biases = head_code_bias(m);
  const Eigen::Index n = plane_points.cols();
  RowVec out(n);
  const std::size_t chunks = static_cast<std::size_t>((n + kForwardChunk - 1) / kForwardChunk);
  parallel_for(chunks, [&](std::size_t ci) {
    const Eigen::Index start = static_cast<Eigen::Index>(ci) * kForwardChunk;
    const Eigen::Index len = std::min(kForwardChunk, n - start);
    HeadCache cache;
    head_forward(m, head, biases[static_cast<std::size_t>(head)], plane_points.middleCols(start, len), cache);
    out.segment(start, len) = cache.s;
  });
  return out;
}

double sketch_sdf(const ModelView& m, int head, const Vec2& p) {
  Mat2X pts(2, 1);
  pts.col(0) = p;
  return sketch_sdf(m, head, pts)[0];
}

ForwardResult model_forward(const ModelView& m, const FieldParams& field, const std::vector<Vec3>& points) {
  const int n_cyl = m.cfg.num_cylinders;
  const auto boxes = decode_boxes(m);
  const auto biases = head_code_bias(m);
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  ForwardResult out;
  out.occupancy.resize(n);
  out.cylinder_sdf.resize(n_cyl, n);
  const std::size_t chunks = static_cast<std::size_t>((n + kForwardChunk - 1) / kForwardChunk);
  parallel_for(chunks, [&](std::size_t ci) {
    const Eigen::Index start = static_cast<Eigen::Index>(ci) * kForwardChunk;
    const Eigen::Index len = std::min(kForwardChunk, n - start);
    HeadCache cache;
    Mat2X plane(2, len);
    RowVec zl(len);
    Mat occ(n_cyl, len);
    for (int k = 0; k < n_cyl; ++k) {
      const auto& box = boxes[static_cast<std::size_t>(k)];
      const Mat3 rt = box.rotation_matrix().transpose();
      for (Eigen::Index j = 0; j < len; ++j) {
        const Vec3 local = rt * (points[static_cast<std::size_t>(start + j)] - box.center);
        plane(0, j) = local.x();
        plane(1, j) = local.y();
        zl[j] = local.z();
      }
      head_forward(m, k, biases[static_cast<std::size_t>(k)], plane, cache);
      for (Eigen::Index j = 0; j < len; ++j) {
        const double sc = extrude_sdf(cache.s[j], zl[j], box.half_height());
        out.cylinder_sdf(k, start + j) = sc;
        occ(k, j) = occupancy_from_sdf(sc, field.eta);
      }
    }
    for (Eigen::Index j = 0; j < len; ++j) {
      const Vec col = occ.col(j);
      out.occupancy[start + j] = soft_union(std::span<const double>(col.data(), static_cast<std::size_t>(n_cyl)), field.phi);
    }
  });
  for (Eigen::Index j = 0; j < n; ++j)
    if (!std::isfinite(out.occupancy[j])) throw NumericalError("non-finite occupancy in model_forward");
  return out;
}

}  // namespace secad
