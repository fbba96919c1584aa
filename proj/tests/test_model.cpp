#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "secad/losses.hpp"
#include "secad/model.hpp"
#include "secad/tape.hpp"
#include "support.hpp"

using namespace secad;

namespace {

// Scalar re-implementation of the reconstruction loss on a Tape. It shares no
// code with the batched forward/backward path.
double tape_recon_loss(const SecadModel& model, const SampleBatch& batch, const FieldParams& field,
                       std::vector<double>& grads) {
  const auto& cfg = model.config();
  const auto& p = model.params();
  const int n = cfg.num_cylinders, h = cfg.hidden, l = cfg.latent_dim;
  Tape t;
  std::vector<Var> in(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) in[i] = t.input(p.values()[i], i);
  auto at = [&](const std::string& seg, std::size_t k) { return in[p.segment(seg).offset + k]; };

  std::vector<Var> code(static_cast<std::size_t>(l));
  for (int c = 0; c < l; ++c) code[static_cast<std::size_t>(c)] = at("codes", static_cast<std::size_t>(c));

  struct TapeBox {
    Var size[3], center[3], rot[3][3];
  };
  std::vector<TapeBox> boxes(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Var raw[kBoxRawSize];
    for (int r = 0; r < kBoxRawSize; ++r) {
      const int row = k * kBoxRawSize + r;
      Var acc = at("box.bias", static_cast<std::size_t>(row));
      for (int c = 0; c < l; ++c)
        acc = acc + at("box.weight", static_cast<std::size_t>(row * l + c)) * code[static_cast<std::size_t>(c)];
      raw[r] = acc;
    }
    auto& b = boxes[static_cast<std::size_t>(k)];
    for (int a = 0; a < 3; ++a) b.size[a] = t.softplus(raw[a]) + kSizeFloor;
    for (int a = 0; a < 3; ++a) b.center[a] = 0.5 * t.tanh(raw[3 + a]);
    const Var norm = t.sqrt(raw[6] * raw[6] + raw[7] * raw[7] + raw[8] * raw[8] + raw[9] * raw[9]);
    const Var w = raw[6] / norm, x = raw[7] / norm, y = raw[8] / norm, z = raw[9] / norm;
    const Var one = t.constant(1.0);
    b.rot[0][0] = one - 2.0 * (y * y + z * z);
    b.rot[0][1] = 2.0 * (x * y - w * z);
    b.rot[0][2] = 2.0 * (x * z + w * y);
    b.rot[1][0] = 2.0 * (x * y + w * z);
    b.rot[1][1] = one - 2.0 * (x * x + z * z);
    b.rot[1][2] = 2.0 * (y * z - w * x);
    b.rot[2][0] = 2.0 * (x * z - w * y);
    b.rot[2][1] = 2.0 * (y * z + w * x);
    b.rot[2][2] = one - 2.0 * (x * x + y * y);
  }

  auto dense = [&](int head, const char* wname, const char* bname, const std::vector<Var>& x, int rows) {
    const int cols = static_cast<int>(x.size());
    std::vector<Var> out(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      Var acc = at(head_segment(head, bname), static_cast<std::size_t>(r));
      for (int c = 0; c < cols; ++c)
        acc = acc + at(head_segment(head, wname), static_cast<std::size_t>(r * cols + c)) * x[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = acc;
    }
    return out;
  };
  auto act = [&](std::vector<Var> v) {
    for (auto& x : v) x = t.softplus(x);
    return v;
  };

  Var loss = t.constant(0.0);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    std::vector<Var> occ;
    for (int k = 0; k < n; ++k) {
      const auto& b = boxes[static_cast<std::size_t>(k)];
      Var local[3];
      for (int a = 0; a < 3; ++a) {
        Var acc = t.constant(0.0);
        for (int r = 0; r < 3; ++r) acc = acc + b.rot[r][a] * (b.center[r] * -1.0 + batch.points[j][r]);
        local[a] = acc;
      }
      std::vector<Var> x0{local[0], local[1]};
      x0.insert(x0.end(), code.begin(), code.end());
      const auto h1 = act(dense(k, "w0", "b0", x0, h));
      const auto h2 = act(dense(k, "w1", "b1", h1, h));
      const auto h3 = act(dense(k, "w2", "b2", h2, h));
      const Var s = t.clamp(dense(k, "w3", "b3", h3, 1)[0], -1.0, 1.0);
      const Var d = t.abs(local[2]) - b.size[2];
      const Var inner = t.min(t.max(s, d), t.constant(0.0));
      const Var outer = t.norm2(t.max(s, t.constant(0.0)), t.max(d, t.constant(0.0)));
      occ.push_back(t.sigmoid(-field.eta * (inner + outer)));
    }
    Var num = t.constant(0.0), den = t.constant(0.0);
    for (const Var& o : occ) {
      const Var w = t.exp(field.phi * o);
      num = num + w * o;
      den = den + w;
    }
    const Var diff = num / den - batch.targets[j];
    loss = loss + diff * diff;
  }
  loss = loss * (1.0 / static_cast<double>(batch.size()));
  grads.assign(p.size(), 0.0);
  t.backward(loss, grads);
  return loss.value();
}

SampleBatch random_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.45, 0.45);
  SampleBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.points.emplace_back(u(rng), u(rng), u(rng));
    b.targets.push_back(static_cast<double>(i % 2));
  }
  return b;
}

}  // namespace

TEST(Model, QuaternionMatrixMatchesEigen) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    const Mat3 r = quaternion_matrix(q.w(), q.x(), q.y(), q.z());
    EXPECT_LT((r - q.toRotationMatrix()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Model, LayoutAndDecode) {
  ModelConfig cfg;
  cfg.num_cylinders = 3;
  cfg.hidden = 8;
  cfg.latent_dim = 5;
  const ParameterStore p = make_parameter_layout(cfg);
  const std::size_t per_head = 8 * 7 + 8 + 64 + 8 + 64 + 8 + 8 + 1;
  EXPECT_EQ(p.size(), 5u + 30u * 5u + 30u + 3u * per_head);
  cfg.num_cylinders = 0;
  EXPECT_THROW(make_parameter_layout(cfg), ValidationError);

  cfg.num_cylinders = 2;
  const SecadModel m = fixtures::random_model(cfg, 5, 2.0);
  const ModelView view{m.config(), m.params(), 0};
  for (const auto& box : decode_boxes(view)) {
    EXPECT_GT(box.size.minCoeff(), kSizeFloor);
    EXPECT_LE(box.center.cwiseAbs().maxCoeff(), 0.5);
    EXPECT_NEAR(box.rotation.norm(), 1.0, 1e-12);
    const Vec3 x(0.1, -0.2, 0.3);
    EXPECT_LT((box.to_world(box.to_local(x)) - x).norm(), 1e-14);
  }
  for (int i = 0; i < 20; ++i) {
    const double s = sketch_sdf(view, 1, Vec2(0.03 * i - 0.3, 0.1));
    EXPECT_LE(std::abs(s), 1.0);
  }
}

TEST(Model, InitializationIsDeterministicAndClosed) {
  ModelConfig cfg;
  cfg.latent_dim = 8;
  cfg.num_cylinders = 1;
  SecadModel a(cfg), b(cfg);
  a.initialize(9);
  b.initialize(9);
  EXPECT_EQ(a.params().values(), b.params().values());
  // The initial profile is a closed region around the sketch-plane origin.
  const ModelView view{a.config(), a.params(), 0};
  for (int k = 0; k < 1; ++k) {
    EXPECT_LT(sketch_sdf(view, k, Vec2(0.0, 0.0)), 0.0);
    EXPECT_GT(sketch_sdf(view, k, Vec2(0.34, 0.34)), 0.0);
  }
}

TEST(Model, ReconGradientMatchesScalarTape) {
  ModelConfig cfg;
  cfg.num_cylinders = 2;
  cfg.hidden = 6;
  cfg.latent_dim = 4;
  SecadModel m = fixtures::random_model(cfg, 17, 0.6);
  // Keep the heads inside the clamp so every parameter carries gradient.
  for (int k = 0; k < cfg.num_cylinders; ++k) {
    for (auto& v : m.params().view(head_segment(k, "w3"))) v *= 0.05;
    m.params().view(head_segment(k, "b3"))[0] = 0.05;
  }
  const SampleBatch batch = random_batch(24, 4);
  LossConfig lc;
  lc.lambda = 0.0;
  lc.field = FieldParams{3.0, 2.0};
  const VoxelGrid grid = synthesize_shape(shapes::Cuboid{}, 8);

  std::vector<double> tape_grads;
  const double tape_value = tape_recon_loss(m, batch, lc.field, tape_grads);

  std::vector<double> grads(m.params().size(), 0.0);
  const ModelView view{m.config(), m.params(), 0};
  const LossParts parts = total_loss(view, grid, batch, lc, grads);
  EXPECT_NEAR(parts.total, tape_value, 1e-13);

  double scale = 0.0;
  for (double g : tape_grads) scale = std::max(scale, std::abs(g));
  ASSERT_GT(scale, 0.0);
  for (std::size_t i = 0; i < grads.size(); ++i) EXPECT_NEAR(grads[i], tape_grads[i], 1e-10 * scale) << "index " << i;

  // Every segment receives some gradient on this model.
  for (const auto& seg : m.params().segments()) {
    double mag = 0.0;
    for (std::size_t i = 0; i < seg.size; ++i) mag += std::abs(grads[seg.offset + i]);
    EXPECT_GT(mag, 0.0) << seg.name;
  }
}

TEST(Model, ForwardMatchesLossOccupancy) {
  ModelConfig cfg;
  cfg.num_cylinders = 3;
  cfg.hidden = 8;
  cfg.latent_dim = 4;
  const SecadModel m = fixtures::random_model(cfg, 23, 0.5);
  const SampleBatch batch = random_batch(40, 8);
  const ModelView view{m.config(), m.params(), 0};
  const FieldParams field{10.0, 5.0};
  const auto fr = model_forward(view, field, batch.points);
  double mse = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    mse += std::pow(fr.occupancy[static_cast<Eigen::Index>(j)] - batch.targets[j], 2);
    // Per-cylinder distances agree with an explicit scalar evaluation.
    const auto boxes = decode_boxes(view);
    for (int k = 0; k < 3; ++k) {
      const Vec3 loc = boxes[static_cast<std::size_t>(k)].to_local(batch.points[j]);
      const double s = sketch_sdf(view, k, Vec2(loc.x(), loc.y()));
      EXPECT_NEAR(fr.cylinder_sdf(k, static_cast<Eigen::Index>(j)),
                  extrude_sdf_piecewise(s, loc.z(), boxes[static_cast<std::size_t>(k)].half_height()), 1e-12);
    }
  }
  LossConfig lc;
  lc.lambda = 0.0;
  lc.field = field;
  const LossParts parts = total_loss(view, synthesize_shape(shapes::Cuboid{}, 8), batch, lc);
  EXPECT_NEAR(parts.recon, mse / static_cast<double>(batch.size()), 1e-14);
}

TEST(Model, CodeOverrideReplacesTheActiveCode) {
  ModelConfig cfg;
  cfg.num_cylinders = 2;
  cfg.hidden = 8;
  cfg.latent_dim = 4;
  cfg.num_codes = 2;
  const SecadModel m = fixtures::random_model(cfg, 31);
  const Vec second = Eigen::Map<const Vec>(m.code(1).data(), 4);
  const ModelView direct{m.config(), m.params(), 1};
  const ModelView over{m.config(), m.params(), 0, &second};
  const Vec2 p(0.05, -0.1);
  EXPECT_EQ(sketch_sdf(direct, 0, p), sketch_sdf(over, 0, p));
  const ModelView bad{m.config(), m.params(), 2};
  EXPECT_THROW(decode_boxes(bad), ContractError);
}
