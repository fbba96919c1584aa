#include <gtest/gtest.h>

#include <cmath>

#include "secad/losses.hpp"
#include "secad/parallel.hpp"
#include "support.hpp"

using namespace secad;

namespace {

SecadModel soft_model(int cylinders, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.num_cylinders = cylinders;
  cfg.hidden = 12;
  cfg.latent_dim = 6;
  SecadModel m = fixtures::random_model(cfg, seed, 0.4);
  for (int k = 0; k < cylinders; ++k) {
    for (auto& v : m.params().view(head_segment(k, "w3"))) v *= 0.05;
    m.params().view(head_segment(k, "b3"))[0] = -0.02;
  }
  return m;
}

// Direct per-point evaluation of the sketch term from the public forward API.
double reference_sketch_loss(const ModelView& view, const VoxelGrid& grid, const SampleBatch& batch,
                             const LossConfig& cfg) {
  const auto boxes = decode_boxes(view);
  double total = 0.0;
  for (int k = 0; k < view.cfg.num_cylinders; ++k) {
    const auto& box = boxes[static_cast<std::size_t>(k)];
    double sum = 0.0;
    int count = 0;
    for (const auto& x : batch.points) {
      const Vec3 loc = box.to_local(x);
      if (std::abs(loc.x()) > 0.5 * box.length() * cfg.box_margin ||
          std::abs(loc.y()) > 0.5 * box.width() * cfg.box_margin || std::abs(loc.z()) > box.half_height() * cfg.box_margin)
        continue;
      const double pred = occupancy_from_sdf(sketch_sdf(view, k, Vec2(loc.x(), loc.y())), cfg.field.eta);
      const double target = occupancy_at(grid, box.to_world(Vec3(loc.x(), loc.y(), 0.0)));
      sum += (pred - target) * (pred - target);
      ++count;
    }
    if (count > 0) total += sum / count;
  }
  return total;
}

}  // namespace

TEST(Losses, ReconLoss) {
  const double p[] = {0.2, 0.9, 0.5}, t[] = {0.0, 1.0, 1.0};
  EXPECT_NEAR(recon_loss(p, t), (0.04 + 0.01 + 0.25) / 3.0, 1e-15);
  const double pr[] = {0.9, 0.5, 0.2}, tr[] = {1.0, 1.0, 0.0};
  EXPECT_EQ(recon_loss(p, t), recon_loss(pr, tr));
  EXPECT_THROW(recon_loss(std::span<const double>(p, 2), t), ContractError);
}

TEST(Losses, TotalCombinesParts) {
  const SecadModel m = soft_model(2, 3);
  const VoxelGrid grid = synthesize_shape(shapes::Cuboid{}, 16);
  const SampleBatch batch = sample_points(grid, 200, 0.5, 9);
  const ModelView view{m.config(), m.params(), 0};
  LossConfig cfg;
  cfg.field = {8.0, 4.0};
  cfg.lambda = 0.0;
  const LossParts zero = total_loss(view, grid, batch, cfg);
  EXPECT_EQ(zero.total, zero.recon);
  cfg.lambda = 0.37;
  const LossParts p = total_loss(view, grid, batch, cfg);
  EXPECT_NEAR(p.total, p.recon + 0.37 * p.sketch, 1e-15);
  EXPECT_GE(p.total, p.recon);
  EXPECT_NEAR(p.sketch, reference_sketch_loss(view, grid, batch, cfg), 1e-12);
  EXPECT_NEAR(sketch_loss(view, grid, batch, cfg), p.sketch, 1e-15);
}

TEST(Losses, EmptyMembershipContributesNothing) {
  SecadModel m = soft_model(1, 5);
  // Push the box far outside the sample cloud.
  auto bias = m.params().view("box.bias");
  for (int a = 3; a < 6; ++a) bias[static_cast<std::size_t>(a)] = 20.0;
  for (int a = 0; a < 3; ++a) bias[static_cast<std::size_t>(a)] = -8.0;
  const VoxelGrid grid = synthesize_shape(shapes::Cuboid{}, 16);
  const SampleBatch batch = sample_points(grid, 200, 0.5, 1);
  const ModelView view{m.config(), m.params(), 0};
  EXPECT_EQ(sketch_loss(view, grid, batch, LossConfig{}), 0.0);
}

TEST(Losses, FullGradientMatchesFiniteDifferences) {
  const SecadModel m = soft_model(3, 11);
  const VoxelGrid grid = synthesize_shape(shapes::Cuboid{}, 16);
  const SampleBatch batch = sample_points(grid, 256, 0.5, 2);
  LossConfig cfg;
  cfg.lambda = 1.0;
  cfg.field = {6.0, 3.0};
  const auto program = make_loss_program(m.config(), 0, grid, batch, cfg);
  const auto report = finite_diff_report(program, m.params(), 1e-5, 400, 5);
  EXPECT_LT(report.max_rel_error, 1e-5) << "index " << report.worst_index << " analytic " << report.analytic
                                        << " numeric " << report.numeric;
}

TEST(Losses, ParallelReductionIsThreadCountIndependent) {
  const SecadModel m = soft_model(2, 13);
  const VoxelGrid grid = synthesize_shape(shapes::Cuboid{}, 16);
  const SampleBatch batch = sample_points(grid, 5000, 0.5, 3);
  const ModelView view{m.config(), m.params(), 0};
  LossConfig cfg;
  cfg.field = {8.0, 4.0};
  ParamBuffer g1(m.params().size(), 0.0), g4(m.params().size(), 0.0);
  set_thread_count(1);
  const LossParts a = total_loss(view, grid, batch, cfg, g1);
  set_thread_count(4);
  const LossParts b = total_loss(view, grid, batch, cfg, g4);
  set_thread_count(0);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(g1, g4);
}
