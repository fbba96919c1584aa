#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>

#include "secad/config.hpp"
#include "secad/trainer.hpp"
#include "support.hpp"

using namespace secad;

namespace {

FitConfig small_config(int epochs = 6) {
  FitConfig c;
  c.epochs = epochs;
  c.batch_points = 256;
  c.model.num_cylinders = 2;
  c.model.hidden = 16;
  c.model.latent_dim = 8;
  c.seed = 77;
  return c;
}

const VoxelGrid& cuboid16() {
  static const VoxelGrid g = synthesize_shape(shapes::Cuboid{}, 16);
  return g;
}

const VoxelGrid& cylinder16() {
  static const VoxelGrid g = synthesize_shape(shapes::Cylinder{}, 16);
  return g;
}

}  // namespace

TEST(Trainer, IdenticalSeedsGiveIdenticalRuns) {
  const Checkpoint a = fit_single(cuboid16(), small_config());
  const Checkpoint b = fit_single(cuboid16(), small_config());
  ASSERT_EQ(a.history.size(), 6u);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.model.params().values(), b.model.params().values());
  FitConfig other = small_config();
  other.seed = 78;
  EXPECT_NE(fit_single(cuboid16(), other).history, a.history);
}

TEST(Trainer, ResumeThroughJsonIsBitwise) {
  const Checkpoint full = fit_single(cuboid16(), small_config());

  Trainer first({cuboid16()}, small_config(), false);
  first.run_epochs(3);
  const std::string saved = checkpoint_to_json(first.checkpoint());
  Trainer second({cuboid16()}, checkpoint_from_json(saved));
  EXPECT_EQ(second.checkpoint().epoch, 3);
  second.run();
  const Checkpoint& resumed = second.checkpoint();
  EXPECT_EQ(resumed.history, full.history);
  EXPECT_EQ(resumed.model.params().values(), full.model.params().values());
  EXPECT_EQ(resumed.adam.m, full.adam.m);
  EXPECT_EQ(resumed.adam.v, full.adam.v);
  EXPECT_EQ(resumed.adam.t, full.adam.t);
  EXPECT_EQ(checkpoint_to_json(resumed), checkpoint_to_json(full));
}

TEST(Trainer, CheckpointFileRoundTrip) {
  const Checkpoint ck = fit_single(cuboid16(), small_config(2));
  const auto path = fixtures::temp_dir("ckpt") / "c.json";
  save_checkpoint(ck, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.model.params().values(), ck.model.params().values());
  EXPECT_EQ(back.history, ck.history);
  EXPECT_EQ(back.config.model, ck.config.model);
  EXPECT_THROW(load_checkpoint(path.parent_path() / "missing.json"), IoError);
}

TEST(Trainer, VersionAndModeErrors) {
  const Checkpoint ck = fit_single(cuboid16(), small_config(1));
  auto doc = nlohmann::json::parse(checkpoint_to_json(ck));
  doc["format_version"] = kCheckpointVersion + 1;
  EXPECT_THROW(checkpoint_from_json(doc.dump()), ModeError);
  EXPECT_THROW(checkpoint_from_json("{\"hello\": 1}"), ModeError);
  EXPECT_THROW(checkpoint_from_json("not json"), ValidationError);

  EXPECT_THROW(interpolate_codes(ck, 0, 0, 3), ModeError);
  EXPECT_THROW(Trainer({cuboid16(), cylinder16()}, ck), ModeError);
  EXPECT_THROW(fit_shared({cuboid16()}, small_config(1)), ContractError);
}

TEST(Trainer, SharedFitAndInterpolation) {
  const Checkpoint ck = fit_shared({cuboid16(), cylinder16()}, small_config(2));
  EXPECT_TRUE(ck.shared);
  EXPECT_EQ(ck.shape_count(), 2);
  EXPECT_EQ(ck.history.size(), 4u);
  const auto codes = interpolate_codes(ck, 0, 1, 5);
  ASSERT_EQ(codes.size(), 5u);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(codes.front()[i], ck.model.code(0)[static_cast<std::size_t>(i)]);
    EXPECT_EQ(codes.back()[i], ck.model.code(1)[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(codes[2][i], 0.5 * (ck.model.code(0)[static_cast<std::size_t>(i)] + ck.model.code(1)[static_cast<std::size_t>(i)]),
                1e-15);
  }
  EXPECT_THROW(interpolate_codes(ck, 0, 1, 1), ValidationError);
  EXPECT_THROW(interpolate_codes(ck, 0, 2, 3), ValidationError);
}

TEST(Trainer, NonFiniteParametersAbortWithLastGood) {
  Checkpoint ck = fit_single(cuboid16(), small_config(2));
  ck.config.epochs = 4;
  ck.model.params().view(head_segment(0, "b0"))[0] = std::nan("");
  Trainer t({cuboid16()}, ck);
  try {
    t.run();
    FAIL() << "expected FitAborted";
  } catch (const FitAborted& e) {
    EXPECT_EQ(e.last_good().epoch, 2);
    EXPECT_EQ(e.last_good().history.size(), 2u);
  }
}

TEST(Trainer, LossHistoryCsv) {
  const std::vector<LossRecord> h{{0, 0, 0.5, 0.25, 0.5025}, {1, 0, 0.25, 0.125, 0.25125}};
  const std::string csv = loss_history_csv(h);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,shape,recon,sketch,total");
  // Values are written with enough digits to parse back exactly.
  const std::string last = csv.substr(csv.rfind('\n', csv.size() - 2) + 1);
  EXPECT_EQ(last.substr(0, 4), "1,0,");
  EXPECT_EQ(std::stod(last.substr(last.rfind(',') + 1)), 0.25125);
}

TEST(Trainer, ConfigValidation) {
  FitConfig c = small_config();
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_config();
  c.near_ratio = 1.5;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_THROW(fit_single(VoxelGrid(8), small_config()), ValidationError);

  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"fit": {"epochz": 3}})")), ValidationError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"colour": 1})")), ValidationError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"fit": {"epochs": "many"}})")), ValidationError);
  const RunConfig rc = run_config_from_json(nlohmann::json::parse(R"({"fit": {"epochs": 12}, "loss": {"lambda": 0.5}, "seed": 4})"));
  EXPECT_EQ(rc.fit.epochs, 12);
  EXPECT_EQ(rc.fit.loss.lambda, 0.5);
  EXPECT_EQ(rc.fit.seed, 4u);
  EXPECT_EQ(rc.fit.lr, 1e-4);
  // Round trip through the serialized form.
  const RunConfig again = run_config_from_json(to_json(rc));
  EXPECT_EQ(to_json(again).dump(), to_json(rc).dump());
}

TEST(Trainer, VolumetricIouOfExactGrid) {
  ModelConfig mc;
  mc.num_cylinders = 1;
  mc.hidden = 16;
  mc.latent_dim = 4;
  SecadModel m(mc);
  m.initialize(1);
  const ModelView view{m.config(), m.params(), 0};
  const FieldParams field;
  // The IoU of the model against its own thresholded occupancy is 1.
  const VoxelGrid g = [&] {
    VoxelGrid out(16);
    std::vector<Vec3> pts;
    for (int k = 0; k < 16; ++k)
      for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i) pts.push_back(out.center(i, j, k));
    const auto fr = model_forward(view, field, pts);
    std::size_t idx = 0;
    for (int k = 0; k < 16; ++k)
      for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i) out.set(i, j, k, fr.occupancy[static_cast<Eigen::Index>(idx++)] > 0.5);
    return out;
  }();
  ASSERT_GT(g.occupied_count(), 0u);
  EXPECT_DOUBLE_EQ(volumetric_iou(view, field, g), 1.0);
}
