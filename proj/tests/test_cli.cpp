#include <gtest/gtest.h>

#include <json.hpp>

#include "secad/commands.hpp"
#include "support.hpp"

using namespace secad;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "secad");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct CliFixture {
  fs::path dir = fixtures::temp_dir("cli");
  fs::path config = dir / "config.json";
  fs::path cuboid = dir / "cuboid.secv";
  fs::path cylinder = dir / "cylinder.secv";

  CliFixture() {
    write_text(config, R"({"fit": {"epochs": 2, "batch_points": 256},
                          "model": {"hidden": 16, "latent_dim": 8, "num_cylinders": 2},
                          "extract": {"raster_res": 64, "mc_samples": 2000},
                          "metrics": {"n_cd": 500, "n_ecd": 500},
                          "reconstruct": {"mc_res": 16}})");
    write_text(dir / "cuboid.json", R"({"kind": "cuboid", "half_extents": [0.25, 0.2, 0.15]})");
    write_text(dir / "cylinder.json", R"({"kind": "cylinder", "radius": 0.2, "half_height": 0.2})");
  }
};

const CliFixture& fixture() {
  static const CliFixture f;
  return f;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto& f = fixture();
  EXPECT_EQ(run({"eval", (f.dir / "missing.obj").string(), (f.dir / "missing.obj").string()}), kExitIo);
  EXPECT_EQ(run({"frobnicate"}), kExitConfig);
  EXPECT_EQ(run({"synth", "--spec", (f.dir / "cuboid.json").string()}), kExitConfig);
  write_text(f.dir / "bad.json", R"({"fit": {"epochz": 1}})");
  EXPECT_EQ(run({"--config", (f.dir / "bad.json").string(), "synth", "--spec", (f.dir / "cuboid.json").string(),
                 "--out", f.cuboid.string()}),
            kExitConfig);
  write_text(f.dir / "garbage.secv", "SECV");
  EXPECT_EQ(run({"fit", (f.dir / "garbage.secv").string(), "--out", (f.dir / "g.json").string()}), kExitIo);
  EXPECT_EQ(exit_code_for(NumericalError("x")), kExitNumerical);
  EXPECT_EQ(exit_code_for(ModeError("x")), kExitState);
}

TEST(Cli, SynthFitReconstructEvalInterp) {
  const auto& f = fixture();
  const std::string cfg = f.config.string();
  ASSERT_EQ(run({"synth", "--spec", (f.dir / "cuboid.json").string(), "--dim", "16", "--out", f.cuboid.string()}), 0);
  ASSERT_EQ(run({"synth", "--spec", (f.dir / "cylinder.json").string(), "--dim", "16", "--out", f.cylinder.string()}), 0);
  EXPECT_EQ(load_voxels(f.cuboid).dim(), 16);

  const fs::path single = f.dir / "single.json";
  ASSERT_EQ(run({"--config", cfg, "fit", f.cuboid.string(), "--out", single.string()}), 0);
  EXPECT_TRUE(fs::exists(f.dir / "single.loss.csv"));
  EXPECT_EQ(load_checkpoint(single).epoch, 2);

  const fs::path se = f.dir / "se";
  ASSERT_EQ(run({"--config", cfg, "reconstruct", single.string(), "--mode", "se", "--out", se.string()}), 0);
  for (const char* name : {"sketches.json", "csg.json", "primitives.obj", "report.json"})
    EXPECT_TRUE(fs::exists(se / name)) << name;
  const auto report = nlohmann::json::parse(read_text(se / "report.json"));
  EXPECT_EQ(report["config"]["extract"]["raster_res"], 64);

  const fs::path mc = f.dir / "mc";
  ASSERT_EQ(run({"--config", cfg, "reconstruct", single.string(), "--mode", "mc", "--out", mc.string()}), 0);
  EXPECT_EQ(nlohmann::json::parse(read_text(mc / "report.json"))["res"], 16);
  EXPECT_EQ(run({"reconstruct", single.string(), "--mode", "voxel", "--out", mc.string()}), kExitConfig);
  EXPECT_EQ(run({"reconstruct", single.string(), "--shape", "3", "--out", mc.string()}), kExitConfig);

  // Single-shape checkpoints cannot be interpolated.
  EXPECT_EQ(run({"interp", single.string(), "--out", (f.dir / "nope").string()}), kExitState);

  const fs::path box = f.dir / "box.obj";
  save_obj(fixtures::box_mesh(Vec3::Constant(-0.2), Vec3::Constant(0.2)), box);
  const fs::path metrics = f.dir / "metrics.json";
  ASSERT_EQ(run({"--config", cfg, "eval", box.string(), box.string(), "--p-count", "2", "--out", metrics.string()}), 0);
  const auto m = nlohmann::json::parse(read_text(metrics));
  // Two independent 500-point samplings of the same box: about 2000 / (pi rho).
  EXPECT_LT(m["cd"].get<double>(), 2.0);
  EXPECT_EQ(m["p_count"], 2);

  const fs::path shared = f.dir / "shared.json";
  ASSERT_EQ(run({"--config", cfg, "fit", f.cuboid.string(), f.cylinder.string(), "--out", shared.string()}), 0);
  const fs::path interp = f.dir / "interp";
  ASSERT_EQ(run({"--config", cfg, "interp", shared.string(), "--steps", "5", "--meshes", "--out", interp.string()}), 0);
  for (int i = 0; i < 5; ++i) {
    const fs::path step = interp / ("step_" + std::to_string(i));
    EXPECT_TRUE(fs::exists(step / "sketches.json")) << i;
    EXPECT_TRUE(fs::exists(step / "mesh.obj")) << i;
    EXPECT_DOUBLE_EQ(nlohmann::json::parse(read_text(step / "report.json"))["t"].get<double>(), i / 4.0);
  }
  EXPECT_FALSE(fs::exists(interp / "step_5"));
}
