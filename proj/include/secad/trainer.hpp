#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "secad/error.hpp"
#include "secad/losses.hpp"
#include "secad/model.hpp"
#include "secad/netcore.hpp"
#include "secad/voxelio.hpp"

namespace secad {

struct FitConfig {
  int epochs = 1000;
  std::size_t batch_points = 8192;
  double near_ratio = 0.5;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double adam_epsilon = 1e-8;
  LossConfig loss;
  ModelConfig model;  // num_codes is set by the fit mode
  std::uint64_t seed = 20230321;

  void validate() const;
};

struct LossRecord {
  int epoch = 0;
  int shape = 0;
  double recon = 0.0;
  double sketch = 0.0;
  double total = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  bool shared = false;
  FitConfig config;
  SecadModel model;
  AdamState adam;
  int epoch = 0;  // completed epochs
  std::vector<LossRecord> history;

  int shape_count() const { return model.config().num_codes; }
};

// Owns one fitting run. Every epoch draws a fresh batch per shape with a
// seed derived from (seed, epoch, shape) and takes one Adam step per shape.
class Trainer {
 public:
  Trainer(std::vector<VoxelGrid> grids, const FitConfig& cfg, bool shared);
  Trainer(std::vector<VoxelGrid> grids, Checkpoint resume);

  // Runs up to `count` more epochs (bounded by config.epochs).
  void run_epochs(int count);
  void run() { run_epochs(checkpoint_.config.epochs - checkpoint_.epoch); }
  bool done() const { return checkpoint_.epoch >= checkpoint_.config.epochs; }

  const Checkpoint& checkpoint() const { return checkpoint_; }
  Checkpoint release() && { return std::move(checkpoint_); }

 private:
  void prepare();
  void step(int shape);
  std::vector<VoxelGrid> grids_;
  std::vector<std::vector<std::uint32_t>> near_;
  Checkpoint checkpoint_;
};

// Thrown when a step produces a non-finite loss or gradient; carries the
// last checkpoint whose parameters were still finite.
class FitAborted : public NumericalError {
 public:
  FitAborted(const std::string& what, Checkpoint last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const noexcept { return last_good_; }

 private:
  Checkpoint last_good_;
};

SampleBatch epoch_batch(const VoxelGrid& grid, const std::vector<std::uint32_t>& near, const FitConfig& cfg,
                        int epoch, int shape);

Checkpoint fit_single(const VoxelGrid& grid, const FitConfig& cfg);
Checkpoint fit_shared(const std::vector<VoxelGrid>& grids, const FitConfig& cfg);

// z_t = (1 - t) z_a + t z_b for t evenly spaced over [0, 1].
std::vector<Vec> interpolate_codes(const Checkpoint& ckpt, int a, int b, int steps);

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// CSV with header: epoch,shape,recon,sketch,total
std::string loss_history_csv(const std::vector<LossRecord>& history);

// Volumetric IoU of thresholded occupancy (at 0.5) on the grid's voxel centers.
double volumetric_iou(const ModelView& m, const FieldParams& field, const VoxelGrid& grid);

}  // namespace secad
