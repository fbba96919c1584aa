#pragma once

#include <span>

#include "secad/model.hpp"
#include "secad/netcore.hpp"
#include "secad/voxelio.hpp"

namespace secad {

struct LossConfig {
  double lambda = 0.01;
  FieldParams field;
  // Multiplier on (l/2, w/2, h) for the sketch-loss box membership test.
  double box_margin = 1.0;
};

struct LossParts {
  double total = 0.0;
  double recon = 0.0;
  double sketch = 0.0;
};

// Mean squared error between predicted and target occupancy.
double recon_loss(std::span<const double> predicted, std::span<const double> target);

// Loss value and, if `grads` is non-empty, its gradient accumulated into
// `grads` (parameter layout). The box membership mask is held constant; the
// cross-section target is differentiated through its trilinear lookup.
LossParts total_loss(const ModelView& m, const VoxelGrid& grid, const SampleBatch& batch, const LossConfig& cfg,
                     std::span<double> grads = {});

double sketch_loss(const ModelView& m, const VoxelGrid& grid, const SampleBatch& batch, const LossConfig& cfg);

// Binds (config, code, grid, batch) into a LossProgram over the parameters.
LossProgram make_loss_program(const ModelConfig& model_cfg, int code_index, const VoxelGrid& grid,
                              const SampleBatch& batch, const LossConfig& cfg);

}  // namespace secad
