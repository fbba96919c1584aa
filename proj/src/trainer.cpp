#include "secad/trainer.hpp"

#include <cmath>
#include <sstream>

#include "secad/parallel.hpp"

namespace secad {

void FitConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_points < 1) throw ValidationError("batch_points must be >= 1");
  if (!(near_ratio >= 0 && near_ratio <= 1)) throw ValidationError("near_ratio must lie in [0, 1]");
  if (!(lr > 0)) throw ValidationError("lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ValidationError("Adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0)) throw ValidationError("adam_epsilon must be positive");
  if (!(loss.lambda >= 0)) throw ValidationError("lambda must be non-negative");
  if (!(loss.field.eta > 0) || !(loss.field.phi > 0)) throw ValidationError("eta and phi must be positive");
  if (!(loss.box_margin > 0)) throw ValidationError("box_margin must be positive");
  if (model.num_cylinders < 1 || model.hidden < 1 || model.latent_dim < 1)
    throw ValidationError("model sizes must be positive");
}

namespace {

Checkpoint fresh_checkpoint(const FitConfig& cfg, int shapes, bool shared) {
  cfg.validate();
  Checkpoint ck;
  ck.shared = shared;
  ck.config = cfg;
  ck.config.model.num_codes = shapes;
  ck.model = SecadModel(ck.config.model);
  ck.model.initialize(cfg.seed);
  ck.adam = AdamState::for_params(ck.model.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
  return ck;
}

}  // namespace

Trainer::Trainer(std::vector<VoxelGrid> grids, const FitConfig& cfg, bool shared) : grids_(std::move(grids)) {
  if (grids_.empty()) throw ContractError("no voxel grids to fit");
  checkpoint_ = fresh_checkpoint(cfg, static_cast<int>(grids_.size()), shared);
  prepare();
}

Trainer::Trainer(std::vector<VoxelGrid> grids, Checkpoint resume) : grids_(std::move(grids)), checkpoint_(std::move(resume)) {
  prepare();
}

void Trainer::prepare() {
  if (grids_.empty()) throw ContractError("no voxel grids to fit");
  if (static_cast<int>(grids_.size()) != checkpoint_.shape_count())
    throw ModeError("checkpoint holds " + std::to_string(checkpoint_.shape_count()) + " codes but " +
                    std::to_string(grids_.size()) + " grids were given");
  for (const auto& g : grids_) {
    require_mixed_occupancy(g);
    near_.push_back(near_surface_voxels(g));
  }
}

SampleBatch epoch_batch(const VoxelGrid& grid, const std::vector<std::uint32_t>& near, const FitConfig& cfg,
                        int epoch, int shape) {
  const std::uint64_t seed = counter_hash(cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(shape));
  return sample_points(grid, near, cfg.batch_points, cfg.near_ratio, seed);
}

void Trainer::step(int shape) {
  auto& ck = checkpoint_;
  const auto batch = epoch_batch(grids_[static_cast<std::size_t>(shape)], near_[static_cast<std::size_t>(shape)],
                                 ck.config, ck.epoch, shape);
  const ModelView view{ck.model.config(), ck.model.params(), shape};
  ParamBuffer grads(ck.model.params().size(), 0.0);
  LossParts parts;
  try {
    parts = total_loss(view, grids_[static_cast<std::size_t>(shape)], batch, ck.config.loss, grads);
  } catch (const NumericalError& e) {
    throw FitAborted(std::string("fit aborted at epoch ") + std::to_string(ck.epoch) + ": " + e.what(), ck);
  }
  if (!std::isfinite(parts.total))
    throw FitAborted("fit aborted at epoch " + std::to_string(ck.epoch) + ": non-finite loss", ck);
  Checkpoint before = ck;
  adam_step(ck.model.params(), grads, ck.adam);
  if (!ck.model.params().all_finite())
    throw FitAborted("fit aborted at epoch " + std::to_string(ck.epoch) + ": non-finite parameters", std::move(before));
  ck.history.push_back(LossRecord{ck.epoch, shape, parts.recon, parts.sketch, parts.total});
}

void Trainer::run_epochs(int count) {
  for (int e = 0; e < count && !done(); ++e) {
    for (int s = 0; s < checkpoint_.shape_count(); ++s) step(s);
    checkpoint_.epoch += 1;
  }
}

Checkpoint fit_single(const VoxelGrid& grid, const FitConfig& cfg) {
  require_mixed_occupancy(grid);
  Trainer trainer({grid}, cfg, false);
  trainer.run();
  return std::move(trainer).release();
}

Checkpoint fit_shared(const std::vector<VoxelGrid>& grids, const FitConfig& cfg) {
  if (grids.size() < 2) throw ContractError("shared fitting needs at least two shapes");
  for (const auto& g : grids) require_mixed_occupancy(g);
  Trainer trainer(grids, cfg, true);
  trainer.run();
  return std::move(trainer).release();
}

std::vector<Vec> interpolate_codes(const Checkpoint& ckpt, int a, int b, int steps) {
  if (!ckpt.shared) throw ModeError("latent interpolation needs a shared-decoder checkpoint");
  if (steps < 2) throw ValidationError("interpolation needs at least 2 steps");
  const int count = ckpt.shape_count();
  if (a < 0 || b < 0 || a >= count || b >= count) throw ValidationError("shape index out of range");
  const auto za = ckpt.model.code(a);
  const auto zb = ckpt.model.code(b);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
    Vec z(static_cast<Eigen::Index>(za.size()));
    for (std::size_t i = 0; i < za.size(); ++i) z[static_cast<Eigen::Index>(i)] = (1.0 - t) * za[i] + t * zb[i];
    out.push_back(std::move(z));
  }
  return out;
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,shape,recon,sketch,total\n";
  for (const auto& r : history) os << r.epoch << ',' << r.shape << ',' << r.recon << ',' << r.sketch << ',' << r.total << '\n';
  return os.str();
}

double volumetric_iou(const ModelView& m, const FieldParams& field, const VoxelGrid& grid) {
  const int dim = grid.dim();
  std::vector<Vec3> centers;
  centers.reserve(grid.size());
  for (int k = 0; k < dim; ++k)
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i) centers.push_back(grid.center(i, j, k));
  const auto fwd = model_forward(m, field, centers);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const bool pred = fwd.occupancy[static_cast<Eigen::Index>(i)] >= 0.5;
    const bool truth = grid.data()[i] != 0;
    inter += pred && truth;
    uni += pred || truth;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

}  // namespace secad
