#include "secad/losses.hpp"

#include <cmath>

#include "secad/error.hpp"
#include "secad/parallel.hpp"

namespace secad {

namespace {

constexpr Eigen::Index kTrainChunk = 512;

struct Membership {
  std::vector<std::uint8_t> inside;  // N x n, row per head
  std::vector<double> target;        // cross-section target for members
  std::vector<Vec3> target_grad;     // d target / d projected point
  std::vector<std::size_t> count;    // per head
};

Membership box_membership(const std::vector<ExtrusionBox>& boxes, const VoxelGrid& grid, const SampleBatch& batch,
                          double margin) {
  const std::size_t n = batch.size();
  Membership mem;
  mem.inside.assign(boxes.size() * n, 0);
  mem.target.assign(boxes.size() * n, 0.0);
  mem.target_grad.assign(boxes.size() * n, Vec3::Zero());
  mem.count.assign(boxes.size(), 0);
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const auto& box = boxes[k];
    const Mat3 rt = box.rotation_matrix().transpose();
    const Vec3 axis = box.axis();
    const Vec3 half(0.5 * box.length() * margin, 0.5 * box.width() * margin, box.half_height() * margin);
    for (std::size_t j = 0; j < n; ++j) {
      const Vec3 local = rt * (batch.points[j] - box.center);
      if ((local.cwiseAbs().array() <= half.array()).all()) {
        mem.inside[k * n + j] = 1;
        mem.target[k * n + j] = occupancy_at(grid, batch.points[j] - local.z() * axis, &mem.target_grad[k * n + j]);
        ++mem.count[k];
      }
    }
  }
  return mem;
}

const char* first_nonfinite_stage(const HeadCache& c) {
  if (!c.a0.allFinite()) return "layer 0 affine";
  if (!c.h1.allFinite()) return "layer 0 softplus";
  if (!c.a1.allFinite()) return "layer 1 affine";
  if (!c.h2.allFinite()) return "layer 1 softplus";
  if (!c.a2.allFinite()) return "layer 2 affine";
  if (!c.h3.allFinite()) return "layer 2 softplus";
  if (!c.pre.allFinite()) return "layer 3 affine";
  return nullptr;
}

struct ChunkResult {
  double recon = 0.0;
  std::vector<double> sketch;
  ParamBuffer grads;
  std::vector<BoxGrad> box;
};

}  // namespace

double recon_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) throw ContractError("recon_loss: length mismatch");
  if (predicted.empty()) throw ContractError("recon_loss: empty batch");
  std::vector<double> sq(predicted.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double d = predicted[i] - target[i];
    sq[i] = d * d;
  }
  return pairwise_sum(sq) / static_cast<double>(sq.size());
}

LossParts total_loss(const ModelView& m, const VoxelGrid& grid, const SampleBatch& batch, const LossConfig& cfg,
                     std::span<double> grads) {
  if (batch.points.size() != batch.targets.size()) throw ContractError("sample batch points/targets differ in length");
  if (batch.size() == 0) throw ContractError("empty sample batch");
  const bool want_grad = !grads.empty();
  if (want_grad && grads.size() != m.params.size()) throw ContractError("gradient buffer does not match parameters");

  const int n_cyl = m.cfg.num_cylinders;
  const auto boxes = decode_boxes(m);
  const auto biases = head_code_bias(m);
  const auto mem = box_membership(boxes, grid, batch, cfg.box_margin);
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  const double eta = cfg.field.eta, phi = cfg.field.phi;
  std::vector<Mat3> rot_t(boxes.size());
  for (std::size_t k = 0; k < boxes.size(); ++k) rot_t[k] = boxes[k].rotation_matrix().transpose();

  const std::size_t chunks = static_cast<std::size_t>((n + kTrainChunk - 1) / kTrainChunk);
  std::vector<ChunkResult> results(chunks);

  parallel_for(chunks, [&](std::size_t ci) {
    const Eigen::Index start = static_cast<Eigen::Index>(ci) * kTrainChunk;
    const Eigen::Index len = std::min(kTrainChunk, n - start);
    ChunkResult& res = results[ci];
    res.sketch.assign(static_cast<std::size_t>(n_cyl), 0.0);

    std::vector<HeadCache> caches(static_cast<std::size_t>(n_cyl));
    std::vector<Mat2X> planes(static_cast<std::size_t>(n_cyl), Mat2X(2, len));
    Mat zl(n_cyl, len), occ(n_cyl, len), scyl(n_cyl, len);
    for (int k = 0; k < n_cyl; ++k) {
      const auto& box = boxes[static_cast<std::size_t>(k)];
      auto& plane = planes[static_cast<std::size_t>(k)];
      for (Eigen::Index j = 0; j < len; ++j) {
        const Vec3 local = rot_t[static_cast<std::size_t>(k)] * (batch.points[static_cast<std::size_t>(start + j)] - box.center);
        plane(0, j) = local.x();
        plane(1, j) = local.y();
        zl(k, j) = local.z();
      }
      auto& cache = caches[static_cast<std::size_t>(k)];
      head_forward(m, k, biases[static_cast<std::size_t>(k)], plane, cache);
      if (const char* stage = first_nonfinite_stage(cache))
        throw NumericalError(std::string("non-finite value in sketch head ") + std::to_string(k) + " at " + stage);
      for (Eigen::Index j = 0; j < len; ++j) {
        scyl(k, j) = extrude_sdf(cache.s[j], zl(k, j), box.half_height());
        occ(k, j) = occupancy_from_sdf(scyl(k, j), eta);
      }
    }

    // Soft union, recon and sketch terms.
    Mat weights(n_cyl, len);
    RowVec total(len);
    std::vector<double> recon_terms(static_cast<std::size_t>(len));
    for (Eigen::Index j = 0; j < len; ++j) {
      double top = occ(0, j);
      for (int k = 1; k < n_cyl; ++k) top = std::max(top, occ(k, j));
      double denom = 0.0, num = 0.0;
      for (int k = 0; k < n_cyl; ++k) {
        weights(k, j) = std::exp(phi * (occ(k, j) - top));
        denom += weights(k, j);
        num += weights(k, j) * occ(k, j);
      }
      weights.col(j) /= denom;
      total[j] = num / denom;
      if (!std::isfinite(total[j])) throw NumericalError("non-finite value in soft union");
      const double d = total[j] - batch.targets[static_cast<std::size_t>(start + j)];
      recon_terms[static_cast<std::size_t>(j)] = d * d;
    }
    res.recon = pairwise_sum(recon_terms);

    std::vector<double> sk_terms;
    Mat proj_pred(n_cyl, len);
    for (int k = 0; k < n_cyl; ++k) {
      sk_terms.clear();
      for (Eigen::Index j = 0; j < len; ++j) {
        const std::size_t idx = static_cast<std::size_t>(k) * batch.size() + static_cast<std::size_t>(start + j);
        proj_pred(k, j) = occupancy_from_sdf(caches[static_cast<std::size_t>(k)].s[j], eta);
        if (!mem.inside[idx]) continue;
        const double d = proj_pred(k, j) - mem.target[idx];
        sk_terms.push_back(d * d);
      }
      res.sketch[static_cast<std::size_t>(k)] = pairwise_sum(sk_terms);
    }

    if (!want_grad) return;

    res.grads.assign(m.params.size(), 0.0);
    res.box.assign(static_cast<std::size_t>(n_cyl), BoxGrad{});
    const double inv_n = 1.0 / static_cast<double>(n);
    RowVec ds(len);
    Mat2X dplane(2, len);
    for (int k = 0; k < n_cyl; ++k) {
      const auto& box = boxes[static_cast<std::size_t>(k)];
      const auto& cache = caches[static_cast<std::size_t>(k)];
      const double h = box.half_height();
      const double sketch_scale =
          mem.count[static_cast<std::size_t>(k)] ? cfg.lambda / static_cast<double>(mem.count[static_cast<std::size_t>(k)]) : 0.0;
      RowVec dzl(len);
      Vec3 daxis = Vec3::Zero();
      const Vec3 axis = box.axis();
      double dh = 0.0;
      for (Eigen::Index j = 0; j < len; ++j) {
        const double t = batch.targets[static_cast<std::size_t>(start + j)];
        const double d_total = 2.0 * (total[j] - t) * inv_n;
        const double o = occ(k, j);
        const double d_occ = d_total * weights(k, j) * (1.0 + phi * (o - total[j]));
        const double d_scyl = d_occ * (-eta) * o * (1.0 - o);

        const double s = cache.s[j];
        const double z = zl(k, j);
        const double d = std::abs(z) - h;
        double g_s = 0.0, g_d = 0.0;
        // min(max(s, d), 0)
        const double mx = s >= d ? s : d;
        if (mx <= 0.0) {
          if (s >= d) g_s += d_scyl;
          else g_d += d_scyl;
        }
        // |(max(s, 0), max(d, 0))|
        const double a = std::max(s, 0.0), b = std::max(d, 0.0);
        const double r = std::sqrt(a * a + b * b);
        if (r > 0.0) {
          if (s >= 0.0) g_s += d_scyl * a / r;
          if (d >= 0.0) g_d += d_scyl * b / r;
        }
        dzl[j] = z > 0 ? g_d : (z < 0 ? -g_d : 0.0);
        dh -= g_d;
        const std::size_t idx = static_cast<std::size_t>(k) * batch.size() + static_cast<std::size_t>(start + j);
        if (mem.inside[idx]) {
          const double p = proj_pred(k, j);
          const double diff = sketch_scale * 2.0 * (p - mem.target[idx]);
          g_s += diff * (-eta) * p * (1.0 - p);
          // Target sampled at x - z * axis.
          const Vec3 dq = -diff * mem.target_grad[idx];
          dzl[j] -= dq.dot(axis);
          daxis -= z * dq;
        }
        ds[j] = g_s;
      }
      head_backward(m, k, planes[static_cast<std::size_t>(k)], cache, ds, res.grads, &dplane);

      auto& bg = res.box[static_cast<std::size_t>(k)];
      bg.size.z() += dh;
      const Mat3 rot = box.rotation_matrix();
      for (Eigen::Index j = 0; j < len; ++j) {
        const Vec3 dlocal(dplane(0, j), dplane(1, j), dzl[j]);
        const Vec3 v = batch.points[static_cast<std::size_t>(start + j)] - box.center;
        bg.center -= rot * dlocal;
        bg.rotation += v * dlocal.transpose();
      }
      bg.rotation.col(2) += daxis;
    }
  });

  LossParts parts;
  std::vector<double> recon_parts(chunks);
  for (std::size_t c = 0; c < chunks; ++c) recon_parts[c] = results[c].recon;
  parts.recon = pairwise_sum(recon_parts) / static_cast<double>(n);
  std::vector<double> sk_parts(chunks);
  for (int k = 0; k < n_cyl; ++k) {
    const auto count = mem.count[static_cast<std::size_t>(k)];
    if (count == 0) continue;
    for (std::size_t c = 0; c < chunks; ++c) sk_parts[c] = results[c].sketch[static_cast<std::size_t>(k)];
    parts.sketch += pairwise_sum(sk_parts) / static_cast<double>(count);
  }
  parts.total = parts.recon + cfg.lambda * parts.sketch;

  if (want_grad) {
    // Fixed-shape pairwise reduction over chunk buffers.
    for (std::size_t stride = 1; stride < chunks; stride *= 2) {
      for (std::size_t c = 0; c + stride < chunks; c += 2 * stride) {
        auto& dst = results[c];
        const auto& src = results[c + stride];
        for (std::size_t i = 0; i < dst.grads.size(); ++i) dst.grads[i] += src.grads[i];
        for (int k = 0; k < n_cyl; ++k) {
          auto& a = dst.box[static_cast<std::size_t>(k)];
          const auto& b = src.box[static_cast<std::size_t>(k)];
          a.size += b.size;
          a.center += b.center;
          a.rotation += b.rotation;
        }
      }
    }
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += results[0].grads[i];
    decode_boxes_backward(m, results[0].box, grads);
    for (double g : grads)
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient");
  }
  return parts;
}

double sketch_loss(const ModelView& m, const VoxelGrid& grid, const SampleBatch& batch, const LossConfig& cfg) {
  return total_loss(m, grid, batch, cfg).sketch;
}

LossProgram make_loss_program(const ModelConfig& model_cfg, int code_index, const VoxelGrid& grid,
                              const SampleBatch& batch, const LossConfig& cfg) {
  return [&model_cfg, code_index, &grid, &batch, cfg](const ParameterStore& params, std::span<double> grads) {
    ModelView view{model_cfg, params, code_index};
    return total_loss(view, grid, batch, cfg, grads).total;
  };
}

}  // namespace secad
