#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "secad/meshmetrics.hpp"
#include "secad/parallel.hpp"

namespace secad {

SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw ValidationError("cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cumulative[t] = total;
  }
  if (!(total > 0.0)) throw ValidationError("cannot sample a mesh with zero area");

  SurfaceSamples s;
  s.points.resize(n);
  s.normals.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const double u = counter_uniform(seed, i, 0) * total;
    std::size_t t = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    t = std::min(t, cumulative.size() - 1);
    // Zero-area triangles own no interval; step past them.
    while (mesh.triangle_area(t) == 0.0 && t + 1 < cumulative.size()) ++t;
    const auto& tri = mesh.triangles[t];
    const double r1 = std::sqrt(counter_uniform(seed, i, 1)), r2 = counter_uniform(seed, i, 2);
    s.points[i] = (1.0 - r1) * mesh.vertices[static_cast<std::size_t>(tri[0])] +
                  r1 * (1.0 - r2) * mesh.vertices[static_cast<std::size_t>(tri[1])] +
                  r1 * r2 * mesh.vertices[static_cast<std::size_t>(tri[2])];
    s.normals[i] = mesh.triangle_normal(t);
  });
  return s;
}

PointIndex::PointIndex(const std::vector<Vec3>& points) : points_(points) {
  if (points.empty()) throw ContractError("point index over an empty set");
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 ext = (hi - lo).cwiseMax(1e-9);
  // About two points per occupied cell for surface-like sets.
  const double area_scale = std::max({ext.x() * ext.y(), ext.y() * ext.z(), ext.x() * ext.z()});
  cell_ = std::max(std::sqrt(2.0 * area_scale / static_cast<double>(points.size())), 1e-9);
  for (int a = 0; a < 3; ++a) {
    dims_[a] = std::clamp(static_cast<long>(ext[a] / cell_) + 1, 1L, 1024L);
  }
  while (dims_[0] * dims_[1] * dims_[2] > static_cast<long>(8 * points.size() + 64)) {
    cell_ *= 1.25;
    for (int a = 0; a < 3; ++a) dims_[a] = std::clamp(static_cast<long>(ext[a] / cell_) + 1, 1L, 1024L);
  }
  origin_ = lo;

  const std::size_t cells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  starts_.assign(cells + 1, 0);
  std::vector<std::size_t> slots(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = cell_of(points[i]);
    slots[i] = slot(c[0], c[1], c[2]);
    ++starts_[slots[i] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) starts_[c + 1] += starts_[c];
  order_.resize(points.size());
  std::vector<std::uint32_t> fill(starts_.begin(), starts_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) order_[fill[slots[i]]++] = static_cast<std::uint32_t>(i);
}

std::array<long, 3> PointIndex::cell_of(const Vec3& p) const {
  std::array<long, 3> c;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - origin_[a]) / cell_);
    c[a] = std::clamp(static_cast<long>(std::clamp(f, -1.0, 1e9)), 0L, dims_[a] - 1);
  }
  return c;
}

std::size_t PointIndex::slot(long i, long j, long k) const {
  return static_cast<std::size_t>((k * dims_[1] + j) * dims_[0] + i);
}

std::pair<std::size_t, double> PointIndex::nearest(const Vec3& q) const {
  const auto c = cell_of(q);
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  const long max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  for (long r = 0; r <= max_ring; ++r) {
    for (long k = c[2] - r; k <= c[2] + r; ++k) {
      if (k < 0 || k >= dims_[2]) continue;
      for (long j = c[1] - r; j <= c[1] + r; ++j) {
        if (j < 0 || j >= dims_[1]) continue;
        const bool shell_jk = std::abs(k - c[2]) == r || std::abs(j - c[1]) == r;
        for (long i = c[0] - r; i <= c[0] + r; ++i) {
          if (i < 0 || i >= dims_[0]) continue;
          // Only the boundary of the ring is new.
          if (!shell_jk && std::abs(i - c[0]) != r) continue;
          const std::size_t s = slot(i, j, k);
          for (std::uint32_t o = starts_[s]; o < starts_[s + 1]; ++o) {
            const std::size_t idx = order_[o];
            const double d2 = (points_[idx] - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
              best_d2 = d2;
              best = idx;
            }
          }
        }
      }
    }
    // Unvisited cells are at least r cells away along some axis.
    const double reach = static_cast<double>(r) * cell_;
    if (best_d2 <= reach * reach) break;
  }
  return {best, best_d2};
}

void PointIndex::for_each_within(const Vec3& q, double radius, const std::function<void(std::size_t)>& fn) const {
  const auto lo = cell_of(q - Vec3::Constant(radius));
  const auto hi = cell_of(q + Vec3::Constant(radius));
  const double r2 = radius * radius;
  for (long k = lo[2]; k <= hi[2]; ++k)
    for (long j = lo[1]; j <= hi[1]; ++j)
      for (long i = lo[0]; i <= hi[0]; ++i) {
        const std::size_t s = slot(i, j, k);
        for (std::uint32_t o = starts_[s]; o < starts_[s + 1]; ++o)
          if ((points_[order_[o]] - q).squaredNorm() <= r2) fn(order_[o]);
      }
}

namespace {

double mean_nearest_d2(const std::vector<Vec3>& from, const PointIndex& to) {
  std::vector<double> d(from.size());
  parallel_for(from.size(), [&](std::size_t i) { d[i] = to.nearest(from[i]).second; });
  return pairwise_sum(d) / static_cast<double>(d.size());
}

double mean_normal_dot(const SurfaceSamples& from, const SurfaceSamples& to, const PointIndex& index) {
  std::vector<double> d(from.points.size());
  parallel_for(d.size(), [&](std::size_t i) {
    d[i] = from.normals[i].dot(to.normals[index.nearest(from.points[i]).first]);
  });
  return pairwise_sum(d) / static_cast<double>(d.size());
}

}  // namespace

double chamfer_raw(const std::vector<Vec3>& p, const std::vector<Vec3>& g) {
  if (p.empty() || g.empty()) throw ContractError("chamfer distance of an empty point set");
  const PointIndex ip(p), ig(g);
  return mean_nearest_d2(p, ig) + mean_nearest_d2(g, ip);
}

double chamfer(const std::vector<Vec3>& p, const std::vector<Vec3>& g) { return 1000.0 * chamfer_raw(p, g); }

double normal_consistency(const SurfaceSamples& p, const SurfaceSamples& g) {
  if (p.points.empty() || g.points.empty()) throw ContractError("normal consistency of an empty point set");
  const PointIndex ip(p.points), ig(g.points);
  return 0.5 * (mean_normal_dot(p, g, ig) + mean_normal_dot(g, p, ip));
}

std::vector<std::size_t> edge_points(const SurfaceSamples& s, double distance, double tau) {
  if (s.points.empty()) return {};
  const PointIndex index(s.points);
  std::vector<char> edge(s.points.size(), 0);
  parallel_for(s.points.size(), [&](std::size_t i) {
    index.for_each_within(s.points[i], distance, [&](std::size_t j) {
      if (j != i && s.normals[i].dot(s.normals[j]) < tau) edge[i] = 1;
    });
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edge.size(); ++i)
    if (edge[i]) out.push_back(i);
  return out;
}

std::optional<double> edge_chamfer(const SurfaceSamples& p, const SurfaceSamples& g, const MetricsConfig& cfg) {
  std::vector<Vec3> pe, ge;
  for (std::size_t i : edge_points(p, cfg.edge_distance, cfg.edge_tau)) pe.push_back(p.points[i]);
  for (std::size_t i : edge_points(g, cfg.edge_distance, cfg.edge_tau)) ge.push_back(g.points[i]);
  if (pe.empty() || ge.empty()) return std::nullopt;
  return 100.0 * chamfer_raw(pe, ge);
}

std::optional<double> edge_chamfer(const TriangleMesh& p, const TriangleMesh& g, const MetricsConfig& cfg) {
  return edge_chamfer(sample_surface(p, cfg.n_ecd, counter_hash(cfg.seed, 2)),
                      sample_surface(g, cfg.n_ecd, counter_hash(cfg.seed, 3)), cfg);
}

MetricsReport evaluate_meshes(const TriangleMesh& pred, const TriangleMesh& gt, const MetricsConfig& cfg,
                              std::size_t p_count) {
  if (pred.empty() || gt.empty()) throw ContractError("metrics need two nonempty meshes");
  MetricsReport r;
  const auto sp = sample_surface(pred, cfg.n_cd, counter_hash(cfg.seed, 0));
  const auto sg = sample_surface(gt, cfg.n_cd, counter_hash(cfg.seed, 1));
  r.cd = chamfer(sp.points, sg.points);
  r.nc = normal_consistency(sp, sg);
  r.ecd = edge_chamfer(pred, gt, cfg);
  r.p_count = p_count;
  return r;
}

std::string metrics_json(const MetricsReport& r, const MetricsConfig& cfg) {
  nlohmann::json doc{{"cd", r.cd},
                     {"ecd", r.ecd ? nlohmann::json(*r.ecd) : nlohmann::json(nullptr)},
                     {"ecd_no_edges", !r.ecd.has_value()},
                     {"nc", r.nc},
                     {"p_count", r.p_count},
                     {"config",
                      {{"d", cfg.edge_distance},
                       {"tau", cfg.edge_tau},
                       {"n_cd", cfg.n_cd},
                       {"n_ecd", cfg.n_ecd},
                       {"seed", cfg.seed}}}};
  return doc.dump(2) + "\n";
}

}  // namespace secad
