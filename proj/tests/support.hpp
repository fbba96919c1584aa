#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "secad/extract.hpp"
#include "secad/meshmetrics.hpp"
#include "secad/trainer.hpp"

namespace secad::fixtures {

// Axis-aligned box mesh with outward-facing triangles.
inline TriangleMesh box_mesh(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int k = 0; k < 8; ++k)
    m.vertices.emplace_back((k & 1) ? hi.x() : lo.x(), (k & 2) ? hi.y() : lo.y(), (k & 4) ? hi.z() : lo.z());
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
  }
  return m;
}

inline Polyline circle_polyline(double r, int n, Vec2 c = Vec2::Zero()) {
  Polyline p;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * M_PI * i / n;
    p.push_back(c + r * Vec2(std::cos(t), std::sin(t)));
  }
  return p;
}

// A small model whose parameters are all drawn at random, so that every
// parameter segment carries a nontrivial gradient.
inline SecadModel random_model(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.5) {
  SecadModel m(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : m.params().values()) v = n(rng);
  // Bias the quaternion towards identity so rotations stay well conditioned.
  auto bias = m.params().view("box.bias");
  for (int i = 0; i < cfg.num_cylinders; ++i) {
    bias[i * kBoxRawSize + 6] += 2.0;
  }
  return m;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("secad_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace secad::fixtures
