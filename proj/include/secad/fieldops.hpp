#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace secad {

// Sharpness of the sdf -> occupancy sigmoid and the union softmax temperature.
struct FieldParams {
  double eta = 150.0;
  double phi = 25.0;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Extruded-solid distance from a 2D sketch distance and the local height coordinate:
//   min(max(s, |z| - h), 0) + |(max(s, 0), max(|z| - h, 0))|
inline double extrude_sdf(double s_sk, double z_local, double h) {
  const double d = std::abs(z_local) - h;
  const double inner = std::min(std::max(s_sk, d), 0.0);
  const double a = std::max(s_sk, 0.0), b = std::max(d, 0.0);
  return inner + std::sqrt(a * a + b * b);
}

// Four-region case split of the same quantity; reference form for extrude_sdf.
inline double extrude_sdf_piecewise(double s_sk, double z_local, double h) {
  const double d = std::abs(z_local) - h;
  const bool in_sketch = s_sk <= 0.0;
  const bool in_slab = std::abs(z_local) <= h;
  if (in_sketch && in_slab) return std::max(s_sk, d);
  if (in_sketch) return d;
  if (in_slab) return s_sk;
  return std::sqrt(s_sk * s_sk + d * d);
}

// Sigmoid(-eta * s): 1 deep inside, 0 far outside.
inline double occupancy_from_sdf(double s, double eta) { return sigmoid(-eta * s); }

// Softmax-weighted union sum_i softmax(phi * o)_i * o_i.
inline double soft_union(std::span<const double> occs, double phi) {
  double top = -std::numeric_limits<double>::infinity();
  for (double o : occs) top = std::max(top, o);
  double denom = 0.0, num = 0.0;
  for (double o : occs) {
    const double w = std::exp(phi * (o - top));
    denom += w;
    num += w * o;
  }
  return num / denom;
}

inline double hard_union_sdf(std::span<const double> sdfs) {
  double m = std::numeric_limits<double>::infinity();
  for (double s : sdfs) m = std::min(m, s);
  return m;
}

}  // namespace secad
