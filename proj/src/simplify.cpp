#include <algorithm>
#include <cmath>

#include "secad/extract.hpp"

namespace secad {

namespace {

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

// Chord length and perpendicular distance of vertex i to the chord through
// its k-th neighbours.
void chord(const Polyline& c, std::size_t i, std::size_t k, double& length, double& dist) {
  const std::size_t n = c.size();
  const Vec2& a = c[wrap(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(k), n)];
  const Vec2& b = c[(i + k) % n];
  const Vec2 ab = b - a;
  length = ab.norm();
  const Vec2 ap = c[i] - a;
  dist = length > 0.0 ? std::abs(ab.x() * ap.y() - ab.y() * ap.x()) / length : ap.norm();
}

std::size_t region_of_support(const Polyline& c, std::size_t i) {
  const std::size_t n = c.size();
  const std::size_t kmax = std::max<std::size_t>(1, n / 2 - 1);
  std::size_t k = 1;
  double l0, d0;
  chord(c, i, k, l0, d0);
  while (k < kmax) {
    double l1, d1;
    chord(c, i, k + 1, l1, d1);
    if (l0 >= l1) break;
    const double r0 = l0 > 0.0 ? d0 / l0 : 0.0;
    const double r1 = l1 > 0.0 ? d1 / l1 : 0.0;
    if (d0 > 0.0 ? r0 >= r1 : r0 > r1) break;
    ++k;
    l0 = l1;
    d0 = d1;
  }
  return k;
}

double k_cosine(const Polyline& c, std::size_t i, std::size_t k) {
  const std::size_t n = c.size();
  const Vec2 a = c[wrap(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(k), n)] - c[i];
  const Vec2 b = c[(i + k) % n] - c[i];
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return -1.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::vector<std::size_t> extreme_points(const Polyline& c) {
  std::size_t idx[4] = {0, 0, 0, 0};
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c[i].x() < c[idx[0]].x()) idx[0] = i;
    if (c[i].y() < c[idx[1]].y()) idx[1] = i;
    if (c[i].x() > c[idx[2]].x()) idx[2] = i;
    if (c[i].y() > c[idx[3]].y()) idx[3] = i;
  }
  std::vector<std::size_t> out(idx, idx + 4);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  // Degenerate extents: pad with evenly spaced vertices.
  for (std::size_t j = 0; out.size() < 4 && j < 4; ++j) {
    const std::size_t cand = j * c.size() / 4;
    if (std::find(out.begin(), out.end(), cand) == out.end()) out.push_back(cand);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<std::size_t> dominant_points(const Polyline& closed) {
  const std::size_t n = closed.size();
  if (n <= 4) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  std::vector<std::size_t> support(n);
  std::vector<double> measure(n);
  for (std::size_t i = 0; i < n; ++i) {
    support[i] = region_of_support(closed, i);
    measure[i] = k_cosine(closed, i, support[i]);
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (measure[i] <= -1.0 + 1e-9) continue;  // straight
    const auto half = static_cast<std::ptrdiff_t>(support[i] / 2);
    bool is_max = true;
    for (std::ptrdiff_t o = -half; o <= half && is_max; ++o) {
      if (o == 0) continue;
      const std::size_t j = wrap(static_cast<std::ptrdiff_t>(i) + o, n);
      if (measure[j] > measure[i]) is_max = false;
      // Equal neighbours: the lower index wins.
      else if (measure[j] == measure[i] && j < i) is_max = false;
    }
    if (is_max) kept.push_back(i);
  }
  if (kept.size() < 4) return extreme_points(closed);
  return kept;
}

Polyline simplify_loop(const Polyline& closed) {
  Polyline out;
  for (std::size_t i : dominant_points(closed)) out.push_back(closed[i]);
  return out;
}

}  // namespace secad
