#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "secad/extract.hpp"

namespace secad {

namespace {

// Periodically extended knot t_i.
double knot(const std::vector<double>& breaks, double period, std::ptrdiff_t i) {
  const auto m = static_cast<std::ptrdiff_t>(breaks.size());
  std::ptrdiff_t q = i / m, r = i % m;
  if (r < 0) {
    r += m;
    --q;
  }
  return breaks[static_cast<std::size_t>(r)] + static_cast<double>(q) * period;
}

// Span s with t_s <= t < t_{s+1}, t mapped into [u_0, u_0 + period).
std::ptrdiff_t find_span(const std::vector<double>& breaks, double period, double& t) {
  const double u0 = breaks.front();
  t = u0 + std::fmod(t - u0, period);
  if (t < u0) t += period;
  if (t >= u0 + period) t = u0;
  const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
  return static_cast<std::ptrdiff_t>(it - breaks.begin()) - 1;
}

// Blossom of the cubic piece on span s at (x1, x2, x3).
Vec2 blossom(const BSplineLoop& b, std::ptrdiff_t s, const double x[3]) {
  const auto m = static_cast<std::ptrdiff_t>(b.control.size());
  Vec2 d[4];
  for (int j = 0; j < 4; ++j) d[j] = b.control[static_cast<std::size_t>(((s - 3 + j) % m + m) % m)];
  for (int r = 1; r <= 3; ++r) {
    for (int j = 3; j >= r; --j) {
      const double lo = knot(b.breaks, b.period, j + s - 3);
      const double hi = knot(b.breaks, b.period, j + 1 + s - r);
      const double a = (x[r - 1] - lo) / (hi - lo);
      d[j] = (1.0 - a) * d[j - 1] + a * d[j];
    }
  }
  return d[3];
}

// Nonzero basis values N_{s-3..s} at t (Cox-de Boor).
void basis(const std::vector<double>& breaks, double period, std::ptrdiff_t s, double t, double out[4]) {
  double left[4], right[4];
  out[0] = 1.0;
  for (int j = 1; j <= 3; ++j) {
    left[j] = t - knot(breaks, period, s + 1 - j);
    right[j] = knot(breaks, period, s + j) - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

struct Solve {
  bool ok = false;
  std::vector<Vec2> control;
  std::vector<double> span_residual;
  double residual = 0.0;
};

Solve least_squares(const Polyline& pts, const std::vector<double>& params, const std::vector<double>& breaks,
                    double period) {
  const auto m = static_cast<Eigen::Index>(breaks.size());
  const std::size_t n = pts.size();
  Mat ata = Mat::Zero(m, m);
  Mat atb = Mat::Zero(m, 2);
  std::vector<std::ptrdiff_t> spans(n);
  std::vector<std::array<double, 4>> values(n);
  for (std::size_t k = 0; k < n; ++k) {
    double t = params[k];
    const auto s = find_span(breaks, period, t);
    spans[k] = s;
    basis(breaks, period, s, t, values[k].data());
    for (int a = 0; a < 4; ++a) {
      const Eigen::Index ia = ((s - 3 + a) % m + m) % m;
      atb.row(ia) += values[k][static_cast<std::size_t>(a)] * pts[k].transpose();
      for (int b = 0; b < 4; ++b) {
        const Eigen::Index ib = ((s - 3 + b) % m + m) % m;
        ata(ia, ib) += values[k][static_cast<std::size_t>(a)] * values[k][static_cast<std::size_t>(b)];
      }
    }
  }
  Solve out;
  Eigen::ColPivHouseholderQR<Mat> qr(ata);
  qr.setThreshold(1e-12);
  if (qr.rank() < m) return out;
  const Mat sol = qr.solve(atb);
  out.ok = true;
  out.control.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) out.control[static_cast<std::size_t>(i)] = sol.row(i).transpose();
  out.span_residual.assign(static_cast<std::size_t>(m), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    Vec2 c = Vec2::Zero();
    for (int a = 0; a < 4; ++a)
      c += values[k][static_cast<std::size_t>(a)] *
           out.control[static_cast<std::size_t>(((spans[k] - 3 + a) % m + m) % m)];
    const double r = (c - pts[k]).squaredNorm();
    out.span_residual[static_cast<std::size_t>(spans[k])] += r;
    out.residual += r;
  }
  return out;
}

}  // namespace

Vec2 BSplineLoop::evaluate(double t) const {
  const auto s = find_span(breaks, period, t);
  const double x[3] = {t, t, t};
  return blossom(*this, s, x);
}

Polyline BSplineLoop::sample(int count) const {
  Polyline out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(evaluate(breaks.front() + period * i / count));
  return out;
}

std::vector<std::array<Vec2, 4>> BSplineLoop::bezier_segments() const {
  std::vector<std::array<Vec2, 4>> out;
  const auto m = static_cast<std::ptrdiff_t>(breaks.size());
  for (std::ptrdiff_t s = 0; s < m; ++s) {
    const double a = knot(breaks, period, s), b = knot(breaks, period, s + 1);
    const double x0[3] = {a, a, a}, x1[3] = {a, a, b}, x2[3] = {a, b, b}, x3[3] = {b, b, b};
    out.push_back({blossom(*this, s, x0), blossom(*this, s, x1), blossom(*this, s, x2), blossom(*this, s, x3)});
  }
  return out;
}

std::vector<double> BSplineLoop::knot_vector() const {
  std::vector<double> out;
  const auto m = static_cast<std::ptrdiff_t>(breaks.size());
  for (std::ptrdiff_t i = -3; i <= m + 3; ++i) out.push_back(knot(breaks, period, i));
  return out;
}

SplineFit fit_bspline(const Polyline& closed, double smoothing, const std::vector<std::size_t>& seed_vertices) {
  const std::size_t n = closed.size();
  if (n < 4) throw FitError("spline fit needs at least 4 vertices");

  // Collinear or coincident loops have no enclosed profile.
  Vec2 mean = Vec2::Zero();
  for (const auto& p : closed) mean += p;
  mean /= static_cast<double>(n);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : closed) cov += (p - mean) * (p - mean).transpose();
  const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cov).eigenvalues();
  if (!(ev[1] > 0.0) || ev[0] <= 1e-12 * ev[1]) throw FitError("degenerate (collinear) loop");

  std::vector<double> params(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) params[k] = params[k - 1] + (closed[k] - closed[k - 1]).norm();
  const double period = params.back() + (closed.front() - closed.back()).norm();
  for (std::size_t k = 1; k < n; ++k)
    if (!(params[k] > params[k - 1])) throw FitError("loop has repeated vertices");

  std::vector<std::size_t> seeds;
  for (std::size_t v : seed_vertices)
    if (v < n) seeds.push_back(v);
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  // Knots live on data vertices; start with four spread over the seeds.
  std::vector<std::size_t> knots;
  if (seeds.size() >= 4) {
    for (std::size_t j = 0; j < 4; ++j) knots.push_back(seeds[j * seeds.size() / 4]);
  } else {
    for (std::size_t j = 0; j < 4; ++j) knots.push_back(j * n / 4);
  }
  auto breaks_of = [&](const std::vector<std::size_t>& ks) {
    std::vector<double> b;
    for (std::size_t k : ks) b.push_back(params[k]);
    return b;
  };

  Solve cur = least_squares(closed, params, breaks_of(knots), period);
  if (!cur.ok) throw FitError("rank-deficient spline system");
  std::vector<char> frozen(n, 0);  // spans (by starting knot vertex) that cannot be split
  while (cur.residual > smoothing && knots.size() < n) {
    // Worst splittable span.
    std::ptrdiff_t best = -1;
    for (std::size_t s = 0; s < knots.size(); ++s) {
      const std::size_t a = knots[s], b = s + 1 < knots.size() ? knots[s + 1] : knots[0] + n;
      if (b - a < 2 || frozen[a]) continue;
      if (best < 0 || cur.span_residual[s] > cur.span_residual[static_cast<std::size_t>(best)]) best = static_cast<std::ptrdiff_t>(s);
    }
    if (best < 0) break;
    const auto s = static_cast<std::size_t>(best);
    const std::size_t a = knots[s], b = s + 1 < knots.size() ? knots[s + 1] : knots[0] + n;
    // Median data vertex of the span, moved to the nearest interior seed if any.
    std::size_t split = (a + b) / 2;
    std::size_t best_gap = n;
    for (std::size_t v : seeds) {
      for (std::size_t cand : {v, v + n}) {
        if (cand <= a || cand >= b) continue;
        const std::size_t gap = cand > split ? cand - split : split - cand;
        if (gap < best_gap) {
          best_gap = gap;
          split = cand;
        }
      }
    }
    auto trial = knots;
    trial.push_back(split % n);
    std::sort(trial.begin(), trial.end());
    Solve next = least_squares(closed, params, breaks_of(trial), period);
    if (!next.ok) {
      frozen[a] = 1;
      continue;
    }
    knots = std::move(trial);
    cur = std::move(next);
  }

  SplineFit fit;
  fit.spline.breaks = breaks_of(knots);
  fit.spline.period = period;
  fit.spline.control = std::move(cur.control);
  fit.residual = cur.residual;
  fit.params = std::move(params);
  return fit;
}

}  // namespace secad
