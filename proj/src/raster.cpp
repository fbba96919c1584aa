#include <algorithm>
#include <cmath>

#include "secad/extract.hpp"

namespace secad {

double ProfileRaster::sample(const Vec2& p) const {
  const double u = std::clamp((p.x() + half_x) / cell_x() - 0.5, 0.0, res - 1.0);
  const double v = std::clamp((p.y() + half_y) / cell_y() - 0.5, 0.0, res - 1.0);
  const int i0 = std::min(static_cast<int>(u), res - 2);
  const int j0 = std::min(static_cast<int>(v), res - 2);
  const double fu = u - i0, fv = v - j0;
  return (1 - fu) * (1 - fv) * value(i0, j0) + fu * (1 - fv) * value(i0 + 1, j0) + (1 - fu) * fv * value(i0, j0 + 1) +
         fu * fv * value(i0 + 1, j0 + 1);
}

ProfileRaster make_raster(int res, double half_x, double half_y, const std::function<double(const Vec2&)>& field) {
  if (res < 2) throw ValidationError("raster resolution must be >= 2");
  if (!(half_x > 0) || !(half_y > 0)) throw ValidationError("raster window must have positive area");
  ProfileRaster r;
  r.res = res;
  r.half_x = half_x;
  r.half_y = half_y;
  r.values.resize(static_cast<std::size_t>(res) * res);
  for (int j = 0; j < res; ++j)
    for (int i = 0; i < res; ++i) r.values[static_cast<std::size_t>(j) * res + i] = field(r.cell_center(i, j));
  return r;
}

std::optional<ProfileRaster> raster_profile(const ModelView& m, int head, const ExtrusionBox& box, int res,
                                            double margin) {
  if (res < 16) throw ValidationError("profile raster resolution must be >= 16");
  const double half_x = 0.5 * box.length() * margin;
  const double half_y = 0.5 * box.width() * margin;
  if (!(half_x > 1e-9) || !(half_y > 1e-9) || !std::isfinite(half_x) || !std::isfinite(half_y)) return std::nullopt;
  ProfileRaster r;
  r.res = res;
  r.half_x = half_x;
  r.half_y = half_y;
  Mat2X pts(2, static_cast<Eigen::Index>(res) * res);
  for (int j = 0; j < res; ++j)
    for (int i = 0; i < res; ++i) pts.col(static_cast<Eigen::Index>(j) * res + i) = r.cell_center(i, j);
  const RowVec s = sketch_sdf(m, head, pts);
  r.values.assign(s.data(), s.data() + s.size());
  return r;
}

}  // namespace secad
