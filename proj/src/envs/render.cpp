#include "toolmeta/envs/render.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "toolmeta/errors.hpp"

namespace toolmeta::envs {
namespace {

// Marks every cell whose centre passes `inside`, scanning only the cells
// overlapping the axis-aligned bounds [lo, hi].
template <typename Inside>
void fill(std::vector<double>& grid, std::size_t side, const GridFrame& f, std::size_t channel,
          Vec2 lo, Vec2 hi, Inside inside) {
  auto to_index = [&](double v, double o) {
    return static_cast<long>(std::floor((v - o) / f.pitch));
  };
  const long n = static_cast<long>(side);
  const long r0 = std::max(0L, to_index(lo.x, f.origin.x));
  const long r1 = std::min(n - 1, to_index(hi.x, f.origin.x));
  const long c0 = std::max(0L, to_index(lo.y, f.origin.y));
  const long c1 = std::min(n - 1, to_index(hi.y, f.origin.y));
  for (long r = r0; r <= r1; ++r)
    for (long c = c0; c <= c1; ++c) {
      const Vec2 p{f.origin.x + (static_cast<double>(r) + 0.5) * f.pitch,
                   f.origin.y + (static_cast<double>(c) + 0.5) * f.pitch};
      if (inside(p))
        grid[(static_cast<std::size_t>(r) * side + static_cast<std::size_t>(c)) * kGridChannels +
             channel] = 1.0;
    }
}

void fill_disc(std::vector<double>& grid, std::size_t side, const GridFrame& f,
               std::size_t channel, const Disc& d) {
  const Vec2 r{d.radius, d.radius};
  fill(grid, side, f, channel, d.center - r, d.center + r,
       [&](Vec2 p) { return (p - d.center).norm() <= d.radius; });
}

}  // namespace

GridFrame grid_frame(View view, std::size_t side, Vec2 ee_xy) {
  if (view == View::overhead)
    return {{-0.15, -0.40}, kOverheadExtent / static_cast<double>(side)};
  const double half = kWristExtent / 2;
  return {{ee_xy.x - half, ee_xy.y - half}, kWristExtent / static_cast<double>(side)};
}

std::vector<double> render_grid(const Scene& scene, View view, std::size_t side, Vec2 ee_xy) {
  if (side != 32 && side != 128)
    throw Error("grid side must be 32 or 128, got " + std::to_string(side));
  std::vector<double> grid(side * side * kGridChannels, 0.0);
  const GridFrame f = grid_frame(view, side, ee_xy);
  for (const auto& b : scene.tool) {
    const double ext = std::hypot(b.half_length, b.half_width);
    fill(grid, side, f, 0, b.center - Vec2{ext, ext}, b.center + Vec2{ext, ext},
         [&](Vec2 p) { return b.contains(p); });
  }
  for (const auto& d : scene.markers) fill_disc(grid, side, f, 1, d);
  if (scene.ee) fill_disc(grid, side, f, 2, *scene.ee);
  return grid;
}

}  // namespace toolmeta::envs
