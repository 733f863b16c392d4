#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "toolmeta/envs/geometry.hpp"

namespace toolmeta::envs {

enum class View { overhead, wrist };

/// Everything a top-down occupancy render needs.
struct Scene {
  std::vector<Box> tool;
  std::vector<Disc> markers;  // target, cylinder, nail
  std::optional<Disc> ee;
};

struct GridFrame {
  Vec2 origin;       // world coordinate of the grid corner (row 0, col 0)
  double pitch = 0;  // metres per cell
};

inline constexpr std::size_t kGridChannels = 3;
inline constexpr double kOverheadExtent = 0.8;
inline constexpr double kWristExtent = 0.24;

/// Overhead grids cover the workspace; wrist grids are centred on `ee_xy`.
GridFrame grid_frame(View view, std::size_t side, Vec2 ee_xy);

/// Binary occupancy in row-major (row = world x, col = world y, channel)
/// order: channel 0 tool, 1 target/objects, 2 end-effector. Cells are
/// sampled at their centres. `side` must be 32 or 128.
std::vector<double> render_grid(const Scene& scene, View view, std::size_t side,
                                Vec2 ee_xy = {});

}  // namespace toolmeta::envs
