#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "toolmeta/envs/geometry.hpp"
#include "toolmeta/envs/render.hpp"
#include "toolmeta/envs/tool_catalog.hpp"

namespace toolmeta::envs {

enum class Task { pushing, lifting, sweeping, hammering };

std::string to_string(Task task);
Task parse_task(const std::string& name);

enum class ObservationMode { state_vector, grid };

struct WorkspaceBounds {
  double x_min = -0.15, x_max = 0.65;
  double y_min = -0.40, y_max = 0.40;
  double z_min = 0.01, z_max = 0.30;
};

struct TaskConfig {
  Task task = Task::pushing;
  int episode_length = 25;
  /// Per-axis velocity bounds; pushing has (x, y, yaw), others (x, y, z, yaw).
  std::vector<double> action_low;
  std::vector<double> action_high;
  double dt = 0.2;
  int substeps = 4;
  double grasp_height_threshold = 0.05;
  double grasp_radius = 0.04;
  bool grasp_enabled = true;
  double ee_radius = 0.015;
  double push_height = 0.02;        // fixed EE height while pushing
  double cylinder_radius = 0.025;
  double cylinder_height = 0.06;
  double nail_exposed = 0.03;       // nail length above the block at reset
  double strike_gain = 0.1;         // s; depth gained per m/s of excess speed
  double nail_friction_speed = 0.12;  // m/s of downward speed absorbed by friction
  double torque_gain = 1.0;
  WorkspaceBounds workspace;

  std::size_t action_dim() const { return action_low.size(); }
  static TaskConfig for_task(Task task);
};

/// Full simulator state. `object` holds the cylinder (sweeping) or the nail
/// (hammering); `target` is the planar goal, `target_height` the lift goal.
struct WorldState {
  std::array<double, 4> ee{};  // x, y, z, yaw
  Pose2 tool;                  // frame origin (handle butt) and heading
  double tool_z = 0.0;
  bool grasped = false;
  double grasp_z_offset = 0.0;  // ee z minus tool z while grasped
  Vec2 target;
  double target_height = 0.0;
  Vec2 object;
  double nail_depth = 0.0;
  int step_index = 0;
  std::array<double, 3> initial_distances{};
  int clamp_count = 0;

  bool operator==(const WorldState&) const = default;
};

struct RewardTerms {
  std::array<double, 3> distances{};  // raw distances (m) for up to three terms
  std::array<double, 3> weights{};
  std::size_t count = 0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
};

/// Quasi-static planar simulation of one manipulation task with one tool.
class TaskEnv {
 public:
  explicit TaskEnv(Task task, ObservationMode mode = ObservationMode::state_vector,
                   std::size_t grid_side = 32);
  TaskEnv(TaskConfig config, ObservationMode mode, std::size_t grid_side = 32);

  std::vector<double> reset(const ToolSpec& tool, std::uint64_t seed);
  StepResult step(std::span<const double> action);

  double reward() const;
  RewardTerms reward_terms() const;
  std::vector<double> observation() const;
  std::size_t observation_size() const;

  const WorldState& state() const noexcept { return state_; }
  /// Replaces the state (tests and scripted probes). Initial distances are
  /// kept as given.
  void set_state(const WorldState& s) { state_ = s; }
  const TaskConfig& config() const noexcept { return config_; }
  const ToolSpec& tool() const noexcept { return tool_; }
  ObservationMode observation_mode() const noexcept { return mode_; }
  std::size_t grid_side() const noexcept { return grid_side_; }
  std::vector<View> views() const;

  /// World-frame geometry helpers.
  Vec2 grasp_point_world() const;
  Vec2 head_center_world() const;
  Vec2 tool_centroid_world() const;
  std::array<Box, 2> tool_boxes_world() const;
  double nail_top_height() const;

  Scene scene() const;

  /// Applies the grasp heuristic to the current state.
  void grasp_update();

  static constexpr std::size_t kStateObservationSize = 25;

 private:
  void move_ee(double dx, double dy, double dz, double dyaw, double v_down);
  void push_tool_with_ee();
  void push_cylinder_with_tool();
  std::array<double, 3> current_distances() const;

  TaskConfig config_;
  ObservationMode mode_;
  std::size_t grid_side_;
  ToolSpec tool_;
  WorldState state_;
};

/// Reward from distances and their initial values, e.g.
/// w0 * max(0, 1 - d0/d0_init) + w1 * ... .
double shaped_reward(const RewardTerms& terms, const std::array<double, 3>& initial);

}  // namespace toolmeta::envs
