#include "toolmeta/envs/task_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "toolmeta/errors.hpp"

namespace toolmeta::envs {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinInitialDistance = 1e-3;
constexpr double kNailRadius = 0.004;

double dist3(double ax, double ay, double az, double bx, double by, double bz) {
  return std::sqrt((ax - bx) * (ax - bx) + (ay - by) * (ay - by) + (az - bz) * (az - bz));
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::pushing: return "pushing";
    case Task::lifting: return "lifting";
    case Task::sweeping: return "sweeping";
    case Task::hammering: return "hammering";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  for (Task t : {Task::pushing, Task::lifting, Task::sweeping, Task::hammering})
    if (to_string(t) == name) return t;
  throw Error("unknown task '" + name + "'");
}

TaskConfig TaskConfig::for_task(Task task) {
  TaskConfig c;
  c.task = task;
  const double yaw = kPi / 4;
  switch (task) {
    case Task::pushing:
      c.episode_length = 25;
      c.action_low = {-0.05, -0.1, -yaw};
      c.action_high = {0.15, 0.1, yaw};
      c.grasp_enabled = false;
      break;
    case Task::lifting:
      c.episode_length = 25;
      c.action_low = {-0.1, -0.1, -0.1, -yaw};
      c.action_high = {0.1, 0.1, 0.1, yaw};
      break;
    case Task::sweeping:
    case Task::hammering:
      c.episode_length = 40;
      c.action_low = {-0.2, -0.2, -0.2, -yaw};
      c.action_high = {0.2, 0.2, 0.2, yaw};
      break;
  }
  return c;
}

double shaped_reward(const RewardTerms& terms, const std::array<double, 3>& initial) {
  double r = 0.0;
  for (std::size_t i = 0; i < terms.count; ++i)
    r += terms.weights[i] * std::max(0.0, 1.0 - terms.distances[i] / initial[i]);
  return r;
}

TaskEnv::TaskEnv(Task task, ObservationMode mode, std::size_t grid_side)
    : TaskEnv(TaskConfig::for_task(task), mode, grid_side) {}

TaskEnv::TaskEnv(TaskConfig config, ObservationMode mode, std::size_t grid_side)
    : config_(std::move(config)), mode_(mode), grid_side_(grid_side) {
  if (mode_ == ObservationMode::grid && grid_side_ != 32 && grid_side_ != 128)
    throw Error("grid side must be 32 or 128");
}

Vec2 TaskEnv::grasp_point_world() const { return state_.tool.apply(tool_.grasp_point()); }
Vec2 TaskEnv::head_center_world() const { return state_.tool.apply(tool_.head_center()); }
Vec2 TaskEnv::tool_centroid_world() const { return state_.tool.apply(tool_.centroid()); }

std::array<Box, 2> TaskEnv::tool_boxes_world() const {
  return {tool_.handle_box().transformed(state_.tool), tool_.head_box().transformed(state_.tool)};
}

double TaskEnv::nail_top_height() const { return config_.nail_exposed - state_.nail_depth; }

std::vector<View> TaskEnv::views() const {
  if (config_.task == Task::pushing) return {View::overhead};
  return {View::overhead, View::wrist};
}

std::vector<double> TaskEnv::reset(const ToolSpec& tool, std::uint64_t seed) {
  tool.validate();
  tool_ = tool;
  std::mt19937_64 rng(seed);
  auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  // Resample until every initial distance is usable and nothing starts overlapping.
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000) throw Error("reset: could not sample a valid layout");
    WorldState s;
    const Task task = config_.task;
    const Vec2 centroid_local = tool_.centroid();
    auto place_tool = [&](Vec2 centroid, double yaw) {
      const Vec2 origin = centroid - rotate(centroid_local, yaw);
      s.tool = Pose2{origin.x, origin.y, yaw};
    };
    switch (task) {
      case Task::pushing:
        s.ee = {U(-0.02, 0.02), U(-0.03, 0.03), config_.push_height, 0.0};
        place_tool({U(0.15, 0.19), U(-0.05, 0.05)}, kPi / 2 + U(-kPi / 6, kPi / 6));
        s.target = {0.45, 0.0};
        break;
      case Task::lifting:
        s.ee = {U(-0.02, 0.02), U(-0.03, 0.03), 0.15, 0.0};
        place_tool({U(0.12, 0.18), U(-0.06, 0.06)}, U(-kPi, kPi));
        s.target_height = 0.15;
        break;
      case Task::sweeping:
        s.ee = {U(-0.02, 0.02), U(-0.03, 0.03), 0.12, 0.0};
        place_tool({U(0.10, 0.14), U(-0.03, 0.03)}, U(-kPi / 4, kPi / 4));
        s.object = {U(0.35, 0.41), U(0.09, 0.15)};
        s.target = {0.38, -0.15};
        break;
      case Task::hammering:
        s.ee = {U(-0.02, 0.02), U(-0.03, 0.03), 0.12, 0.0};
        place_tool({U(0.10, 0.14), U(-0.03, 0.03)}, U(-kPi / 4, kPi / 4));
        s.object = {U(0.35, 0.41), U(-0.11, -0.05)};
        s.target = s.object;
        break;
    }
    state_ = s;

    bool overlap = false;
    for (const auto& b : tool_boxes_world()) {
      if (task == Task::pushing &&
          disc_box_contact(Disc{{s.ee[0], s.ee[1]}, config_.ee_radius + 0.01}, b))
        overlap = true;
      if (task == Task::sweeping &&
          disc_box_contact(Disc{s.object, config_.cylinder_radius + 0.01}, b))
        overlap = true;
      if (task == Task::hammering && b.contains(s.object)) overlap = true;
    }
    if (overlap) continue;

    const auto d = current_distances();
    const auto terms = reward_terms();
    bool ok = true;
    for (std::size_t i = 0; i < terms.count; ++i) ok = ok && d[i] >= kMinInitialDistance;
    if (!ok) continue;
    state_.initial_distances = {1.0, 1.0, 1.0};
    for (std::size_t i = 0; i < terms.count; ++i) state_.initial_distances[i] = d[i];
    return observation();
  }
}

std::array<double, 3> TaskEnv::current_distances() const {
  const auto& s = state_;
  const Vec2 grasp = grasp_point_world();
  const double ee_tool =
      s.grasped ? 0.0 : dist3(s.ee[0], s.ee[1], s.ee[2], grasp.x, grasp.y, s.tool_z);
  switch (config_.task) {
    case Task::pushing:
      return {(tool_centroid_world() - s.target).norm(), 0.0, 0.0};
    case Task::lifting:
      return {ee_tool, std::abs(s.tool_z - s.target_height), 0.0};
    case Task::sweeping: {
      const Box head = tool_boxes_world()[1];
      const double gap =
          std::max(0.0, (head.closest_point(s.object) - s.object).norm() - config_.cylinder_radius);
      return {ee_tool, gap, (s.object - s.target).norm()};
    }
    case Task::hammering: {
      const Box head = tool_boxes_world()[1];
      const double horizontal = std::max(0.0, (head.closest_point(s.object) - s.object).norm() -
                                                  kNailRadius);
      const double vertical = std::max(0.0, s.tool_z - nail_top_height());
      return {ee_tool, std::hypot(horizontal, vertical),
              config_.nail_exposed - s.nail_depth};
    }
  }
  return {};
}

RewardTerms TaskEnv::reward_terms() const {
  RewardTerms t;
  t.distances = current_distances();
  switch (config_.task) {
    case Task::pushing:
      t.weights = {1.0, 0.0, 0.0};
      t.count = 1;
      break;
    case Task::lifting:
      t.weights = {0.1, 0.5, 0.0};
      t.count = 2;
      break;
    case Task::sweeping:
    case Task::hammering:
      t.weights = {0.1, 0.1, 0.5};
      t.count = 3;
      break;
  }
  return t;
}

double TaskEnv::reward() const { return shaped_reward(reward_terms(), state_.initial_distances); }

void TaskEnv::grasp_update() {
  if (!config_.grasp_enabled || state_.grasped) return;
  if (state_.ee[2] >= config_.grasp_height_threshold) return;
  const Vec2 grasp = grasp_point_world();
  const Vec2 ee{state_.ee[0], state_.ee[1]};
  if ((grasp - ee).norm() >= config_.grasp_radius) return;
  // Fingers centre the handle under the end-effector.
  const Vec2 shift = ee - grasp;
  state_.tool.x += shift.x;
  state_.tool.y += shift.y;
  state_.grasped = true;
  state_.grasp_z_offset = state_.ee[2] - state_.tool_z;
}

void TaskEnv::move_ee(double dx, double dy, double dz, double dyaw, double) {
  auto& s = state_;
  const auto& w = config_.workspace;
  const Vec2 old_xy{s.ee[0], s.ee[1]};
  s.ee[0] = std::clamp(s.ee[0] + dx, w.x_min, w.x_max);
  s.ee[1] = std::clamp(s.ee[1] + dy, w.y_min, w.y_max);
  s.ee[2] = std::clamp(s.ee[2] + dz, w.z_min, w.z_max);
  s.ee[3] = wrap_angle(s.ee[3] + dyaw);

  if (s.grasped) {
    const Vec2 new_xy{s.ee[0], s.ee[1]};
    const Vec2 rel = rotate(s.tool.position() - old_xy, dyaw);
    s.tool.x = new_xy.x + rel.x;
    s.tool.y = new_xy.y + rel.y;
    s.tool.yaw = wrap_angle(s.tool.yaw + dyaw);
    double floor_z = 0.0;
    if (config_.task == Task::hammering) {
      const Box head = tool_boxes_world()[1];
      if ((head.closest_point(s.object) - s.object).norm() <= kNailRadius)
        floor_z = nail_top_height();
    }
    s.tool_z = std::max(s.ee[2] - s.grasp_z_offset, floor_z);
    s.ee[2] = s.tool_z + s.grasp_z_offset;
  }
  if (config_.task == Task::pushing && !s.grasped) push_tool_with_ee();
  if (config_.task == Task::sweeping && s.tool_z < config_.cylinder_height)
    push_cylinder_with_tool();
}

void TaskEnv::push_tool_with_ee() {
  auto& s = state_;
  const Disc ee{{s.ee[0], s.ee[1]}, config_.ee_radius};
  for (int iter = 0; iter < 4; ++iter) {
    std::optional<Contact> deepest;
    for (const auto& b : tool_boxes_world()) {
      auto c = disc_box_contact(ee, b);
      if (c && (!deepest || c->depth > deepest->depth)) deepest = c;
    }
    if (!deepest) return;
    const Vec2 shift = deepest->normal * deepest->depth;
    const Vec2 centroid = tool_centroid_world();
    const Vec2 lever = deepest->point - centroid;
    // Torque proxy: tangential lever arm times push, damped by a gyration radius.
    constexpr double kGyration2 = 0.05 * 0.05;
    const double dtheta =
        config_.torque_gain * lever.cross(shift) / (lever.dot(lever) + kGyration2);
    const Vec2 new_centroid = centroid + shift;
    const Vec2 origin_rel = rotate(s.tool.position() - centroid, dtheta);
    s.tool.x = new_centroid.x + origin_rel.x;
    s.tool.y = new_centroid.y + origin_rel.y;
    s.tool.yaw = wrap_angle(s.tool.yaw + dtheta);
  }
}

void TaskEnv::push_cylinder_with_tool() {
  auto& s = state_;
  const auto& w = config_.workspace;
  for (int iter = 0; iter < 3; ++iter) {
    std::optional<Contact> deepest;
    for (const auto& b : tool_boxes_world()) {
      auto c = disc_box_contact(Disc{s.object, config_.cylinder_radius}, b);
      if (c && (!deepest || c->depth > deepest->depth)) deepest = c;
    }
    if (!deepest) return;
    s.object = s.object - deepest->normal * deepest->depth;
    s.object.x = std::clamp(s.object.x, w.x_min, w.x_max);
    s.object.y = std::clamp(s.object.y, w.y_min, w.y_max);
  }
}

StepResult TaskEnv::step(std::span<const double> action) {
  if (action.size() != config_.action_dim())
    throw Error("action has " + std::to_string(action.size()) + " entries, task expects " +
                std::to_string(config_.action_dim()));
  for (double a : action)
    if (!std::isfinite(a)) throw NonFiniteError("non-finite action");
  if (state_.step_index >= config_.episode_length) throw Error("step after episode end");

  std::array<double, 4> v{};  // vx, vy, vz, vyaw
  std::vector<double> a(action.begin(), action.end());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double c = std::clamp(a[i], config_.action_low[i], config_.action_high[i]);
    if (c != a[i]) ++state_.clamp_count;
    a[i] = c;
  }
  if (config_.task == Task::pushing) v = {a[0], a[1], 0.0, a[2]};
  else v = {a[0], a[1], a[2], a[3]};

  const double v_down = std::max(0.0, -v[2]);
  const double gap_before = state_.tool_z - nail_top_height();
  const int n = config_.substeps;
  const double h = config_.dt / n;
  bool struck = false;
  for (int i = 0; i < n; ++i) {
    const bool was_above = state_.tool_z > nail_top_height() + 1e-12;
    move_ee(v[0] * h, v[1] * h, v[2] * h, v[3] * h, v_down);
    if (config_.task == Task::hammering && state_.grasped && was_above &&
        std::abs(state_.tool_z - nail_top_height()) <= 1e-12)
      struck = true;
  }
  if (struck) {
    // Impact speed is limited by how far the head travelled this step.
    const double v_impact = std::min(v_down, std::max(0.0, gap_before) / config_.dt);
    const double gain =
        config_.strike_gain * std::max(0.0, v_impact - config_.nail_friction_speed);
    state_.nail_depth = std::min(config_.nail_exposed, state_.nail_depth + gain);
    // The head rides the nail down.
    state_.tool_z = nail_top_height();
    state_.ee[2] = state_.tool_z + state_.grasp_z_offset;
  }
  grasp_update();
  ++state_.step_index;

  StepResult r;
  r.reward = reward();
  r.done = state_.step_index == config_.episode_length;
  r.observation = observation();
  return r;
}

std::size_t TaskEnv::observation_size() const {
  if (mode_ == ObservationMode::state_vector) return kStateObservationSize;
  return views().size() * grid_side_ * grid_side_ * kGridChannels;
}

Scene TaskEnv::scene() const {
  Scene sc;
  const auto boxes = tool_boxes_world();
  sc.tool.assign(boxes.begin(), boxes.end());
  switch (config_.task) {
    case Task::pushing:
      sc.markers.push_back({state_.target, 0.02});
      break;
    case Task::lifting:
      break;
    case Task::sweeping:
      sc.markers.push_back({state_.target, 0.02});
      sc.markers.push_back({state_.object, config_.cylinder_radius});
      break;
    case Task::hammering:
      sc.markers.push_back({state_.object, 0.01});
      break;
  }
  sc.ee = Disc{{state_.ee[0], state_.ee[1]}, config_.ee_radius};
  return sc;
}

std::vector<double> TaskEnv::observation() const {
  if (mode_ == ObservationMode::grid) {
    std::vector<double> out;
    const Scene sc = scene();
    for (View v : views()) {
      auto g = render_grid(sc, v, grid_side_, {state_.ee[0], state_.ee[1]});
      out.insert(out.end(), g.begin(), g.end());
    }
    return out;
  }
  const auto& s = state_;
  std::vector<double> o;
  o.reserve(kStateObservationSize);
  o.insert(o.end(), {s.ee[0], s.ee[1], s.ee[2], std::cos(s.ee[3]), std::sin(s.ee[3])});
  o.insert(o.end(), {s.tool.x, s.tool.y, s.tool_z, std::cos(s.tool.yaw), std::sin(s.tool.yaw)});
  o.insert(o.end(), {s.target.x, s.target.y, s.target_height});
  o.insert(o.end(), {s.object.x, s.object.y, s.nail_depth});
  o.push_back(s.grasped ? 1.0 : 0.0);
  o.push_back(static_cast<double>(s.step_index) / config_.episode_length);
  o.insert(o.end(), {s.tool.x - s.ee[0], s.tool.y - s.ee[1], s.tool_z - s.ee[2]});
  o.insert(o.end(), {s.target.x - s.tool.x, s.target.y - s.tool.y});
  o.insert(o.end(), {s.object.x - s.ee[0], s.object.y - s.ee[1]});
  return o;
}

}  // namespace toolmeta::envs
