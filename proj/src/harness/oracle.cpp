#include "toolmeta/harness/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace toolmeta::harness {
namespace {

using envs::Box;
using envs::Task;
using envs::Vec2;

constexpr double kMargins[] = {0.005, 0.01, 0.02};

Vec2 unit(Vec2 v) {
  const double n = v.norm();
  return n > 1e-12 ? v * (1.0 / n) : Vec2{1.0, 0.0};
}

std::array<Vec2, 4> corners(const Box& b) {
  const Vec2 ax = envs::rotate({b.half_length, 0.0}, b.angle);
  const Vec2 ay = envs::rotate({0.0, b.half_width}, b.angle);
  return {b.center + ax + ay, b.center + ax - ay, b.center - ax + ay, b.center - ax - ay};
}

/// Largest extent of the boxes from `origin` along `dir`.
double extent(const std::vector<Box>& boxes, Vec2 origin, Vec2 dir) {
  double e = 0.0;
  for (const auto& b : boxes)
    for (const auto& c : corners(b)) e = std::max(e, (c - origin).dot(dir));
  return e;
}

/// Scales a velocity uniformly so every axis respects its bound.
std::vector<double> bounded(const envs::TaskConfig& cfg, std::vector<double> v) {
  double scale = 1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double lim = v[i] >= 0.0 ? cfg.action_high[i] : cfg.action_low[i];
    if (std::abs(v[i]) > std::abs(lim) && v[i] != 0.0) scale = std::min(scale, lim / v[i]);
  }
  for (auto& x : v) x *= scale;
  return v;
}

/// Velocity that brings the end-effector (x, y, z) to `goal` within one step
/// when possible.
std::vector<double> toward(const envs::TaskEnv& env, double gx, double gy, double gz) {
  const auto& s = env.state();
  const double dt = env.config().dt;
  return bounded(env.config(),
                 {(gx - s.ee[0]) / dt, (gy - s.ee[1]) / dt, (gz - s.ee[2]) / dt, 0.0});
}

std::vector<double> grasp_phase(const envs::TaskEnv& env) {
  const auto& s = env.state();
  const Vec2 g = env.grasp_point_world();
  const double horizontal = (g - Vec2{s.ee[0], s.ee[1]}).norm();
  // Hover over the grasp point first, then descend.
  const double z = horizontal > 0.01 ? std::max(s.ee[2], 0.08) : 0.02;
  return toward(env, g.x, g.y, z);
}

std::vector<double> pushing(const envs::TaskEnv& env, double margin) {
  const auto& s = env.state();
  const auto& cfg = env.config();
  const Vec2 c = env.tool_centroid_world();
  const Vec2 ee{s.ee[0], s.ee[1]};
  const Vec2 to_target = s.target - c;
  const Vec2 u = unit(to_target);
  const Vec2 perp{-u.y, u.x};
  const auto boxes = env.tool_boxes_world();
  // Distance behind the centroid at which the end-effector disc just clears
  // the tool along the push line.
  double clear = 0.0;
  for (; clear < 0.4; clear += 0.001) {
    const envs::Disc probe{c - u * clear, cfg.ee_radius};
    if (!envs::disc_box_contact(probe, boxes[0]) && !envs::disc_box_contact(probe, boxes[1])) break;
  }
  const double back = clear - cfg.ee_radius;
  const Vec2 rel = ee - c;
  const double lateral = rel.dot(perp);
  const double along = rel.dot(u);
  const double dt = cfg.dt;

  std::vector<double> v(3, 0.0);
  if (std::abs(lateral) < 0.012 && along < -back + 0.004) {
    // In line behind the tool: push, correcting the lateral offset.
    const double advance = std::min(to_target.norm(), 0.2) / dt;
    const Vec2 vel = u * advance - perp * (lateral / dt);
    v = {vel.x, vel.y, 0.0};
  } else {
    // Swing around to the approach point, staying clear of the tool.
    const Vec2 approach = c - u * (back + cfg.ee_radius + margin);
    Vec2 goal = approach;
    if (along > -back - cfg.ee_radius) goal = approach - u * 0.03 + perp * (lateral >= 0 ? 0.06 : -0.06);
    const Vec2 vel = (goal - ee) * (1.0 / dt);
    v = {vel.x, vel.y, 0.0};
  }
  return bounded(cfg, v);
}

std::vector<double> lifting(const envs::TaskEnv& env) {
  const auto& s = env.state();
  if (!s.grasped) return grasp_phase(env);
  const double ee_goal = s.target_height + s.grasp_z_offset;
  return toward(env, s.ee[0], s.ee[1], ee_goal);
}

std::vector<double> sweeping(const envs::TaskEnv& env, double margin) {
  const auto& s = env.state();
  const auto& cfg = env.config();
  if (!s.grasped) return grasp_phase(env);
  const Vec2 ee{s.ee[0], s.ee[1]};
  const Box head = env.tool_boxes_world()[1];
  const Vec2 head_off = head.center - ee;
  const Vec2 to_target = s.target - s.object;
  const Vec2 u = unit(to_target);
  const Vec2 perp{-u.y, u.x};
  const double reach = extent({head}, head.center, u);
  const Vec2 approach = s.object - u * (cfg.cylinder_radius + reach + margin);
  const Vec2 rel = head.center - s.object;
  const double lateral = rel.dot(perp);
  const double low_ee = 0.012 + s.grasp_z_offset;
  const double high_ee = cfg.cylinder_height + 0.03 + s.grasp_z_offset;

  const bool aligned = std::abs(lateral) < 0.01 && rel.dot(u) < -cfg.cylinder_radius;
  if (aligned && s.tool_z < cfg.cylinder_height) {
    // Sweep: drive the head through the cylinder towards the target.
    const double advance = std::min(to_target.norm() + 0.005, 0.2);
    const Vec2 goal = ee + u * advance - perp * lateral;
    return toward(env, goal.x, goal.y, low_ee);
  }
  const Vec2 ee_goal = approach - head_off;
  const double horizontal = (ee_goal - ee).norm();
  if (horizontal > 0.008) {
    // Travel above the cylinder.
    if (s.tool_z < cfg.cylinder_height + 0.01) return toward(env, s.ee[0], s.ee[1], high_ee);
    return toward(env, ee_goal.x, ee_goal.y, high_ee);
  }
  return toward(env, ee_goal.x, ee_goal.y, low_ee);
}

std::vector<double> hammering(const envs::TaskEnv& env) {
  const auto& s = env.state();
  const auto& cfg = env.config();
  if (!s.grasped) return grasp_phase(env);
  const Vec2 ee{s.ee[0], s.ee[1]};
  const Vec2 head_off = env.head_center_world() - ee;
  const Vec2 ee_goal = s.object - head_off;
  const double top = env.nail_top_height();
  const double gap = s.tool_z - top;
  const double swing = -cfg.action_low[2] * cfg.dt;  // travel of one full-speed step
  if ((ee_goal - ee).norm() > 0.002) {
    const double z = std::max(s.ee[2], top + swing + 0.01 + s.grasp_z_offset);
    if (gap < swing) return toward(env, s.ee[0], s.ee[1], z);
    return toward(env, ee_goal.x, ee_goal.y, z);
  }
  // Over the nail: raise a full swing, then strike at full speed.
  if (gap + 1e-9 < swing) return toward(env, ee_goal.x, ee_goal.y, top + swing + s.grasp_z_offset);
  return bounded(cfg, {(ee_goal.x - ee.x) / cfg.dt, (ee_goal.y - ee.y) / cfg.dt,
                       cfg.action_low[2], 0.0});
}

}  // namespace

std::vector<double> ScriptedController::act(const envs::TaskEnv& env) const {
  switch (env.config().task) {
    case Task::pushing: return pushing(env, margin_);
    case Task::lifting: return lifting(env);
    case Task::sweeping: return sweeping(env, margin_);
    case Task::hammering: return hammering(env);
  }
  return {};
}

OracleEpisode run_oracle_episode(Task task, const envs::ToolSpec& tool, std::uint64_t seed,
                                 double margin) {
  envs::TaskEnv env(task);
  env.reset(tool, seed);
  const ScriptedController ctl(margin);
  OracleEpisode ep;
  bool done = false;
  while (!done) {
    const auto r = env.step(ctl.act(env));
    ep.step_rewards.push_back(r.reward);
    done = r.done;
  }
  double sum = 0.0;
  for (double r : ep.step_rewards) sum += r;
  ep.reward = sum / static_cast<double>(ep.step_rewards.size());
  ep.final_reward = ep.step_rewards.back();
  return ep;
}

double scripted_oracle(Task task, const envs::ToolSpec& tool, std::uint64_t seed) {
  double best = 0.0;
  for (double m : kMargins) best = std::max(best, run_oracle_episode(task, tool, seed, m).reward);
  return best;
}

}  // namespace toolmeta::harness
