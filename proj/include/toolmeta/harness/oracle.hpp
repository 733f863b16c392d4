#pragma once

#include <cstdint>
#include <vector>

#include "toolmeta/envs/task_env.hpp"

namespace toolmeta::harness {

/// Hand-coded controller with access to the full simulator state. It moves
/// along straight lines under the action bounds: behind-the-tool pushing,
/// grasp-then-lift, grasp-approach-sweep, and grasp-raise-strike.
class ScriptedController {
 public:
  /// `margin` is the clearance kept between contact surfaces before a push.
  explicit ScriptedController(double margin = 0.01) : margin_(margin) {}
  std::vector<double> act(const envs::TaskEnv& env) const;

 private:
  double margin_;
};

struct OracleEpisode {
  double reward = 0.0;  // mean per-step reward
  double final_reward = 0.0;
  std::vector<double> step_rewards;
};

OracleEpisode run_oracle_episode(envs::Task task, const envs::ToolSpec& tool, std::uint64_t seed,
                                 double margin);

/// Best mean episode reward over the controller's margin variants.
double scripted_oracle(envs::Task task, const envs::ToolSpec& tool, std::uint64_t seed);

}  // namespace toolmeta::harness
