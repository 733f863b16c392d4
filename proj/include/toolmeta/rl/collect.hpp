#pragma once

#include <cstdint>
#include <vector>

#include "toolmeta/envs/task_env.hpp"
#include "toolmeta/policy/policy.hpp"
#include "toolmeta/rl/replay.hpp"

namespace toolmeta::rl {

using ad::ParamVector;

struct EnvSetup {
  envs::Task task = envs::Task::pushing;
  envs::ObservationMode mode = envs::ObservationMode::state_vector;
  std::size_t grid_side = 32;

  envs::TaskEnv make() const { return envs::TaskEnv(task, mode, grid_side); }
};

struct EpisodeSpec {
  const envs::ToolSpec* tool = nullptr;
  lang::ContextPtr context;  // null without language
  std::uint64_t seed = 0;    // drives both the reset and the action noise
  std::int64_t episode_id = 0;
  bool deterministic = false;
  bool record = true;        // keep transitions
};

struct EpisodeResult {
  std::vector<TransitionPtr> transitions;
  /// Mean per-step reward; per-step rewards lie in [0, 1], so does this.
  double reward = 0.0;
  double final_reward = 0.0;
  int steps = 0;
  int tool_id = -1;
  std::int64_t episode_id = 0;
};

/// Deterministic seed for (base, a, b) via splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);

EpisodeResult run_episode(const policy::Policy& pol, const ParamVector& params,
                          const EnvSetup& setup, const EpisodeSpec& spec);

/// Runs the episodes on up to `workers` threads against the same parameter
/// snapshot. Results come back in `specs` order regardless of scheduling.
std::vector<EpisodeResult> collect(const policy::Policy& pol, const ParamVector& params,
                                   const EnvSetup& setup, const std::vector<EpisodeSpec>& specs,
                                   std::size_t workers = 1);

}  // namespace toolmeta::rl
