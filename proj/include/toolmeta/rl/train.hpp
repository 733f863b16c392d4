#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "toolmeta/language/embedding.hpp"
#include "toolmeta/rl/collect.hpp"
#include "toolmeta/rl/sac.hpp"

namespace toolmeta::rl {

struct TrainConfig {
  SacConfig sac;                  // discount, entropy, tau, batch, base lr
  double meta_lr = 1e-3;          // alpha of the interpolation step
  int tools_per_iteration = 1;    // N
  int meta_updates = 2;           // M
  int inner_iterations = 5;       // B
  int adapt_iterations = 10;      // B_nu
  double replay_ratio = 16.0;     // gradient updates per new transition
  int meta_iterations = 1000;
  double mix_fraction = 0.3;
  std::size_t meta_capacity = 30000;
  std::size_t multitask_capacity = 100000;
  int episodes_per_collect = 1;
  std::size_t seed_from_meta = 1000;
  std::size_t running_window = 50;
  std::size_t workers = 1;
  bool reset_adam_per_block = true;
  int eval_episodes = 1;

  /// Throws ConfigError (line 0) naming the offending field.
  void validate() const;
};

/// One line of the metrics log. Fields that do not apply to a phase are NaN
/// (written as "NA").
struct MetricsRecord {
  std::string phase;  // base, meta_update, multitask, adapt
  int iteration = 0;
  int m = 0;
  int b = 0;
  int tool_id = -1;
  int episodes = 0;
  double episode_reward = 0.0;  // mean over the episodes collected here
  double eval_reward = 0.0;
  double running_average = 0.0;
  double critic_loss = 0.0;  // mean over the updates performed here
  double actor_loss = 0.0;
  std::uint64_t updates = 0;
  std::uint64_t new_transitions = 0;
  std::size_t base_size = 0;
  std::size_t meta_size = 0;
  std::uint64_t meta_reads = 0;  // cumulative
};

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRecord>& log);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

struct TrainHooks {
  std::function<void(const MetricsRecord&)> on_record;
  /// Called after each interpolation with (anchor, theta', theta_new).
  std::function<void(const ParamVector&, const ParamVector&, const ParamVector&)> on_meta_update;
  /// Called at the end of every meta / multitask iteration with the current
  /// parameters.
  std::function<void(int, const ParamVector&)> on_iteration;
  /// Checked after on_iteration; returning true ends training early.
  std::function<bool()> stop;
};

struct TrainResult {
  ParamVector best_params;   // highest running-average training reward
  ParamVector final_params;
  double best_running_average = 0.0;
  int best_iteration = -1;
  std::vector<MetricsRecord> log;
  std::vector<double> episode_rewards;  // training episodes in collection order
  std::vector<std::uint64_t> new_transitions_per_iteration;
  std::uint64_t total_transitions = 0;
  std::uint64_t total_updates = 0;
  std::size_t replay_peak = 0;  // largest size of the long-lived buffer
  std::shared_ptr<ReplayBuffer> replay;  // meta buffer, or the shared multitask buffer
};

/// Language-conditioned Reptile over SAC base learners. `language` may be
/// null when the policy has no language head.
TrainResult meta_train(const policy::Policy& pol, ParamVector init,
                       const std::vector<envs::ToolSpec>& tools,
                       const lang::LanguageSource* language, const EnvSetup& env,
                       const TrainConfig& cfg, std::uint64_t seed, const TrainHooks& hooks = {});

/// Plain SAC on one shared buffer with a tool drawn per episode. Collects
/// the same number of transitions as meta_train with the same config.
TrainResult train_multitask(const policy::Policy& pol, ParamVector init,
                            const std::vector<envs::ToolSpec>& tools,
                            const lang::LanguageSource* language, const EnvSetup& env,
                            const TrainConfig& cfg, std::uint64_t seed,
                            const TrainHooks& hooks = {});

struct AdaptResult {
  ParamVector params;
  std::vector<double> curve;        // evaluation reward after each iteration
  std::vector<double> train_curve;  // mean collected-episode reward per iteration
  double best = 0.0;                // max of `curve` (0 when empty)
  std::uint64_t meta_reads = 0;     // reads of `meta` during adaptation
  std::vector<MetricsRecord> log;
};

/// B_nu iterations of collect, update and evaluate on a fresh base buffer.
/// `meta`, when given, is only used to prove it is never read.
AdaptResult adapt(const policy::Policy& pol, ParamVector params, const envs::ToolSpec& tool,
                  const lang::LanguageSource* language, const EnvSetup& env,
                  const TrainConfig& cfg, std::uint64_t seed, ReplayBuffer* meta = nullptr,
                  const TrainHooks& hooks = {});

/// Mean reward of deterministic episodes.
double evaluate(const policy::Policy& pol, const ParamVector& params, const envs::ToolSpec& tool,
                const lang::LanguageSource* language, const EnvSetup& env, int episodes,
                std::uint64_t seed);

}  // namespace toolmeta::rl
