#pragma once

#include <random>
#include <vector>

#include "toolmeta/autodiff/adam.hpp"
#include "toolmeta/policy/policy.hpp"
#include "toolmeta/rl/replay.hpp"

namespace toolmeta::rl {

using ad::Matrix;
using ad::ParamVector;
using ad::Vector;

struct SacConfig {
  double discount = 0.99;
  double entropy_coef = 0.01;
  double tau = 0.005;
  bool target_networks = true;
  std::size_t batch_size = 128;
  int actor_update_period = 1;
  ad::AdamConfig adam{};
};

/// Dense tensors for one minibatch.
struct SacBatch {
  policy::InputBatch obs;
  policy::InputBatch next_obs;
  Matrix action;
  Vector reward;
  Vector done;
  std::size_t size() const { return obs.size(); }
};

SacBatch make_sac_batch(const std::vector<TransitionPtr>& transitions, std::size_t d_lang);

/// Bellman targets y = r + gamma (1 - done) (min Q'(s', a') - alpha log pi(a'|s')).
/// a' is drawn from the online actor on online features with `next_noise`;
/// Q' uses `target` parameters (pass the online ones to disable targets).
Vector bellman_targets(const policy::Policy& pol, const ParamVector& online,
                       const ParamVector& target, const SacBatch& batch, const SacConfig& cfg,
                       const Matrix& next_noise);

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// mean((Q1 - y)^2) + mean((Q2 - y)^2). Gradient covers the critic,
/// encoder and language segments; the actor segment stays zero.
LossGrad critic_loss_grad(const policy::Policy& pol, const ParamVector& params,
                          const SacBatch& batch, const Vector& targets);

/// mean(alpha log pi(a|s) - min(Q1, Q2)(s, a)) with reparameterised actions
/// on detached features. Only the actor segment receives gradient.
LossGrad actor_loss_grad(const policy::Policy& pol, const ParamVector& params,
                         const SacBatch& batch, const SacConfig& cfg, const Matrix& noise);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  bool actor_updated = false;
};

/// Owns online/target parameters and the two optimizers. The critic
/// optimizer covers {critic, encoder, language}; the actor optimizer covers
/// {actor}.
class SacLearner {
 public:
  SacLearner(const policy::Policy& pol, ParamVector params, SacConfig cfg);

  UpdateStats update(const std::vector<TransitionPtr>& transitions, std::mt19937_64& rng);

  const ParamVector& params() const noexcept { return params_; }
  const ParamVector& target() const noexcept { return target_; }
  /// Replaces the online parameters and re-syncs the targets.
  void set_params(const ParamVector& p);
  void reset_optimizers();
  std::uint64_t updates() const noexcept { return updates_; }
  const SacConfig& config() const noexcept { return cfg_; }

 private:
  const policy::Policy* pol_;
  SacConfig cfg_;
  ParamVector params_;
  ParamVector target_;
  ad::Adam critic_opt_;
  ad::Adam actor_opt_;
  std::uint64_t updates_ = 0;
};

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace toolmeta::rl
