#include "toolmeta/rl/sac.hpp"

#include <cmath>
#include <sstream>

#include "toolmeta/errors.hpp"

namespace toolmeta::rl {
namespace {

using policy::kActorSegment;
using policy::kCriticSegment;
using policy::kEncoderSegment;
using policy::kLanguageSegment;

std::string batch_digest(const SacBatch& b) {
  std::ostringstream os;
  os << "n=" << b.size() << " reward_sum=" << b.reward.sum() << " action_abs_sum="
     << b.action.cwiseAbs().sum() << " obs_abs_sum=" << b.obs.obs.cwiseAbs().sum();
  return os.str();
}

}  // namespace

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

SacBatch make_sac_batch(const std::vector<TransitionPtr>& transitions, std::size_t d_lang) {
  if (transitions.empty()) throw Error("empty minibatch");
  std::vector<const std::vector<double>*> obs, next;
  std::vector<lang::ContextPtr> ctx;
  obs.reserve(transitions.size());
  next.reserve(transitions.size());
  for (const auto& t : transitions) {
    obs.push_back(&t->obs);
    next.push_back(&t->next_obs);
    ctx.push_back(t->context);
  }
  SacBatch b;
  b.obs = policy::make_input_batch(obs, ctx, d_lang);
  // Same contexts, so the deduplicated table is shared.
  b.next_obs.obs = policy::make_input_batch(next, {}, 0).obs;
  b.next_obs.contexts = b.obs.contexts;
  b.next_obs.context_row = b.obs.context_row;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const auto A = static_cast<Eigen::Index>(transitions[0]->action.size());
  b.action.resize(n, A);
  b.reward.resize(n);
  b.done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = *transitions[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(t.action.size()) != A) throw ShapeError(ShapeError::npos, "ragged actions");
    for (Eigen::Index j = 0; j < A; ++j) b.action(i, j) = t.action[static_cast<std::size_t>(j)];
    b.reward(i) = t.reward;
    b.done(i) = t.done ? 1.0 : 0.0;
  }
  return b;
}

Vector bellman_targets(const policy::Policy& pol, const ParamVector& online,
                       const ParamVector& target, const SacBatch& batch, const SacConfig& cfg,
                       const Matrix& next_noise) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Vector y = batch.reward;
  if ((batch.done.array() == 1.0).all()) return y;  // the bootstrap term vanishes
  const Matrix f_online = pol.encode(online, batch.next_obs);
  const auto next = pol.actor(online, f_online, next_noise);
  const Matrix f_target = pol.encode(target, batch.next_obs);
  const Matrix q = pol.q_values(target, f_target, next.action);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = std::min(q(i, 0), q(i, 1)) - cfg.entropy_coef * next.log_prob(i);
    y(i) += cfg.discount * (1.0 - batch.done(i)) * v;
  }
  return y;
}

LossGrad critic_loss_grad(const policy::Policy& pol, const ParamVector& params,
                          const SacBatch& batch, const Vector& targets) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  LossGrad out;
  out.grad = params.zeros_like();
  policy::FeatureCache fc;
  const Matrix f = pol.encode(params, batch.obs, &fc);
  std::vector<ad::ForwardCache> caches;
  const Matrix q = pol.q_values(params, f, batch.action, &caches);
  Matrix dq(n, 2);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < 2; ++k) {
      const double r = q(i, k) - targets(i);
      loss += r * r / static_cast<double>(n);
      dq(i, k) = 2.0 * r / static_cast<double>(n);
    }
  if (!std::isfinite(loss)) throw NonFiniteError("critic loss is not finite (" + batch_digest(batch) + ")");
  const Matrix din = pol.q_backward(params, caches, dq, &out.grad);
  pol.encode_backward(params, fc, din.leftCols(f.cols()), out.grad);
  out.loss = loss;
  return out;
}

LossGrad actor_loss_grad(const policy::Policy& pol, const ParamVector& params,
                         const SacBatch& batch, const SacConfig& cfg, const Matrix& noise) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  LossGrad out;
  out.grad = params.zeros_like();
  const Matrix f = pol.encode(params, batch.obs);  // detached: no encoder backward
  const auto s = pol.actor(params, f, noise);
  std::vector<ad::ForwardCache> caches;
  const Matrix q = pol.q_values(params, f, s.action, &caches);
  Matrix dq = Matrix::Zero(n, 2);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = q(i, 0) <= q(i, 1) ? 0 : 1;
    loss += (cfg.entropy_coef * s.log_prob(i) - q(i, k)) / static_cast<double>(n);
    dq(i, k) = -1.0 / static_cast<double>(n);
  }
  if (!std::isfinite(loss)) throw NonFiniteError("actor loss is not finite (" + batch_digest(batch) + ")");
  // Critic parameter gradients are discarded; only d/d(action) is used.
  const Matrix din = pol.q_backward(params, caches, dq, nullptr);
  const Matrix g_action = din.rightCols(static_cast<Eigen::Index>(pol.spec().action_dim()));
  const Vector w = Vector::Constant(n, cfg.entropy_coef / static_cast<double>(n));
  pol.actor_backward(params, f, s, w, g_action, out.grad);
  out.loss = loss;
  return out;
}

SacLearner::SacLearner(const policy::Policy& pol, ParamVector params, SacConfig cfg)
    : pol_(&pol), cfg_(cfg), params_(std::move(params)) {
  pol.check_layout(params_);
  target_ = params_;
  critic_opt_ = ad::Adam(params_, {kCriticSegment, kEncoderSegment, kLanguageSegment}, cfg_.adam);
  actor_opt_ = ad::Adam(params_, {kActorSegment}, cfg_.adam);
}

void SacLearner::set_params(const ParamVector& p) {
  if (!p.same_layout(params_)) throw LayoutError("set_params: layout differs");
  params_ = p;
  target_ = p;
}

void SacLearner::reset_optimizers() {
  critic_opt_.reset();
  actor_opt_.reset();
}

UpdateStats SacLearner::update(const std::vector<TransitionPtr>& transitions,
                               std::mt19937_64& rng) {
  const SacBatch batch = make_sac_batch(transitions, pol_->spec().d_lang);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto A = static_cast<Eigen::Index>(pol_->spec().action_dim());
  UpdateStats st;

  const Matrix next_noise = standard_normal(n, A, rng);
  const ParamVector& tgt = cfg_.target_networks ? target_ : params_;
  const Vector y = bellman_targets(*pol_, params_, tgt, batch, cfg_, next_noise);
  const LossGrad c = critic_loss_grad(*pol_, params_, batch, y);
  critic_opt_.step(params_, c.grad.data());
  st.critic_loss = c.loss;

  ++updates_;
  if (cfg_.actor_update_period > 0 &&
      updates_ % static_cast<std::uint64_t>(cfg_.actor_update_period) == 0) {
    const Matrix noise = standard_normal(n, A, rng);
    const LossGrad a = actor_loss_grad(*pol_, params_, batch, cfg_, noise);
    actor_opt_.step(params_, a.grad.data());
    st.actor_loss = a.loss;
    st.actor_updated = true;
  }
  if (cfg_.target_networks) policy::soft_update(target_, params_, cfg_.tau);
  return st;
}

}  // namespace toolmeta::rl
