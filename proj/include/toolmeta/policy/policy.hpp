#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "toolmeta/autodiff/network.hpp"
#include "toolmeta/autodiff/param_vector.hpp"
#include "toolmeta/envs/task_env.hpp"
#include "toolmeta/language/embedding.hpp"

namespace toolmeta::policy {

using ad::Matrix;
using ad::ParamVector;
using ad::Vector;

inline constexpr const char* kLanguageSegment = "language";
inline constexpr const char* kEncoderSegment = "encoder";
inline constexpr const char* kActorSegment = "actor";
inline constexpr const char* kCriticSegment = "critic";

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

struct PolicySpec {
  envs::ObservationMode obs_mode = envs::ObservationMode::state_vector;
  std::size_t obs_dim = envs::TaskEnv::kStateObservationSize;  // state mode
  std::size_t grid_views = 1;    // grid mode
  std::size_t grid_side = 128;   // grid mode
  std::size_t d_lang = 768;      // 0 disables the language head
  std::size_t language_width = 128;
  std::size_t encoder_width = 128;  // state-mode dense encoder output
  std::vector<std::size_t> hidden = {128, 128};
  std::vector<double> action_low;
  std::vector<double> action_high;

  std::size_t action_dim() const { return action_low.size(); }
  bool uses_language() const { return d_lang > 0; }
  /// Observation row width the policy consumes.
  std::size_t observation_size() const;
  void validate() const;
  /// Single-line key=value rendering used as the checkpoint header.
  std::string serialize() const;
  static PolicySpec parse(const std::string& text);
  bool operator==(const PolicySpec&) const = default;
};

/// Policy spec for a task environment.
PolicySpec spec_for_env(const envs::TaskEnv& env, std::size_t d_lang,
                        std::vector<std::size_t> hidden = {128, 128});

/// A batch of inputs. Contexts are stored once per distinct vector and
/// referenced per row, so the language head runs on unique contexts only.
struct InputBatch {
  Matrix obs;                    // n x observation_size
  Matrix contexts;               // k x d_lang (k = 0 without language)
  std::vector<int> context_row;  // n entries indexing rows of `contexts`

  std::size_t size() const { return static_cast<std::size_t>(obs.rows()); }
};

/// Builds an InputBatch, deduplicating contexts by pointer identity.
InputBatch make_input_batch(const std::vector<const std::vector<double>*>& observations,
                            const std::vector<lang::ContextPtr>& contexts, std::size_t d_lang);

/// Everything the backward pass of the shared feature needs.
struct FeatureCache {
  std::vector<ad::ForwardCache> encoder;  // one per view (state mode: one)
  ad::ForwardCache language;
  std::vector<int> context_row;
};

/// Actor output with the intermediate values needed for gradients.
struct ActorSample {
  Matrix mean;     // n x A, pre-squash
  Matrix log_std;  // n x A, clamped
  Matrix noise;    // n x A, standard normal (zero in deterministic mode)
  Matrix squashed; // n x A, tanh(mean + std * noise)
  Matrix action;   // n x A, affine map of `squashed` into the bounds
  Vector log_prob; // n
  std::vector<std::vector<bool>> std_clamped;  // per row, per axis
  ad::ForwardCache cache;
};

/// Language head, observation encoder, actor head and twin critic heads.
class Policy {
 public:
  explicit Policy(PolicySpec spec);

  const PolicySpec& spec() const noexcept { return spec_; }
  std::size_t feature_size() const noexcept { return feature_size_; }
  std::size_t encoder_output_size() const noexcept { return encoder_out_; }

  /// Fresh parameters with segments language, encoder, actor, critic.
  ParamVector build(std::uint64_t seed) const;
  /// Throws LayoutError if `params` does not match this spec.
  void check_layout(const ParamVector& params) const;

  /// concat(encoder(obs), relu(dense(context))).
  Matrix encode(const ParamVector& params, const InputBatch& in,
                FeatureCache* cache = nullptr) const;
  /// Back-propagates d(loss)/d(features) into the encoder and language
  /// segments of `grad`.
  void encode_backward(const ParamVector& params, const FeatureCache& cache,
                       const Matrix& feature_grad, ParamVector& grad) const;

  /// Squashed-Gaussian actor. `noise` supplies the standard-normal draws
  /// (n x A); pass an empty matrix for the deterministic action.
  ActorSample actor(const ParamVector& params, const Matrix& features,
                    const Matrix& noise) const;
  /// Gradient of sum_i (w_logp[i] * logp_i + sum_j g_action(i,j) * action_ij)
  /// with respect to the actor segment, accumulated into `grad`.
  void actor_backward(const ParamVector& params, const Matrix& features,
                      const ActorSample& sample, const Vector& w_logp,
                      const Matrix& g_action, ParamVector& grad) const;

  /// Q values of both critic heads for (features, action); n x 2.
  Matrix q_values(const ParamVector& params, const Matrix& features, const Matrix& action,
                  std::vector<ad::ForwardCache>* caches = nullptr) const;
  /// Back-propagates dQ (n x 2) through both heads. Critic parameter
  /// gradients go to `grad` when non-null. Returns d/d(features) and
  /// d/d(action) as an n x (F + A) matrix.
  Matrix q_backward(const ParamVector& params, const std::vector<ad::ForwardCache>& caches,
                    const Matrix& q_grad, ParamVector* grad) const;

  /// Single-step helpers.
  std::vector<double> act(const ParamVector& params, const std::vector<double>& obs,
                          const lang::ContextPtr& context, bool deterministic,
                          std::mt19937_64& rng) const;
  std::array<double, 2> q_value(const ParamVector& params, const std::vector<double>& obs,
                                const lang::ContextPtr& context,
                                const std::vector<double>& action) const;

  const ad::Network& critic_network() const noexcept { return critic_; }
  const ad::Network& actor_network() const noexcept { return actor_; }
  const ad::Network& language_network() const noexcept { return language_; }
  const std::vector<ad::Network>& encoder_networks() const noexcept { return encoders_; }

 private:
  PolicySpec spec_;
  std::vector<ad::Network> encoders_;  // one per view, consecutive in the segment
  ad::Network language_;
  ad::Network actor_;
  ad::Network critic_;  // one head; the twin follows it in the segment
  std::size_t encoder_out_ = 0;
  std::size_t feature_size_ = 0;
  std::vector<double> center_, half_range_;
};

/// Conv stack for one square view: kernels 7/5/3 with channels 4/8/16.
/// Strides are 4/3/2 at side 128 and 2/2/1 at side 32.
std::vector<ad::LayerSpec> conv_encoder_layers(std::size_t side);

/// Checkpoint = parameter container + serialized spec header.
void save_policy(const std::filesystem::path& path, const PolicySpec& spec,
                 const ParamVector& params);
/// Throws Error if the stored spec differs from `expected`.
ParamVector load_policy(const std::filesystem::path& path, const PolicySpec& expected);
PolicySpec read_policy_spec(const std::filesystem::path& path);

/// Polyak averaging of the feature and critic segments:
/// target <- (1 - tau) * target + tau * online.
void soft_update(ParamVector& target, const ParamVector& online, double tau);

}  // namespace toolmeta::policy
