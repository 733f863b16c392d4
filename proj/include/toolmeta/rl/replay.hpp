#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <unordered_map>
#include <vector>

#include "toolmeta/language/embedding.hpp"

namespace toolmeta::rl {

struct Transition {
  std::vector<double> obs;
  lang::ContextPtr context;  // null without language
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
  int tool_id = -1;
  std::int64_t episode_id = -1;
};

/// Transitions are immutable once recorded and shared between buffers, so
/// seeding a base buffer from the meta buffer copies pointers only.
using TransitionPtr = std::shared_ptr<const Transition>;

/// FIFO store with uniform sampling. Capacity 0 means unbounded.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  /// Throws Error if the transition's context differs from the one already
  /// stored for its episode, or its reward is outside [0, 1].
  void push(TransitionPtr t);
  void clear();

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return items_.empty(); }
  /// i-th oldest transition.
  const TransitionPtr& at(std::size_t i) const;

  /// Uniform draw with replacement; counts towards `reads()`.
  const TransitionPtr& sample(std::mt19937_64& rng);
  std::uint64_t reads() const noexcept { return reads_; }
  std::uint64_t pushes() const noexcept { return pushes_; }
  std::uint64_t evictions() const noexcept { return evictions_; }

 private:
  struct EpisodeInfo {
    const lang::ContextVector* context;
    std::size_t count;
  };
  std::size_t capacity_;
  std::vector<TransitionPtr> items_;
  std::size_t head_ = 0;  // index of the oldest item once the ring is full
  std::unordered_map<std::int64_t, EpisodeInfo> episodes_;
  std::uint64_t reads_ = 0, pushes_ = 0, evictions_ = 0;
};

/// Number of meta transitions in a batch: round(fraction * batch), or 0 when
/// the meta buffer is empty.
std::size_t meta_share(std::size_t batch, double fraction, bool meta_empty);

/// Mixed batch: meta_share(...) uniform draws from `meta`, the rest from
/// `base`. Falls back to the non-empty buffer; throws if both are empty.
std::vector<TransitionPtr> mixed_sample(ReplayBuffer& base, ReplayBuffer& meta,
                                        std::size_t batch, double fraction,
                                        std::mt19937_64& rng);

}  // namespace toolmeta::rl
