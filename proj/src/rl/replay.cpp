#include "toolmeta/rl/replay.hpp"

#include <cmath>

#include "toolmeta/errors.hpp"

namespace toolmeta::rl {

void ReplayBuffer::push(TransitionPtr t) {
  if (!t) throw Error("replay: null transition");
  if (!(t->reward >= 0.0 && t->reward <= 1.0))
    throw Error("replay: reward " + std::to_string(t->reward) + " outside [0, 1]");
  auto it = episodes_.find(t->episode_id);
  if (it != episodes_.end() && it->second.context != t->context.get())
    throw Error("replay: episode " + std::to_string(t->episode_id) +
                " carries more than one context");
  if (it == episodes_.end()) episodes_.emplace(t->episode_id, EpisodeInfo{t->context.get(), 1});
  else ++it->second.count;

  ++pushes_;
  if (capacity_ == 0 || items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  // Ring full: overwrite the oldest.
  auto& old = items_[head_];
  auto e = episodes_.find(old->episode_id);
  if (--e->second.count == 0) episodes_.erase(e);
  old = std::move(t);
  head_ = (head_ + 1) % capacity_;
  ++evictions_;
}

void ReplayBuffer::clear() {
  items_.clear();
  episodes_.clear();
  head_ = 0;
}

const TransitionPtr& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw Error("replay: index out of range");
  return items_[(head_ + i) % items_.size()];
}

const TransitionPtr& ReplayBuffer::sample(std::mt19937_64& rng) {
  if (items_.empty()) throw Error("replay: sampling from an empty buffer");
  ++reads_;
  return items_[std::uniform_int_distribution<std::size_t>(0, items_.size() - 1)(rng)];
}

std::size_t meta_share(std::size_t batch, double fraction, bool meta_empty) {
  if (meta_empty) return 0;
  return static_cast<std::size_t>(std::lround(fraction * static_cast<double>(batch)));
}

std::vector<TransitionPtr> mixed_sample(ReplayBuffer& base, ReplayBuffer& meta,
                                        std::size_t batch, double fraction,
                                        std::mt19937_64& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("mixing fraction outside [0, 1]");
  if (base.empty() && meta.empty()) throw Error("replay: both buffers are empty");
  std::size_t from_meta = meta_share(batch, fraction, meta.empty());
  if (base.empty()) from_meta = batch;
  std::vector<TransitionPtr> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < from_meta; ++i) out.push_back(meta.sample(rng));
  for (std::size_t i = from_meta; i < batch; ++i) out.push_back(base.sample(rng));
  return out;
}

}  // namespace toolmeta::rl
