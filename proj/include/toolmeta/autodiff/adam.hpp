#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "toolmeta/autodiff/param_vector.hpp"

namespace toolmeta::ad {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction, restricted to a subset of named segments.
/// Coordinates outside those segments are never read or written, so two
/// optimizers over disjoint segments can share one ParamVector.
class Adam {
 public:
  Adam() = default;
  /// Optimizes every segment of `layout`.
  Adam(const ParamVector& layout, AdamConfig config);
  Adam(const ParamVector& layout, const std::vector<std::string>& segments, AdamConfig config);

  /// One update. Throws NonFiniteError (leaving params untouched) if the
  /// gradient has a non-finite entry inside the optimized segments.
  void step(ParamVector& params, std::span<const double> grad);

  void reset();
  std::int64_t step_count() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<double>& first_moment() const noexcept { return m_; }
  const std::vector<double>& second_moment() const noexcept { return v_; }

 private:
  struct Range {
    std::size_t offset;
    std::size_t length;
  };
  AdamConfig config_;
  std::vector<Range> ranges_;
  std::size_t total_length_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t step_ = 0;
};

}  // namespace toolmeta::ad
