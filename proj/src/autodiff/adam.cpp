#include "toolmeta/autodiff/adam.hpp"

#include <cmath>

#include "toolmeta/errors.hpp"

namespace toolmeta::ad {

Adam::Adam(const ParamVector& layout, AdamConfig config) : config_(config) {
  for (const auto& s : layout.segments()) ranges_.push_back({s.offset, s.length});
  total_length_ = layout.size();
  m_.assign(total_length_, 0.0);
  v_.assign(total_length_, 0.0);
}

Adam::Adam(const ParamVector& layout, const std::vector<std::string>& segments, AdamConfig config)
    : config_(config) {
  for (const auto& name : segments) {
    const auto& s = layout.segment_info(name);
    ranges_.push_back({s.offset, s.length});
  }
  total_length_ = layout.size();
  m_.assign(total_length_, 0.0);
  v_.assign(total_length_, 0.0);
}

void Adam::reset() {
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  step_ = 0;
}

void Adam::step(ParamVector& params, std::span<const double> grad) {
  if (params.size() != total_length_ || grad.size() != total_length_)
    throw LayoutError("adam: parameter/gradient length does not match optimizer state");
  for (const auto& r : ranges_)
    for (std::size_t i = r.offset; i < r.offset + r.length; ++i)
      if (!std::isfinite(grad[i]))
        throw NonFiniteError("adam: non-finite gradient at index " + std::to_string(i));

  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double step_size = config_.learning_rate / corr1;
  const double inv_corr2 = 1.0 / corr2;
  double* p = params.data().data();
  double* m = m_.data();
  double* v = v_.data();
  const double* g = grad.data();
  for (const auto& r : ranges_) {
    for (std::size_t i = r.offset; i < r.offset + r.length; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_corr2) + config_.epsilon);
    }
  }
}

}  // namespace toolmeta::ad
