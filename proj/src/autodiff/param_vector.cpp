#include "toolmeta/autodiff/param_vector.hpp"

#include <algorithm>

#include "toolmeta/errors.hpp"

namespace toolmeta::ad {

std::size_t ParamVector::add_segment(std::string name, std::size_t length) {
  if (has_segment(name)) throw LayoutError("duplicate segment name '" + name + "'");
  const std::size_t offset = data_.size();
  segments_.push_back(Segment{std::move(name), offset, length});
  data_.resize(offset + length, 0.0);
  return offset;
}

bool ParamVector::has_segment(std::string_view name) const noexcept {
  return std::any_of(segments_.begin(), segments_.end(),
                     [&](const Segment& s) { return s.name == name; });
}

const Segment& ParamVector::segment_info(std::string_view name) const {
  for (const auto& s : segments_)
    if (s.name == name) return s;
  throw LayoutError("no segment named '" + std::string(name) + "'");
}

std::span<double> ParamVector::segment(std::string_view name) {
  const auto& s = segment_info(name);
  return std::span<double>(data_).subspan(s.offset, s.length);
}

std::span<const double> ParamVector::segment(std::string_view name) const {
  const auto& s = segment_info(name);
  return std::span<const double>(data_).subspan(s.offset, s.length);
}

ParamVector ParamVector::zeros_like() const {
  ParamVector out;
  out.segments_ = segments_;
  out.data_.assign(data_.size(), 0.0);
  return out;
}

void axpy_inplace(ParamVector& theta, const ParamVector& theta_prime, double alpha) {
  if (!theta.same_layout(theta_prime))
    throw LayoutError("axpy: segment layouts differ");
  if (alpha == 0.0) return;
  auto dst = theta.data();
  const auto src = theta_prime.data();
  if (alpha == 1.0) {
    std::copy(src.begin(), src.end(), dst.begin());
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * (src[i] - dst[i]);
}

ParamVector axpy(const ParamVector& theta, const ParamVector& theta_prime, double alpha) {
  ParamVector out = theta;
  axpy_inplace(out, theta_prime, alpha);
  return out;
}

}  // namespace toolmeta::ad
