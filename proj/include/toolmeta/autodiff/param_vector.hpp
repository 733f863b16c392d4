#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace toolmeta::ad {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Segment&) const = default;
};

/// Allocator with a fixed 64-byte alignment. Vectorised kernels peel loops
/// according to the address of their operands, so fixed alignment keeps
/// results independent of where the heap places the buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

/// Flat parameter storage partitioned into named, contiguous segments.
///
/// Segments are appended in order, so they are disjoint and cover the whole
/// array by construction. Empty segments are allowed (e.g. a language head
/// that is switched off) and still take part in layout comparisons.
class ParamVector {
 public:
  ParamVector() = default;

  /// Appends a zero-filled segment and returns its offset.
  std::size_t add_segment(std::string name, std::size_t length);

  bool has_segment(std::string_view name) const noexcept;
  const Segment& segment_info(std::string_view name) const;
  std::span<double> segment(std::string_view name);
  std::span<const double> segment(std::string_view name) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  bool same_layout(const ParamVector& other) const noexcept {
    return segments_ == other.segments_;
  }

  /// Zero-filled vector with this layout; used for gradients.
  ParamVector zeros_like() const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double, AlignedAllocator<double>> data_;
  std::vector<Segment> segments_;
};

/// Interpolates towards `theta_prime`: theta + alpha * (theta_prime - theta).
/// The endpoints alpha = 0 and alpha = 1 return the operands bit-for-bit.
ParamVector axpy(const ParamVector& theta, const ParamVector& theta_prime, double alpha);

/// In-place variant of `axpy` that overwrites `theta`.
void axpy_inplace(ParamVector& theta, const ParamVector& theta_prime, double alpha);

}  // namespace toolmeta::ad
