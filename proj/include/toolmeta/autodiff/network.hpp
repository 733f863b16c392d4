#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace toolmeta::ad {

/// Row-major batch: one sample per row, features flattened per row.
/// Spatial tensors use height x width x channel order inside a row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class LayerKind { dense, conv2d, layernorm, relu, tanh };

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return height * width * channels; }
  bool operator==(const ImageShape&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in = 0;   // flattened input width
  std::size_t out = 0;  // flattened output width
  // conv2d only
  ImageShape in_image;
  ImageShape out_image;
  std::size_t kernel = 0;
  std::size_t stride = 0;

  static LayerSpec dense(std::size_t in, std::size_t out);
  /// Valid (unpadded) convolution; throws ShapeError if the kernel does not fit.
  static LayerSpec conv2d(ImageShape input, std::size_t kernel, std::size_t stride,
                          std::size_t out_channels);
  static LayerSpec layernorm(std::size_t width);
  static LayerSpec relu(std::size_t width);
  static LayerSpec tanh(std::size_t width);

  std::size_t param_count() const noexcept;
};

/// floor((n - k) / s) + 1, or 0 when the kernel does not fit.
std::size_t conv_output_side(std::size_t input_side, std::size_t kernel, std::size_t stride);

inline constexpr double kLayerNormEps = 1e-5;

/// Activations recorded by a forward pass; `values[i]` is the input of layer i
/// and `values.back()` the network output. Layernorm also keeps its
/// normalized activations and inverse standard deviations.
struct ForwardCache {
  std::vector<Matrix> values;
  std::vector<Matrix> normalized;
  std::vector<Vector> inv_std;
};

/// A sequential chain of layers whose parameters live in a caller-provided
/// span of exactly `param_count()` doubles.
class Network {
 public:
  Network() = default;
  /// Validates that consecutive layer widths agree.
  explicit Network(std::vector<LayerSpec> layers);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t param_count() const noexcept { return param_count_; }
  std::size_t input_size() const noexcept;
  std::size_t output_size() const noexcept;

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero,
  /// layernorm gain one and bias zero.
  void initialize(std::span<double> params, std::mt19937_64& rng) const;

  Matrix forward(std::span<const double> params, const Matrix& input) const;
  ForwardCache forward_cached(std::span<const double> params, const Matrix& input) const;

  /// Accumulates d(loss)/d(params) into `param_grad` (+=); an empty span
  /// skips parameter gradients. Returns the input gradient when
  /// `want_input_grad` is set, otherwise an empty matrix.
  Matrix backward(std::span<const double> params, const ForwardCache& cache,
                  const Matrix& output_grad, std::span<double> param_grad,
                  bool want_input_grad = true) const;

 private:
  void check_params(std::size_t n) const;

  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
  std::size_t param_count_ = 0;
};

}  // namespace toolmeta::ad
