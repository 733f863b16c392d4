#include "toolmeta/autodiff/network.hpp"

#include <cmath>
#include <string>

#include "toolmeta/errors.hpp"

namespace toolmeta::ad {
namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using MutVecMap = Eigen::Map<Eigen::RowVectorXd>;

// Hashed text embeddings are mostly zeros. Skipping the zeros makes the
// 768-wide language input layer several times cheaper.
bool mostly_zero(const Matrix& x) {
  return x.size() >= 1024 && (x.array() != 0.0).count() * 4 < x.size();
}

// y (n x out) = x * w^T, visiting only the nonzeros of x. The row-major
// weights are transposed once so each nonzero reads a contiguous row.
void sparse_input_forward(const Matrix& x, const double* w, std::size_t out, Matrix& y) {
  const Matrix wt = ConstMap(w, static_cast<Eigen::Index>(out), x.cols()).transpose();
  y = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(out));
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (const double v = x(r, j); v != 0.0) y.row(r) += v * wt.row(j);
}

// gw (out x in) += grad^T * x, visiting only the nonzeros of x.
void sparse_input_weight_grad(const Matrix& x, const Matrix& grad, double* gw) {
  Matrix gt = Matrix::Zero(x.cols(), grad.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (const double v = x(r, j); v != 0.0) gt.row(j) += v * grad.row(r);
  MutMap(gw, grad.cols(), x.cols()) += gt.transpose();
}

std::size_t kernel_width(const LayerSpec& l) {
  return l.kernel * l.kernel * l.in_image.channels;
}

// Gathers the receptive fields of one HWC image into rows of `patches`,
// ordered (out_row, out_col); each row is (kh, kw, channel).
void im2col(const double* image, const LayerSpec& l, Matrix& patches) {
  const auto& in = l.in_image;
  const std::size_t oh = l.out_image.height, ow = l.out_image.width;
  patches.resize(static_cast<Eigen::Index>(oh * ow), static_cast<Eigen::Index>(kernel_width(l)));
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double* dst = patches.row(static_cast<Eigen::Index>(r * ow + c)).data();
      for (std::size_t kh = 0; kh < l.kernel; ++kh) {
        const double* src = image + ((r * l.stride + kh) * in.width + c * l.stride) * in.channels;
        const std::size_t n = l.kernel * in.channels;
        for (std::size_t j = 0; j < n; ++j) *dst++ = src[j];
      }
    }
  }
}

void col2im_add(const Matrix& patch_grad, const LayerSpec& l, double* image_grad) {
  const auto& in = l.in_image;
  const std::size_t oh = l.out_image.height, ow = l.out_image.width;
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      const double* src = patch_grad.row(static_cast<Eigen::Index>(r * ow + c)).data();
      for (std::size_t kh = 0; kh < l.kernel; ++kh) {
        double* dst = image_grad + ((r * l.stride + kh) * in.width + c * l.stride) * in.channels;
        const std::size_t n = l.kernel * in.channels;
        for (std::size_t j = 0; j < n; ++j) dst[j] += *src++;
      }
    }
  }
}

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::layernorm: return "layernorm";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
  }
  return "?";
}

}  // namespace

std::size_t conv_output_side(std::size_t input_side, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0 || input_side < kernel) return 0;
  return (input_side - kernel) / stride + 1;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw ShapeError(ShapeError::npos, "dense widths must be >= 1");
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.in = in;
  l.out = out;
  return l;
}

LayerSpec LayerSpec::conv2d(ImageShape input, std::size_t kernel, std::size_t stride,
                            std::size_t out_channels) {
  const std::size_t oh = conv_output_side(input.height, kernel, stride);
  const std::size_t ow = conv_output_side(input.width, kernel, stride);
  if (oh == 0 || ow == 0 || input.channels == 0 || out_channels == 0)
    throw ShapeError(ShapeError::npos, "conv2d kernel " + std::to_string(kernel) +
                                           " does not fit input " + std::to_string(input.height) +
                                           "x" + std::to_string(input.width));
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.in_image = input;
  l.out_image = ImageShape{oh, ow, out_channels};
  l.kernel = kernel;
  l.stride = stride;
  l.in = input.size();
  l.out = l.out_image.size();
  return l;
}

LayerSpec LayerSpec::layernorm(std::size_t width) {
  LayerSpec l;
  l.kind = LayerKind::layernorm;
  l.in = l.out = width;
  return l;
}

LayerSpec LayerSpec::relu(std::size_t width) {
  LayerSpec l;
  l.kind = LayerKind::relu;
  l.in = l.out = width;
  return l;
}

LayerSpec LayerSpec::tanh(std::size_t width) {
  LayerSpec l;
  l.kind = LayerKind::tanh;
  l.in = l.out = width;
  return l;
}

std::size_t LayerSpec::param_count() const noexcept {
  switch (kind) {
    case LayerKind::dense: return in * out + out;
    case LayerKind::conv2d: return out_image.channels * kernel_width(*this) + out_image.channels;
    case LayerKind::layernorm: return 2 * in;
    default: return 0;
  }
}

Network::Network(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError(ShapeError::npos, "network has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i > 0 && layers_[i].in != layers_[i - 1].out)
      throw ShapeError(i, kind_name(layers_[i].kind) + " expects width " +
                              std::to_string(layers_[i].in) + " but previous layer emits " +
                              std::to_string(layers_[i - 1].out));
    offsets_.push_back(param_count_);
    param_count_ += layers_[i].param_count();
  }
}

std::size_t Network::input_size() const noexcept {
  return layers_.empty() ? 0 : layers_.front().in;
}

std::size_t Network::output_size() const noexcept {
  return layers_.empty() ? 0 : layers_.back().out;
}

void Network::check_params(std::size_t n) const {
  if (n != param_count_)
    throw ShapeError(ShapeError::npos, "parameter span has " + std::to_string(n) +
                                           " entries, network needs " +
                                           std::to_string(param_count_));
}

void Network::initialize(std::span<double> params, std::mt19937_64& rng) const {
  check_params(params.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    double* p = params.data() + offsets_[i];
    switch (l.kind) {
      case LayerKind::dense:
      case LayerKind::conv2d: {
        const bool conv = l.kind == LayerKind::conv2d;
        const std::size_t fan_in = conv ? kernel_width(l) : l.in;
        const std::size_t fan_out =
            conv ? l.kernel * l.kernel * l.out_image.channels : l.out;
        const std::size_t rows = conv ? l.out_image.channels : l.out;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t k = 0; k < rows * fan_in; ++k) p[k] = dist(rng);
        for (std::size_t k = 0; k < rows; ++k) p[rows * fan_in + k] = 0.0;
        break;
      }
      case LayerKind::layernorm:
        for (std::size_t k = 0; k < l.in; ++k) p[k] = 1.0;
        for (std::size_t k = 0; k < l.in; ++k) p[l.in + k] = 0.0;
        break;
      default: break;
    }
  }
}

Matrix Network::forward(std::span<const double> params, const Matrix& input) const {
  return std::move(forward_cached(params, input).values.back());
}

ForwardCache Network::forward_cached(std::span<const double> params, const Matrix& input) const {
  check_params(params.size());
  if (static_cast<std::size_t>(input.cols()) != input_size())
    throw ShapeError(0, "input has width " + std::to_string(input.cols()) + ", expected " +
                            std::to_string(input_size()));
  const Eigen::Index batch = input.rows();
  ForwardCache cache;
  cache.values.reserve(layers_.size() + 1);
  cache.normalized.resize(layers_.size());
  cache.inv_std.resize(layers_.size());
  cache.values.push_back(input);

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const double* p = params.data() + offsets_[i];
    const Matrix& x = cache.values.back();
    Matrix y;
    switch (l.kind) {
      case LayerKind::dense: {
        ConstMap w(p, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
        ConstVecMap b(p + l.in * l.out, static_cast<Eigen::Index>(l.out));
        if (i == 0 && mostly_zero(x)) {
          sparse_input_forward(x, p, l.out, y);
        } else {
          y.noalias() = x * w.transpose();
        }
        y.rowwise() += b;
        break;
      }
      case LayerKind::conv2d: {
        const auto cout = static_cast<Eigen::Index>(l.out_image.channels);
        const auto kw = static_cast<Eigen::Index>(kernel_width(l));
        ConstMap w(p, cout, kw);
        ConstVecMap b(p + cout * kw, cout);
        y.resize(batch, static_cast<Eigen::Index>(l.out));
        Matrix patches, out;
        for (Eigen::Index s = 0; s < batch; ++s) {
          im2col(x.row(s).data(), l, patches);
          out.noalias() = patches * w.transpose();
          out.rowwise() += b;
          MutMap(y.row(s).data(), out.rows(), cout) = out;
        }
        break;
      }
      case LayerKind::layernorm: {
        const auto n = static_cast<Eigen::Index>(l.in);
        ConstVecMap gain(p, n);
        ConstVecMap bias(p + n, n);
        Matrix xhat(batch, n);
        Vector inv_std(batch);
        for (Eigen::Index r = 0; r < batch; ++r) {
          const double mean = x.row(r).mean();
          const double var = (x.row(r).array() - mean).square().mean();
          inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
          xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
        }
        y = (xhat.array().rowwise() * gain.array()).rowwise() + bias.array();
        cache.normalized[i] = std::move(xhat);
        cache.inv_std[i] = std::move(inv_std);
        break;
      }
      case LayerKind::relu:
        y = x.cwiseMax(0.0);
        break;
      case LayerKind::tanh:
        y = x.array().tanh().matrix();
        break;
    }
    cache.values.push_back(std::move(y));
  }
  return cache;
}

Matrix Network::backward(std::span<const double> params, const ForwardCache& cache,
                         const Matrix& output_grad, std::span<double> param_grad,
                         bool want_input_grad) const {
  check_params(params.size());
  const bool want_params = !param_grad.empty();
  if (want_params) check_params(param_grad.size());
  if (cache.values.size() != layers_.size() + 1)
    throw ShapeError(ShapeError::npos, "forward cache does not belong to this network");
  if (output_grad.rows() != cache.values.back().rows() ||
      output_grad.cols() != cache.values.back().cols())
    throw ShapeError(layers_.size() - 1, "output gradient shape differs from output");

  const Eigen::Index batch = output_grad.rows();
  Matrix grad = output_grad;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const auto& l = layers_[idx];
    const double* p = params.data() + offsets_[idx];
    double* g = want_params ? param_grad.data() + offsets_[idx] : nullptr;
    const Matrix& x = cache.values[idx];
    const Matrix& y = cache.values[idx + 1];
    const bool need_dx = want_input_grad || idx > 0;
    Matrix dx;
    switch (l.kind) {
      case LayerKind::dense: {
        const auto in = static_cast<Eigen::Index>(l.in), out = static_cast<Eigen::Index>(l.out);
        ConstMap w(p, out, in);
        if (want_params) {
          MutMap gw(g, out, in);
          MutVecMap gb(g + in * out, out);
          if (idx == 0 && mostly_zero(x)) {
            sparse_input_weight_grad(x, grad, g);
          } else {
            gw.noalias() += grad.transpose() * x;
          }
          gb += grad.colwise().sum();
        }
        if (need_dx) dx.noalias() = grad * w;
        break;
      }
      case LayerKind::conv2d: {
        const auto cout = static_cast<Eigen::Index>(l.out_image.channels);
        const auto kw = static_cast<Eigen::Index>(kernel_width(l));
        const auto positions = static_cast<Eigen::Index>(l.out_image.height * l.out_image.width);
        ConstMap w(p, cout, kw);
        if (!want_params && !need_dx) break;
        if (need_dx) dx = Matrix::Zero(batch, static_cast<Eigen::Index>(l.in));
        Matrix patches, patch_grad;
        for (Eigen::Index s = 0; s < batch; ++s) {
          ConstMap gy(grad.row(s).data(), positions, cout);
          if (want_params) {
            im2col(x.row(s).data(), l, patches);
            MutMap gw(g, cout, kw);
            MutVecMap gb(g + cout * kw, cout);
            gw.noalias() += gy.transpose() * patches;
            gb += gy.colwise().sum();
          }
          if (need_dx) {
            patch_grad.noalias() = gy * w;
            col2im_add(patch_grad, l, dx.row(s).data());
          }
        }
        break;
      }
      case LayerKind::layernorm: {
        const auto n = static_cast<Eigen::Index>(l.in);
        ConstVecMap gain(p, n);
        const Matrix& xhat = cache.normalized[idx];
        if (want_params) {
          MutVecMap ggain(g, n);
          MutVecMap gbias(g + n, n);
          ggain += (grad.array() * xhat.array()).colwise().sum().matrix();
          gbias += grad.colwise().sum();
        }
        if (need_dx) {
          dx.resize(batch, n);
          for (Eigen::Index r = 0; r < batch; ++r) {
            const Eigen::RowVectorXd dxhat = grad.row(r).cwiseProduct(gain);
            const double mean_d = dxhat.mean();
            const double mean_dx = dxhat.cwiseProduct(xhat.row(r)).mean();
            dx.row(r) = cache.inv_std[idx](r) *
                        (dxhat.array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
          }
        }
        break;
      }
      case LayerKind::relu:
        if (need_dx) dx = (grad.array() * (y.array() > 0.0).cast<double>()).matrix();
        break;
      case LayerKind::tanh:
        if (need_dx) dx = (grad.array() * (1.0 - y.array().square())).matrix();
        break;
    }
    const std::size_t np = want_params ? l.param_count() : 0;
    for (std::size_t k = 0; k < np; ++k)
      if (!std::isfinite(g[k])) throw NonFiniteError(idx, "non-finite parameter gradient");
    if (need_dx && !dx.allFinite()) throw NonFiniteError(idx, "non-finite input gradient");
    grad = std::move(dx);
  }
  return want_input_grad ? grad : Matrix();
}

}  // namespace toolmeta::ad
