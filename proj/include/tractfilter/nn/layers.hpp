#pragma once

// Differentiable layers with explicit forward/backward passes.
//
// Feature maps are stored channel-major: element (b, c, l) lives at
// data[(c * batch + b) * length + l], so a channel is one contiguous row of
// batch * length values and convolutions reduce to a single GEMM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tractfilter/errors.hpp"
#include "tractfilter/rng.hpp"

namespace tractfilter::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

enum class Mode { train, eval };

template <typename T>
struct FeatureMap {
  int batch = 0;
  int channels = 0;
  int length = 0;
  std::vector<T> data;

  FeatureMap() = default;
  FeatureMap(int b, int c, int l, T fill = T{0})
      : batch(b), channels(c), length(l), data(static_cast<std::size_t>(b) * c * l, fill) {}

  std::size_t index(int b, int c, int l) const {
    return (static_cast<std::size_t>(c) * batch + b) * length + l;
  }
  T& at(int b, int c, int l) { return data[index(b, c, l)]; }
  const T& at(int b, int c, int l) const { return data[index(b, c, l)]; }

  /// channels x (batch * length) view.
  MatrixMap<T> matrix() { return MatrixMap<T>(data.data(), channels, static_cast<Eigen::Index>(batch) * length); }
  ConstMatrixMap<T> matrix() const {
    return ConstMatrixMap<T>(data.data(), channels, static_cast<Eigen::Index>(batch) * length);
  }

  bool same_shape(const FeatureMap& o) const {
    return batch == o.batch && channels == o.channels && length == o.length;
  }
};

/// Learnable tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::size_t size, T fill = T{0}) : name(std::move(n)), value(size, fill), grad(size, T{0}) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
  std::size_t size() const { return value.size(); }
};

/// Non-learnable persistent state (batchnorm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T> value;
};

template <typename T>
void he_uniform(std::vector<T>& w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : w) x = static_cast<T>(dist(rng));
}

// ---------------------------------------------------------------------------

/// Cross-correlation along length with zero "same" padding (odd kernel).
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, int in_ch, int out_ch, int ksize)
      : in_(in_ch), out_(out_ch), k_(ksize),
        weight(name + ".weight", static_cast<std::size_t>(out_ch) * in_ch * ksize),
        bias(name + ".bias", static_cast<std::size_t>(out_ch)) {
    if (ksize < 1 || ksize % 2 == 0) throw InvalidInput("convolution kernel size must be odd");
  }

  void init(Rng& rng) {
    he_uniform(weight.value, in_ * k_, rng);
    std::fill(bias.value.begin(), bias.value.end(), T{0});
  }

  FeatureMap<T> forward(const FeatureMap<T>& x) {
    if (x.channels != in_) throw ShapeError("conv1d expects " + std::to_string(in_) + " channels, got " + std::to_string(x.channels));
    batch_ = x.batch;
    len_ = x.length;
    const Eigen::Index cols = static_cast<Eigen::Index>(batch_) * len_;
    col_.setZero(static_cast<Eigen::Index>(in_) * k_, cols);
    const int half = k_ / 2;
    for (int c = 0; c < in_; ++c)
      for (int j = 0; j < k_; ++j) {
        T* dst = col_.row(static_cast<Eigen::Index>(c) * k_ + j).data();
        const int shift = j - half;
        for (int b = 0; b < batch_; ++b) {
          const T* src = &x.at(b, c, 0);
          T* row = dst + static_cast<std::size_t>(b) * len_;
          const int lo = std::max(0, -shift), hi = std::min(len_, len_ - shift);
          for (int l = lo; l < hi; ++l) row[l] = src[l + shift];
        }
      }
    FeatureMap<T> y(batch_, out_, len_);
    auto Y = y.matrix();
    const ConstMatrixMap<T> W(weight.value.data(), out_, static_cast<Eigen::Index>(in_) * k_);
    Y.noalias() = W * col_;
    for (int o = 0; o < out_; ++o) Y.row(o).array() += bias.value[static_cast<std::size_t>(o)];
    return y;
  }

  FeatureMap<T> backward(const FeatureMap<T>& dy) {
    const auto dY = dy.matrix();
    MatrixMap<T> dW(weight.grad.data(), out_, static_cast<Eigen::Index>(in_) * k_);
    dW.noalias() += dY * col_.transpose();
    for (int o = 0; o < out_; ++o) bias.grad[static_cast<std::size_t>(o)] += dY.row(o).sum();
    const ConstMatrixMap<T> W(weight.value.data(), out_, static_cast<Eigen::Index>(in_) * k_);
    RowMatrix<T> dcol = W.transpose() * dY;

    FeatureMap<T> dx(batch_, in_, len_);
    const int half = k_ / 2;
    for (int c = 0; c < in_; ++c)
      for (int j = 0; j < k_; ++j) {
        const T* src = dcol.row(static_cast<Eigen::Index>(c) * k_ + j).data();
        const int shift = j - half;
        for (int b = 0; b < batch_; ++b) {
          T* dst = &dx.at(b, c, 0);
          const T* row = src + static_cast<std::size_t>(b) * len_;
          const int lo = std::max(0, -shift), hi = std::min(len_, len_ - shift);
          for (int l = lo; l < hi; ++l) dst[l + shift] += row[l];
        }
      }
    return dx;
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel_size() const { return k_; }

 private:
  int in_ = 0, out_ = 0, k_ = 1;
  int batch_ = 0, len_ = 0;
  RowMatrix<T> col_;

 public:
  Param<T> weight;  // (out, in, k)
  Param<T> bias;
};

// ---------------------------------------------------------------------------

inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEpsilon = 1e-5;

/// Per-channel normalization over (batch, length). Running variance is
/// updated with the unbiased batch variance.
template <typename T>
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(const std::string& name, int channels)
      : ch_(channels),
        scale(name + ".scale", static_cast<std::size_t>(channels), T{1}),
        shift(name + ".shift", static_cast<std::size_t>(channels), T{0}),
        running_mean{name + ".running_mean", std::vector<T>(static_cast<std::size_t>(channels), T{0})},
        running_var{name + ".running_var", std::vector<T>(static_cast<std::size_t>(channels), T{1})} {}

  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) {
    if (x.channels != ch_) throw ShapeError("batchnorm channel mismatch");
    mode_ = mode;
    const Eigen::Index m = static_cast<Eigen::Index>(x.batch) * x.length;
    if (mode == Mode::train && m < 2) throw InvalidInput("batchnorm in train mode needs batch * length >= 2");
    FeatureMap<T> y(x.batch, x.channels, x.length);
    xhat_ = FeatureMap<T>(x.batch, x.channels, x.length);
    inv_std_.assign(static_cast<std::size_t>(ch_), T{0});
    const auto X = x.matrix();
    auto Y = y.matrix();
    auto XH = xhat_.matrix();
    for (int c = 0; c < ch_; ++c) {
      const auto sc = static_cast<std::size_t>(c);
      T mean, var;
      if (mode == Mode::train) {
        mean = X.row(c).mean();
        var = (X.row(c).array() - mean).square().mean();
        const T unbiased = var * static_cast<T>(m) / static_cast<T>(m - 1);
        running_mean.value[sc] = static_cast<T>((1 - kBatchNormMomentum) * running_mean.value[sc] + kBatchNormMomentum * mean);
        running_var.value[sc] = static_cast<T>((1 - kBatchNormMomentum) * running_var.value[sc] + kBatchNormMomentum * unbiased);
      } else {
        mean = running_mean.value[sc];
        var = running_var.value[sc];
      }
      const T inv = T{1} / std::sqrt(var + static_cast<T>(kBatchNormEpsilon));
      inv_std_[sc] = inv;
      XH.row(c) = (X.row(c).array() - mean) * inv;
      Y.row(c) = XH.row(c).array() * scale.value[sc] + shift.value[sc];
    }
    return y;
  }

  FeatureMap<T> backward(const FeatureMap<T>& dy) {
    FeatureMap<T> dx(dy.batch, dy.channels, dy.length);
    const auto dY = dy.matrix();
    const auto XH = std::as_const(xhat_).matrix();
    auto dX = dx.matrix();
    const T m = static_cast<T>(static_cast<Eigen::Index>(dy.batch) * dy.length);
    for (int c = 0; c < ch_; ++c) {
      const auto sc = static_cast<std::size_t>(c);
      const T sum_dy = dY.row(c).sum();
      const T sum_dy_xhat = (dY.row(c).array() * XH.row(c).array()).sum();
      scale.grad[sc] += sum_dy_xhat;
      shift.grad[sc] += sum_dy;
      const T g = scale.value[sc] * inv_std_[sc];
      if (mode_ == Mode::train) {
        dX.row(c) = g * (dY.row(c).array() - sum_dy / m - XH.row(c).array() * (sum_dy_xhat / m));
      } else {
        dX.row(c) = g * dY.row(c).array();
      }
    }
    return dx;
  }

  int channels() const { return ch_; }

 private:
  int ch_ = 0;
  Mode mode_ = Mode::train;
  FeatureMap<T> xhat_;
  std::vector<T> inv_std_;

 public:
  Param<T> scale;
  Param<T> shift;
  Buffer<T> running_mean;
  Buffer<T> running_var;
};

// ---------------------------------------------------------------------------

template <typename T>
class ReLU {
 public:
  template <typename Tensor>
  Tensor forward(Tensor x) {
    mask_.assign(x.data.size(), 0);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      if (x.data[i] > T{0}) mask_[i] = 1;
      else if (x.data[i] <= T{0}) x.data[i] = T{0};  // NaN passes through
    }
    return x;
  }

  template <typename Tensor>
  Tensor backward(Tensor dy) {
    for (std::size_t i = 0; i < dy.data.size(); ++i)
      if (!mask_[i]) dy.data[i] = T{0};
    return dy;
  }

 private:
  std::vector<std::uint8_t> mask_;
};

/// Window = stride = `window`; trailing samples that do not fill a window are
/// dropped. Gradients route to the first maximum.
template <typename T>
class MaxPool1d {
 public:
  MaxPool1d() = default;
  explicit MaxPool1d(int window) : w_(window) {
    if (window < 1) throw InvalidInput("pooling window must be >= 1");
  }

  static int output_length(int length, int window) { return length / window; }

  FeatureMap<T> forward(const FeatureMap<T>& x) {
    in_len_ = x.length;
    const int out_len = output_length(x.length, w_);
    if (out_len < 1) throw ShapeError("pooling window longer than the feature map");
    FeatureMap<T> y(x.batch, x.channels, out_len);
    argmax_.assign(y.data.size(), 0);
    for (int c = 0; c < x.channels; ++c)
      for (int b = 0; b < x.batch; ++b) {
        const T* src = &x.at(b, c, 0);
        for (int o = 0; o < out_len; ++o) {
          int best = o * w_;
          for (int t = best + 1; t < (o + 1) * w_; ++t)
            if (src[t] > src[best]) best = t;
          const std::size_t yi = y.index(b, c, o);
          y.data[yi] = src[best];
          argmax_[yi] = best;
        }
      }
    return y;
  }

  FeatureMap<T> backward(const FeatureMap<T>& dy) {
    FeatureMap<T> dx(dy.batch, dy.channels, in_len_);
    for (int c = 0; c < dy.channels; ++c)
      for (int b = 0; b < dy.batch; ++b)
        for (int o = 0; o < dy.length; ++o) {
          const std::size_t yi = dy.index(b, c, o);
          dx.at(b, c, argmax_[yi]) += dy.data[yi];
        }
    return dx;
  }

  int window() const { return w_; }

 private:
  int w_ = 2;
  int in_len_ = 0;
  std::vector<int> argmax_;
};

// ---------------------------------------------------------------------------

/// Dense layer on row-major (batch, features) activations.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : in_(in), out_(out),
        weight(name + ".weight", static_cast<std::size_t>(in) * out),
        bias(name + ".bias", static_cast<std::size_t>(out)) {}

  void init(Rng& rng) {
    he_uniform(weight.value, in_, rng);
    std::fill(bias.value.begin(), bias.value.end(), T{0});
  }

  RowMatrix<T> forward(const RowMatrix<T>& x) {
    if (x.cols() != in_) throw ShapeError("linear layer expects width " + std::to_string(in_) + ", got " + std::to_string(x.cols()));
    x_ = x;
    const ConstMatrixMap<T> W(weight.value.data(), out_, in_);
    RowMatrix<T> y = x * W.transpose();
    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.value.data(), out_);
    y.rowwise() += b;
    return y;
  }

  RowMatrix<T> backward(const RowMatrix<T>& dy) {
    MatrixMap<T> dW(weight.grad.data(), out_, in_);
    dW.noalias() += dy.transpose() * x_;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias.grad.data(), out_);
    db += dy.colwise().sum();
    const ConstMatrixMap<T> W(weight.value.data(), out_, in_);
    return dy * W;
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  RowMatrix<T> x_;

 public:
  Param<T> weight;  // (out, in)
  Param<T> bias;
};

/// ReLU on dense activations.
template <typename T>
class DenseReLU {
 public:
  RowMatrix<T> forward(RowMatrix<T> x) {
    mask_ = (x.array() > T{0}).template cast<T>();
    return x.cwiseProduct(mask_);
  }
  RowMatrix<T> backward(const RowMatrix<T>& dy) const { return dy.cwiseProduct(mask_); }

 private:
  RowMatrix<T> mask_;
};

// ---------------------------------------------------------------------------

/// Mean over the batch of -log softmax(logits)[target]. `grad` receives the
/// derivative with respect to the logits.
template <typename T>
T softmax_xent(const RowMatrix<T>& logits, const std::vector<int>& targets, RowMatrix<T>* grad) {
  const Eigen::Index n = logits.rows();
  if (static_cast<std::size_t>(n) != targets.size()) throw ShapeError("target count does not match the batch");
  if (grad) grad->setZero(n, logits.cols());
  T total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mx = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - mx).eval();
    const T lse = std::log(shifted.exp().sum());
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) throw InvalidInput("target class out of range");
    total += lse - shifted(t);
    if (grad) {
      grad->row(i) = (shifted - lse).exp() / static_cast<T>(n);
      (*grad)(i, t) -= T{1} / static_cast<T>(n);
    }
  }
  return total / static_cast<T>(n);
}

}  // namespace tractfilter::nn
