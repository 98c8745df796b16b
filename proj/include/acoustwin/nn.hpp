#ifndef ACOUSTWIN_NN_HPP
#define ACOUSTWIN_NN_HPP

// Small dense layers with explicit backward passes. Activations are stored
// feature-major: one column per position, one row per channel/feature.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include "acoustwin/errors.hpp"
#include "acoustwin/params.hpp"

namespace acoustwin::nn {

enum class Mode { Train, Eval };

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double silu(double x) { return x * sigmoid(x); }

inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// Exact Gaussian-CDF form.
inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

inline Matrix silu(const Matrix& x) {
  return (x.array() / (1.0 + (-x.array()).exp())).matrix();
}

inline Matrix silu_backward(const Matrix& x, const Matrix& dy) {
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x.array()).exp());
  return (dy.array() * s * (1.0 + x.array() * (1.0 - s))).matrix();
}

inline Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

inline Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  return (dy.array() * x.unaryExpr([](double v) { return gelu_grad(v); }).array())
      .matrix();
}

// In-place helpers for the inference path. Kept as separate passes: fusing
// the row broadcast into the exp expression defeats Eigen's vectorization.
inline void silu_inplace(Matrix& x) { x.array() = x.array() / (1.0 + (-x.array()).exp()); }

inline void gelu_inplace(Matrix& x) {
  x = x.unaryExpr([](double v) { return gelu(v); });
}

inline void scale_shift_rows(Matrix& x, const Vector& scale, const Vector& shift) {
  for (Index j = 0; j < x.cols(); ++j) x.col(j) = x.col(j).cwiseProduct(scale) + shift;
}

/// Uniform in +-sqrt(1/fan_in).
inline void init_uniform(Matrix& m, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
}

struct Linear {
  Matrix weight;  // out x in
  Vector bias;

  static Linear zeros(int in, int out) {
    return {Matrix::Zero(out, in), Vector::Zero(out)};
  }

  static Linear random(int in, int out, Rng& rng) {
    Linear l = zeros(in, out);
    init_uniform(l.weight, in, rng);
    Matrix b(out, 1);
    init_uniform(b, in, rng);
    l.bias = b.col(0);
    return l;
  }

  Index in_features() const { return weight.cols(); }
  Index out_features() const { return weight.rows(); }

  /// Writes into y, reusing its storage when the shape is unchanged.
  void forward_into(const Matrix& x, Matrix& y) const {
    if (x.rows() != weight.cols()) throw ShapeMismatch("Linear: input size mismatch");
    y.noalias() = weight * x;
    y.colwise() += bias;
  }

  Matrix forward(const Matrix& x) const {
    if (x.rows() != weight.cols()) {
      throw ShapeMismatch("Linear: expected " + std::to_string(weight.cols()) +
                          " input rows, got " + std::to_string(x.rows()));
    }
    Matrix y = weight * x;
    y.colwise() += bias;
    return y;
  }

  // Accumulates into grad and returns d loss / d x.
  Matrix backward(const Matrix& x, const Matrix& dy, Linear& grad) const {
    grad.weight.noalias() += dy * x.transpose();
    grad.bias += dy.rowwise().sum();
    return weight.transpose() * dy;
  }

  template <class F>
  void visit(F&& f, const std::string& prefix, ParamKind kind) {
    f(prefix + ".weight", weight, kind);
    f(prefix + ".bias", bias, kind);
  }
};

/// 1-D convolution with zero padding over samples laid out as consecutive
/// blocks of `length` columns.
struct Conv1d {
  Matrix weight;  // out x (in * kernel), column = in_channel * kernel + tap
  Vector bias;
  int in_channels = 0;
  int kernel = 5;
  int padding = 2;

  static Conv1d zeros(int in, int out, int kernel = 5, int padding = 2) {
    return {Matrix::Zero(out, in * kernel), Vector::Zero(out), in, kernel, padding};
  }

  static Conv1d random(int in, int out, Rng& rng, int kernel = 5, int padding = 2) {
    Conv1d c = zeros(in, out, kernel, padding);
    init_uniform(c.weight, in * kernel, rng);
    Matrix b(out, 1);
    init_uniform(b, in * kernel, rng);
    c.bias = b.col(0);
    return c;
  }

  Matrix im2col(const Matrix& x, Index length) const {
    if (x.rows() != in_channels || length <= 0 || x.cols() % length != 0) {
      throw ShapeMismatch("Conv1d: input shape mismatch");
    }
    const Index batch = x.cols() / length;
    const Index rows = Index{in_channels} * kernel;
    Matrix cols(rows, x.cols());
    for (Index b = 0; b < batch; ++b) {
      const Index base = b * length;
      for (Index i = 0; i < length; ++i) {
        double* dst = cols.col(base + i).data();
        for (int t = 0; t < kernel; ++t) {
          const Index src = i + t - padding;
          const bool inside = src >= 0 && src < length;
          const double* in = inside ? x.col(base + src).data() : nullptr;
          for (int c = 0; c < in_channels; ++c) dst[c * kernel + t] = inside ? in[c] : 0.0;
        }
      }
    }
    return cols;
  }

  Matrix col2im(const Matrix& dcols, Index length) const {
    Matrix dx = Matrix::Zero(in_channels, dcols.cols());
    const Index batch = dcols.cols() / length;
    for (Index b = 0; b < batch; ++b) {
      const Index base = b * length;
      for (Index i = 0; i < length; ++i) {
        const double* g = dcols.col(base + i).data();
        for (int t = 0; t < kernel; ++t) {
          const Index src = i + t - padding;
          if (src < 0 || src >= length) continue;
          double* out = dx.col(base + src).data();
          for (int c = 0; c < in_channels; ++c) out[c] += g[c * kernel + t];
        }
      }
    }
    return dx;
  }

  /// Tap-major copy of the weights: column t * in + c.
  void tap_major_weights(Matrix& w) const {
    w.resize(weight.rows(), weight.cols());
    for (int c = 0; c < in_channels; ++c) {
      for (int t = 0; t < kernel; ++t) w.col(Index{t} * in_channels + c) = weight.col(Index{c} * kernel + t);
    }
  }

  /// Inference on a zero-padded layout: each sample occupies length + 2 *
  /// padding columns with zero margins. With tap-major weights, consecutive
  /// input columns form an im2col column in place, so one GEMM over an
  /// overlapping-stride view does the whole batch. Writes the pre-activation
  /// into y; margins between samples hold junk and must be re-zeroed.
  void forward_padded(const Matrix& xpad, Index length, const Matrix& w_tap, Matrix& y) const {
    const Index span = length + 2 * padding;
    if (kernel != 2 * padding + 1 || xpad.rows() != in_channels || xpad.cols() % span != 0) {
      throw ShapeMismatch("Conv1d: padded input shape mismatch");
    }
    const Index n = xpad.cols();
    const Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> windows(
        xpad.data(), Index{in_channels} * kernel, n - kernel + 1, Eigen::OuterStride<>(in_channels));
    y.resize(weight.rows(), n);
    y.leftCols(padding).setZero();
    y.rightCols(padding).setZero();
    y.middleCols(padding, n - kernel + 1).noalias() = w_tap * windows;
    y.middleCols(padding, n - kernel + 1).colwise() += bias;
  }

  Matrix forward_cols(const Matrix& cols) const {
    Matrix y = weight * cols;
    y.colwise() += bias;
    return y;
  }

  // Returns d loss / d cols; call col2im to map back to the input layout.
  Matrix backward_cols(const Matrix& cols, const Matrix& dy, Conv1d& grad) const {
    grad.weight.noalias() += dy * cols.transpose();
    grad.bias += dy.rowwise().sum();
    return weight.transpose() * dy;
  }

  template <class F>
  void visit(F&& f, const std::string& prefix, ParamKind kind) {
    f(prefix + ".weight", weight, kind);
    f(prefix + ".bias", bias, kind);
  }
};

/// Per-row normalization across all columns. Train mode normalizes with the
/// batch statistics; eval mode with the running statistics.
struct BatchNorm {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  struct Cache {
    Matrix xhat;
    Vector inv_std;
    Vector batch_mean;
    Vector batch_var;  // biased
    Index count = 0;
  };

  static BatchNorm identity(int features) {
    return {Vector::Ones(features), Vector::Zero(features), Vector::Zero(features),
            Vector::Ones(features)};
  }

  static BatchNorm zeros(int features) {
    return {Vector::Zero(features), Vector::Zero(features), Vector::Zero(features),
            Vector::Zero(features)};
  }

  Matrix forward(const Matrix& x, Mode mode, Cache& cache) const {
    if (x.rows() != gamma.size()) throw ShapeMismatch("BatchNorm: feature mismatch");
    cache.count = x.cols();
    Vector mean;
    Vector var;
    if (mode == Mode::Train) {
      if (x.cols() < 2) throw ShapeMismatch("BatchNorm: train mode needs >= 2 columns");
      mean = x.rowwise().mean();
      var = (x.colwise() - mean).array().square().rowwise().mean();
      cache.batch_mean = mean;
      cache.batch_var = var;
    } else {
      mean = running_mean;
      var = running_var;
    }
    cache.inv_std = (var.array() + eps).rsqrt().matrix();
    cache.xhat = (x.colwise() - mean).array().colwise() * cache.inv_std.array();
    return ((cache.xhat.array().colwise() * gamma.array()).colwise() + beta.array()).matrix();
  }

  /// Evaluation-mode normalization as y = scale * x + shift.
  std::pair<Vector, Vector> eval_affine() const {
    Vector scale = gamma.array() * (running_var.array() + eps).rsqrt();
    Vector shift = beta.array() - running_mean.array() * scale.array();
    return {std::move(scale), std::move(shift)};
  }

  Matrix backward(const Matrix& dy, Mode mode, const Cache& cache, BatchNorm& grad) const {
    grad.gamma += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
    grad.beta += dy.rowwise().sum();
    const Eigen::ArrayXXd dxhat = dy.array().colwise() * gamma.array();
    if (mode == Mode::Eval) {
      return (dxhat.colwise() * cache.inv_std.array()).matrix();
    }
    const double n = static_cast<double>(cache.count);
    const Eigen::ArrayXd sum_dxhat = dxhat.rowwise().sum();
    const Eigen::ArrayXd sum_dxhat_xhat = (dxhat * cache.xhat.array()).rowwise().sum();
    Eigen::ArrayXXd dx = n * dxhat;
    dx.colwise() -= sum_dxhat;
    dx -= cache.xhat.array().colwise() * sum_dxhat_xhat;
    dx.colwise() *= cache.inv_std.array() / n;
    return dx.matrix();
  }

  void update_running(const Cache& cache) {
    if (cache.batch_mean.size() == 0) return;
    const double n = static_cast<double>(cache.count);
    running_mean = (1.0 - momentum) * running_mean + momentum * cache.batch_mean;
    running_var = (1.0 - momentum) * running_var + momentum * cache.batch_var * (n / (n - 1.0));
  }

  template <class F>
  void visit(F&& f, const std::string& prefix, ParamKind kind) {
    f(prefix + ".gamma", gamma, kind);
    f(prefix + ".beta", beta, kind);
    f(prefix + ".running_mean", running_mean, ParamKind::Buffer);
    f(prefix + ".running_var", running_var, ParamKind::Buffer);
  }
};

/// Averages consecutive groups of `length / bins` columns per sample block.
inline Matrix adaptive_avg_pool(const Matrix& x, Index length, Index bins) {
  if (length <= 0 || x.cols() % length != 0 || length % bins != 0) {
    throw ShapeMismatch("adaptive_avg_pool: length " + std::to_string(length) +
                        " incompatible with input");
  }
  const Index batch = x.cols() / length;
  const Index width = length / bins;
  Matrix y(x.rows(), batch * bins);
  for (Index b = 0; b < batch; ++b) {
    for (Index j = 0; j < bins; ++j) {
      y.col(b * bins + j) = x.middleCols(b * length + j * width, width).rowwise().mean();
    }
  }
  return y;
}

inline Matrix adaptive_avg_pool_backward(const Matrix& dy, Index length, Index bins) {
  const Index batch = dy.cols() / bins;
  const Index width = length / bins;
  Matrix dx(dy.rows(), batch * length);
  for (Index b = 0; b < batch; ++b) {
    for (Index j = 0; j < bins; ++j) {
      const Vector g = dy.col(b * bins + j) / static_cast<double>(width);
      for (Index k = 0; k < width; ++k) dx.col(b * length + j * width + k) = g;
    }
  }
  return dx;
}

/// channels x (bins * batch) -> (channels * bins) x batch, channel-major.
inline Matrix flatten(const Matrix& x, Index bins) {
  const Index channels = x.rows();
  const Index batch = x.cols() / bins;
  Matrix y(channels * bins, batch);
  for (Index b = 0; b < batch; ++b) {
    for (Index c = 0; c < channels; ++c) {
      for (Index t = 0; t < bins; ++t) y(c * bins + t, b) = x(c, b * bins + t);
    }
  }
  return y;
}

inline Matrix unflatten(const Matrix& y, Index channels, Index bins) {
  const Index batch = y.cols();
  Matrix x(channels, bins * batch);
  for (Index b = 0; b < batch; ++b) {
    for (Index c = 0; c < channels; ++c) {
      for (Index t = 0; t < bins; ++t) x(c, b * bins + t) = y(c * bins + t, b);
    }
  }
  return x;
}

}  // namespace acoustwin::nn

#endif  // ACOUSTWIN_NN_HPP
