#ifndef ACOUSTWIN_ENCODERS_HPP
#define ACOUSTWIN_ENCODERS_HPP

#include <array>
#include <optional>
#include <span>
#include <string>

#include "acoustwin/geo.hpp"
#include "acoustwin/nn.hpp"
#include "acoustwin/params.hpp"

namespace acoustwin {

inline constexpr int kProfileLength = 128;
inline constexpr int kPooledLength = 16;
inline constexpr std::array<int, 3> kConvChannels = {8, 16, 32};
inline constexpr std::array<int, 3> kBathyHeadWidths = {256, 128, 64};
inline constexpr std::array<int, 6> kFeatureWidths = {32, 64, 128, 256, 128, 64};

/// Seabed depths (metres, positive down) sampled at 128 uniformly spaced
/// points along the source-receiver track.
struct BathyProfile {
  std::array<double, kProfileLength> depth_m{};

  /// Min-max scaled view used as network input; throws OutOfRange outside
  /// the training range.
  std::array<double, kProfileLength> normalized(const Interval& range) const {
    std::array<double, kProfileLength> out{};
    for (int k = 0; k < kProfileLength; ++k) {
      out[k] = minmax_scale(depth_m[k], range, "bathymetry");
    }
    return out;
  }
};

struct EncoderConfig {
  int bathy_dim = 16;   // d_Omega
  int geom_dim = 16;    // d_z
  int latent_dim = 16;  // d_lat
};

/// Conv1D + SiLU + BN (x3), adaptive pooling to 16, flatten, then
/// Linear + SiLU + BN (x3) and a final linear layer.
struct BathyEncoder {
  std::array<nn::Conv1d, 3> conv;
  std::array<nn::BatchNorm, 3> conv_bn;
  std::array<nn::Linear, 3> head;
  std::array<nn::BatchNorm, 3> head_bn;
  nn::Linear out;

  struct Cache {
    std::array<Matrix, 3> cols;
    std::array<Matrix, 3> pre;  // conv outputs before SiLU
    std::array<nn::BatchNorm::Cache, 3> conv_bn;
    Matrix flat;
    std::array<Matrix, 3> head_in;
    std::array<Matrix, 3> head_pre;
    std::array<nn::BatchNorm::Cache, 3> head_bn;
    Matrix out_in;
  };

  template <class Factory>
  static BathyEncoder make(int out_dim, Factory&& linear, auto&& conv_factory, auto&& bn) {
    BathyEncoder e;
    int in = 1;
    for (int l = 0; l < 3; ++l) {
      e.conv[l] = conv_factory(in, kConvChannels[l]);
      e.conv_bn[l] = bn(kConvChannels[l]);
      in = kConvChannels[l];
    }
    in = kConvChannels.back() * kPooledLength;
    for (int l = 0; l < 3; ++l) {
      e.head[l] = linear(in, kBathyHeadWidths[l]);
      e.head_bn[l] = bn(kBathyHeadWidths[l]);
      in = kBathyHeadWidths[l];
    }
    e.out = linear(in, out_dim);
    return e;
  }

  /// profiles: 128 x batch of normalized depths.
  Matrix forward(const Matrix& profiles, nn::Mode mode, Cache& c) const {
    if (profiles.rows() != kProfileLength) {
      throw ShapeMismatch("bathy encoder expects " + std::to_string(kProfileLength) +
                          " samples per profile, got " + std::to_string(profiles.rows()));
    }
    Matrix h = Eigen::Map<const Matrix>(profiles.data(), 1, profiles.size());
    for (int l = 0; l < 3; ++l) {
      c.cols[l] = conv[l].im2col(h, kProfileLength);
      c.pre[l] = conv[l].forward_cols(c.cols[l]);
      h = conv_bn[l].forward(nn::silu(c.pre[l]), mode, c.conv_bn[l]);
    }
    c.flat = nn::flatten(nn::adaptive_avg_pool(h, kProfileLength, kPooledLength),
                         kPooledLength);
    Matrix u = c.flat;
    for (int l = 0; l < 3; ++l) {
      c.head_in[l] = u;
      c.head_pre[l] = head[l].forward(u);
      u = head_bn[l].forward(nn::silu(c.head_pre[l]), mode, c.head_bn[l]);
    }
    c.out_in = u;
    return out.forward(u);
  }

  /// Reusable buffers for the inference path.
  struct Workspace {
    std::array<Matrix, 3> w_tap;
    std::array<Matrix, 4> act;  // padded input of each conv layer, then the last output
    Matrix flat;
    std::array<Matrix, 3> head;
  };

  /// Evaluation-mode forward pass without caches, for bulk prediction.
  Matrix infer(const Matrix& profiles, Workspace& ws) const {
    if (profiles.rows() != kProfileLength) throw ShapeMismatch("bathy encoder expects 128 samples per profile");
    const Index batch = profiles.cols();
    const Index pad = conv[0].padding;
    const Index span = kProfileLength + 2 * pad;
    ws.act[0].setZero(1, batch * span);
    for (Index b = 0; b < batch; ++b) {
      ws.act[0].middleCols(b * span + pad, kProfileLength) = profiles.col(b).transpose();
    }
    for (int l = 0; l < 3; ++l) {
      Matrix& y = ws.act[l + 1];
      conv[l].tap_major_weights(ws.w_tap[l]);
      conv[l].forward_padded(ws.act[l], kProfileLength, ws.w_tap[l], y);
      const auto [scale, shift] = conv_bn[l].eval_affine();
      nn::silu_inplace(y);
      nn::scale_shift_rows(y, scale, shift);
      for (Index b = 0; b < batch; ++b) {
        y.middleCols(b * span, pad).setZero();
        y.middleCols(b * span + pad + kProfileLength, pad).setZero();
      }
    }
    const Matrix& h = ws.act[3];
    // adaptive average pooling straight from the padded layout, flattened
    // channel-major as in nn::flatten
    const Index channels = h.rows();
    const Index width = kProfileLength / kPooledLength;
    ws.flat.resize(channels * kPooledLength, batch);
    for (Index b = 0; b < batch; ++b) {
      for (Index j = 0; j < kPooledLength; ++j) {
        const Vector mean = h.middleCols(b * span + pad + j * width, width).rowwise().mean();
        for (Index c = 0; c < channels; ++c) ws.flat(c * kPooledLength + j, b) = mean(c);
      }
    }
    const Matrix* u = &ws.flat;
    for (int l = 0; l < 3; ++l) {
      Matrix& v = ws.head[l];
      head[l].forward_into(*u, v);
      const auto [scale, shift] = head_bn[l].eval_affine();
      nn::silu_inplace(v);
      nn::scale_shift_rows(v, scale, shift);
      u = &v;
    }
    return out.forward(*u);
  }

  Matrix infer(const Matrix& profiles) const {
    Workspace ws;
    return infer(profiles, ws);
  }

  /// Returns d loss / d profiles (128 x batch).
  Matrix backward(const Matrix& dy, nn::Mode mode, const Cache& c, BathyEncoder& g) const {
    Matrix du = out.backward(c.out_in, dy, g.out);
    for (int l = 2; l >= 0; --l) {
      du = head_bn[l].backward(du, mode, c.head_bn[l], g.head_bn[l]);
      du = nn::silu_backward(c.head_pre[l], du);
      du = head[l].backward(c.head_in[l], du, g.head[l]);
    }
    Matrix dh = nn::adaptive_avg_pool_backward(
        nn::unflatten(du, kConvChannels.back(), kPooledLength), kProfileLength,
        kPooledLength);
    for (int l = 2; l >= 0; --l) {
      dh = conv_bn[l].backward(dh, mode, c.conv_bn[l], g.conv_bn[l]);
      dh = nn::silu_backward(c.pre[l], dh);
      dh = conv[l].col2im(conv[l].backward_cols(c.cols[l], dh, g.conv[l]), kProfileLength);
    }
    return Eigen::Map<const Matrix>(dh.data(), kProfileLength, dh.size() / kProfileLength);
  }

  template <class F>
  void visit(F&& f, const std::string& prefix) {
    for (int l = 0; l < 3; ++l) {
      conv[l].visit(f, prefix + ".conv" + std::to_string(l), ParamKind::Decayed);
      conv_bn[l].visit(f, prefix + ".conv_bn" + std::to_string(l), ParamKind::Decayed);
    }
    for (int l = 0; l < 3; ++l) {
      head[l].visit(f, prefix + ".head" + std::to_string(l), ParamKind::Decayed);
      head_bn[l].visit(f, prefix + ".head_bn" + std::to_string(l), ParamKind::Decayed);
    }
    out.visit(f, prefix + ".out", ParamKind::Decayed);
  }
};

/// Six Linear -> BN -> GELU blocks and a final linear layer.
struct FeatureEncoder {
  std::array<nn::Linear, 6> hidden;
  std::array<nn::BatchNorm, 6> bn;
  nn::Linear out;

  struct Cache {
    std::array<Matrix, 6> in;
    std::array<Matrix, 6> normed;  // BN output, GELU input
    std::array<nn::BatchNorm::Cache, 6> bn;
    Matrix out_in;
  };

  template <class Factory>
  static FeatureEncoder make(int out_dim, Factory&& linear, auto&& bn_factory) {
    FeatureEncoder e;
    int in = kGeometryFeatures;
    for (int l = 0; l < 6; ++l) {
      e.hidden[l] = linear(in, kFeatureWidths[l]);
      e.bn[l] = bn_factory(kFeatureWidths[l]);
      in = kFeatureWidths[l];
    }
    e.out = linear(in, out_dim);
    return e;
  }

  Matrix forward(const Matrix& x, nn::Mode mode, Cache& c) const {
    if (x.rows() != kGeometryFeatures) {
      throw ShapeMismatch("feature encoder expects 7 inputs, got " + std::to_string(x.rows()));
    }
    Matrix h = x;
    for (int l = 0; l < 6; ++l) {
      c.in[l] = h;
      c.normed[l] = bn[l].forward(hidden[l].forward(h), mode, c.bn[l]);
      h = nn::gelu(c.normed[l]);
    }
    c.out_in = h;
    return out.forward(h);
  }

  struct Workspace {
    std::array<Matrix, 6> act;
  };

  Matrix infer(const Matrix& x, Workspace& ws) const {
    if (x.rows() != kGeometryFeatures) throw ShapeMismatch("feature encoder expects 7 inputs");
    const Matrix* u = &x;
    for (int l = 0; l < 6; ++l) {
      Matrix& v = ws.act[l];
      hidden[l].forward_into(*u, v);
      const auto [scale, shift] = bn[l].eval_affine();
      nn::scale_shift_rows(v, scale, shift);
      nn::gelu_inplace(v);
      u = &v;
    }
    return out.forward(*u);
  }

  Matrix infer(const Matrix& x) const {
    Workspace ws;
    return infer(x, ws);
  }

  Matrix backward(const Matrix& dy, nn::Mode mode, const Cache& c, FeatureEncoder& g) const {
    Matrix dh = out.backward(c.out_in, dy, g.out);
    for (int l = 5; l >= 0; --l) {
      dh = nn::gelu_backward(c.normed[l], dh);
      dh = bn[l].backward(dh, mode, c.bn[l], g.bn[l]);
      dh = hidden[l].backward(c.in[l], dh, g.hidden[l]);
    }
    return dh;
  }

  template <class F>
  void visit(F&& f, const std::string& prefix) {
    for (int l = 0; l < 6; ++l) {
      hidden[l].visit(f, prefix + ".linear" + std::to_string(l), ParamKind::Decayed);
      bn[l].visit(f, prefix + ".bn" + std::to_string(l), ParamKind::Decayed);
    }
    out.visit(f, prefix + ".out", ParamKind::Decayed);
  }
};

/// Concatenation [z_g; z_Omega] followed by one affine layer and GELU.
struct Fusion {
  nn::Linear layer;

  struct Cache {
    Matrix concat;
    Matrix pre;
  };

  Matrix forward(const Matrix& z_geom, const Matrix& z_bathy, Cache& c) const {
    if (z_geom.cols() != z_bathy.cols() ||
        z_geom.rows() + z_bathy.rows() != layer.in_features()) {
      throw ShapeMismatch("fusion: embedding sizes do not match the fusion layer");
    }
    c.concat.resize(z_geom.rows() + z_bathy.rows(), z_geom.cols());
    c.concat << z_geom, z_bathy;
    c.pre = layer.forward(c.concat);
    return nn::gelu(c.pre);
  }

  /// Returns gradients for (z_geom, z_bathy) stacked as in the concatenation.
  Matrix backward(const Matrix& dy, const Cache& c, Fusion& g) const {
    return layer.backward(c.concat, nn::gelu_backward(c.pre, dy), g.layer);
  }

  template <class F>
  void visit(F&& f, const std::string& prefix) {
    layer.visit(f, prefix, ParamKind::Decayed);
  }
};

struct EncoderParams {
  EncoderConfig config;
  BathyEncoder bathy;
  FeatureEncoder feature;
  Fusion fusion;

  struct Cache {
    BathyEncoder::Cache bathy;
    FeatureEncoder::Cache feature;
    Fusion::Cache fusion;
    Matrix z_geom;
    Matrix z_bathy;
  };

  /// Seeded uniform(+-sqrt(1/fan_in)) weights, identity normalization layers.
  static EncoderParams random(const EncoderConfig& cfg, Rng& rng) {
    auto lin = [&](int in, int out) { return nn::Linear::random(in, out, rng); };
    auto conv = [&](int in, int out) { return nn::Conv1d::random(in, out, rng); };
    auto bn = [](int n) { return nn::BatchNorm::identity(n); };
    EncoderParams p;
    p.config = cfg;
    p.bathy = BathyEncoder::make(cfg.bathy_dim, lin, conv, bn);
    p.feature = FeatureEncoder::make(cfg.geom_dim, lin, bn);
    p.fusion.layer = lin(cfg.geom_dim + cfg.bathy_dim, cfg.latent_dim);
    return p;
  }

  /// All-zero arrays of matching shapes (gradient accumulators).
  static EncoderParams zeros(const EncoderConfig& cfg) {
    auto lin = [](int in, int out) { return nn::Linear::zeros(in, out); };
    auto conv = [](int in, int out) { return nn::Conv1d::zeros(in, out); };
    auto bn = [](int n) { return nn::BatchNorm::zeros(n); };
    EncoderParams p;
    p.config = cfg;
    p.bathy = BathyEncoder::make(cfg.bathy_dim, lin, conv, bn);
    p.feature = FeatureEncoder::make(cfg.geom_dim, lin, bn);
    p.fusion.layer = lin(cfg.geom_dim + cfg.bathy_dim, cfg.latent_dim);
    return p;
  }

  /// features: 7 x batch, profiles: 128 x batch -> latent_dim x batch.
  Matrix forward(const Matrix& features, const Matrix& profiles, nn::Mode mode,
                 Cache& c) const {
    if (features.cols() != profiles.cols()) {
      throw ShapeMismatch("encoder: feature and profile batch sizes differ");
    }
    c.z_geom = feature.forward(features, mode, c.feature);
    c.z_bathy = bathy.forward(profiles, mode, c.bathy);
    return fusion.forward(c.z_geom, c.z_bathy, c.fusion);
  }

  struct Workspace {
    BathyEncoder::Workspace bathy;
    FeatureEncoder::Workspace feature;
    Matrix concat;
  };

  /// Evaluation-mode embedding without caches.
  Matrix infer(const Matrix& features, const Matrix& profiles, Workspace& ws) const {
    if (features.cols() != profiles.cols()) throw ShapeMismatch("encoder: feature and profile batch sizes differ");
    return fuse(features, bathy.infer(profiles, ws.bathy), ws);
  }

  /// Same, with the bathymetry embedding already computed (d_Omega x N).
  Matrix fuse(const Matrix& features, const Matrix& z_bathy, Workspace& ws) const {
    if (features.cols() != z_bathy.cols()) throw ShapeMismatch("encoder: feature and profile batch sizes differ");
    const Matrix zg = feature.infer(features, ws.feature);
    ws.concat.resize(zg.rows() + z_bathy.rows(), zg.cols());
    ws.concat << zg, z_bathy;
    return nn::gelu(fusion.layer.forward(ws.concat));
  }

  Matrix infer(const Matrix& features, const Matrix& profiles) const {
    Workspace ws;
    return infer(features, profiles, ws);
  }

  struct InputGrads {
    Matrix features;
    Matrix profiles;
  };

  InputGrads backward(const Matrix& d_latent, nn::Mode mode, const Cache& c,
                      EncoderParams& g) const {
    const Matrix dcat = fusion.backward(d_latent, c.fusion, g.fusion);
    const Index dz = c.z_geom.rows();
    InputGrads out;
    out.features = feature.backward(dcat.topRows(dz), mode, c.feature, g.feature);
    out.profiles = bathy.backward(dcat.bottomRows(dcat.rows() - dz), mode, c.bathy, g.bathy);
    return out;
  }

  /// Folds the batch statistics of a train-mode pass into the running averages.
  void update_running_stats(const Cache& c) {
    for (int l = 0; l < 3; ++l) {
      bathy.conv_bn[l].update_running(c.bathy.conv_bn[l]);
      bathy.head_bn[l].update_running(c.bathy.head_bn[l]);
    }
    for (int l = 0; l < 6; ++l) feature.bn[l].update_running(c.feature.bn[l]);
  }

  template <class F>
  void visit(F&& f) {
    bathy.visit(f, "encoder.bathy");
    feature.visit(f, "encoder.feature");
    fusion.visit(f, "encoder.fusion");
  }
};

// Single-sample conveniences (evaluation-mode normalization).

inline Vector bathy_encode(std::span<const double> profile_norm, const EncoderParams& p) {
  if (profile_norm.size() != static_cast<std::size_t>(kProfileLength)) {
    throw ShapeMismatch("bathy_encode: profile must have 128 entries");
  }
  BathyEncoder::Cache c;
  const Matrix x = Eigen::Map<const Matrix>(profile_norm.data(), kProfileLength, 1);
  return p.bathy.forward(x, nn::Mode::Eval, c).col(0);
}

inline Vector feature_encode(const FeatureVector& x, const EncoderParams& p) {
  FeatureEncoder::Cache c;
  const Matrix in = Eigen::Map<const Matrix>(x.data(), kGeometryFeatures, 1);
  return p.feature.forward(in, nn::Mode::Eval, c).col(0);
}

inline Vector fuse(const Vector& z_geom, const Vector& z_bathy, const EncoderParams& p) {
  Fusion::Cache c;
  return p.fusion.forward(z_geom, z_bathy, c).col(0);
}

}  // namespace acoustwin

#endif  // ACOUSTWIN_ENCODERS_HPP
