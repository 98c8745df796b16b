#ifndef ACOUSTWIN_MODEL_HPP
#define ACOUSTWIN_MODEL_HPP

// Physics mean + neural encoders + SVGP residual head, the training loss
// with its exact gradients, and the versioned model file.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "acoustwin/encoders.hpp"
#include "acoustwin/errors.hpp"
#include "acoustwin/geo.hpp"
#include "acoustwin/params.hpp"
#include "acoustwin/physics.hpp"
#include "acoustwin/svgp.hpp"

namespace acoustwin {

inline constexpr int kModelFormatVersion = 1;
inline constexpr double kNoiseFloor = 1e-6;

enum class Ablation { Full, ZeroMean, PhysicsMeanOnly };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::ZeroMean: return "zero-mean";
    case Ablation::PhysicsMeanOnly: return "physics-mean-only";
  }
  return "full";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "zero-mean") return Ablation::ZeroMean;
  if (s == "physics-mean-only") return Ablation::PhysicsMeanOnly;
  throw ConfigError("unknown ablation '" + s + "' (full|zero-mean|physics-mean-only)");
}

struct ModelConfig {
  EncoderConfig encoder;
  int num_inducing = 128;
  double tl_max = 200.0;
  // Without encoders the GP works directly on the 7 normalized geometry features.
  bool use_encoders = true;
  // When false, A = B = 0 and both are frozen.
  bool physics_mean = true;
  double earth_radius_km = kEarthRadiusKm;

  Index latent_dim() const { return use_encoders ? encoder.latent_dim : kGeometryFeatures; }

  static ModelConfig for_ablation(Ablation a) { return for_ablation(a, ModelConfig()); }

  static ModelConfig for_ablation(Ablation a, ModelConfig base) {
    base.use_encoders = a == Ablation::Full;
    base.physics_mean = a != Ablation::ZeroMean;
    return base;
  }

  Ablation ablation() const {
    if (use_encoders && physics_mean) return Ablation::Full;
    return physics_mean ? Ablation::PhysicsMeanOnly : Ablation::ZeroMean;
  }
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string dataset_hash;
  std::string created = "1970-01-01T00:00:00Z";
};

/// Every trainable and serialized array. Positive quantities are stored
/// unconstrained and mapped through softplus.
struct SurrogateParams {
  Vector a;  // size 1
  Vector b;  // size 1
  EncoderParams encoders;
  bool has_encoders = true;
  bool physics_trainable = true;
  Vector raw_outputscale;  // size 1
  Vector raw_len_matern;
  Vector raw_len_rq;
  Vector raw_alpha;  // size 1
  Matrix inducing;   // M x d
  Vector var_mean;   // m
  Matrix raw_s_factor;  // lower triangle; diagonal through softplus
  Vector raw_noise;     // size 1

  template <class F>
  void visit(F&& f) {
    const ParamKind phys = physics_trainable ? ParamKind::Plain : ParamKind::Frozen;
    f("A", a, phys);
    f("B", b, phys);
    if (has_encoders) encoders.visit(f);
    f("kernel.raw_outputscale", raw_outputscale, ParamKind::Plain);
    f("kernel.raw_len_matern", raw_len_matern, ParamKind::Plain);
    f("kernel.raw_len_rq", raw_len_rq, ParamKind::Plain);
    f("kernel.raw_alpha", raw_alpha, ParamKind::Plain);
    f("inducing.Z", inducing, ParamKind::Plain);
    f("variational.m", var_mean, ParamKind::Plain);
    f("variational.S_factor", raw_s_factor, ParamKind::Plain);
    f("noise", raw_noise, ParamKind::Plain);
  }

  /// Zero arrays with the same shapes.
  SurrogateParams zeros_like() const {
    SurrogateParams z = *this;
    auto slots = collect_params(z);
    for (auto& s : slots) s.value.setZero();
    return z;
  }

  PhysicsMeanParams physics() const { return {a(0), b(0)}; }

  KernelHyper hyper() const {
    KernelHyper h;
    h.outputscale = softplus(raw_outputscale(0));
    h.len_matern = raw_len_matern.unaryExpr([](double x) { return softplus(x); });
    h.len_rq = raw_len_rq.unaryExpr([](double x) { return softplus(x); });
    h.alpha = softplus(raw_alpha(0));
    return h;
  }

  Matrix s_factor() const {
    Matrix l = raw_s_factor.triangularView<Eigen::StrictlyLower>();
    for (Index i = 0; i < l.rows(); ++i) l(i, i) = softplus(raw_s_factor(i, i));
    return l;
  }

  VariationalState variational() const { return {inducing, var_mean, s_factor()}; }

  double noise_var() const { return softplus(raw_noise(0)) + kNoiseFloor; }
};

struct SurrogateModel {
  ModelConfig config;
  NormRanges ranges;
  Provenance provenance;
  SurrogateParams params;

  /// Freshly initialized parameters. Inducing locations start at zero; the
  /// trainer re-seeds them from encoded training samples.
  static SurrogateModel create(const ModelConfig& cfg, const NormRanges& ranges,
                               std::uint64_t seed) {
    if (!ranges.valid()) throw ConfigError("invalid normalization ranges");
    if (cfg.num_inducing < 1) throw ConfigError("num_inducing must be >= 1");
    SurrogateModel m;
    m.config = cfg;
    m.ranges = ranges;
    m.provenance.seed = seed;
    Rng rng(seed);
    SurrogateParams& p = m.params;
    p.physics_trainable = cfg.physics_mean;
    p.a = Vector::Constant(1, cfg.physics_mean ? 20.0 : 0.0);
    p.b = Vector::Constant(1, cfg.physics_mean ? 1.0 : 0.0);
    p.has_encoders = cfg.use_encoders;
    if (cfg.use_encoders) p.encoders = EncoderParams::random(cfg.encoder, rng);
    const Index d = cfg.latent_dim();
    const Index mcount = cfg.num_inducing;
    p.raw_outputscale = Vector::Constant(1, softplus_inverse(25.0));
    p.raw_len_matern = Vector::Constant(d, softplus_inverse(1.0));
    p.raw_len_rq = Vector::Constant(d, softplus_inverse(1.0));
    p.raw_alpha = Vector::Constant(1, softplus_inverse(1.0));
    p.inducing = Matrix::Zero(mcount, d);
    p.var_mean = Vector::Zero(mcount);
    p.raw_s_factor = Matrix::Zero(mcount, mcount);
    p.raw_s_factor.diagonal().setConstant(softplus_inverse(1.0));
    p.raw_noise = Vector::Constant(1, softplus_inverse(1.0 - kNoiseFloor));
    return m;
  }
};

/// One row of the training data: the eight model inputs plus target TL.
struct TrainingSample {
  GeoPoint src;
  GeoPoint rcv;
  double f_hz = 0.0;
  BathyProfile bathy;
  double tl_db = 0.0;
};

/// Column-batched model inputs with the geometry-only physics terms
/// precomputed.
struct PreparedSet {
  Matrix features;   // 7 x N
  Matrix profiles;   // 128 x N, normalized
  Vector log10_range;
  Vector absorption;  // thorp_alpha(f_khz) * R_km
  Vector target;      // tl_db, may be empty for queries

  Index size() const { return features.cols(); }

  PreparedSet gather(std::span<const Index> idx) const {
    PreparedSet out;
    const Index n = static_cast<Index>(idx.size());
    out.features.resize(features.rows(), n);
    out.profiles.resize(profiles.rows(), n);
    out.log10_range.resize(n);
    out.absorption.resize(n);
    if (target.size() > 0) out.target.resize(n);
    for (Index j = 0; j < n; ++j) {
      const Index i = idx[j];
      out.features.col(j) = features.col(i);
      out.profiles.col(j) = profiles.col(i);
      out.log10_range(j) = log10_range(i);
      out.absorption(j) = absorption(i);
      if (target.size() > 0) out.target(j) = target(i);
    }
    return out;
  }

  PreparedSet slice(Index start, Index count) const {
    std::vector<Index> idx(static_cast<std::size_t>(count));
    for (Index j = 0; j < count; ++j) idx[j] = start + j;
    return gather(idx);
  }
};

/// Fills column j of a prepared set; throws OutOfRange outside the model's
/// normalization ranges.
inline void prepare_into(PreparedSet& set, Index j, const GeoPoint& src, const GeoPoint& rcv,
                         double f_hz, const BathyProfile& bathy, const NormRanges& ranges,
                         double radius_km) {
  const FeatureVector x = normalize_features(src, rcv, f_hz, ranges);
  for (int k = 0; k < kGeometryFeatures; ++k) set.features(k, j) = x[k];
  const auto norm = bathy.normalized(ranges.bathy);
  for (int k = 0; k < kProfileLength; ++k) set.profiles(k, j) = norm[k];
  const double r = slant_range_m(src, rcv, radius_km);
  set.log10_range(j) = std::log10(r);
  set.absorption(j) = thorp_alpha(f_hz / 1000.0) * r / 1000.0;
}

inline PreparedSet allocate_prepared(Index n, bool with_target) {
  PreparedSet set;
  set.features.resize(kGeometryFeatures, n);
  set.profiles.resize(kProfileLength, n);
  set.log10_range.resize(n);
  set.absorption.resize(n);
  if (with_target) set.target.resize(n);
  return set;
}

inline PreparedSet prepare(std::span<const TrainingSample> samples, const NormRanges& ranges,
                           double radius_km = kEarthRadiusKm) {
  PreparedSet set = allocate_prepared(static_cast<Index>(samples.size()), true);
  for (Index j = 0; j < set.size(); ++j) {
    const TrainingSample& s = samples[j];
    prepare_into(set, j, s.src, s.rcv, s.f_hz, s.bathy, ranges, radius_km);
    set.target(j) = s.tl_db;
  }
  return set;
}

inline Vector physics_mean(const SurrogateParams& p, const PreparedSet& set) {
  return p.a(0) * set.log10_range + p.b(0) * set.absorption;
}

/// Latent embeddings, one row per sample.
inline Matrix embed(const SurrogateModel& model, const PreparedSet& set,
                    nn::Mode mode = nn::Mode::Eval, EncoderParams::Cache* cache = nullptr) {
  if (!model.config.use_encoders) return set.features.transpose();
  EncoderParams::Cache local;
  EncoderParams::Cache& c = cache ? *cache : local;
  return model.params.encoders.forward(set.features, set.profiles, mode, c).transpose();
}

struct PredictiveTL {
  double mean = 0.0;
  double variance = 0.0;
  bool clamped = false;
};

struct PredictiveBatch {
  Vector mean;
  Vector variance;
  std::vector<bool> clamped;
};

/// Frozen model with cached K_ZZ factorization for repeated prediction.
class SurrogatePredictor {
 public:
  explicit SurrogatePredictor(const SurrogateModel& model)
      : model_(&model), gp_(model.params.variational(), model.params.hyper()) {}

  PredictiveBatch predict(const PreparedSet& set, bool clamp, Index chunk = 64) const {
    PredictiveBatch out;
    const Index n = set.size();
    out.mean.resize(n);
    out.variance.resize(n);
    out.clamped.assign(static_cast<std::size_t>(n), false);
    EncoderParams::Workspace ws;
    const bool encode = model_->config.use_encoders;
    // Grids repeat each path at several receiver depths; encode each profile once.
    std::vector<Index> slot;
    Matrix z_unique;
    if (encode) z_unique = unique_bathy_embeddings(set.profiles, chunk, ws, slot);
    Matrix z_bathy;
    for (Index start = 0; start < n; start += chunk) {
      const Index count = std::min(chunk, n - start);
      const PreparedSet part = count == n ? set : set.slice(start, count);
      Matrix latent;
      if (encode) {
        z_bathy.resize(z_unique.rows(), count);
        for (Index j = 0; j < count; ++j) z_bathy.col(j) = z_unique.col(slot[static_cast<std::size_t>(start + j)]);
        latent = model_->params.encoders.fuse(part.features, z_bathy, ws).transpose();
      } else {
        latent = part.features.transpose();
      }
      const Marginals gp = gp_.marginals(latent);
      const Vector phys = physics_mean(model_->params, part);
      out.mean.segment(start, count) = phys + gp.mean;
      out.variance.segment(start, count) = gp.var;
    }
    if (clamp) {
      for (Index i = 0; i < n; ++i) {
        if (out.mean(i) > model_->config.tl_max) {
          out.mean(i) = model_->config.tl_max;
          out.clamped[static_cast<std::size_t>(i)] = true;
        }
      }
    }
    return out;
  }

  const SurrogateModel& model() const { return *model_; }
  const SvgpPredictor& gp() const { return gp_; }

 private:
  // Bathymetry embeddings of the distinct profile columns; slot[i] indexes column i's embedding.
  Matrix unique_bathy_embeddings(const Matrix& profiles, Index chunk, EncoderParams::Workspace& ws,
                                 std::vector<Index>& slot) const {
    const Index n = profiles.cols();
    const auto bytes = static_cast<std::size_t>(profiles.rows()) * sizeof(double);
    auto column = [&](Index i) { return std::string_view(reinterpret_cast<const char*>(profiles.col(i).data()), bytes); };
    std::unordered_map<std::string_view, Index> seen;
    std::vector<Index> first;
    slot.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const auto [it, inserted] = seen.try_emplace(column(i), static_cast<Index>(first.size()));
      if (inserted) first.push_back(i);
      slot[static_cast<std::size_t>(i)] = it->second;
    }
    const BathyEncoder& enc = model_->params.encoders.bathy;
    const Index u = static_cast<Index>(first.size());
    Matrix z;
    Matrix batch(profiles.rows(), std::min(chunk, u));
    for (Index start = 0; start < u; start += chunk) {
      const Index count = std::min(chunk, u - start);
      batch.resize(profiles.rows(), count);
      for (Index j = 0; j < count; ++j) batch.col(j) = profiles.col(first[static_cast<std::size_t>(start + j)]);
      const Matrix zb = enc.infer(batch, ws.bathy);
      if (z.size() == 0) z.resize(zb.rows(), u);
      z.middleCols(start, count) = zb;
    }
    return z;
  }

  const SurrogateModel* model_;
  SvgpPredictor gp_;
};

inline PredictiveTL predict(const SurrogateModel& model, const GeoPoint& src, const GeoPoint& rcv,
                            double f_hz, const BathyProfile& bathy, bool clamp) {
  PreparedSet set = allocate_prepared(1, false);
  prepare_into(set, 0, src, rcv, f_hz, bathy, model.ranges, model.config.earth_radius_km);
  const PredictiveBatch b = SurrogatePredictor(model).predict(set, clamp);
  return {b.mean(0), b.variance(0), b.clamped[0]};
}

inline double residual_target(const SurrogateModel& model, const TrainingSample& s) {
  const double r = slant_range_m(s.src, s.rcv, model.config.earth_radius_km);
  return s.tl_db - physics_mean_tl(r, s.f_hz / 1000.0, model.params.physics());
}

struct LossParts {
  double total = 0.0;
  double elbo = 0.0;   // negative ELBO
  double hinge = 0.0;  // unweighted mean squared excess over TL_max
};

struct LossOptions {
  double total_count = 0.0;  // N; defaults to the batch size when <= 0
  double lambda = 10.0;
  double tl_max = 200.0;
  nn::Mode mode = nn::Mode::Eval;
};

struct GradientResult {
  LossParts loss;
  SurrogateParams grad;
  EncoderParams::Cache cache;  // batch statistics for running-average updates
};

namespace detail {

struct Forward {
  LossParts loss;
  Vector phys;
  Vector resid;
  Vector excess;
  double scale = 1.0;  // N / B
  double noise = 1.0;
};

inline Forward loss_terms(const SurrogateParams& p, const PreparedSet& batch,
                          const SvgpBatch& gp, const LossOptions& opt) {
  Forward f;
  const Index b = batch.size();
  const double n = opt.total_count > 0.0 ? opt.total_count : static_cast<double>(b);
  f.scale = n / static_cast<double>(b);
  f.noise = p.noise_var();
  f.phys = physics_mean(p, batch);
  f.resid = batch.target - f.phys;
  double nll = 0.0;
  for (Index i = 0; i < b; ++i) nll -= expected_loglik(f.resid(i), gp.mean(i), gp.var(i), f.noise);
  f.loss.elbo = f.scale * nll + gp.kl;
  f.excess = (f.phys + gp.mean).array() - opt.tl_max;
  f.excess = f.excess.cwiseMax(0.0);
  f.loss.hinge = f.excess.squaredNorm() / static_cast<double>(b);
  f.loss.total = f.loss.elbo + opt.lambda * f.loss.hinge;
  return f;
}

}  // namespace detail

/// total = negative ELBO on residual targets + lambda * mean squared
/// excess of the unclamped TL prediction over TL_max.
inline LossParts loss(const SurrogateModel& model, const PreparedSet& batch,
                      const LossOptions& opt) {
  if (batch.size() == 0 || batch.target.size() != batch.size()) {
    throw ShapeMismatch("loss: batch must be nonempty with targets");
  }
  const SurrogateParams& p = model.params;
  const Matrix latents = embed(model, batch, opt.mode);
  const SvgpBatch gp(latents, p.variational(), p.hyper());
  return detail::loss_terms(p, batch, gp, opt).loss;
}

/// Exact first derivatives of the total loss with respect to every stored
/// array (unconstrained forms). Frozen arrays and buffers get zero gradient.
inline GradientResult gradients(const SurrogateModel& model, const PreparedSet& batch,
                                const LossOptions& opt) {
  if (batch.size() == 0 || batch.target.size() != batch.size()) {
    throw ShapeMismatch("gradients: batch must be nonempty with targets");
  }
  const SurrogateParams& p = model.params;
  GradientResult out;
  const Matrix latents = embed(model, batch, opt.mode, &out.cache);
  const SvgpBatch gp(latents, p.variational(), p.hyper());
  const detail::Forward f = detail::loss_terms(p, batch, gp, opt);
  out.loss = f.loss;

  const Index b = batch.size();
  const Vector err = gp.mean - f.resid;  // mu - r
  const Vector hinge_grad = (2.0 * opt.lambda / static_cast<double>(b)) * f.excess;
  const Vector dmean = (f.scale / f.noise) * err + hinge_grad;
  const Vector dvar = Vector::Constant(b, f.scale / (2.0 * f.noise));
  // d total / d phys: through r (elbo) and through TL_hat (hinge).
  const Vector dphys = (f.scale / f.noise) * err + hinge_grad;

  out.grad = p.zeros_like();
  SurrogateParams& g = out.grad;
  g.a(0) = dphys.dot(batch.log10_range);
  g.b(0) = dphys.dot(batch.absorption);

  const SvgpGrads sg = gp.backward(dmean, dvar, 1.0);
  const KernelHyper h = p.hyper();
  g.raw_outputscale(0) = sg.hyper.outputscale * softplus_grad(p.raw_outputscale(0));
  for (Index d = 0; d < h.dim(); ++d) {
    g.raw_len_matern(d) = sg.hyper.len_matern(d) * softplus_grad(p.raw_len_matern(d));
    g.raw_len_rq(d) = sg.hyper.len_rq(d) * softplus_grad(p.raw_len_rq(d));
  }
  g.raw_alpha(0) = sg.hyper.alpha * softplus_grad(p.raw_alpha(0));
  g.inducing = sg.inducing;
  g.var_mean = sg.mean;
  g.raw_s_factor = sg.s_factor;
  for (Index i = 0; i < g.raw_s_factor.rows(); ++i) {
    g.raw_s_factor(i, i) *= softplus_grad(p.raw_s_factor(i, i));
  }
  double dnoise = 0.0;
  for (Index i = 0; i < b; ++i) {
    const double e = f.resid(i) - gp.mean(i);
    dnoise += 0.5 / f.noise - (e * e + gp.var(i)) / (2.0 * f.noise * f.noise);
  }
  g.raw_noise(0) = f.scale * dnoise * softplus_grad(p.raw_noise(0));

  if (model.config.use_encoders) {
    p.encoders.backward(sg.latents.transpose(), opt.mode, out.cache, g.encoders);
  }
  for (auto& slot : collect_params(g)) {
    if (!is_trainable(slot.kind)) slot.value.setZero();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file: versioned JSON with a header and named row-major arrays.

inline nlohmann::ordered_json to_json(const NormRanges& r) {
  auto iv = [](const Interval& i) { return nlohmann::ordered_json::array({i.min, i.max}); };
  return {{"src_depth", iv(r.src_depth)},
          {"rcv_depth", iv(r.rcv_depth)},
          {"bathy", iv(r.bathy)},
          {"freq_hz", iv(r.freq_hz)}};
}

inline NormRanges norm_ranges_from_json(const nlohmann::ordered_json& j) {
  auto iv = [&](const char* key) {
    const auto& a = j.at(key);
    return Interval{a.at(0).get<double>(), a.at(1).get<double>()};
  };
  NormRanges r{iv("src_depth"), iv("rcv_depth"), iv("bathy"), iv("freq_hz")};
  if (!r.valid()) throw FormatError("normalization ranges must satisfy min < max");
  return r;
}

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  return {{"bathy_dim", c.encoder.bathy_dim},
          {"geom_dim", c.encoder.geom_dim},
          {"latent_dim", c.encoder.latent_dim},
          {"num_inducing", c.num_inducing},
          {"tl_max", c.tl_max},
          {"use_encoders", c.use_encoders},
          {"physics_mean", c.physics_mean},
          {"earth_radius_km", c.earth_radius_km}};
}

inline ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig c;
  c.encoder.bathy_dim = j.at("bathy_dim").get<int>();
  c.encoder.geom_dim = j.at("geom_dim").get<int>();
  c.encoder.latent_dim = j.at("latent_dim").get<int>();
  c.num_inducing = j.at("num_inducing").get<int>();
  c.tl_max = j.at("tl_max").get<double>();
  c.use_encoders = j.at("use_encoders").get<bool>();
  c.physics_mean = j.at("physics_mean").get<bool>();
  c.earth_radius_km = j.at("earth_radius_km").get<double>();
  return c;
}

inline std::string serialize_model(const SurrogateModel& model) {
  nlohmann::ordered_json doc;
  doc["format"] = "acoustwin-model";
  doc["header"] = {{"format_version", kModelFormatVersion},
                   {"created", model.provenance.created},
                   {"seed", model.provenance.seed},
                   {"dataset_hash", model.provenance.dataset_hash},
                   {"ablation", to_string(model.config.ablation())},
                   {"config", to_json(model.config)},
                   {"norm_ranges", to_json(model.ranges)}};
  nlohmann::ordered_json arrays = nlohmann::ordered_json::object();
  SurrogateParams params = model.params;
  for (const auto& slot : collect_params(params)) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(slot.value.size()));
    for (Index r = 0; r < slot.value.rows(); ++r) {
      for (Index c = 0; c < slot.value.cols(); ++c) {
        if (!std::isfinite(slot.value(r, c))) {
          throw FormatError("non-finite value in " + slot.name);
        }
        data.push_back(slot.value(r, c));
      }
    }
    arrays[slot.name] = {{"shape", {slot.value.rows(), slot.value.cols()}}, {"data", data}};
  }
  doc["arrays"] = std::move(arrays);
  return doc.dump(1) + "\n";
}

inline SurrogateModel deserialize_model(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != "acoustwin-model") {
      throw FormatError("not an acoustwin model file");
    }
    const auto& header = doc.at("header");
    const int version = header.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw VersionMismatch("model format version " + std::to_string(version) +
                            " unsupported (expected " + std::to_string(kModelFormatVersion) +
                            ")");
    }
    SurrogateModel model = SurrogateModel::create(model_config_from_json(header.at("config")),
                                                  norm_ranges_from_json(header.at("norm_ranges")),
                                                  header.at("seed").get<std::uint64_t>());
    model.provenance.created = header.at("created").get<std::string>();
    model.provenance.dataset_hash = header.at("dataset_hash").get<std::string>();
    const auto& arrays = doc.at("arrays");
    for (auto& slot : collect_params(model.params)) {
      if (!arrays.contains(slot.name)) throw FormatError("missing array " + slot.name);
      const auto& entry = arrays.at(slot.name);
      const auto shape = entry.at("shape").get<std::vector<Index>>();
      const auto& data = entry.at("data");
      if (shape.size() != 2 || shape[0] != slot.value.rows() || shape[1] != slot.value.cols() ||
          data.size() != static_cast<std::size_t>(slot.value.size())) {
        throw FormatError("shape mismatch for array " + slot.name);
      }
      std::size_t k = 0;
      for (Index r = 0; r < shape[0]; ++r) {
        for (Index c = 0; c < shape[1]; ++c) slot.value(r, c) = data[k++].get<double>();
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model header: ") + e.what());
  }
}

inline void save(const SurrogateModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path);
  out << serialize_model(model);
  if (!out) throw IoError("failed writing model file " + path);
}

inline SurrogateModel load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace acoustwin

#endif  // ACOUSTWIN_MODEL_HPP
