#ifndef ACOUSTWIN_TRAIN_HPP
#define ACOUSTWIN_TRAIN_HPP

// Mini-batch training loop with AdamW, cosine learning-rate decay, global
// gradient-norm clipping, per-epoch validation and early stopping.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "acoustwin/errors.hpp"
#include "acoustwin/model.hpp"

namespace acoustwin {

struct TrainConfig {
  Index batch_size = 1024;
  double lr_max = 1e-3;
  double lr_min = 1e-6;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  double lambda = 10.0;
  int patience = 30;
  double tolerance = 1e-6;
  int max_epochs = 200;
  std::uint64_t seed = 0;

  void check() const {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (!(lr_min > 0.0 && lr_min < lr_max)) throw ConfigError("need 0 < lr_min < lr_max");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in (0, 1)");
    }
    if (clip_norm <= 0.0) throw ConfigError("clip_norm must be > 0");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  }
};

inline double cosine_lr(int epoch, int t_max, double lr_max, double lr_min) {
  if (t_max <= 0) return lr_max;
  const double t = std::clamp(static_cast<double>(epoch), 0.0, static_cast<double>(t_max));
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t / t_max));
}

inline double cosine_lr(int epoch, const TrainConfig& cfg) {
  return cosine_lr(epoch, cfg.max_epochs, cfg.lr_max, cfg.lr_min);
}

/// Global l2 norm over the trainable slots.
inline double grad_norm(SurrogateParams& grads) {
  double sq = 0.0;
  for (const auto& s : collect_params(grads)) {
    if (is_trainable(s.kind)) sq += s.value.squaredNorm();
  }
  return std::sqrt(sq);
}

/// Rescales all gradients to norm gamma when the global norm exceeds it.
/// Returns the norm before clipping.
inline double clip_grad_norm(SurrogateParams& grads, double gamma) {
  const double norm = grad_norm(grads);
  if (norm > gamma && norm > 0.0) {
    const double scale = gamma / norm;
    for (auto& s : collect_params(grads)) {
      if (is_trainable(s.kind)) s.value *= scale;
    }
  }
  return norm;
}

/// First and second moment accumulators, one array per parameter slot.
struct AdamState {
  SurrogateParams m1;
  SurrogateParams m2;
  long step = 0;

  static AdamState for_params(const SurrogateParams& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

/// Decoupled-weight-decay Adam step. Decay applies only to slots marked
/// ParamKind::Decayed (encoder weights).
inline void optimizer_step(SurrogateParams& params, SurrogateParams& grads, AdamState& state,
                           double lr, const TrainConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto p = collect_params(params);
  auto g = collect_params(grads);
  auto m = collect_params(state.m1);
  auto v = collect_params(state.m2);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw ShapeMismatch("optimizer_step: parameter layout mismatch");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!is_trainable(p[i].kind)) continue;
    auto& w = p[i].value;
    const auto& gi = g[i].value;
    if (w.rows() != gi.rows() || w.cols() != gi.cols()) {
      throw ShapeMismatch("optimizer_step: shape mismatch for " + p[i].name);
    }
    m[i].value = cfg.beta1 * m[i].value + (1.0 - cfg.beta1) * gi;
    v[i].value = cfg.beta2 * v[i].value + (1.0 - cfg.beta2) * gi.cwiseAbs2();
    const Matrix update = (m[i].value.array() / bc1) /
                          ((v[i].value.array() / bc2).sqrt() + cfg.adam_eps);
    if (p[i].kind == ParamKind::Decayed && cfg.weight_decay > 0.0) {
      w *= 1.0 - lr * cfg.weight_decay;
    }
    w -= lr * update;
  }
}

struct Metrics {
  double val_neg_elbo = 0.0;  // no hinge
  double mse = 0.0;
  double rmspe = 0.0;  // percent
  double mean_signed_error = 0.0;
  double residual_std = 0.0;
  double coverage_2sigma = 0.0;
  Index count = 0;
};

inline nlohmann::ordered_json to_json(const Metrics& m) {
  return {{"count", m.count},
          {"val_neg_elbo", m.val_neg_elbo},
          {"mse", m.mse},
          {"rmspe", m.rmspe},
          {"mean_signed_error", m.mean_signed_error},
          {"residual_std", m.residual_std},
          {"coverage_2sigma", m.coverage_2sigma}};
}

/// Metrics from clamped mean predictions and their observation-level
/// predictive variances.
inline Metrics metrics_from_predictions(const Vector& pred, const Vector& pred_var,
                                        const Vector& target) {
  const Index n = target.size();
  if (n == 0 || pred.size() != n || pred_var.size() != n) {
    throw ShapeMismatch("metrics: prediction/target size mismatch");
  }
  Metrics m;
  m.count = n;
  const Vector err = pred - target;
  m.mse = err.squaredNorm() / n;
  m.mean_signed_error = err.mean();
  m.residual_std = std::sqrt((err.array() - m.mean_signed_error).square().sum() / n);
  m.rmspe = 100.0 * std::sqrt((err.array() / (target.array() + 1e-6)).square().sum() / n);
  Index inside = 0;
  for (Index i = 0; i < n; ++i) {
    if (std::abs(err(i)) <= 2.0 * std::sqrt(pred_var(i))) ++inside;
  }
  m.coverage_2sigma = static_cast<double>(inside) / n;
  return m;
}

/// Validation pass: means clamped at TL_max; the negative ELBO uses the
/// clamped residual means over the whole set (N = B = |set|).
inline Metrics validate(const SurrogateModel& model, const PreparedSet& set) {
  if (set.size() == 0 || set.target.size() != set.size()) {
    throw ShapeMismatch("validate: need a nonempty set with targets");
  }
  const SurrogatePredictor predictor(model);
  const PredictiveBatch pb = predictor.predict(set, true);
  const Vector phys = physics_mean(model.params, set);
  const double noise = model.params.noise_var();
  double nll = 0.0;
  for (Index i = 0; i < set.size(); ++i) {
    nll -= expected_loglik(set.target(i) - phys(i), pb.mean(i) - phys(i), pb.variance(i), noise);
  }
  const Vector obs_var = pb.variance.array() + noise;
  Metrics m = metrics_from_predictions(pb.mean, obs_var, set.target);
  m.val_neg_elbo = nll + kl_qp(model.params.variational(), model.params.hyper());
  return m;
}

/// Seeds the inducing inputs with the train-mode embeddings of M distinct
/// training rows and the variational mean with their residual targets.
inline void initialize_variational(SurrogateModel& model, const PreparedSet& train, Rng& rng) {
  const Index m = model.config.num_inducing;
  if (train.size() < std::max<Index>(m, 2)) {
    throw ConfigError("training set smaller than the number of inducing points");
  }
  std::vector<Index> idx(static_cast<std::size_t>(train.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  const PreparedSet seeds = train.gather(idx);
  const nn::Mode mode = m >= 2 ? nn::Mode::Train : nn::Mode::Eval;
  model.params.inducing = embed(model, seeds, mode);
  model.params.var_mean = seeds.target - physics_mean(model.params, seeds);
  model.params.raw_s_factor.setZero();
  model.params.raw_s_factor.diagonal().setConstant(softplus_inverse(1.0));
}

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;  // mean total loss over accepted batches
  double val_neg_elbo = 0.0;
  double val_mse = 0.0;
  double val_rmspe = 0.0;
  int patience = 0;
  int failed_batches = 0;
  bool improved = false;
};

inline nlohmann::ordered_json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"lr", r.lr},
          {"train_loss", r.train_loss},
          {"val_neg_elbo", r.val_neg_elbo},
          {"val_mse", r.val_mse},
          {"val_rmspe", r.val_rmspe},
          {"patience", r.patience},
          {"failed_batches", r.failed_batches},
          {"improved", r.improved}};
}

struct TrainState {
  AdamState adam;
  int epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stagnant = 0;
  SurrogateParams best_params;
};

struct TrainResult {
  SurrogateModel model;  // best checkpoint restored
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  Metrics best_metrics;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs the training loop on `model` (already created with its ranges).
/// Inducing points are re-seeded from the training set first unless
/// `init_variational` is false.
inline TrainResult train(SurrogateModel model, const PreparedSet& train_set,
                         const PreparedSet& val_set, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}, bool init_variational = true) {
  cfg.check();
  if (train_set.size() < 2 || val_set.size() == 0) {
    throw ConfigError("train needs >= 2 training rows and a nonempty validation split");
  }
  Rng rng(cfg.seed);
  if (init_variational) initialize_variational(model, train_set, rng);

  TrainState st;
  st.adam = AdamState::for_params(model.params);
  st.best_params = model.params;
  TrainResult result;

  LossOptions opt;
  opt.total_count = static_cast<double>(train_set.size());
  opt.lambda = cfg.lambda;
  opt.tl_max = model.config.tl_max;
  opt.mode = nn::Mode::Train;

  std::vector<Index> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const Index n = train_set.size();
  const Index bsz = std::min(cfg.batch_size, n);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg);
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    double loss_sum = 0.0;
    int accepted = 0;
    int attempted = 0;
    for (Index start = 0; start < n; start += bsz) {
      const Index count = std::min(bsz, n - start);
      if (count < 2) break;  // batch statistics need two rows
      ++attempted;
      const PreparedSet batch =
          train_set.gather(std::span<const Index>(order.data() + start, static_cast<std::size_t>(count)));
      GradientResult g;
      try {
        g = gradients(model, batch, opt);
      } catch (const FailureEscalation&) {
        ++rec.failed_batches;
        continue;
      }
      if (!std::isfinite(g.loss.total) || !std::isfinite(grad_norm(g.grad))) {
        ++rec.failed_batches;
        continue;
      }
      clip_grad_norm(g.grad, cfg.clip_norm);
      optimizer_step(model.params, g.grad, st.adam, lr, cfg);
      if (model.config.use_encoders) model.params.encoders.update_running_stats(g.cache);
      loss_sum += g.loss.total;
      ++accepted;
    }
    if (accepted == 0) {
      throw FailureEscalation("every mini-batch of epoch " + std::to_string(epoch + 1) +
                              " failed (" + std::to_string(attempted) + " attempted)");
    }
    rec.train_loss = loss_sum / accepted;

    Metrics vm;
    bool val_ok = true;
    try {
      vm = validate(model, val_set);
    } catch (const FailureEscalation&) {
      val_ok = false;
    }
    val_ok = val_ok && std::isfinite(vm.val_neg_elbo);
    rec.val_neg_elbo = val_ok ? vm.val_neg_elbo : std::numeric_limits<double>::infinity();
    rec.val_mse = vm.mse;
    rec.val_rmspe = vm.rmspe;
    if (val_ok && vm.val_neg_elbo < st.best_loss - cfg.tolerance) {
      st.best_loss = vm.val_neg_elbo;
      st.best_params = model.params;
      st.best_epoch = rec.epoch;
      st.stagnant = 0;
      rec.improved = true;
      result.best_metrics = vm;
    } else {
      ++st.stagnant;
    }
    rec.patience = st.stagnant;
    st.epoch = rec.epoch;
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (st.stagnant >= cfg.patience) break;
  }
  if (st.best_epoch == 0) throw FailureEscalation("validation never produced a finite loss");
  model.params = st.best_params;
  result.model = std::move(model);
  result.best_epoch = st.best_epoch;
  return result;
}

}  // namespace acoustwin

#endif  // ACOUSTWIN_TRAIN_HPP
