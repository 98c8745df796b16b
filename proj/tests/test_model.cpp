#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "acoustwin/model.hpp"

namespace acoustwin {
namespace {

NormRanges ranges() { return {{0.0, 30.0}, {0.0, 120.0}, {10.0, 400.0}, {12.5, 8000.0}}; }

std::vector<TrainingSample> random_samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lat(48.5, 49.5), lon(-125.0, -123.0), sd(2, 20), rd(5, 100),
      logf(std::log(12.5), std::log(8000.0)), dep(20, 380), tl(40, 120);
  std::vector<TrainingSample> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.src = {lat(rng), lon(rng), sd(rng)};
    s.rcv = {lat(rng), lon(rng), rd(rng)};
    s.f_hz = std::exp(logf(rng));
    for (auto& d : s.bathy.depth_m) d = dep(rng);
    s.tl_db = tl(rng);
  }
  return out;
}

// Small model with every group perturbed away from its initial value.
SurrogateModel tiny_model(std::uint64_t seed, Ablation ab = Ablation::Full) {
  ModelConfig cfg = ModelConfig::for_ablation(ab);
  cfg.encoder = {4, 4, 4};
  cfg.num_inducing = 4;
  SurrogateModel m = SurrogateModel::create(cfg, ranges(), seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.5, 1.5);
  SurrogateParams& p = m.params;
  const Index d = cfg.latent_dim();
  for (Index i = 0; i < p.inducing.size(); ++i) p.inducing.data()[i] = u(rng);
  for (Index i = 0; i < p.var_mean.size(); ++i) p.var_mean(i) = 3.0 * u(rng);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < i; ++j) p.raw_s_factor(i, j) = 0.2 * u(rng);
    p.raw_s_factor(i, i) = u(rng);
  }
  for (Index i = 0; i < d; ++i) {
    p.raw_len_matern(i) = softplus_inverse(pos(rng));
    p.raw_len_rq(i) = softplus_inverse(pos(rng));
  }
  p.raw_alpha(0) = softplus_inverse(pos(rng));
  p.raw_outputscale(0) = softplus_inverse(4.0 * pos(rng));
  p.raw_noise(0) = softplus_inverse(2.0 * pos(rng));
  if (cfg.use_encoders) {
    for (auto& slot : collect_params(p.encoders)) {
      if (slot.name.find("running_var") != std::string::npos || slot.name.find("gamma") != std::string::npos) {
        for (Index i = 0; i < slot.value.size(); ++i) slot.value.data()[i] = pos(rng);
      } else if (slot.name.find("running_mean") != std::string::npos || slot.name.find("beta") != std::string::npos) {
        for (Index i = 0; i < slot.value.size(); ++i) slot.value.data()[i] = 0.1 * u(rng);
      }
    }
  }
  return m;
}

TEST(Predict, ZeroVariationalMeanGivesPhysicsMean) {
  SurrogateModel m = tiny_model(1);
  m.params.var_mean.setZero();
  for (const auto& s : random_samples(20, 2)) {
    const PredictiveTL p = predict(m, s.src, s.rcv, s.f_hz, s.bathy, false);
    const double phys = physics_mean_tl(slant_range_m(s.src, s.rcv), s.f_hz / 1000.0, m.params.physics());
    EXPECT_NEAR(p.mean, phys, 1e-10);
    EXPECT_GE(p.variance, 0.0);
  }
}

TEST(Predict, ClampCapsLargeResidual) {
  // One inducing point at the query latent with m = 500 makes mu_GP = 500.
  ModelConfig cfg = ModelConfig::for_ablation(Ablation::PhysicsMeanOnly);
  cfg.num_inducing = 1;
  SurrogateModel m = SurrogateModel::create(cfg, ranges(), 3);
  const TrainingSample s = random_samples(1, 4)[0];
  PreparedSet set = allocate_prepared(1, false);
  prepare_into(set, 0, s.src, s.rcv, s.f_hz, s.bathy, m.ranges, kEarthRadiusKm);
  m.params.inducing = set.features.transpose();
  m.params.var_mean(0) = 500.0;
  const PredictiveTL raw = predict(m, s.src, s.rcv, s.f_hz, s.bathy, false);
  EXPECT_FALSE(raw.clamped);
  EXPECT_NEAR(raw.mean, 500.0 + physics_mean_tl(slant_range_m(s.src, s.rcv), s.f_hz / 1000, m.params.physics()), 1e-8);
  const PredictiveTL c = predict(m, s.src, s.rcv, s.f_hz, s.bathy, true);
  EXPECT_TRUE(c.clamped);
  EXPECT_EQ(c.mean, 200.0);
}

TEST(Predict, UnclampedIsExactSum) {
  const SurrogateModel m = tiny_model(5);
  const auto samples = random_samples(30, 6);
  const PreparedSet set = prepare(samples, m.ranges);
  const PredictiveBatch b = SurrogatePredictor(m).predict(set, false, 7);
  const Marginals gp = marginal_posterior_batch(embed(m, set), m.params.variational(), m.params.hyper());
  const Vector phys = physics_mean(m.params, set);
  for (Index i = 0; i < set.size(); ++i) {
    EXPECT_NEAR(b.mean(i), phys(i) + gp.mean(i), 1e-10);
    EXPECT_NEAR(b.variance(i), gp.var(i), 1e-10);
  }
}

TEST(Predict, SharedProfilesMatchIndividualRows) {
  const SurrogateModel m = tiny_model(8);
  auto samples = random_samples(12, 9);
  // one path at several receiver depths, as in a depth grid
  for (int i = 1; i < 6; ++i) {
    samples[static_cast<std::size_t>(i)].bathy = samples[0].bathy;
    samples[static_cast<std::size_t>(i)].rcv.depth = 10.0 * i;
  }
  const PreparedSet set = prepare(samples, m.ranges);
  const PredictiveBatch b = SurrogatePredictor(m).predict(set, false, 5);
  const Marginals gp = marginal_posterior_batch(embed(m, set), m.params.variational(), m.params.hyper());
  const Vector phys = physics_mean(m.params, set);
  for (Index i = 0; i < set.size(); ++i) {
    EXPECT_NEAR(b.mean(i), phys(i) + gp.mean(i), 1e-10);
    EXPECT_NEAR(b.variance(i), gp.var(i), 1e-10);
  }
}

TEST(Predict, GoldenSnapshot) {
  const SurrogateModel m = tiny_model(42);
  const TrainingSample s = random_samples(1, 43)[0];
  const PredictiveTL p = predict(m, s.src, s.rcv, s.f_hz, s.bathy, true);
  EXPECT_NEAR(p.mean, 95.374292931041737, 1e-8);
  EXPECT_NEAR(p.variance, 4.754546646982809, 1e-8);
}

TEST(Predict, OutOfRangeQueryThrows) {
  const SurrogateModel m = tiny_model(7);
  TrainingSample s = random_samples(1, 8)[0];
  s.src.depth = 31.0;
  EXPECT_THROW(predict(m, s.src, s.rcv, s.f_hz, s.bathy, true), OutOfRange);
}

TEST(Predict, ConstantEncoderGivesLocationIndependentPredictions) {
  SurrogateModel m = tiny_model(9);
  m.params.a(0) = 0.0;
  m.params.b(0) = 0.0;
  m.params.encoders = EncoderParams::zeros(m.config.encoder);
  m.params.encoders.fusion.layer.bias = Vector::LinSpaced(4, -0.5, 0.5);
  const auto samples = random_samples(40, 10);
  const PredictiveBatch b = SurrogatePredictor(m).predict(prepare(samples, m.ranges), false);
  for (Index i = 1; i < b.mean.size(); ++i) {
    EXPECT_DOUBLE_EQ(b.mean(i), b.mean(0));
    EXPECT_DOUBLE_EQ(b.variance(i), b.variance(0));
  }
}

TEST(ResidualTarget, Examples) {
  SurrogateModel m = tiny_model(11);
  m.params.a(0) = 20.0;
  m.params.b(0) = 1.0;
  TrainingSample s;
  s.src = {0.0, 0.0, 10.0};
  s.rcv = {0.0, 0.0, 10.0};
  s.f_hz = 1000.0;
  s.tl_db = 100.0;
  // Coincident points clamp to R = 1 m.
  EXPECT_NEAR(residual_target(m, s), 100.0 - thorp_alpha(1.0) / 1000.0, 1e-12);
  s.rcv.depth = 1010.0;  // R = 1 km
  EXPECT_NEAR(residual_target(m, s), 39.931, 1e-3);
  s.tl_db = physics_mean_tl(1000.0, 1.0, m.params.physics());
  EXPECT_NEAR(residual_target(m, s), 0.0, 1e-12);
  // d r / d A = -log10 R
  const double r0 = residual_target(m, s);
  m.params.a(0) += 1.0;
  EXPECT_NEAR(residual_target(m, s) - r0, -3.0, 1e-12);
}

TEST(Loss, HingeInactiveBelowCap) {
  const SurrogateModel m = tiny_model(12);
  const PreparedSet set = prepare(random_samples(8, 13), m.ranges);
  const LossParts l = loss(m, set, {});
  EXPECT_EQ(l.hinge, 0.0);
  EXPECT_DOUBLE_EQ(l.total, l.elbo);
}

TEST(Loss, SingleSampleHingeValue) {
  SurrogateModel m = tiny_model(14);
  m.params.var_mean.setZero();
  PreparedSet set = prepare(random_samples(1, 15), m.ranges);
  // Choose A so the physics-only prediction is exactly 210 dB.
  m.params.a(0) = (210.0 - m.params.b(0) * set.absorption(0)) / set.log10_range(0);
  const LossParts l = loss(m, set, {});
  EXPECT_NEAR(l.hinge, 100.0, 1e-8);
  EXPECT_NEAR(l.total - l.elbo, 1000.0, 1e-7);
  LossOptions no_pen;
  no_pen.lambda = 0.0;
  const LossParts l0 = loss(m, set, no_pen);
  EXPECT_EQ(l0.total, l0.elbo);
  EXPECT_NEAR(l0.elbo, l.elbo, 1e-12);
}

TEST(Loss, AdditiveDecomposition) {
  SurrogateModel m = tiny_model(16);
  m.params.var_mean.setConstant(150.0);
  const PreparedSet set = prepare(random_samples(8, 17), m.ranges);
  LossOptions opt;
  opt.lambda = 3.5;
  opt.total_count = 100;
  const LossParts l = loss(m, set, opt);
  EXPECT_GT(l.hinge, 0.0);
  EXPECT_NEAR(l.total, l.elbo + 3.5 * l.hinge, 1e-9 * std::abs(l.total));
}

TEST(Loss, ElboMatchesSvgpElbo) {
  const SurrogateModel m = tiny_model(18);
  const PreparedSet set = prepare(random_samples(8, 19), m.ranges);
  LossOptions opt;
  opt.total_count = 64;
  const Vector resid = set.target - physics_mean(m.params, set);
  const double expected = elbo_minibatch(resid, embed(m, set), m.params.variational(), m.params.hyper(),
                                         m.params.noise_var(), 64);
  EXPECT_NEAR(loss(m, set, opt).elbo, expected, 1e-9 * std::abs(expected));
}

void check_full_gradient(Ablation ab, nn::Mode mode) {
  SurrogateModel m = tiny_model(21, ab);
  PreparedSet set = prepare(random_samples(8, 22), m.ranges);
  // Targets near the predictions keep the loss small so central differences
  // are not dominated by cancellation; the cap leaves one sample just above it.
  const SvgpBatch gp(embed(m, set, mode), m.params.variational(), m.params.hyper());
  const Vector pred = physics_mean(m.params, set) + gp.mean;
  std::mt19937_64 noise_rng(22);
  std::normal_distribution<double> noise(0.0, 2.0);
  for (Index i = 0; i < set.size(); ++i) set.target(i) = pred(i) + noise(noise_rng);
  LossOptions opt;
  opt.total_count = 50;
  opt.tl_max = pred.maxCoeff() - 0.5;
  opt.mode = mode;
  const GradientResult g = gradients(m, set, opt);
  EXPECT_NEAR(g.loss.total, loss(m, set, opt).total, 1e-9 * std::abs(g.loss.total));
  ASSERT_GT(g.loss.hinge, 0.0);

  auto values = collect_params(m.params);
  SurrogateParams grad = g.grad;
  auto grads = collect_params(grad);
  ASSERT_EQ(values.size(), grads.size());
  std::mt19937_64 rng(23);
  int checked = 0;
  for (std::size_t s = 0; s < values.size(); ++s) {
    if (!is_trainable(values[s].kind)) continue;
    const Index n = values[s].value.size();
    std::vector<Index> picks;
    if (n <= 6) {
      for (Index k = 0; k < n; ++k) picks.push_back(k);
    } else {
      std::uniform_int_distribution<Index> pick(0, n - 1);
      for (int t = 0; t < 3; ++t) picks.push_back(pick(rng));
    }
    for (Index k : picks) {
      const Index r = k % values[s].value.rows(), c = k / values[s].value.rows();
      if (values[s].name == "variational.S_factor" && c > r) continue;
      double& w = values[s].value(r, c);
      const double o = w, h = 1e-5;
      w = o + h;
      const double fp = loss(m, set, opt).total;
      w = o - h;
      const double fm = loss(m, set, opt).total;
      w = o;
      const double fd = (fp - fm) / (2 * h);
      const double an = grads[s].value(r, c);
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
      EXPECT_LE(std::abs(fd - an) / denom, 1e-4) << values[s].name << "(" << r << "," << c << ") fd=" << fd
                                                 << " an=" << an;
      ++checked;
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(Gradients, FullModelEvalMode) { check_full_gradient(Ablation::Full, nn::Mode::Eval); }
TEST(Gradients, FullModelTrainMode) { check_full_gradient(Ablation::Full, nn::Mode::Train); }
TEST(Gradients, PhysicsMeanOnly) { check_full_gradient(Ablation::PhysicsMeanOnly, nn::Mode::Eval); }

TEST(Gradients, FrozenPhysicsGetsZero) {
  SurrogateModel m = tiny_model(24, Ablation::ZeroMean);
  EXPECT_EQ(m.params.a(0), 0.0);
  const GradientResult g = gradients(m, prepare(random_samples(8, 25), m.ranges), {});
  EXPECT_EQ(g.grad.a(0), 0.0);
  EXPECT_EQ(g.grad.b(0), 0.0);
}

TEST(Gradients, BuffersGetZero) {
  const SurrogateModel m = tiny_model(26);
  GradientResult g = gradients(m, prepare(random_samples(8, 27), m.ranges), {});
  for (const auto& s : collect_params(g.grad)) {
    if (s.kind == ParamKind::Buffer) EXPECT_EQ(s.value.cwiseAbs().maxCoeff(), 0.0) << s.name;
  }
}

TEST(Gradients, HingeGradientWithRespectToA) {
  SurrogateModel m = tiny_model(28);
  m.params.var_mean.setZero();
  PreparedSet set = prepare(random_samples(1, 29), m.ranges);
  m.params.a(0) = (207.0 - m.params.b(0) * set.absorption(0)) / set.log10_range(0);
  LossOptions with, without;
  without.lambda = 0.0;
  const double ga = gradients(m, set, with).grad.a(0) - gradients(m, set, without).grad.a(0);
  EXPECT_NEAR(ga, 2.0 * 10.0 * 7.0 * set.log10_range(0), 1e-7);
}

TEST(ModelFile, SaveLoadSaveIsByteIdentical) {
  const SurrogateModel m = tiny_model(30);
  const std::string a = serialize_model(m);
  const SurrogateModel back = deserialize_model(a);
  EXPECT_EQ(serialize_model(back), a);
  SurrogateParams p1 = m.params, p2 = back.params;
  auto s1 = collect_params(p1), s2 = collect_params(p2);
  for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_TRUE(s1[i].value == s2[i].value) << s1[i].name;
}

TEST(ModelFile, FilesRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string p1 = (dir / "acoustwin_model_a.json").string(), p2 = (dir / "acoustwin_model_b.json").string();
  save(tiny_model(31, Ablation::PhysicsMeanOnly), p1);
  save(load(p1), p2);
  std::ifstream f1(p1), f2(p2);
  std::stringstream b1, b2;
  b1 << f1.rdbuf();
  b2 << f2.rdbuf();
  EXPECT_EQ(b1.str(), b2.str());
  EXPECT_EQ(load(p2).config.ablation(), Ablation::PhysicsMeanOnly);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
  EXPECT_THROW(load((dir / "acoustwin_missing_model.json").string()), IoError);
}

TEST(ModelFile, CorruptedHeaderIsFormatError) {
  std::string text = serialize_model(tiny_model(32));
  EXPECT_THROW(deserialize_model(text.substr(0, text.size() / 2)), FormatError);
  auto doc = nlohmann::ordered_json::parse(text);
  doc["header"].erase("config");
  EXPECT_THROW(deserialize_model(doc.dump()), FormatError);
  doc = nlohmann::ordered_json::parse(text);
  doc["arrays"]["inducing.Z"]["shape"] = {3, 3};
  EXPECT_THROW(deserialize_model(doc.dump()), FormatError);
}

TEST(ModelFile, FutureVersionIsVersionMismatch) {
  auto doc = nlohmann::ordered_json::parse(serialize_model(tiny_model(33)));
  doc["header"]["format_version"] = 999;
  EXPECT_THROW(deserialize_model(doc.dump()), VersionMismatch);
}

}  // namespace
}  // namespace acoustwin
