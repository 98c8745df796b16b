#ifndef ACOUSTWIN_SVGP_HPP
#define ACOUSTWIN_SVGP_HPP

// Sparse variational GP residual head in the non-whitened parameterization:
// q(u) = N(m, S) with S = L_S L_S^T, prior p(u) = N(0, K_ZZ).
// Latent inputs are stored one per row.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "acoustwin/errors.hpp"
#include "acoustwin/params.hpp"

namespace acoustwin {

/// Product of a Matern-1/2 and a rational-quadratic kernel with separate
/// ARD lengthscales, scaled by the output variance.
struct KernelHyper {
  double outputscale = 25.0;  // sigma_f^2
  Vector len_matern;
  Vector len_rq;
  double alpha = 1.0;

  static KernelHyper isotropic(Index dim, double outputscale = 25.0,
                               double lengthscale = 1.0, double alpha = 1.0) {
    return {outputscale, Vector::Constant(dim, lengthscale),
            Vector::Constant(dim, lengthscale), alpha};
  }

  Index dim() const { return len_matern.size(); }
};

namespace detail {

struct PairTerms {
  double k;
  double r_matern;  // sqrt(sum (delta/l_mat)^2)
  double base_rq;   // 1 + sum (delta/l_rq)^2 / (2 alpha)
};

template <class A, class B>
PairTerms kernel_pair(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                      const Eigen::ArrayXd& inv_mat, const Eigen::ArrayXd& inv_rq,
                      const KernelHyper& h) {
  double sm = 0.0;
  double sr = 0.0;
  for (Index d = 0; d < inv_mat.size(); ++d) {
    const double delta = a(d) - b(d);
    const double um = delta * inv_mat(d);
    const double ur = delta * inv_rq(d);
    sm += um * um;
    sr += ur * ur;
  }
  const double r = std::sqrt(sm);
  const double base = 1.0 + sr / (2.0 * h.alpha);
  return {h.outputscale * std::exp(-r) * std::pow(base, -h.alpha), r, base};
}

}  // namespace detail

inline double kernel_eval(const Vector& a, const Vector& b, const KernelHyper& h) {
  if (a.size() != b.size() || a.size() != h.dim()) {
    throw ShapeMismatch("kernel_eval: dimension mismatch");
  }
  const Eigen::ArrayXd inv_mat = h.len_matern.array().inverse();
  const Eigen::ArrayXd inv_rq = h.len_rq.array().inverse();
  return detail::kernel_pair(a, b, inv_mat, inv_rq, h).k;
}

/// Entrywise kernel between the rows of x1 and the rows of x2.
inline Matrix kernel_matrix(const Matrix& x1, const Matrix& x2, const KernelHyper& h) {
  if (x1.cols() != h.dim() || x2.cols() != h.dim()) {
    throw ShapeMismatch("kernel_matrix: latent dimension mismatch");
  }
  const Eigen::ArrayXd inv_mat = h.len_matern.array().inverse();
  const Eigen::ArrayXd inv_rq = h.len_rq.array().inverse();
  Matrix k(x1.rows(), x2.rows());
  for (Index j = 0; j < x2.rows(); ++j) {
    for (Index i = 0; i < x1.rows(); ++i) {
      k(i, j) = detail::kernel_pair(x1.row(i), x2.row(j), inv_mat, inv_rq, h).k;
    }
  }
  return k;
}

struct KernelHyperGrad {
  double outputscale = 0.0;
  Vector len_matern;
  Vector len_rq;
  double alpha = 0.0;

  explicit KernelHyperGrad(Index dim = 0)
      : len_matern(Vector::Zero(dim)), len_rq(Vector::Zero(dim)) {}

  KernelHyperGrad& operator+=(const KernelHyperGrad& o) {
    outputscale += o.outputscale;
    len_matern += o.len_matern;
    len_rq += o.len_rq;
    alpha += o.alpha;
    return *this;
  }
};

struct KernelMatrixGrad {
  Matrix x1;
  Matrix x2;
  KernelHyperGrad hyper;
};

/// Pulls an upstream gradient G = dL/dK back through K = kernel_matrix(x1, x2).
/// The Matern factor is not differentiable at zero distance; the gradient
/// contribution of coincident pairs is taken as zero there.
inline KernelMatrixGrad kernel_matrix_backward(const Matrix& x1, const Matrix& x2,
                                               const KernelHyper& h, const Matrix& g) {
  const Index dim = h.dim();
  const Eigen::ArrayXd inv_mat = h.len_matern.array().inverse();
  const Eigen::ArrayXd inv_rq = h.len_rq.array().inverse();
  KernelMatrixGrad out{Matrix::Zero(x1.rows(), dim), Matrix::Zero(x2.rows(), dim),
                       KernelHyperGrad(dim)};
  Eigen::ArrayXd delta(dim);
  Eigen::ArrayXd ddelta(dim);
  for (Index j = 0; j < x2.rows(); ++j) {
    for (Index i = 0; i < x1.rows(); ++i) {
      const double gij = g(i, j);
      if (gij == 0.0) continue;
      const auto t = detail::kernel_pair(x1.row(i), x2.row(j), inv_mat, inv_rq, h);
      const double gk = gij * t.k;
      delta = (x1.row(i) - x2.row(j)).transpose().array();
      ddelta = -delta * inv_rq.square() / t.base_rq;
      out.hyper.len_rq.array() += gk * delta.square() * inv_rq.cube() / t.base_rq;
      if (t.r_matern > 0.0) {
        ddelta -= delta * inv_mat.square() / t.r_matern;
        out.hyper.len_matern.array() += gk * delta.square() * inv_mat.cube() / t.r_matern;
      }
      out.x1.row(i) += gk * ddelta.matrix().transpose();
      out.x2.row(j) -= gk * ddelta.matrix().transpose();
      const double u = t.base_rq - 1.0;
      out.hyper.alpha += gk * (-std::log(t.base_rq) + u / t.base_rq);
      out.hyper.outputscale += gk / h.outputscale;
    }
  }
  return out;
}

/// Cholesky factor of K + jitter I together with the jitter that succeeded.
struct JitteredCholesky {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;

  Matrix solve(const Matrix& b) const { return llt.solve(b); }
  Matrix lower() const { return llt.matrixL(); }
  double log_det() const {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
};

inline constexpr double kJitterStart = 1e-6;
inline constexpr double kJitterCap = 1e-2;

/// Tries a plain factorization first, then jitter 1e-6, 1e-5, ..., 1e-2;
/// throws FailureEscalation beyond the cap.
inline JitteredCholesky chol_with_jitter(const Matrix& k, double start = kJitterStart,
                                         double cap = kJitterCap, bool try_plain = true) {
  if (k.rows() != k.cols()) throw ShapeMismatch("chol_with_jitter: matrix not square");
  if (!k.allFinite()) throw FailureEscalation("chol_with_jitter: non-finite matrix");
  const Index n = k.rows();
  auto attempt = [&](double eps, JitteredCholesky& out) {
    out.jitter = eps;
    if (eps > 0.0) {
      out.llt.compute(k + eps * Matrix::Identity(n, n));
    } else {
      out.llt.compute(k);
    }
    return out.llt.info() == Eigen::Success &&
           (out.llt.matrixLLT().diagonal().array() > 0.0).all() &&
           out.llt.matrixLLT().allFinite();
  };
  JitteredCholesky out;
  if (try_plain && attempt(0.0, out)) return out;
  for (double eps = start; eps <= cap * (1.0 + 1e-9); eps *= 10.0) {
    if (attempt(eps, out)) return out;
  }
  throw FailureEscalation("Cholesky failed at jitter cap " + std::to_string(cap));
}

struct VariationalState {
  Matrix inducing;  // Z, M x d
  Vector mean;      // m
  Matrix s_factor;  // lower triangular with positive diagonal

  Index size() const { return inducing.rows(); }
  Matrix covariance() const {
    const Matrix l = s_factor.triangularView<Eigen::Lower>();
    return l * l.transpose();
  }
};

struct Marginals {
  Vector mean;
  Vector var;
};

/// Frozen-state predictor with a cached factorization of K_ZZ.
class SvgpPredictor {
 public:
  SvgpPredictor(VariationalState state, KernelHyper hyper)
      : state_(std::move(state)), hyper_(std::move(hyper)) {
    if (state_.inducing.cols() != hyper_.dim() || state_.mean.size() != state_.size() ||
        state_.s_factor.rows() != state_.size() || state_.s_factor.cols() != state_.size()) {
      throw ShapeMismatch("SvgpPredictor: inconsistent variational state");
    }
    chol_ = chol_with_jitter(kernel_matrix(state_.inducing, state_.inducing, hyper_));
    s_lower_ = state_.s_factor.triangularView<Eigen::Lower>();
  }

  /// Marginal mean and variance at the rows of x; variance floored at 0.
  Marginals marginals(const Matrix& x) const {
    const Matrix kzx = kernel_matrix(state_.inducing, x, hyper_);
    const Matrix a = chol_.solve(kzx);
    const Matrix w = s_lower_.transpose() * a;
    Marginals out;
    out.mean = a.transpose() * state_.mean;
    out.var = (hyper_.outputscale - (kzx.array() * a.array()).colwise().sum() +
               w.array().square().colwise().sum())
                  .transpose()
                  .matrix();
    out.var = out.var.cwiseMax(0.0);
    return out;
  }

  std::pair<double, double> predict(const Vector& z) const {
    const Marginals m = marginals(z.transpose());
    return {m.mean(0), m.var(0)};
  }

  /// Covariance of q(f) between the rows of x1 and x2.
  Matrix covariance(const Matrix& x1, const Matrix& x2) const {
    const Matrix k1 = kernel_matrix(state_.inducing, x1, hyper_);
    const Matrix k2 = kernel_matrix(state_.inducing, x2, hyper_);
    const Matrix a2 = chol_.solve(k2);
    const Matrix w1 = s_lower_.transpose() * chol_.solve(k1);
    const Matrix w2 = s_lower_.transpose() * a2;
    return kernel_matrix(x1, x2, hyper_) - k1.transpose() * a2 + w1.transpose() * w2;
  }

  const VariationalState& state() const { return state_; }
  const KernelHyper& hyper() const { return hyper_; }
  double jitter() const { return chol_.jitter; }

 private:
  VariationalState state_;
  KernelHyper hyper_;
  JitteredCholesky chol_;
  Matrix s_lower_;
};

inline std::pair<double, double> predictive(const Vector& z, const VariationalState& v,
                                            const KernelHyper& h) {
  return SvgpPredictor(v, h).predict(z);
}

inline Marginals marginal_posterior_batch(const Matrix& latents, const VariationalState& v,
                                          const KernelHyper& h) {
  return SvgpPredictor(v, h).marginals(latents);
}

/// KL(N(m, S) || N(0, K_ZZ)).
inline double kl_qp(const VariationalState& v, const KernelHyper& h) {
  const JitteredCholesky chol = chol_with_jitter(kernel_matrix(v.inducing, v.inducing, h));
  const Matrix ls = v.s_factor.triangularView<Eigen::Lower>();
  const Matrix l = chol.lower();
  const Matrix half = l.triangularView<Eigen::Lower>().solve(ls);
  const Vector lm = l.triangularView<Eigen::Lower>().solve(v.mean);
  const double logdet_s = 2.0 * ls.diagonal().array().abs().log().sum();
  return 0.5 * (half.squaredNorm() + lm.squaredNorm() - static_cast<double>(v.size()) +
                chol.log_det() - logdet_s);
}

/// E_{f ~ N(mu, v)} log N(r | f, noise).
inline double expected_loglik(double r, double mu, double v, double noise_var) {
  const double d = r - mu;
  return -0.5 * std::log(2.0 * std::numbers::pi * noise_var) - d * d / (2.0 * noise_var) -
         v / (2.0 * noise_var);
}

/// Negative ELBO for one mini-batch: (N/B) sum(-E log lik) + KL.
inline double elbo_minibatch(const Vector& residuals, const Matrix& latents,
                             const VariationalState& v, const KernelHyper& h,
                             double noise_var, double total_count) {
  const Index b = residuals.size();
  if (b == 0 || latents.rows() != b) throw ShapeMismatch("elbo_minibatch: batch size");
  const Marginals mv = marginal_posterior_batch(latents, v, h);
  double nll = 0.0;
  for (Index i = 0; i < b; ++i) nll -= expected_loglik(residuals(i), mv.mean(i), mv.var(i), noise_var);
  return total_count / static_cast<double>(b) * nll + kl_qp(v, h);
}

struct SvgpGrads {
  Matrix latents;  // B x d
  Matrix inducing;
  Vector mean;
  Matrix s_factor;  // lower triangle only
  KernelHyperGrad hyper;
};

/// Differentiable forward pass over one batch: unfloored marginals and KL,
/// with a backward pass producing exact gradients.
class SvgpBatch {
 public:
  SvgpBatch(const Matrix& latents, const VariationalState& v, const KernelHyper& h)
      : x_(latents), v_(v), h_(h) {
    const Matrix kzz = kernel_matrix(v.inducing, v.inducing, h);
    chol_ = chol_with_jitter(kzz);
    const Index m = v.size();
    p_ = chol_.solve(Matrix::Identity(m, m));
    kzx_ = kernel_matrix(v.inducing, latents, h);
    a_ = p_ * kzx_;
    ls_ = v.s_factor.triangularView<Eigen::Lower>();
    s_ = ls_ * ls_.transpose();
    pm_ = p_ * v.mean;
    mean = a_.transpose() * v.mean;
    sa_ = s_ * a_;
    var = (h.outputscale - (kzx_.array() * a_.array()).colwise().sum() +
           (a_.array() * sa_.array()).colwise().sum())
              .transpose()
              .matrix();
    const double logdet_s = 2.0 * ls_.diagonal().array().abs().log().sum();
    kl = 0.5 * ((p_.array() * s_.array()).sum() + v.mean.dot(pm_) - static_cast<double>(m) +
                chol_.log_det() - logdet_s);
  }

  Vector mean;
  Vector var;
  double kl = 0.0;
  double jitter() const { return chol_.jitter; }

  SvgpGrads backward(const Vector& dmean, const Vector& dvar, double dkl) const {
    const Index d = h_.dim();
    const Matrix b = p_ * sa_;  // K^-1 S K^-1 k, one column per sample
    const Matrix a_dv = a_ * dvar.asDiagonal();
    const Vector a_dmean = a_ * dmean;

    Matrix g_kzx = pm_ * dmean.transpose();
    g_kzx += 2.0 * (b - a_) * dvar.asDiagonal();

    Matrix g_kzz = -a_dmean * pm_.transpose();
    g_kzz += a_dv * a_.transpose() - a_dv * b.transpose() - b * dvar.asDiagonal() * a_.transpose();
    g_kzz += 0.5 * dkl * (p_ - p_ * s_ * p_ - pm_ * pm_.transpose());

    const Matrix g_s = a_dv * a_.transpose() + 0.5 * dkl * p_;

    SvgpGrads out;
    out.mean = a_dmean + dkl * pm_;
    Matrix g_ls = (g_s + g_s.transpose()) * ls_;
    g_ls.diagonal().array() -= dkl / ls_.diagonal().array();
    out.s_factor = g_ls.triangularView<Eigen::Lower>();

    const KernelMatrixGrad gx = kernel_matrix_backward(v_.inducing, x_, h_, g_kzx);
    const KernelMatrixGrad gz = kernel_matrix_backward(v_.inducing, v_.inducing, h_, g_kzz);
    out.latents = gx.x2;
    out.inducing = gx.x1 + gz.x1 + gz.x2;
    out.hyper = KernelHyperGrad(d);
    out.hyper += gx.hyper;
    out.hyper += gz.hyper;
    out.hyper.outputscale += dvar.sum();
    return out;
  }

 private:
  Matrix x_;
  VariationalState v_;
  KernelHyper h_;
  JitteredCholesky chol_;
  Matrix p_;
  Matrix kzx_;
  Matrix a_;
  Matrix ls_;
  Matrix s_;
  Matrix sa_;
  Vector pm_;
};

/// Which covariance enters the observation update.
///   Prior:     k(., .), the kernel itself
///   Posterior: the covariance of q(f), i.e. exact Gaussian conditioning of
///              the variational predictive
enum class Conditioning { Prior, Posterior };

/// GP posterior after folding K residual-space observations into the
/// variational predictive:
///   mu_post = mu + c_*K (C_KK + N)^-1 (y - mu(z_K))
///   var_post = var - c_*K (C_KK + N)^-1 c_K*, floored at 0
class ConditionedPosterior {
 public:
  ConditionedPosterior(SvgpPredictor base, Matrix obs_latents, const Vector& obs_residuals,
                       const Vector& obs_noise, Conditioning mode = Conditioning::Prior)
      : base_(std::move(base)), obs_(std::move(obs_latents)), mode_(mode) {
    const Index k = obs_.rows();
    if (k == 0) throw ShapeMismatch("condition_on_observations: need at least one observation");
    if (obs_residuals.size() != k || obs_noise.size() != k) {
      throw ShapeMismatch("condition_on_observations: observation count mismatch");
    }
    if (!obs_residuals.allFinite()) throw FailureEscalation("non-finite observation");
    Matrix ckk = cross(obs_, obs_);
    ckk.diagonal() += obs_noise;
    chol_ = chol_with_jitter(ckk);
    innovation_ = obs_residuals - base_.marginals(obs_).mean;
    weights_ = chol_.solve(innovation_);
  }

  Marginals marginals(const Matrix& x) const {
    Marginals out = base_.marginals(x);
    const Matrix ckx = cross(obs_, x);
    out.mean += ckx.transpose() * weights_;
    const Matrix half = chol_.llt.matrixL().solve(ckx);
    out.var -= half.array().square().colwise().sum().transpose().matrix();
    out.var = out.var.cwiseMax(0.0);
    return out;
  }

  std::pair<double, double> predict(const Vector& z) const {
    const Marginals m = marginals(z.transpose());
    return {m.mean(0), m.var(0)};
  }

  const SvgpPredictor& base() const { return base_; }
  const Vector& innovation() const { return innovation_; }
  Conditioning mode() const { return mode_; }

 private:
  Matrix cross(const Matrix& a, const Matrix& b) const {
    return mode_ == Conditioning::Prior ? kernel_matrix(a, b, base_.hyper()) : base_.covariance(a, b);
  }

  SvgpPredictor base_;
  Matrix obs_;
  Conditioning mode_;
  JitteredCholesky chol_;
  Vector innovation_;
  Vector weights_;
};

inline ConditionedPosterior condition_on_observations(const VariationalState& v,
                                                      const KernelHyper& h, double noise_var,
                                                      const Matrix& obs_latents,
                                                      const Vector& obs_residuals,
                                                      Conditioning mode = Conditioning::Prior) {
  return ConditionedPosterior(SvgpPredictor(v, h), obs_latents, obs_residuals,
                              Vector::Constant(obs_latents.rows(), noise_var), mode);
}

}  // namespace acoustwin

#endif  // ACOUSTWIN_SVGP_HPP
