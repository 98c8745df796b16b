#ifndef ACOUSTWIN_PARAMS_HPP
#define ACOUSTWIN_PARAMS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace acoustwin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// How the optimizer treats a named parameter array.
enum class ParamKind {
  Decayed,  // trained, with decoupled weight decay
  Plain,    // trained, no weight decay
  Frozen,   // serialized, never updated
  Buffer,   // running statistics; serialized, not a gradient target
};

inline bool is_trainable(ParamKind k) {
  return k == ParamKind::Decayed || k == ParamKind::Plain;
}

/// Flat view of one named array, produced by the visit() members.
struct ParamSlot {
  std::string name;
  Eigen::Ref<Matrix> value;
  ParamKind kind;
};

/// Collects every named array of an object exposing
/// `visit(F&&, const std::string&)` in a deterministic order.
template <class T>
std::vector<ParamSlot> collect_params(T& obj) {
  std::vector<ParamSlot> out;
  obj.visit([&](const std::string& name, Eigen::Ref<Matrix> value, ParamKind kind) {
    out.push_back(ParamSlot{name, value, kind});
  });
  return out;
}

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double softplus_inverse(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}

/// d softplus / dx, the logistic function.
inline double softplus_grad(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace acoustwin

#endif  // ACOUSTWIN_PARAMS_HPP
