#pragma once

#include <cmath>

#include "disner/neural/params.hpp"

namespace disner::nn {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

template <typename S>
struct AdamState {
  Params<S> m;
  Params<S> v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(const Params<S>& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

// Bias-corrected Adam update of every parameter in place.
template <typename S>
void adam_step(Params<S>& params, AdamState<S>& state, const Params<S>& grad, const AdamConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
  const S lr = static_cast<S>(cfg.lr), eps = static_cast<S>(cfg.eps);
  const S ic1 = static_cast<S>(1.0 / c1), ic2 = static_cast<S>(1.0 / c2);
  Params<S>::visit(
      [&](const std::string&, Matrix<S>& p, const Matrix<S>& g, Matrix<S>& m, Matrix<S>& v) {
        m = b1 * m + (S(1) - b1) * g;
        v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() * ic1) / ((v.array() * ic2).sqrt() + eps);
      },
      params, grad, state.m, state.v);
}

}  // namespace disner::nn
