#include "core/adam.hpp"

#include <cmath>
#include <string>

namespace fednod {

void Hyperparameters::validate() const {
  if (!(learning_rate > 0.0)) {
    throw ConfigError("learning_rate must be positive, got " + std::to_string(learning_rate));
  }
  if (!(momentum > 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must be in (0, 1), got " + std::to_string(momentum));
  }
  if (batch_size < 1) {
    throw ConfigError("batch_size must be positive, got " + std::to_string(batch_size));
  }
  if (weight_decay < 0.0) {
    throw ConfigError("weight_decay must be non-negative, got " + std::to_string(weight_decay));
  }
  if (!(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta2 must be in (0, 1), got " + std::to_string(beta2));
  }
  if (!(epsilon > 0.0)) {
    throw ConfigError("epsilon must be positive, got " + std::to_string(epsilon));
  }
}

void adam_step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const Hyperparameters& hyper) {
  hyper.validate();
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
  }
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape);
      state.v.emplace_back(p->shape);
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }

  state.step += 1;
  const double b1 = hyper.momentum;
  const double b2 = hyper.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = hyper.learning_rate;
  const double wd = hyper.weight_decay;
  const double eps = hyper.epsilon;

  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& g = *grads[t];
    require_same_shape(p, g, "adam_step");
    require_same_shape(p, state.m[t], "adam_step state");
    float* pv = p.ptr();
    const float* gv = g.ptr();
    float* mv = state.m[t].ptr();
    float* vv = state.v[t].ptr();
    const std::int64_t n = p.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      double grad = static_cast<double>(gv[i]);
      if (!std::isfinite(grad)) {
        throw DivergedError("adam_step: non-finite gradient in tensor " + std::to_string(t) +
                            " at element " + std::to_string(i));
      }
      grad += wd * static_cast<double>(pv[i]);
      const double m = b1 * static_cast<double>(mv[i]) + (1.0 - b1) * grad;
      const double v = b2 * static_cast<double>(vv[i]) + (1.0 - b2) * grad * grad;
      mv[i] = static_cast<float>(m);
      vv[i] = static_cast<float>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      pv[i] = static_cast<float>(static_cast<double>(pv[i]) -
                                 lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

}  // namespace fednod
