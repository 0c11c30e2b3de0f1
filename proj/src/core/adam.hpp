#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace fednod {

// Training hyperparameters. `momentum` is Adam's beta1; beta2 and epsilon are
// fixed defaults, not searched.
struct Hyperparameters {
  double learning_rate = 0.001;
  double momentum = 0.9;
  int batch_size = 32;
  double weight_decay = 0.0001;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Classic Adam with bias correction. Weight decay is L2-coupled: it is added
// to the gradient before the moment updates. Moment arithmetic runs in double
// and is stored back in float32. Throws DivergedError on non-finite gradients.
void adam_step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const Hyperparameters& hyper);

}  // namespace fednod
