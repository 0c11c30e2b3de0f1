#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/nn.hpp"

namespace fednod {

// An ordered layer stack with its parameters. Layer shapes are validated by
// symbolic propagation at build time.
struct ModelSpec {
  std::string name;                        // "ddd2d" / "ddd3d"
  std::vector<std::int64_t> input_shape;   // without batch axis
  std::vector<LayerState> layers;
  int num_classes = 3;
};

struct NamedTensor {
  std::string name;  // "l<layer>.weight" / "l<layer>.bias"
  Tensor tensor;
};

// The unit exchanged in federation: every trainable tensor of a model, in
// stack order. arch_name is empty when the weights came off the wire.
struct ModelWeights {
  std::string arch_name;
  std::vector<NamedTensor> tensors;

  bool bit_equal(const ModelWeights& o) const;
};

// Frame-level classifier: three conv/pool blocks into a small dense head.
// resolution must be one of {64, 96, 160, 320}.
ModelSpec build_ddd2d(int resolution);

// Sequence-level classifier over (1, L, H, W) clips; sequence_length >= 2.
ModelSpec build_ddd3d(int resolution, int sequence_length);

// Propagates the per-sample shape through every layer; throws ConfigError if
// the stack does not compose or the final layer is not (num_classes).
std::vector<std::vector<std::int64_t>> propagate_shapes(const ModelSpec& m);

std::int64_t param_count(const ModelSpec& m);

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) per layer, each layer drawing
// from its own derived stream; biases start at zero.
void init_weights(ModelSpec& m, std::uint64_t seed);

ModelWeights weights_extract(const ModelSpec& m);
void weights_load(ModelSpec& m, const ModelWeights& w);

struct ForwardCache {
  std::vector<Tensor> acts;                      // acts[0] = input, acts[i+1] = layer i output
  std::vector<PoolResult> pools;                 // indexed by layer
  std::vector<Tensor> dropout_masks;             // indexed by layer
};

// rng is only consulted by Dropout in training mode.
Tensor model_forward(const ModelSpec& m, const Tensor& input, bool training, Rng* rng,
                     ForwardCache* cache);

struct ParamGrads {
  std::vector<Tensor> weight;  // indexed by layer; empty tensor where no params
  std::vector<Tensor> bias;
};

// Walks the cached stack backwards; returns the gradient w.r.t. the input.
Tensor model_backward(const ModelSpec& m, const ForwardCache& cache,
                      const Tensor& grad_logits, ParamGrads& grads);

}  // namespace fednod
