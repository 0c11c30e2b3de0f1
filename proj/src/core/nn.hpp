#pragma once

#include <cstdint>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace fednod {

enum class LayerKind {
  Conv2D,
  Conv3D,
  MaxPool2D,
  MaxPool3D,
  ReLU,
  Flatten,
  Dense,
  Dropout,
  SoftmaxCE,
};

const char* layer_kind_name(LayerKind k);

// One layer: trainable parameters plus fixed attributes. Which fields are
// meaningful depends on `kind`.
struct LayerState {
  LayerKind kind = LayerKind::ReLU;
  Tensor weight;            // conv (OC, IC, k...), dense (out, in)
  Tensor bias;              // (OC) / (out)
  std::vector<int> kernel;  // conv kernel extent per spatial axis
  int stride = 1;
  int pad = 0;
  std::vector<int> pool;    // pool window per spatial axis; pooling stride == window
  double dropout_p = 0.0;

  bool has_params() const {
    return kind == LayerKind::Conv2D || kind == LayerKind::Conv3D ||
           kind == LayerKind::Dense;
  }
};

// Convolutions use cross-correlation semantics (no kernel flip) with zero
// padding. Output extent per spatial axis: (in + 2*pad - k) / stride + 1.
Tensor conv2d_forward(const Tensor& input, const LayerState& layer);
Tensor conv3d_forward(const Tensor& input, const LayerState& layer);
Tensor conv_forward(const Tensor& input, const LayerState& layer);

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_weight;
  Tensor grad_bias;
};
ConvGrads conv2d_backward(const Tensor& input, const LayerState& layer, const Tensor& grad_out);
ConvGrads conv3d_backward(const Tensor& input, const LayerState& layer, const Tensor& grad_out);
ConvGrads conv_backward(const Tensor& input, const LayerState& layer, const Tensor& grad_out);

struct PoolResult {
  Tensor output;
  std::vector<std::int64_t> argmax;  // flat input index per output element
};
PoolResult maxpool2d_forward(const Tensor& input, const LayerState& layer);
PoolResult maxpool3d_forward(const Tensor& input, const LayerState& layer);
Tensor maxpool_backward(const Tensor& input, const PoolResult& fwd, const Tensor& grad_out);

Tensor dense_forward(const Tensor& input, const LayerState& layer);
struct DenseGrads {
  Tensor grad_input;
  Tensor grad_weight;
  Tensor grad_bias;
};
DenseGrads dense_backward(const Tensor& input, const LayerState& layer, const Tensor& grad_out);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& output, const Tensor& grad_out);

// Training mode draws one uniform per element (row-major order) and scales
// survivors by 1/(1-p); evaluation mode is the identity and draws nothing.
Tensor dropout_forward(const Tensor& input, double p, Rng& rng, bool training, Tensor* mask_out);
Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out);

struct CrossEntropyResult {
  double loss = 0.0;              // mean over the batch, accumulated in double
  Tensor grad_logits;             // (softmax - onehot) / batch
  std::vector<double> per_sample;
};
CrossEntropyResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Per-row helpers shared with evaluation.
double ce_loss_row(const float* logits, int num_classes, int label);
int argmax_row(const float* values, int n);  // ties resolve to the lowest index

}  // namespace fednod
