#include "core/model.hpp"

#include <cmath>
#include <cstring>

namespace fednod {

namespace {

LayerState make_conv2d(int in_ch, int out_ch, int k, int stride, int pad) {
  LayerState l;
  l.kind = LayerKind::Conv2D;
  l.weight = Tensor({out_ch, in_ch, k, k});
  l.bias = Tensor({out_ch});
  l.kernel = {k, k};
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerState make_conv3d(int in_ch, int out_ch, int k, int stride, int pad) {
  LayerState l;
  l.kind = LayerKind::Conv3D;
  l.weight = Tensor({out_ch, in_ch, k, k, k});
  l.bias = Tensor({out_ch});
  l.kernel = {k, k, k};
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerState make_pool2d(int w) {
  LayerState l;
  l.kind = LayerKind::MaxPool2D;
  l.pool = {w, w};
  return l;
}

LayerState make_pool3d(int d, int h, int w) {
  LayerState l;
  l.kind = LayerKind::MaxPool3D;
  l.pool = {d, h, w};
  return l;
}

LayerState make_relu() {
  LayerState l;
  l.kind = LayerKind::ReLU;
  return l;
}

LayerState make_flatten() {
  LayerState l;
  l.kind = LayerKind::Flatten;
  return l;
}

LayerState make_dense(std::int64_t in, std::int64_t out) {
  LayerState l;
  l.kind = LayerKind::Dense;
  l.weight = Tensor({out, in});
  l.bias = Tensor({out});
  return l;
}

LayerState make_dropout(double p) {
  LayerState l;
  l.kind = LayerKind::Dropout;
  l.dropout_p = p;
  return l;
}

void check_resolution(int resolution) {
  if (resolution != 64 && resolution != 96 && resolution != 160 && resolution != 320) {
    throw ConfigError("unsupported resolution " + std::to_string(resolution) +
                      "; supported: 64, 96, 160, 320");
  }
}

std::int64_t flat_size(const std::vector<std::int64_t>& s) {
  std::int64_t n = 1;
  for (std::int64_t d : s) n *= d;
  return n;
}

}  // namespace

bool ModelWeights::bit_equal(const ModelWeights& o) const {
  if (tensors.size() != o.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != o.tensors[i].name) return false;
    if (!tensors[i].tensor.bit_equal(o.tensors[i].tensor)) return false;
  }
  return true;
}

ModelSpec build_ddd2d(int resolution) {
  check_resolution(resolution);
  ModelSpec m;
  m.name = "ddd2d";
  m.input_shape = {1, resolution, resolution};
  m.layers.push_back(make_conv2d(1, 16, 3, 1, 1));
  m.layers.push_back(make_relu());
  m.layers.push_back(make_pool2d(2));
  m.layers.push_back(make_conv2d(16, 32, 3, 1, 1));
  m.layers.push_back(make_relu());
  m.layers.push_back(make_pool2d(2));
  m.layers.push_back(make_conv2d(32, 64, 3, 1, 1));
  m.layers.push_back(make_relu());
  m.layers.push_back(make_pool2d(2));
  m.layers.push_back(make_flatten());
  const std::int64_t r8 = resolution / 8;
  m.layers.push_back(make_dense(64 * r8 * r8, 128));
  m.layers.push_back(make_relu());
  m.layers.push_back(make_dropout(0.5));
  m.layers.push_back(make_dense(128, 3));
  propagate_shapes(m);
  return m;
}

ModelSpec build_ddd3d(int resolution, int sequence_length) {
  check_resolution(resolution);
  if (sequence_length < 2) {
    throw ConfigError("sequence_length must be >= 2 for the temporal pooling stage, got " +
                      std::to_string(sequence_length));
  }
  ModelSpec m;
  m.name = "ddd3d";
  m.input_shape = {1, sequence_length, resolution, resolution};
  m.layers.push_back(make_conv3d(1, 8, 3, 1, 1));
  m.layers.push_back(make_relu());
  m.layers.push_back(make_pool3d(1, 2, 2));
  m.layers.push_back(make_conv3d(8, 16, 3, 1, 1));
  m.layers.push_back(make_relu());
  m.layers.push_back(make_pool3d(2, 2, 2));
  m.layers.push_back(make_flatten());
  const std::int64_t r4 = resolution / 4;
  const std::int64_t l2 = sequence_length / 2;
  m.layers.push_back(make_dense(16 * l2 * r4 * r4, 64));
  m.layers.push_back(make_relu());
  m.layers.push_back(make_dense(64, 3));
  propagate_shapes(m);
  return m;
}

std::vector<std::vector<std::int64_t>> propagate_shapes(const ModelSpec& m) {
  std::vector<std::vector<std::int64_t>> shapes;
  shapes.push_back(m.input_shape);
  std::vector<std::int64_t> cur = m.input_shape;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const LayerState& l = m.layers[li];
    const std::string where =
        "layer " + std::to_string(li) + " (" + layer_kind_name(l.kind) + ")";
    switch (l.kind) {
      case LayerKind::Conv2D:
      case LayerKind::Conv3D: {
        const std::size_t sp = l.kind == LayerKind::Conv2D ? 2 : 3;
        if (cur.size() != sp + 1) {
          throw ConfigError(where + ": expected rank " + std::to_string(sp + 1) +
                            " input, got " + shape_str(cur));
        }
        if (cur[0] != l.weight.dim(1)) {
          throw ConfigError(where + ": input channels " + std::to_string(cur[0]) +
                            " != kernel channels " + std::to_string(l.weight.dim(1)));
        }
        std::vector<std::int64_t> next{l.weight.dim(0)};
        for (std::size_t a = 0; a < sp; ++a) {
          const std::int64_t span = cur[a + 1] + 2 * l.pad - l.weight.dim(a + 2);
          if (span < 0) {
            throw ConfigError(where + ": spatial axis " + std::to_string(a) +
                              " too small: " + shape_str(cur));
          }
          next.push_back(span / l.stride + 1);
        }
        cur = next;
        break;
      }
      case LayerKind::MaxPool2D:
      case LayerKind::MaxPool3D: {
        const std::size_t sp = l.kind == LayerKind::MaxPool2D ? 2 : 3;
        if (cur.size() != sp + 1) {
          throw ConfigError(where + ": expected rank " + std::to_string(sp + 1) +
                            " input, got " + shape_str(cur));
        }
        std::vector<std::int64_t> next{cur[0]};
        for (std::size_t a = 0; a < sp; ++a) {
          const std::int64_t w = l.pool[a];
          if (w > cur[a + 1]) {
            throw ConfigError(where + ": pool window " + std::to_string(w) +
                              " exceeds extent " + std::to_string(cur[a + 1]) +
                              " on spatial axis " + std::to_string(a));
          }
          next.push_back((cur[a + 1] - w) / w + 1);
        }
        cur = next;
        break;
      }
      case LayerKind::ReLU:
      case LayerKind::Dropout:
        break;
      case LayerKind::Flatten:
        cur = {flat_size(cur)};
        break;
      case LayerKind::Dense: {
        if (cur.size() != 1) {
          throw ConfigError(where + ": expected flattened input, got " + shape_str(cur));
        }
        if (cur[0] != l.weight.dim(1)) {
          throw ConfigError(where + ": input features " + std::to_string(cur[0]) +
                            " != weight columns " + std::to_string(l.weight.dim(1)));
        }
        cur = {l.weight.dim(0)};
        break;
      }
      case LayerKind::SoftmaxCE:
        throw ConfigError(where + ": loss layers do not belong in the stack");
    }
    shapes.push_back(cur);
  }
  if (cur.size() != 1 || cur[0] != m.num_classes) {
    throw ConfigError("model " + m.name + " ends with " + shape_str(cur) + ", expected (" +
                      std::to_string(m.num_classes) + ")");
  }
  return shapes;
}

std::int64_t param_count(const ModelSpec& m) {
  std::int64_t n = 0;
  for (const LayerState& l : m.layers) {
    if (l.has_params()) n += l.weight.numel() + l.bias.numel();
  }
  return n;
}

void init_weights(ModelSpec& m, std::uint64_t seed) {
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    LayerState& l = m.layers[li];
    if (!l.has_params()) continue;
    // fan_in: dense columns, or in_channels * kernel volume for conv.
    std::int64_t fan_in = 1;
    for (std::size_t a = 1; a < l.weight.rank(); ++a) fan_in *= l.weight.dim(a);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(seed, 0x11, li));
    for (float& w : l.weight.data) w = static_cast<float>(rng.uniform(-bound, bound));
    l.bias.fill(0.0f);
  }
}

ModelWeights weights_extract(const ModelSpec& m) {
  ModelWeights w;
  w.arch_name = m.name;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const LayerState& l = m.layers[li];
    if (!l.has_params()) continue;
    w.tensors.push_back({"l" + std::to_string(li) + ".weight", l.weight});
    w.tensors.push_back({"l" + std::to_string(li) + ".bias", l.bias});
  }
  return w;
}

void weights_load(ModelSpec& m, const ModelWeights& w) {
  if (!w.arch_name.empty() && w.arch_name != m.name) {
    throw IncompatibleWeightsError("weights for architecture '" + w.arch_name +
                                   "' cannot load into '" + m.name + "'");
  }
  std::size_t wi = 0;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    LayerState& l = m.layers[li];
    if (!l.has_params()) continue;
    const std::string wname = "l" + std::to_string(li) + ".weight";
    const std::string bname = "l" + std::to_string(li) + ".bias";
    if (wi + 2 > w.tensors.size()) {
      throw IncompatibleWeightsError("weights end early; model " + m.name +
                                     " expects tensor " + wname);
    }
    const NamedTensor& nw = w.tensors[wi++];
    const NamedTensor& nb = w.tensors[wi++];
    if (nw.name != wname || nb.name != bname) {
      throw IncompatibleWeightsError("weight names (" + nw.name + ", " + nb.name +
                                     ") do not match model tensors (" + wname + ", " +
                                     bname + ")");
    }
    if (nw.tensor.shape != l.weight.shape) {
      throw IncompatibleWeightsError(wname + ": shape " + shape_str(nw.tensor.shape) +
                                     " does not match model " + shape_str(l.weight.shape));
    }
    if (nb.tensor.shape != l.bias.shape) {
      throw IncompatibleWeightsError(bname + ": shape " + shape_str(nb.tensor.shape) +
                                     " does not match model " + shape_str(l.bias.shape));
    }
    l.weight = nw.tensor;
    l.bias = nb.tensor;
  }
  if (wi != w.tensors.size()) {
    throw IncompatibleWeightsError("weights carry " + std::to_string(w.tensors.size()) +
                                   " tensors but model " + m.name + " uses " +
                                   std::to_string(wi));
  }
}

Tensor model_forward(const ModelSpec& m, const Tensor& input, bool training, Rng* rng,
                     ForwardCache* cache) {
  if (input.rank() != m.input_shape.size() + 1) {
    throw DimensionError("model " + m.name + ": expected batched input of rank " +
                         std::to_string(m.input_shape.size() + 1) + ", got " +
                         shape_str(input.shape));
  }
  for (std::size_t a = 0; a < m.input_shape.size(); ++a) {
    if (input.dim(a + 1) != m.input_shape[a]) {
      throw DimensionError("model " + m.name + ": input " + shape_str(input.shape) +
                           " does not match sample shape " + shape_str(m.input_shape));
    }
  }
  if (cache) {
    cache->acts.clear();
    cache->pools.assign(m.layers.size(), PoolResult{});
    cache->dropout_masks.assign(m.layers.size(), Tensor{});
    cache->acts.push_back(input);
  }
  const std::int64_t B = input.dim(0);
  Tensor cur = input;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const LayerState& l = m.layers[li];
    switch (l.kind) {
      case LayerKind::Conv2D:
      case LayerKind::Conv3D:
        cur = conv_forward(cur, l);
        break;
      case LayerKind::MaxPool2D:
      case LayerKind::MaxPool3D: {
        PoolResult r = l.kind == LayerKind::MaxPool2D ? maxpool2d_forward(cur, l)
                                                      : maxpool3d_forward(cur, l);
        cur = r.output;
        if (cache) cache->pools[li] = std::move(r);
        break;
      }
      case LayerKind::ReLU:
        cur = relu_forward(cur);
        break;
      case LayerKind::Flatten:
        cur = cur.reshaped({B, cur.numel() / B});
        break;
      case LayerKind::Dense:
        cur = dense_forward(cur, l);
        break;
      case LayerKind::Dropout: {
        if (training && rng == nullptr) {
          throw ConfigError("model " + m.name + ": training forward needs an rng for dropout");
        }
        Tensor mask;
        Rng dummy(0);
        cur = dropout_forward(cur, l.dropout_p, training ? *rng : dummy, training, &mask);
        if (cache) cache->dropout_masks[li] = std::move(mask);
        break;
      }
      case LayerKind::SoftmaxCE:
        throw ConfigError("model " + m.name + ": loss layers do not belong in the stack");
    }
    if (cache) cache->acts.push_back(cur);
  }
  return cur;
}

Tensor model_backward(const ModelSpec& m, const ForwardCache& cache,
                      const Tensor& grad_logits, ParamGrads& grads) {
  if (cache.acts.size() != m.layers.size() + 1) {
    throw DimensionError("model_backward: cache holds " + std::to_string(cache.acts.size()) +
                         " activations for " + std::to_string(m.layers.size()) + " layers");
  }
  grads.weight.assign(m.layers.size(), Tensor{});
  grads.bias.assign(m.layers.size(), Tensor{});
  Tensor g = grad_logits;
  for (std::size_t i = m.layers.size(); i-- > 0;) {
    const LayerState& l = m.layers[i];
    const Tensor& in = cache.acts[i];
    const Tensor& out = cache.acts[i + 1];
    switch (l.kind) {
      case LayerKind::Conv2D:
      case LayerKind::Conv3D: {
        ConvGrads cg = conv_backward(in, l, g);
        g = std::move(cg.grad_input);
        grads.weight[i] = std::move(cg.grad_weight);
        grads.bias[i] = std::move(cg.grad_bias);
        break;
      }
      case LayerKind::MaxPool2D:
      case LayerKind::MaxPool3D:
        g = maxpool_backward(in, cache.pools[i], g);
        break;
      case LayerKind::ReLU:
        g = relu_backward(out, g);
        break;
      case LayerKind::Flatten:
        g = g.reshaped(in.shape);
        break;
      case LayerKind::Dense: {
        DenseGrads dg = dense_backward(in, l, g);
        g = std::move(dg.grad_input);
        grads.weight[i] = std::move(dg.grad_weight);
        grads.bias[i] = std::move(dg.grad_bias);
        break;
      }
      case LayerKind::Dropout:
        // Evaluation-mode caches hold no mask; backward is only defined for training.
        g = dropout_backward(cache.dropout_masks[i], g);
        break;
      case LayerKind::SoftmaxCE:
        throw ConfigError("model_backward: loss layers do not belong in the stack");
    }
  }
  return g;
}

}  // namespace fednod
