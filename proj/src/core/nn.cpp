#include "core/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace fednod {

namespace {

inline void axpy(float* __restrict y, float a, const float* __restrict x, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline std::int64_t out_extent(std::int64_t in, std::int64_t k, int stride, int pad,
                               const char* what, const char* axis) {
  std::int64_t span = in + 2 * pad - k;
  if (span < 0) {
    throw DimensionError(std::string(what) + ": kernel " + std::to_string(k) +
                         " exceeds padded input " + std::to_string(in + 2 * pad) +
                         " on " + axis + " axis");
  }
  return span / stride + 1;
}

void im2col_2d(const float* src, std::int64_t IC, std::int64_t H, std::int64_t W,
               std::int64_t KH, std::int64_t KW, int stride, int pad, std::int64_t OH,
               std::int64_t OW, float* col) {
  const std::int64_t OHW = OH * OW;
  std::int64_t row = 0;
  for (std::int64_t ic = 0; ic < IC; ++ic) {
    const float* plane = src + ic * H * W;
    for (std::int64_t kh = 0; kh < KH; ++kh) {
      for (std::int64_t kw = 0; kw < KW; ++kw, ++row) {
        float* dst = col + row * OHW;
        for (std::int64_t oy = 0; oy < OH; ++oy) {
          const std::int64_t iy = oy * stride - pad + kh;
          float* d = dst + oy * OW;
          if (iy < 0 || iy >= H) {
            std::memset(d, 0, sizeof(float) * static_cast<std::size_t>(OW));
            continue;
          }
          const float* srow = plane + iy * W;
          for (std::int64_t ox = 0; ox < OW; ++ox) {
            const std::int64_t ix = ox * stride - pad + kw;
            d[ox] = (ix >= 0 && ix < W) ? srow[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_2d(const float* col, std::int64_t IC, std::int64_t H, std::int64_t W,
               std::int64_t KH, std::int64_t KW, int stride, int pad, std::int64_t OH,
               std::int64_t OW, float* dst) {
  const std::int64_t OHW = OH * OW;
  std::int64_t row = 0;
  for (std::int64_t ic = 0; ic < IC; ++ic) {
    float* plane = dst + ic * H * W;
    for (std::int64_t kh = 0; kh < KH; ++kh) {
      for (std::int64_t kw = 0; kw < KW; ++kw, ++row) {
        const float* s = col + row * OHW;
        for (std::int64_t oy = 0; oy < OH; ++oy) {
          const std::int64_t iy = oy * stride - pad + kh;
          if (iy < 0 || iy >= H) continue;
          float* drow = plane + iy * W;
          const float* srow = s + oy * OW;
          for (std::int64_t ox = 0; ox < OW; ++ox) {
            const std::int64_t ix = ox * stride - pad + kw;
            if (ix >= 0 && ix < W) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

void im2col_3d(const float* src, std::int64_t IC, std::int64_t D, std::int64_t H,
               std::int64_t W, std::int64_t KD, std::int64_t KH, std::int64_t KW,
               int stride, int pad, std::int64_t OD, std::int64_t OH, std::int64_t OW,
               float* col) {
  const std::int64_t ON = OD * OH * OW;
  std::int64_t row = 0;
  for (std::int64_t ic = 0; ic < IC; ++ic) {
    const float* vol = src + ic * D * H * W;
    for (std::int64_t kd = 0; kd < KD; ++kd) {
      for (std::int64_t kh = 0; kh < KH; ++kh) {
        for (std::int64_t kw = 0; kw < KW; ++kw, ++row) {
          float* dst = col + row * ON;
          for (std::int64_t od = 0; od < OD; ++od) {
            const std::int64_t id = od * stride - pad + kd;
            for (std::int64_t oy = 0; oy < OH; ++oy) {
              const std::int64_t iy = oy * stride - pad + kh;
              float* d = dst + (od * OH + oy) * OW;
              if (id < 0 || id >= D || iy < 0 || iy >= H) {
                std::memset(d, 0, sizeof(float) * static_cast<std::size_t>(OW));
                continue;
              }
              const float* srow = vol + (id * H + iy) * W;
              for (std::int64_t ox = 0; ox < OW; ++ox) {
                const std::int64_t ix = ox * stride - pad + kw;
                d[ox] = (ix >= 0 && ix < W) ? srow[ix] : 0.0f;
              }
            }
          }
        }
      }
    }
  }
}

void col2im_3d(const float* col, std::int64_t IC, std::int64_t D, std::int64_t H,
               std::int64_t W, std::int64_t KD, std::int64_t KH, std::int64_t KW,
               int stride, int pad, std::int64_t OD, std::int64_t OH, std::int64_t OW,
               float* dst) {
  const std::int64_t ON = OD * OH * OW;
  std::int64_t row = 0;
  for (std::int64_t ic = 0; ic < IC; ++ic) {
    float* vol = dst + ic * D * H * W;
    for (std::int64_t kd = 0; kd < KD; ++kd) {
      for (std::int64_t kh = 0; kh < KH; ++kh) {
        for (std::int64_t kw = 0; kw < KW; ++kw, ++row) {
          const float* s = col + row * ON;
          for (std::int64_t od = 0; od < OD; ++od) {
            const std::int64_t id = od * stride - pad + kd;
            if (id < 0 || id >= D) continue;
            for (std::int64_t oy = 0; oy < OH; ++oy) {
              const std::int64_t iy = oy * stride - pad + kh;
              if (iy < 0 || iy >= H) continue;
              float* drow = vol + (id * H + iy) * W;
              const float* srow = s + (od * OH + oy) * OW;
              for (std::int64_t ox = 0; ox < OW; ++ox) {
                const std::int64_t ix = ox * stride - pad + kw;
                if (ix >= 0 && ix < W) drow[ix] += srow[ox];
              }
            }
          }
        }
      }
    }
  }
}

struct ConvShape {
  std::int64_t B, IC, OC, CKK, ON;  // ON = product of output spatial extents
  std::int64_t in[3], k[3], out[3];
  int spatial;  // 2 or 3
};

ConvShape conv_shape(const Tensor& input, const LayerState& layer, int spatial,
                     const char* what) {
  require_rank(input, static_cast<std::size_t>(spatial) + 2, what);
  require_rank(layer.weight, static_cast<std::size_t>(spatial) + 2, what);
  ConvShape s{};
  s.spatial = spatial;
  s.B = input.dim(0);
  s.IC = input.dim(1);
  s.OC = layer.weight.dim(0);
  if (layer.weight.dim(1) != s.IC) {
    throw DimensionError(std::string(what) + ": input channels (axis 1) = " +
                         std::to_string(s.IC) + ", kernel expects " +
                         std::to_string(layer.weight.dim(1)));
  }
  if (layer.bias.numel() != s.OC) {
    throw DimensionError(std::string(what) + ": bias has " +
                         std::to_string(layer.bias.numel()) + " entries, expected " +
                         std::to_string(s.OC));
  }
  static const char* axis2[2] = {"height", "width"};
  static const char* axis3[3] = {"depth", "height", "width"};
  s.CKK = s.IC;
  s.ON = 1;
  for (int a = 0; a < spatial; ++a) {
    s.in[a] = input.dim(static_cast<std::size_t>(a) + 2);
    s.k[a] = layer.weight.dim(static_cast<std::size_t>(a) + 2);
    const char* name = (spatial == 2) ? axis2[a] : axis3[a];
    s.out[a] = out_extent(s.in[a], s.k[a], layer.stride, layer.pad, what, name);
    s.CKK *= s.k[a];
    s.ON *= s.out[a];
  }
  return s;
}

Tensor conv_forward_impl(const Tensor& input, const LayerState& layer, int spatial,
                         const char* what) {
  const ConvShape s = conv_shape(input, layer, spatial, what);
  std::vector<std::int64_t> oshape{s.B, s.OC};
  for (int a = 0; a < spatial; ++a) oshape.push_back(s.out[a]);
  Tensor out(oshape);

  const float* W = layer.weight.ptr();
  const float* bias = layer.bias.ptr();
  const std::int64_t in_stride = input.numel() / s.B;

#pragma omp parallel
  {
    std::vector<float> col(static_cast<std::size_t>(s.CKK * s.ON));
#pragma omp for schedule(static)
    for (std::int64_t b = 0; b < s.B; ++b) {
      const float* src = input.ptr() + b * in_stride;
      if (spatial == 2) {
        im2col_2d(src, s.IC, s.in[0], s.in[1], s.k[0], s.k[1], layer.stride, layer.pad,
                  s.out[0], s.out[1], col.data());
      } else {
        im2col_3d(src, s.IC, s.in[0], s.in[1], s.in[2], s.k[0], s.k[1], s.k[2],
                  layer.stride, layer.pad, s.out[0], s.out[1], s.out[2], col.data());
      }
      for (std::int64_t oc = 0; oc < s.OC; ++oc) {
        float* orow = out.ptr() + (b * s.OC + oc) * s.ON;
        const float bv = bias[oc];
        for (std::int64_t i = 0; i < s.ON; ++i) orow[i] = bv;
        const float* wrow = W + oc * s.CKK;
        for (std::int64_t k = 0; k < s.CKK; ++k) {
          axpy(orow, wrow[k], col.data() + k * s.ON, s.ON);
        }
      }
    }
  }
  return out;
}

ConvGrads conv_backward_impl(const Tensor& input, const LayerState& layer,
                             const Tensor& grad_out, int spatial, const char* what) {
  const ConvShape s = conv_shape(input, layer, spatial, what);
  std::vector<std::int64_t> oshape{s.B, s.OC};
  for (int a = 0; a < spatial; ++a) oshape.push_back(s.out[a]);
  if (grad_out.shape != oshape) {
    throw DimensionError(std::string(what) + ": upstream gradient " +
                         shape_str(grad_out.shape) + " does not match output " +
                         shape_str(oshape));
  }

  ConvGrads g;
  g.grad_input = Tensor(input.shape);
  g.grad_weight = Tensor(layer.weight.shape);
  g.grad_bias = Tensor(layer.bias.shape);

  const float* W = layer.weight.ptr();
  const std::int64_t in_stride = input.numel() / s.B;

  // Input gradient: per-item Wt * grad_out scattered back through col2im.
#pragma omp parallel
  {
    std::vector<float> gcol(static_cast<std::size_t>(s.CKK * s.ON));
#pragma omp for schedule(static)
    for (std::int64_t b = 0; b < s.B; ++b) {
      std::fill(gcol.begin(), gcol.end(), 0.0f);
      for (std::int64_t oc = 0; oc < s.OC; ++oc) {
        const float* grow = grad_out.ptr() + (b * s.OC + oc) * s.ON;
        const float* wrow = W + oc * s.CKK;
        for (std::int64_t k = 0; k < s.CKK; ++k) {
          axpy(gcol.data() + k * s.ON, wrow[k], grow, s.ON);
        }
      }
      float* gin = g.grad_input.ptr() + b * in_stride;
      if (spatial == 2) {
        col2im_2d(gcol.data(), s.IC, s.in[0], s.in[1], s.k[0], s.k[1], layer.stride,
                  layer.pad, s.out[0], s.out[1], gin);
      } else {
        col2im_3d(gcol.data(), s.IC, s.in[0], s.in[1], s.in[2], s.k[0], s.k[1], s.k[2],
                  layer.stride, layer.pad, s.out[0], s.out[1], s.out[2], gin);
      }
    }
  }

  // Parameter gradients: batch items accumulated in index order so results do
  // not depend on thread count.
  std::vector<float> col(static_cast<std::size_t>(s.CKK * s.ON));
  std::vector<float> colT(static_cast<std::size_t>(s.CKK * s.ON));
  for (std::int64_t b = 0; b < s.B; ++b) {
    const float* src = input.ptr() + b * in_stride;
    if (spatial == 2) {
      im2col_2d(src, s.IC, s.in[0], s.in[1], s.k[0], s.k[1], layer.stride, layer.pad,
                s.out[0], s.out[1], col.data());
    } else {
      im2col_3d(src, s.IC, s.in[0], s.in[1], s.in[2], s.k[0], s.k[1], s.k[2],
                layer.stride, layer.pad, s.out[0], s.out[1], s.out[2], col.data());
    }
    for (std::int64_t k = 0; k < s.CKK; ++k) {
      const float* srow = col.data() + k * s.ON;
      for (std::int64_t xy = 0; xy < s.ON; ++xy) colT[xy * s.CKK + k] = srow[xy];
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t oc = 0; oc < s.OC; ++oc) {
      const float* grow = grad_out.ptr() + (b * s.OC + oc) * s.ON;
      float* gwrow = g.grad_weight.ptr() + oc * s.CKK;
      for (std::int64_t xy = 0; xy < s.ON; ++xy) {
        axpy(gwrow, grow[xy], colT.data() + xy * s.CKK, s.CKK);
      }
      float gb = 0.0f;
      for (std::int64_t xy = 0; xy < s.ON; ++xy) gb += grow[xy];
      g.grad_bias.ptr()[oc] += gb;
    }
  }
  return g;
}

struct PoolShape {
  std::int64_t B, C, ON;
  std::int64_t in[3], win[3], out[3];
  int spatial;
};

PoolShape pool_shape(const Tensor& input, const LayerState& layer, int spatial,
                     const char* what) {
  require_rank(input, static_cast<std::size_t>(spatial) + 2, what);
  if (static_cast<int>(layer.pool.size()) != spatial) {
    throw DimensionError(std::string(what) + ": pool window must have " +
                         std::to_string(spatial) + " extents");
  }
  static const char* axis2[2] = {"height", "width"};
  static const char* axis3[3] = {"depth", "height", "width"};
  PoolShape s{};
  s.spatial = spatial;
  s.B = input.dim(0);
  s.C = input.dim(1);
  s.ON = 1;
  for (int a = 0; a < spatial; ++a) {
    s.in[a] = input.dim(static_cast<std::size_t>(a) + 2);
    s.win[a] = layer.pool[static_cast<std::size_t>(a)];
    const char* name = (spatial == 2) ? axis2[a] : axis3[a];
    if (s.win[a] < 1 || s.win[a] > s.in[a]) {
      throw DimensionError(std::string(what) + ": window " + std::to_string(s.win[a]) +
                           " exceeds input extent " + std::to_string(s.in[a]) + " on " +
                           name + " axis");
    }
    s.out[a] = (s.in[a] - s.win[a]) / s.win[a] + 1;
    s.ON *= s.out[a];
  }
  return s;
}

PoolResult maxpool_forward_impl(const Tensor& input, const LayerState& layer, int spatial,
                                const char* what) {
  const PoolShape s = pool_shape(input, layer, spatial, what);
  std::vector<std::int64_t> oshape{s.B, s.C};
  for (int a = 0; a < spatial; ++a) oshape.push_back(s.out[a]);
  PoolResult r;
  r.output = Tensor(oshape);
  r.argmax.assign(static_cast<std::size_t>(r.output.numel()), 0);

  const std::int64_t plane = (spatial == 2) ? s.in[0] * s.in[1] : s.in[0] * s.in[1] * s.in[2];

#pragma omp parallel for schedule(static)
  for (std::int64_t bc = 0; bc < s.B * s.C; ++bc) {
    const float* src = input.ptr() + bc * plane;
    float* dst = r.output.ptr() + bc * s.ON;
    std::int64_t* am = r.argmax.data() + bc * s.ON;
    const std::int64_t base = bc * plane;
    if (spatial == 2) {
      std::int64_t o = 0;
      for (std::int64_t oy = 0; oy < s.out[0]; ++oy) {
        for (std::int64_t ox = 0; ox < s.out[1]; ++ox, ++o) {
          float best = src[oy * s.win[0] * s.in[1] + ox * s.win[1]];
          std::int64_t besti = oy * s.win[0] * s.in[1] + ox * s.win[1];
          for (std::int64_t ky = 0; ky < s.win[0]; ++ky) {
            for (std::int64_t kx = 0; kx < s.win[1]; ++kx) {
              const std::int64_t idx = (oy * s.win[0] + ky) * s.in[1] + ox * s.win[1] + kx;
              if (src[idx] > best) {
                best = src[idx];
                besti = idx;
              }
            }
          }
          dst[o] = best;
          am[o] = base + besti;
        }
      }
    } else {
      std::int64_t o = 0;
      for (std::int64_t od = 0; od < s.out[0]; ++od) {
        for (std::int64_t oy = 0; oy < s.out[1]; ++oy) {
          for (std::int64_t ox = 0; ox < s.out[2]; ++ox, ++o) {
            std::int64_t first = (od * s.win[0] * s.in[1] + oy * s.win[1]) * s.in[2] +
                                 ox * s.win[2];
            float best = src[first];
            std::int64_t besti = first;
            for (std::int64_t kd = 0; kd < s.win[0]; ++kd) {
              for (std::int64_t ky = 0; ky < s.win[1]; ++ky) {
                for (std::int64_t kx = 0; kx < s.win[2]; ++kx) {
                  const std::int64_t idx =
                      ((od * s.win[0] + kd) * s.in[1] + oy * s.win[1] + ky) * s.in[2] +
                      ox * s.win[2] + kx;
                  if (src[idx] > best) {
                    best = src[idx];
                    besti = idx;
                  }
                }
              }
            }
            dst[o] = best;
            am[o] = base + besti;
          }
        }
      }
    }
  }
  return r;
}

}  // namespace

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::Conv3D: return "Conv3D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::MaxPool3D: return "MaxPool3D";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::SoftmaxCE: return "SoftmaxCE";
  }
  return "?";
}

Tensor conv2d_forward(const Tensor& input, const LayerState& layer) {
  return conv_forward_impl(input, layer, 2, "conv2d");
}

Tensor conv3d_forward(const Tensor& input, const LayerState& layer) {
  return conv_forward_impl(input, layer, 3, "conv3d");
}

Tensor conv_forward(const Tensor& input, const LayerState& layer) {
  return layer.kind == LayerKind::Conv3D ? conv3d_forward(input, layer)
                                         : conv2d_forward(input, layer);
}

ConvGrads conv2d_backward(const Tensor& input, const LayerState& layer, const Tensor& grad_out) {
  return conv_backward_impl(input, layer, grad_out, 2, "conv2d");
}

ConvGrads conv3d_backward(const Tensor& input, const LayerState& layer, const Tensor& grad_out) {
  return conv_backward_impl(input, layer, grad_out, 3, "conv3d");
}

ConvGrads conv_backward(const Tensor& input, const LayerState& layer, const Tensor& grad_out) {
  return layer.kind == LayerKind::Conv3D ? conv3d_backward(input, layer, grad_out)
                                         : conv2d_backward(input, layer, grad_out);
}

PoolResult maxpool2d_forward(const Tensor& input, const LayerState& layer) {
  return maxpool_forward_impl(input, layer, 2, "maxpool2d");
}

PoolResult maxpool3d_forward(const Tensor& input, const LayerState& layer) {
  return maxpool_forward_impl(input, layer, 3, "maxpool3d");
}

Tensor maxpool_backward(const Tensor& input, const PoolResult& fwd, const Tensor& grad_out) {
  require_same_shape(grad_out, fwd.output, "maxpool backward");
  Tensor gin(input.shape);
  const std::int64_t n = grad_out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    gin.ptr()[fwd.argmax[static_cast<std::size_t>(i)]] += grad_out.ptr()[i];
  }
  return gin;
}

Tensor dense_forward(const Tensor& input, const LayerState& layer) {
  require_rank(input, 2, "dense");
  require_rank(layer.weight, 2, "dense");
  const std::int64_t B = input.dim(0);
  const std::int64_t F = input.dim(1);
  const std::int64_t O = layer.weight.dim(0);
  if (layer.weight.dim(1) != F) {
    throw DimensionError("dense: input features (axis 1) = " + std::to_string(F) +
                         ", weight expects " + std::to_string(layer.weight.dim(1)));
  }
  if (layer.bias.numel() != O) {
    throw DimensionError("dense: bias has " + std::to_string(layer.bias.numel()) +
                         " entries, expected " + std::to_string(O));
  }

  // Transposed weight copy keeps the inner loop contiguous.
  std::vector<float> wt(static_cast<std::size_t>(F * O));
  for (std::int64_t o = 0; o < O; ++o) {
    const float* wrow = layer.weight.ptr() + o * F;
    for (std::int64_t i = 0; i < F; ++i) wt[static_cast<std::size_t>(i * O + o)] = wrow[i];
  }

  Tensor out({B, O});
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    float* orow = out.ptr() + b * O;
    std::memcpy(orow, layer.bias.ptr(), sizeof(float) * static_cast<std::size_t>(O));
    const float* xrow = input.ptr() + b * F;
    for (std::int64_t i = 0; i < F; ++i) {
      axpy(orow, xrow[i], wt.data() + i * O, O);
    }
  }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const LayerState& layer, const Tensor& grad_out) {
  const std::int64_t B = input.dim(0);
  const std::int64_t F = input.dim(1);
  const std::int64_t O = layer.weight.dim(0);
  if (grad_out.rank() != 2 || grad_out.dim(0) != B || grad_out.dim(1) != O) {
    throw DimensionError("dense: upstream gradient " + shape_str(grad_out.shape) +
                         " does not match output (" + std::to_string(B) + ", " +
                         std::to_string(O) + ")");
  }
  DenseGrads g;
  g.grad_input = Tensor(input.shape);
  g.grad_weight = Tensor(layer.weight.shape);
  g.grad_bias = Tensor(layer.bias.shape);

#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    float* grow = g.grad_input.ptr() + b * F;
    const float* gout = grad_out.ptr() + b * O;
    for (std::int64_t o = 0; o < O; ++o) {
      axpy(grow, gout[o], layer.weight.ptr() + o * F, F);
    }
  }

#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < O; ++o) {
    float* gwrow = g.grad_weight.ptr() + o * F;
    float gb = 0.0f;
    for (std::int64_t b = 0; b < B; ++b) {
      const float go = grad_out.ptr()[b * O + o];
      axpy(gwrow, go, input.ptr() + b * F, F);
      gb += go;
    }
    g.grad_bias.ptr()[o] = gb;
  }
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape);
  const std::int64_t n = input.numel();
  const float* x = input.ptr();
  float* y = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& output, const Tensor& grad_out) {
  require_same_shape(output, grad_out, "relu backward");
  Tensor gin(output.shape);
  const std::int64_t n = output.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    gin.ptr()[i] = output.ptr()[i] > 0.0f ? grad_out.ptr()[i] : 0.0f;
  }
  return gin;
}

Tensor dropout_forward(const Tensor& input, double p, Rng& rng, bool training,
                       Tensor* mask_out) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout probability must be in [0, 1), got " + std::to_string(p));
  }
  if (!training) {
    if (mask_out) *mask_out = Tensor();
    return input;
  }
  const float keep_scale = static_cast<float>(1.0 / (1.0 - p));
  Tensor mask(input.shape);
  Tensor out(input.shape);
  const std::int64_t n = input.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const float m = rng.uniform() >= p ? keep_scale : 0.0f;
    mask.ptr()[i] = m;
    out.ptr()[i] = input.ptr()[i] * m;
  }
  if (mask_out) *mask_out = std::move(mask);
  return out;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out) {
  require_same_shape(mask, grad_out, "dropout backward");
  Tensor gin(grad_out.shape);
  const std::int64_t n = grad_out.numel();
  for (std::int64_t i = 0; i < n; ++i) gin.ptr()[i] = grad_out.ptr()[i] * mask.ptr()[i];
  return gin;
}

double ce_loss_row(const float* logits, int num_classes, int label) {
  double m = logits[0];
  for (int c = 1; c < num_classes; ++c) m = std::max(m, static_cast<double>(logits[c]));
  double sumexp = 0.0;
  for (int c = 0; c < num_classes; ++c) sumexp += std::exp(static_cast<double>(logits[c]) - m);
  return std::log(sumexp) - (static_cast<double>(logits[label]) - m);
}

int argmax_row(const float* values, int n) {
  int best = 0;
  for (int c = 1; c < n; ++c) {
    if (values[c] > values[best]) best = c;
  }
  return best;
}

CrossEntropyResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::int64_t B = logits.dim(0);
  const std::int64_t C = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != B) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(B));
  }
  CrossEntropyResult r;
  r.grad_logits = Tensor(logits.shape);
  r.per_sample.resize(static_cast<std::size_t>(B));
  double total = 0.0;
  const float inv_b = static_cast<float>(1.0 / static_cast<double>(B));
  for (std::int64_t b = 0; b < B; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= C) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(y) +
                      " out of range [0, " + std::to_string(C) + ")");
    }
    const float* row = logits.ptr() + b * C;
    double m = row[0];
    for (std::int64_t c = 1; c < C; ++c) m = std::max(m, static_cast<double>(row[c]));
    double sumexp = 0.0;
    for (std::int64_t c = 0; c < C; ++c) sumexp += std::exp(static_cast<double>(row[c]) - m);
    const double loss = std::log(sumexp) - (static_cast<double>(row[y]) - m);
    r.per_sample[static_cast<std::size_t>(b)] = loss;
    total += loss;
    float* grow = r.grad_logits.ptr() + b * C;
    for (std::int64_t c = 0; c < C; ++c) {
      const double p = std::exp(static_cast<double>(row[c]) - m) / sumexp;
      grow[c] = (static_cast<float>(p) - (c == y ? 1.0f : 0.0f)) * inv_b;
    }
  }
  r.loss = total / static_cast<double>(B);
  return r;
}

}  // namespace fednod
