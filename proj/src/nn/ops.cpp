#include "bnas/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bnas/error.hpp"
#include "bnas/simd/kernels.hpp"

namespace bnas::nn {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                     shape_string(t.dims()));
}

struct ConvGeometry {
  std::size_t batch, in_ch, height, width;
  std::size_t out_ch, kh, kw;
  std::size_t out_h, out_w;
  std::size_t stride, pad;

  std::size_t patch() const { return in_ch * kh * kw; }
  std::size_t out_plane() const { return out_h * out_w; }
  bool is_pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t pad) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  if (stride == 0) throw ShapeError("conv2d stride must be positive");
  if (input.dim(1) != weight.dim(1))
    throw ShapeError("conv2d input channels " + shape_string(input.dims()) + " vs weight " +
                     shape_string(weight.dims()));
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), weight.dim(2),
                 weight.dim(3), 0, 0, stride, pad};
  g.out_h = window_output_size(g.height, g.kh, stride, pad);
  g.out_w = window_output_size(g.width, g.kw, stride, pad);
  return g;
}

// Output columns [lo, hi) whose input coordinate o*stride + offset - pad lies inside [0, extent).
struct ValidRange {
  std::size_t lo, hi;
};

ValidRange valid_range(std::size_t out, std::size_t extent, std::size_t stride, std::size_t offset, std::size_t pad) {
  if (extent + pad <= offset) return {0, 0};
  std::size_t lo = 0;
  if (pad > offset) lo = (pad - offset + stride - 1) / stride;
  const std::size_t hi = std::min(out, (extent + pad - offset - 1) / stride + 1);
  return {std::min(lo, hi), hi};
}

// cols[(c*kh + i)*kw + j][oy*out_w + ox]
void im2col(const ConvGeometry& g, const float* image, float* cols) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    const float* src = image + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      const ValidRange ry = valid_range(g.out_h, g.height, g.stride, i, g.pad);
      for (std::size_t j = 0; j < g.kw; ++j) {
        const ValidRange rx = valid_range(g.out_w, g.width, g.stride, j, g.pad);
        float* dst = cols + ((c * g.kh + i) * g.kw + j) * plane;
        std::fill(dst, dst + ry.lo * g.out_w, 0.0f);
        for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
          float* row = dst + oy * g.out_w;
          std::fill(row, row + rx.lo, 0.0f);
          if (rx.hi > rx.lo) {
            const float* srow = src + (oy * g.stride + i - g.pad) * g.width + (rx.lo * g.stride + j - g.pad);
            if (g.stride == 1) {
              std::copy(srow, srow + (rx.hi - rx.lo), row + rx.lo);
            } else {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) row[ox] = srow[(ox - rx.lo) * g.stride];
            }
          }
          std::fill(row + rx.hi, row + g.out_w, 0.0f);
        }
        std::fill(dst + ry.hi * g.out_w, dst + plane, 0.0f);
      }
    }
  }
}

// cols_t[oy*out_w + ox][(c*kh + i)*kw + j], the transpose of im2col.
void im2col_t(const ConvGeometry& g, const float* image, float* cols_t) {
  const std::size_t patch = g.patch();
  const std::size_t plane_in = g.height * g.width;
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * g.stride) - static_cast<std::ptrdiff_t>(g.pad);
    const bool rows_inside = y0 >= 0 && y0 + static_cast<std::ptrdiff_t>(g.kh) <= static_cast<std::ptrdiff_t>(g.height);
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * g.stride) - static_cast<std::ptrdiff_t>(g.pad);
      const bool inside =
          rows_inside && x0 >= 0 && x0 + static_cast<std::ptrdiff_t>(g.kw) <= static_cast<std::ptrdiff_t>(g.width);
      float* dst = cols_t + (oy * g.out_w + ox) * patch;
      if (inside) {
        const float* src = image + static_cast<std::size_t>(y0) * g.width + static_cast<std::size_t>(x0);
        for (std::size_t c = 0; c < g.in_ch; ++c, src += plane_in)
          for (std::size_t i = 0; i < g.kh; ++i)
            for (std::size_t j = 0; j < g.kw; ++j) *dst++ = src[i * g.width + j];
        continue;
      }
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const float* src = image + c * plane_in;
        for (std::size_t i = 0; i < g.kh; ++i) {
          const std::ptrdiff_t y = y0 + static_cast<std::ptrdiff_t>(i);
          for (std::size_t j = 0; j < g.kw; ++j) {
            const std::ptrdiff_t x = x0 + static_cast<std::ptrdiff_t>(j);
            const bool ok = y >= 0 && y < static_cast<std::ptrdiff_t>(g.height) && x >= 0 &&
                            x < static_cast<std::ptrdiff_t>(g.width);
            *dst++ = ok ? src[static_cast<std::size_t>(y) * g.width + static_cast<std::size_t>(x)] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const float* cols, float* image) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    float* dst = image + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      const ValidRange ry = valid_range(g.out_h, g.height, g.stride, i, g.pad);
      for (std::size_t j = 0; j < g.kw; ++j) {
        const ValidRange rx = valid_range(g.out_w, g.width, g.stride, j, g.pad);
        if (rx.hi == rx.lo) continue;
        const float* src = cols + ((c * g.kh + i) * g.kw + j) * plane;
        for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
          float* drow = dst + (oy * g.stride + i - g.pad) * g.width + (rx.lo * g.stride + j - g.pad);
          const float* srow = src + oy * g.out_w;
          if (g.stride == 1) {
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) drow[ox - rx.lo] += srow[ox];
          } else {
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) drow[(ox - rx.lo) * g.stride] += srow[ox];
          }
        }
      }
    }
  }
}

// Collapses [N,C,H,W] or [N,C] into (N, C, H*W).
struct ChannelLayout {
  std::size_t batch, channels, plane;
};

ChannelLayout channel_layout(const Tensor& t, const char* what) {
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2) * t.dim(3)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1), 1};
  throw ShapeError(std::string(what) + " expects rank 2 or 4, got " + shape_string(t.dims()));
}

}  // namespace

std::size_t window_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (kernel == 0 || stride == 0 || in + 2 * pad < kernel)
    throw ShapeError("window " + std::to_string(kernel) + "/stride " + std::to_string(stride) + "/pad " +
                     std::to_string(pad) + " does not fit extent " + std::to_string(in));
  return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(input, weight, stride, pad);
  Tensor out = Tensor::uninitialized({g.batch, g.out_ch, g.out_h, g.out_w});
  const auto& k = simd::kernels();
  const std::size_t in_size = g.in_ch * g.height * g.width;
  const std::size_t out_size = g.out_ch * g.out_plane();
  std::vector<float> cols(g.is_pointwise() ? 0 : g.patch() * g.out_plane());
  for (std::size_t n = 0; n < g.batch; ++n) {
    const float* image = input.ptr() + n * in_size;
    const float* b = image;
    if (!g.is_pointwise()) {
      im2col(g, image, cols.data());
      b = cols.data();
    }
    k.gemm({.m = g.out_ch, .n = g.out_plane(), .k = g.patch(), .a = weight.ptr(), .lda = g.patch(), .b = b,
            .ldb = g.out_plane(), .c = out.ptr() + n * out_size, .ldc = g.out_plane(), .same_a = n > 0});
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output,
                            std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(input, weight, stride, pad);
  const Shape expected{g.batch, g.out_ch, g.out_h, g.out_w};
  if (grad_output.dims() != expected)
    throw ShapeError("conv2d grad_output " + shape_string(grad_output.dims()) + ", expected " +
                     shape_string(expected));
  Conv2dGrads grads{Tensor(input.dims()), Tensor::uninitialized(weight.dims())};
  const auto& k = simd::kernels();
  const std::size_t patch = g.patch();
  const std::size_t plane = g.out_plane();
  const std::size_t in_size = g.in_ch * g.height * g.width;
  const std::size_t out_size = g.out_ch * plane;

  std::vector<float> cols_t(patch * plane);
  std::vector<float> grad_cols(g.is_pointwise() ? 0 : patch * plane);

  for (std::size_t n = 0; n < g.batch; ++n) {
    const float* image = input.ptr() + n * in_size;
    const float* dy = grad_output.ptr() + n * out_size;
    im2col_t(g, image, cols_t.data());
    // dW += dY * cols^T
    k.gemm({.m = g.out_ch, .n = patch, .k = plane, .a = dy, .lda = plane, .b = cols_t.data(), .ldb = patch,
            .c = grads.weight.ptr(), .ldc = patch, .accumulate = n > 0});
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    const float* dy = grad_output.ptr() + n * out_size;
    // dcols = W^T * dY
    float* dx = grads.input.ptr() + n * in_size;
    float* dcols = g.is_pointwise() ? dx : grad_cols.data();
    k.gemm({.m = patch, .n = plane, .k = g.out_ch, .a = weight.ptr(), .lda = patch, .b = dy, .ldb = plane,
            .c = dcols, .ldc = plane, .trans_a = true, .same_a = n > 0});
    if (!g.is_pointwise()) col2im_add(g, grad_cols.data(), dx);
  }
  return grads;
}

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "fully_connected input");
  require_rank(weight, 2, "fully_connected weight");
  const std::size_t n = input.dim(0), d = input.dim(1), m = weight.dim(1);
  if (weight.dim(0) != d)
    throw ShapeError("fully_connected input " + shape_string(input.dims()) + " vs weight " +
                     shape_string(weight.dims()));
  if (bias.dims() != Shape{m})
    throw ShapeError("fully_connected bias " + shape_string(bias.dims()) + ", expected [" + std::to_string(m) + "]");
  Tensor out = Tensor::uninitialized({n, m});
  for (std::size_t i = 0; i < n; ++i) std::copy(bias.ptr(), bias.ptr() + m, out.ptr() + i * m);
  simd::kernels().gemm({.m = n, .n = m, .k = d, .a = input.ptr(), .lda = d, .b = weight.ptr(), .ldb = m,
                        .c = out.ptr(), .ldc = m, .accumulate = true});
  return out;
}

FullyConnectedGrads fully_connected_backward(const Tensor& input, const Tensor& weight,
                                             const Tensor& grad_output) {
  require_rank(input, 2, "fully_connected input");
  require_rank(weight, 2, "fully_connected weight");
  const std::size_t n = input.dim(0), d = input.dim(1), m = weight.dim(1);
  if (weight.dim(0) != d || grad_output.dims() != Shape{n, m})
    throw ShapeError("fully_connected_backward input " + shape_string(input.dims()) + ", weight " +
                     shape_string(weight.dims()) + ", grad " + shape_string(grad_output.dims()));
  FullyConnectedGrads grads{Tensor::uninitialized(input.dims()), Tensor::uninitialized(weight.dims()), Tensor({m})};
  const auto& k = simd::kernels();
  // dX = dY * W^T,  dW = X^T * dY
  k.gemm({.m = n, .n = d, .k = m, .a = grad_output.ptr(), .lda = m, .b = weight.ptr(), .ldb = m,
          .c = grads.input.ptr(), .ldc = d, .trans_b = true});
  k.gemm({.m = d, .n = m, .k = n, .a = input.ptr(), .lda = d, .b = grad_output.ptr(), .ldb = m,
          .c = grads.weight.ptr(), .ldc = m, .trans_a = true});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) grads.bias[j] += grad_output[i * m + j];
  return grads;
}

RunningStats RunningStats::identity(std::size_t channels) {
  return {Tensor({channels}, 0.0f), Tensor({channels}, 1.0f)};
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, RunningStats& stats,
                  Mode mode, BatchNormCache* cache, float momentum) {
  const ChannelLayout l = channel_layout(input, "batch_norm");
  const Shape chan{l.channels};
  if (gamma.dims() != chan || beta.dims() != chan || stats.mean.dims() != chan || stats.var.dims() != chan)
    throw ShapeError("batch_norm channel count " + std::to_string(l.channels) + " vs gamma " +
                     shape_string(gamma.dims()) + ", beta " + shape_string(beta.dims()));
  Tensor out = Tensor::uninitialized(input.dims());
  const std::size_t count = l.batch * l.plane;

  const float* in = input.ptr();
  float* dst = out.ptr();
  if (mode == Mode::Eval) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const float inv_std = 1.0f / std::sqrt(stats.var[c] + kBatchNormEps);
      const float mean = stats.mean[c];
      const float g = gamma[c], bt = beta[c];
      for (std::size_t n = 0; n < l.batch; ++n) {
        const std::size_t base = (n * l.channels + c) * l.plane;
        for (std::size_t p = 0; p < l.plane; ++p) dst[base + p] = (in[base + p] - mean) * inv_std * g + bt;
      }
    }
    return out;
  }

  if (cache) {
    cache->normalized = Tensor::uninitialized(input.dims());
    cache->inv_std.assign(l.channels, 0.0f);
  }
  float* xhat_out = cache ? cache->normalized.ptr() : nullptr;
  for (std::size_t c = 0; c < l.channels; ++c) {
    float sum = 0.0f;
    for (std::size_t n = 0; n < l.batch; ++n) {
      const float* x = in + (n * l.channels + c) * l.plane;
      for (std::size_t p = 0; p < l.plane; ++p) sum += x[p];
    }
    const float mean = sum / static_cast<float>(count);
    float sq = 0.0f;
    for (std::size_t n = 0; n < l.batch; ++n) {
      const float* x = in + (n * l.channels + c) * l.plane;
      for (std::size_t p = 0; p < l.plane; ++p) {
        const float d = x[p] - mean;
        sq += d * d;
      }
    }
    const float var = sq / static_cast<float>(count);
    const float inv_std = 1.0f / std::sqrt(var + kBatchNormEps);
    const float g = gamma[c], bt = beta[c];
    for (std::size_t n = 0; n < l.batch; ++n) {
      const std::size_t base = (n * l.channels + c) * l.plane;
      for (std::size_t p = 0; p < l.plane; ++p) {
        const float xhat = (in[base + p] - mean) * inv_std;
        if (xhat_out) xhat_out[base + p] = xhat;
        dst[base + p] = xhat * g + bt;
      }
    }
    if (cache) cache->inv_std[c] = inv_std;
    const float unbiased = count > 1 ? sq / static_cast<float>(count - 1) : var;
    stats.mean[c] = (1.0f - momentum) * stats.mean[c] + momentum * mean;
    stats.var[c] = (1.0f - momentum) * stats.var[c] + momentum * unbiased;
  }
  return out;
}

BatchNormGrads batch_norm_backward(const Tensor& grad_output, const Tensor& gamma,
                                   const BatchNormCache& cache) {
  require_same_shape(grad_output, cache.normalized, "batch_norm_backward");
  const ChannelLayout l = channel_layout(grad_output, "batch_norm_backward");
  if (gamma.dims() != Shape{l.channels} || cache.inv_std.size() != l.channels)
    throw ShapeError("batch_norm_backward gamma " + shape_string(gamma.dims()));
  BatchNormGrads grads{Tensor::uninitialized(grad_output.dims()), Tensor({l.channels}), Tensor({l.channels})};
  const float count = static_cast<float>(l.batch * l.plane);
  for (std::size_t c = 0; c < l.channels; ++c) {
    float sum_dy = 0.0f, sum_dy_xhat = 0.0f;
    for (std::size_t n = 0; n < l.batch; ++n) {
      const std::size_t base = (n * l.channels + c) * l.plane;
      for (std::size_t p = 0; p < l.plane; ++p) {
        sum_dy += grad_output[base + p];
        sum_dy_xhat += grad_output[base + p] * cache.normalized[base + p];
      }
    }
    grads.beta[c] = sum_dy;
    grads.gamma[c] = sum_dy_xhat;
    const float scale = gamma[c] * cache.inv_std[c] / count;
    for (std::size_t n = 0; n < l.batch; ++n) {
      const std::size_t base = (n * l.channels + c) * l.plane;
      for (std::size_t p = 0; p < l.plane; ++p)
        grads.input[base + p] =
            scale * (count * grad_output[base + p] - sum_dy - cache.normalized[base + p] * sum_dy_xhat);
    }
  }
  return grads;
}

MaxPoolResult max_pool2d(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t pad) {
  require_rank(input, 4, "max_pool2d input");
  if (pad >= kernel && kernel > 0)
    throw ShapeError("max_pool2d pad " + std::to_string(pad) + " must be smaller than window " +
                     std::to_string(kernel));
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = window_output_size(h, kernel, stride, pad);
  const std::size_t ow = window_output_size(w, kernel, stride, pad);
  MaxPoolResult r{Tensor::uninitialized({n, c, oh, ow}), std::vector<std::uint32_t>(n * c * oh * ow)};
  std::size_t o = 0;
  if (pad == 0) {
    const float* in = input.ptr();
    float* out = r.output.ptr();
    for (std::size_t plane = 0; plane < n * c; ++plane) {
      const std::size_t base = plane * h * w;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
          std::size_t best_idx = base + oy * stride * w + ox * stride;
          float best = in[best_idx];
          for (std::size_t i = 0; i < kernel; ++i) {
            const std::size_t row = base + (oy * stride + i) * w + ox * stride;
            for (std::size_t j = 0; j < kernel; ++j) {
              if (in[row + j] > best) {
                best = in[row + j];
                best_idx = row + j;
              }
            }
          }
          out[o] = best;
          r.argmax[o] = static_cast<std::uint32_t>(best_idx);
        }
      }
    }
    return r;
  }
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        float best = -std::numeric_limits<float>::infinity();
        std::size_t best_idx = 0;
        bool found = false;
        for (std::size_t i = 0; i < kernel; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * stride + i) - static_cast<std::ptrdiff_t>(pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t j = 0; j < kernel; ++j) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * stride + j) - static_cast<std::ptrdiff_t>(pad);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t idx = base + static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
            if (!found || input[idx] > best) {
              best = input[idx];
              best_idx = idx;
              found = true;
            }
          }
        }
        r.output[o] = best;
        r.argmax[o] = static_cast<std::uint32_t>(best_idx);
      }
    }
  }
  return r;
}

Tensor max_pool2d_backward(const Tensor& grad_output, std::span<const std::uint32_t> argmax,
                           const Shape& input_dims) {
  if (argmax.size() != grad_output.size())
    throw ShapeError("max_pool2d_backward: " + std::to_string(argmax.size()) + " indices for grad " +
                     shape_string(grad_output.dims()));
  Tensor grad(input_dims);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_output[i];
  return grad;
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 4, "global_avg_pool input");
  const std::size_t n = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  Tensor out({n, c});
  const float inv = 1.0f / static_cast<float>(plane);
  for (std::size_t i = 0; i < n * c; ++i) {
    float sum = 0.0f;
    for (std::size_t p = 0; p < plane; ++p) sum += input[i * plane + p];
    out[i] = sum * inv;
  }
  return out;
}

Tensor global_avg_pool_backward(const Tensor& grad_output, const Shape& input_dims) {
  if (input_dims.size() != 4 || grad_output.dims() != Shape{input_dims[0], input_dims[1]})
    throw ShapeError("global_avg_pool_backward grad " + shape_string(grad_output.dims()) + " for input " +
                     shape_string(input_dims));
  Tensor grad(input_dims);
  const std::size_t plane = input_dims[2] * input_dims[3];
  const float inv = 1.0f / static_cast<float>(plane);
  for (std::size_t i = 0; i < grad_output.size(); ++i)
    std::fill_n(grad.ptr() + i * plane, plane, grad_output[i] * inv);
  return grad;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& grad_output, const Tensor& input) {
  require_same_shape(grad_output, input, "relu_backward");
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(input[i] > 0.0f)) grad[i] = 0.0f;
  return grad;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     shape_string(logits.dims()));
  LossResult r{0.0f, Tensor(logits.dims())};
  const float inv_n = 1.0f / static_cast<float>(n);
  float total = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw InputError("label " + std::to_string(label) + " at row " + std::to_string(i) +
                       " outside [0," + std::to_string(k) + ")");
    const float* row = logits.ptr() + i * k;
    const float peak = *std::max_element(row, row + k);
    float denom = 0.0f;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(row[j] - peak);
    const float log_denom = std::log(denom);
    total += log_denom - (row[label] - peak);
    float* g = r.grad.ptr() + i * k;
    for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(row[j] - peak) / denom * inv_n;
    g[label] -= inv_n;
  }
  r.loss = total * inv_n;
  return r;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "argmax_rows");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = logits.ptr() + i * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

}  // namespace bnas::nn
