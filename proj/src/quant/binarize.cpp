#include "bnas/quant/binarize.hpp"

#include <string>

#include "bnas/error.hpp"
#include "bnas/nn/ops.hpp"
#include "bnas/simd/kernels.hpp"

namespace bnas::quant {
namespace {

float mean_abs(const Tensor& w) {
  if (w.empty()) throw InputError("cannot binarize an empty weight tensor");
  return simd::kernels().abs_sum(w.ptr(), w.size()) / static_cast<float>(w.size());
}

}  // namespace

Tensor BinarizedWeights::reconstruct() const {
  Tensor out = signs;
  for (float& v : out.data()) v *= scale;
  return out;
}

BinarizedWeights binarize_weights(const Tensor& w) {
  BinarizedWeights b{Tensor::uninitialized(w.dims()), mean_abs(w)};
  simd::kernels().sign_scale(w.ptr(), 1.0f, b.signs.ptr(), w.size());
  return b;
}

Tensor binarized_weight_values(const Tensor& w) {
  const float scale = mean_abs(w);
  Tensor out = Tensor::uninitialized(w.dims());
  simd::kernels().sign_scale(w.ptr(), scale, out.ptr(), w.size());
  return out;
}

QuantizedActivations binarize_activations(const Tensor& x) {
  if (x.empty()) return {};
  QuantizedActivations q{Tensor::uninitialized(x.dims()), std::vector<std::uint8_t>(x.size())};
  simd::kernels().quantize_unit(x.ptr(), q.values.ptr(), q.pass_mask.data(), x.size());
  return q;
}

Tensor ste_weight_grad(const Tensor& upstream, const Tensor& w) {
  require_same_shape(upstream, w, "ste_weight_grad");
  return upstream;
}

Tensor ste_activation_grad(const Tensor& upstream, const Tensor& x) {
  require_same_shape(upstream, x, "ste_activation_grad");
  return ste_activation_grad(upstream, binarize_activations(x).pass_mask);
}

Tensor ste_activation_grad(const Tensor& upstream, const std::vector<std::uint8_t>& pass_mask) {
  if (pass_mask.size() != upstream.size())
    throw ShapeError("ste_activation_grad: mask of " + std::to_string(pass_mask.size()) + " for " +
                     shape_string(upstream.dims()));
  Tensor out = Tensor::uninitialized(upstream.dims());
  simd::kernels().mask_select(upstream.ptr(), pass_mask.data(), out.ptr(), upstream.size());
  return out;
}

Tensor binary_conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad,
                     BinaryConvCache* cache) {
  QuantizedActivations xq = binarize_activations(x);
  Tensor wb = binarized_weight_values(w);
  Tensor out = nn::conv2d(xq.values, wb, stride, pad);
  if (cache) *cache = {std::move(xq), std::move(wb)};
  return out;
}

BinaryConvGrads binary_conv2d_backward(const BinaryConvCache& cache, const Tensor& w,
                                       const Tensor& grad_output, std::size_t stride, std::size_t pad) {
  nn::Conv2dGrads g = nn::conv2d_backward(cache.input.values, cache.weight, grad_output, stride, pad);
  return {ste_activation_grad(g.input, cache.input.pass_mask), ste_weight_grad(g.weight, w)};
}

}  // namespace bnas::quant
