#pragma once
// 1-bit quantizers and the layers built from them.
//
// Weights:      w_b = sign(w) * mean(|w|), one scale per layer, sign(0) = +1.
// Activations:  x_b = round(clip(x, 0, 1)), 0.5 rounds up.
// Backward:     weights pass gradients straight through; activations pass
//               them where 0 <= x <= 1 (the derivative of the clip).

#include <cstdint>
#include <vector>

#include "bnas/tensor.hpp"

namespace bnas::quant {

struct BinarizedWeights {
  Tensor signs;  // +1 / -1
  float scale = 0.0f;

  /// signs * scale
  Tensor reconstruct() const;
};

struct QuantizedActivations {
  Tensor values;  // 0 / 1
  std::vector<std::uint8_t> pass_mask;
};

BinarizedWeights binarize_weights(const Tensor& w);
/// Same as binarize_weights(w).reconstruct() without materializing the signs.
Tensor binarized_weight_values(const Tensor& w);

QuantizedActivations binarize_activations(const Tensor& x);

Tensor ste_weight_grad(const Tensor& upstream, const Tensor& w);
Tensor ste_activation_grad(const Tensor& upstream, const Tensor& x);
/// As ste_activation_grad, using a mask saved by binarize_activations.
Tensor ste_activation_grad(const Tensor& upstream, const std::vector<std::uint8_t>& pass_mask);

/// Saved state of a binary_conv2d forward.
struct BinaryConvCache {
  QuantizedActivations input;
  Tensor weight;  // reconstructed w_b
};

Tensor binary_conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad,
                     BinaryConvCache* cache = nullptr);

struct BinaryConvGrads {
  Tensor input;
  Tensor weight;
};

BinaryConvGrads binary_conv2d_backward(const BinaryConvCache& cache, const Tensor& w,
                                       const Tensor& grad_output, std::size_t stride, std::size_t pad);

}  // namespace bnas::quant
