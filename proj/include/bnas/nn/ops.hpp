#pragma once
// Layer kernels with forward and exact backward passes. Convolutions are
// cross-correlations without bias; all accumulation happens in float32.

#include <cstdint>
#include <span>
#include <vector>

#include "bnas/tensor.hpp"

namespace bnas::nn {

inline constexpr float kBatchNormEps = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.1f;

enum class Mode { Train, Eval };

/// Spatial output size of a sliding window; throws ShapeError if the window does not fit.
std::size_t window_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

// ---- convolution -----------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t pad);

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output,
                            std::size_t stride, std::size_t pad);

// ---- fully connected -------------------------------------------------------

/// input [N,D] x weight [D,M] + bias [M].
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct FullyConnectedGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

FullyConnectedGrads fully_connected_backward(const Tensor& input, const Tensor& weight,
                                             const Tensor& grad_output);

// ---- batch norm ------------------------------------------------------------

struct RunningStats {
  Tensor mean;
  Tensor var;

  static RunningStats identity(std::size_t channels);
};

/// Saved by a train-mode forward for the backward pass.
struct BatchNormCache {
  Tensor normalized;
  std::vector<float> inv_std;
};

/// Accepts [N,C,H,W] or [N,C]. Train mode normalizes with batch statistics and
/// updates `stats` (unbiased variance) with weight `momentum`; eval mode reads `stats`.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, RunningStats& stats,
                  Mode mode, BatchNormCache* cache = nullptr, float momentum = kBatchNormMomentum);

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

BatchNormGrads batch_norm_backward(const Tensor& grad_output, const Tensor& gamma,
                                   const BatchNormCache& cache);

// ---- pooling ---------------------------------------------------------------

struct MaxPoolResult {
  Tensor output;
  /// Flat input index chosen for every output element.
  std::vector<std::uint32_t> argmax;
};

/// Ties go to the first element in row-major window order. Padding never wins.
MaxPoolResult max_pool2d(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t pad = 0);
Tensor max_pool2d_backward(const Tensor& grad_output, std::span<const std::uint32_t> argmax,
                           const Shape& input_dims);

/// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_output, const Shape& input_dims);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& grad_output, const Tensor& input);

// ---- loss ------------------------------------------------------------------

struct LossResult {
  float loss = 0.0f;
  /// (softmax - onehot) / N
  Tensor grad;
};

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Index of the largest logit per row (first on ties).
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace bnas::nn
