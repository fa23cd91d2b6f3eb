#include <cmath>

#include "bnas/simd/kernels.hpp"

namespace bnas::simd {
namespace {

void gemm(const GemmArgs& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    float* crow = g.c + i * g.ldc;
    for (std::size_t j = 0; j < g.n; ++j) {
      float acc = g.accumulate ? crow[j] : 0.0f;
      for (std::size_t p = 0; p < g.k; ++p) {
        const float a = g.trans_a ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
        const float b = g.trans_b ? g.b[j * g.ldb + p] : g.b[p * g.ldb + j];
        acc = std::fma(a, b, acc);
      }
      crow[j] = acc;
    }
  }
}

void quantize_unit(const float* x, float* out, std::uint8_t* mask, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float v = x[i];
    out[i] = v >= 0.5f ? 1.0f : 0.0f;
    mask[i] = (v >= 0.0f && v <= 1.0f) ? 1 : 0;
  }
}

float abs_sum(const float* x, std::size_t n) {
  float lane[8] = {};
  for (std::size_t i = 0; i < n; ++i) lane[i & 7] += std::fabs(x[i]);
  // Same tree as the AVX2 horizontal reduction.
  const float h0 = lane[0] + lane[4], h1 = lane[1] + lane[5];
  const float h2 = lane[2] + lane[6], h3 = lane[3] + lane[7];
  return (h0 + h2) + (h1 + h3);
}

void sign_scale(const float* w, float scale, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = w[i] >= 0.0f ? scale : -scale;
}

void mask_select(const float* g, const std::uint8_t* mask, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = mask[i] ? g[i] : 0.0f;
}

void sgd_update(float* p, const float* g, float* v, std::size_t n, float lr, float momentum,
                float weight_decay) {
  for (std::size_t i = 0; i < n; ++i) {
    const float step = g[i] + weight_decay * p[i];
    v[i] = momentum * v[i] + step;
    p[i] = p[i] - lr * v[i];
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static constexpr KernelTable table{gemm, quantize_unit, abs_sum, sign_scale, mask_select, sgd_update};
  return table;
}

}  // namespace bnas::simd
