// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bnas/simd/kernels.hpp"

namespace bnas::simd {
namespace {

constexpr std::size_t kRows = 6;

constexpr std::size_t kKc = 256;  // depth of one k block
constexpr std::size_t kNc = 512;  // columns of B packed at a time

// Copies op(B)[p0:p0+kc, j0:j0+cols] into a dense kc x width panel,
// zero-padding columns past `cols`.
void pack_panel(const GemmArgs& g, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t cols,
                std::size_t width, float* panel) {
  for (std::size_t p = 0; p < kc; ++p) {
    float* dst = panel + p * width;
    std::size_t j = 0;
    if (!g.trans_b) {
      const float* src = g.b + (p0 + p) * g.ldb + j0;
      for (; j < cols; ++j) dst[j] = src[j];
    } else {
      const float* src = g.b + j0 * g.ldb + p0 + p;
      for (; j < cols; ++j) dst[j] = src[j * g.ldb];
    }
    for (; j < width; ++j) dst[j] = 0.0f;
  }
}

// op(A)[i0:i0+rows, p0:p0+kc] as a kc x rows block: block[p*rows + r].
void pack_rows(const GemmArgs& g, std::size_t i0, std::size_t rows, std::size_t p0, std::size_t kc, float* block) {
  if (g.trans_a) {
    for (std::size_t p = 0; p < kc; ++p)
      for (std::size_t r = 0; r < rows; ++r) block[p * rows + r] = g.a[(p0 + p) * g.lda + i0 + r];
    return;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const float* src = g.a + (i0 + r) * g.lda + p0;
    for (std::size_t p = 0; p < kc; ++p) block[p * rows + r] = src[p];
  }
}

#define BNAS_UNROLL _Pragma("GCC unroll 16")

template <std::size_t R, std::size_t V>
void micro_kernel(std::size_t k, const float* rows, const float* panel, std::size_t ldp, float* c,
                  std::size_t ldc, std::size_t cols, bool accumulate) {
  constexpr std::size_t W = 8 * V;
  alignas(32) float tile[R][W];
  const bool full = cols == W;
  if (accumulate && !full) {
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t j = 0; j < W; ++j) tile[r][j] = j < cols ? c[r * ldc + j] : 0.0f;
  }
  __m256 acc[R][V];
  BNAS_UNROLL
  for (std::size_t r = 0; r < R; ++r) {
    BNAS_UNROLL
    for (std::size_t v = 0; v < V; ++v) {
      if (!accumulate)
        acc[r][v] = _mm256_setzero_ps();
      else if (full)
        acc[r][v] = _mm256_loadu_ps(c + r * ldc + 8 * v);
      else
        acc[r][v] = _mm256_load_ps(&tile[r][8 * v]);
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    __m256 bv[V];
    BNAS_UNROLL
    for (std::size_t v = 0; v < V; ++v) bv[v] = _mm256_loadu_ps(panel + p * ldp + 8 * v);
    BNAS_UNROLL
    for (std::size_t r = 0; r < R; ++r) {
      const __m256 av = _mm256_broadcast_ss(rows + p * R + r);
      BNAS_UNROLL
      for (std::size_t v = 0; v < V; ++v) acc[r][v] = _mm256_fmadd_ps(av, bv[v], acc[r][v]);
    }
  }
  if (full) {
    BNAS_UNROLL
    for (std::size_t r = 0; r < R; ++r) {
      BNAS_UNROLL
      for (std::size_t v = 0; v < V; ++v) _mm256_storeu_ps(c + r * ldc + 8 * v, acc[r][v]);
    }
    return;
  }
  BNAS_UNROLL
  for (std::size_t r = 0; r < R; ++r) {
    BNAS_UNROLL
    for (std::size_t v = 0; v < V; ++v) _mm256_store_ps(&tile[r][8 * v], acc[r][v]);
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < cols; ++j) c[r * ldc + j] = tile[r][j];
}

template <std::size_t V>
void row_block(std::size_t rows, std::size_t k, const float* block, const float* panel, std::size_t ldp,
               float* c, std::size_t ldc, std::size_t cols, bool accumulate) {
  switch (rows) {
    case 6: micro_kernel<6, V>(k, block, panel, ldp, c, ldc, cols, accumulate); break;
    case 5: micro_kernel<5, V>(k, block, panel, ldp, c, ldc, cols, accumulate); break;
    case 4: micro_kernel<4, V>(k, block, panel, ldp, c, ldc, cols, accumulate); break;
    case 3: micro_kernel<3, V>(k, block, panel, ldp, c, ldc, cols, accumulate); break;
    case 2: micro_kernel<2, V>(k, block, panel, ldp, c, ldc, cols, accumulate); break;
    default: micro_kernel<1, V>(k, block, panel, ldp, c, ldc, cols, accumulate); break;
  }
}

void gemm(const GemmArgs& g) {
  if (g.m == 0 || g.n == 0) return;
  if (g.k == 0) {
    if (!g.accumulate)
      for (std::size_t i = 0; i < g.m; ++i) std::fill_n(g.c + i * g.ldc, g.n, 0.0f);
    return;
  }
  thread_local std::vector<float> panels;
  thread_local std::vector<float> blocks;
  const std::size_t row_blocks = (g.m + kRows - 1) / kRows;
  const std::size_t m_pad = row_blocks * kRows;
  // All of op(A), packed once: k block p0 starts at p0 * m_pad, row block b
  // at b * kRows * kc inside it.
  if (!g.same_a || blocks.size() != m_pad * g.k) {
    blocks.resize(m_pad * g.k);
    for (std::size_t p0 = 0; p0 < g.k; p0 += kKc) {
      const std::size_t kc = std::min(kKc, g.k - p0);
      for (std::size_t b = 0; b < row_blocks; ++b) {
        const std::size_t rows = std::min(kRows, g.m - b * kRows);
        pack_rows(g, b * kRows, rows, p0, kc, blocks.data() + p0 * m_pad + b * kRows * kc);
      }
    }
  }
  panels.resize(kKc * kNc);
  for (std::size_t jc = 0; jc < g.n; jc += kNc) {
    const std::size_t nc = std::min(kNc, g.n - jc);
    for (std::size_t p0 = 0; p0 < g.k; p0 += kKc) {
      const std::size_t kc = std::min(kKc, g.k - p0);
      const bool accumulate = g.accumulate || p0 > 0;
      for (std::size_t j = 0; j < nc; j += 16) {
        const std::size_t cols = std::min<std::size_t>(16, nc - j);
        pack_panel(g, p0, kc, jc + j, cols, cols > 8 ? 16 : 8, panels.data() + j * kc);
      }
      for (std::size_t b = 0; b < row_blocks; ++b) {
        const std::size_t i0 = b * kRows;
        const std::size_t rows = std::min(kRows, g.m - i0);
        const float* block = blocks.data() + p0 * m_pad + i0 * kc;
        for (std::size_t j = 0; j < nc; j += 16) {
          const std::size_t cols = std::min<std::size_t>(16, nc - j);
          const float* panel = panels.data() + j * kc;
          float* c = g.c + i0 * g.ldc + jc + j;
          if (cols > 8)
            row_block<2>(rows, kc, block, panel, 16, c, g.ldc, cols, accumulate);
          else
            row_block<1>(rows, kc, block, panel, 8, c, g.ldc, cols, accumulate);
        }
      }
    }
  }
}

void quantize_unit(const float* x, float* out, std::uint8_t* mask, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 half = _mm256_set1_ps(0.5f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    _mm256_storeu_ps(out + i, _mm256_and_ps(_mm256_cmp_ps(v, half, _CMP_GE_OQ), one));
    const __m256 inside =
        _mm256_and_ps(_mm256_cmp_ps(v, zero, _CMP_GE_OQ), _mm256_cmp_ps(v, one, _CMP_LE_OQ));
    const __m256i ones = _mm256_and_si256(_mm256_castps_si256(inside), _mm256_set1_epi32(1));
    const __m128i words = _mm_packs_epi32(_mm256_castsi256_si128(ones), _mm256_extracti128_si256(ones, 1));
    _mm_storel_epi64(reinterpret_cast<__m128i*>(mask + i), _mm_packus_epi16(words, words));
  }
  for (; i < n; ++i) {
    const float v = x[i];
    out[i] = v >= 0.5f ? 1.0f : 0.0f;
    mask[i] = (v >= 0.0f && v <= 1.0f) ? 1 : 0;
  }
}

float abs_sum(const float* x, std::size_t n) {
  const __m256 sign_mask = _mm256_set1_ps(-0.0f);
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_andnot_ps(sign_mask, _mm256_loadu_ps(x + i)));
  alignas(32) float lane[8];
  _mm256_store_ps(lane, acc);
  for (; i < n; ++i) lane[i & 7] += std::fabs(x[i]);
  const float h0 = lane[0] + lane[4], h1 = lane[1] + lane[5];
  const float h2 = lane[2] + lane[6], h3 = lane[3] + lane[7];
  return (h0 + h2) + (h1 + h3);
}

void sign_scale(const float* w, float scale, float* out, std::size_t n) {
  const __m256 pos = _mm256_set1_ps(scale);
  const __m256 neg = _mm256_set1_ps(-scale);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 ge = _mm256_cmp_ps(_mm256_loadu_ps(w + i), zero, _CMP_GE_OQ);
    _mm256_storeu_ps(out + i, _mm256_blendv_ps(neg, pos, ge));
  }
  for (; i < n; ++i) out[i] = w[i] >= 0.0f ? scale : -scale;
}

void mask_select(const float* g, const std::uint8_t* mask, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + i));
    const __m256i lanes = _mm256_cvtepu8_epi32(bytes);
    const __m256 keep = _mm256_castsi256_ps(_mm256_cmpgt_epi32(lanes, _mm256_setzero_si256()));
    _mm256_storeu_ps(out + i, _mm256_and_ps(_mm256_loadu_ps(g + i), keep));
  }
  for (; i < n; ++i) out[i] = mask[i] ? g[i] : 0.0f;
}

void sgd_update(float* p, const float* g, float* v, std::size_t n, float lr, float momentum,
                float weight_decay) {
  const __m256 lr_v = _mm256_set1_ps(lr);
  const __m256 mom_v = _mm256_set1_ps(momentum);
  const __m256 wd_v = _mm256_set1_ps(weight_decay);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 pv = _mm256_loadu_ps(p + i);
    const __m256 step = _mm256_add_ps(_mm256_loadu_ps(g + i), _mm256_mul_ps(wd_v, pv));
    const __m256 vel = _mm256_add_ps(_mm256_mul_ps(mom_v, _mm256_loadu_ps(v + i)), step);
    _mm256_storeu_ps(v + i, vel);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(pv, _mm256_mul_ps(lr_v, vel)));
  }
  for (; i < n; ++i) {
    const float step = g[i] + weight_decay * p[i];
    v[i] = momentum * v[i] + step;
    p[i] = p[i] - lr * v[i];
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static constexpr KernelTable table{gemm, quantize_unit, abs_sum, sign_scale, mask_select, sgd_update};
  return &table;
}

}  // namespace bnas::simd
