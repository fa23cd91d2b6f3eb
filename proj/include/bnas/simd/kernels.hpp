#pragma once
// Data-parallel inner loops used by the layers and the optimizer.
//
// Every kernel has a portable scalar implementation and an AVX2+FMA
// implementation. Both variants perform the same floating-point operations in
// the same order, so their outputs are bit-identical; the dispatcher picks the
// widest variant the CPU supports at first use.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace bnas::simd {

enum class Isa { Scalar, Avx2 };

struct GemmArgs {
  std::size_t m, n, k;
  const float* a;
  std::size_t lda;
  const float* b;
  std::size_t ldb;
  float* c;
  std::size_t ldc;
  bool trans_a = false;
  bool trans_b = false;
  bool accumulate = false;
  /// Promise that op(A) equals that of the previous gemm on this thread, so a
  /// packed copy may be reused.
  bool same_a = false;
};

struct KernelTable {
  /// C[M,N] (=|+=) op(A)[M,K] * op(B)[K,N]; each output is a single fma chain
  /// over k = 0..K-1. op(X) reads X transposed when the matching flag is set.
  void (*gemm)(const GemmArgs& args);
  /// out = round(clip(x, 0, 1)) with 0.5 rounding up; mask = (0 <= x <= 1).
  void (*quantize_unit)(const float* x, float* out, std::uint8_t* mask, std::size_t n);
  /// Sum of |x| with an 8-lane striped accumulator and a fixed combine tree.
  float (*abs_sum)(const float* x, std::size_t n);
  /// out = (w >= 0 ? +scale : -scale).
  void (*sign_scale)(const float* w, float scale, float* out, std::size_t n);
  /// out = mask ? g : 0.
  void (*mask_select)(const float* g, const std::uint8_t* mask, float* out, std::size_t n);
  /// v = momentum*v + (g + wd*p);  p = p - lr*v.  Unfused multiply/add.
  void (*sgd_update)(float* p, const float* g, float* v, std::size_t n, float lr, float momentum,
                     float weight_decay);
};

const KernelTable& scalar_kernels();
/// Null when the build has no AVX2 variant.
const KernelTable* avx2_kernels();

bool cpu_has_avx2();

/// Kernels in use. Defaults to the best supported ISA; the BNAS_ISA
/// environment variable ("scalar" or "avx2") overrides at first use.
const KernelTable& kernels();
Isa active_isa();
/// Force an ISA; returns false (and changes nothing) when unsupported.
bool set_isa(Isa isa);
std::string_view isa_name(Isa isa);

}  // namespace bnas::simd
