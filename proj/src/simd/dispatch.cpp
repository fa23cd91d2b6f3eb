#include <atomic>
#include <cstdlib>
#include <string>

#include "bnas/simd/kernels.hpp"

namespace bnas::simd {

#ifndef BNAS_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(BNAS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("BNAS_ISA")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

const KernelTable& kernels() {
  return current().load(std::memory_order_relaxed) == Isa::Avx2 ? *avx2_kernels() : scalar_kernels();
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool set_isa(Isa isa) {
  if (isa == Isa::Avx2 && !cpu_has_avx2()) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

}  // namespace bnas::simd
