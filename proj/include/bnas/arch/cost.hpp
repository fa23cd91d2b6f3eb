#pragma once
// FLOPs/memory cost model. One multiply-accumulate counts as one FLOP;
// binarized layers count 1/64 of their MACs. Pooling, batch norm, activations
// and residual adds are free.

#include <cstdint>
#include <vector>

#include "bnas/arch/template.hpp"

namespace bnas::arch {

inline constexpr double kBinaryFlopDivisor = 64.0;

enum class Precision { Binary, Full };

struct CostReport {
  double flops = 0.0;       // binary-adjusted MACs
  double flops_norm = 0.0;  // flops / flops(uniform-1x, binary)
  double speedup = 0.0;     // flops(uniform-1x, full precision) / flops
  std::uint64_t weight_bits = 0;

  bool operator==(const CostReport&) const = default;
};

struct LayerCost {
  std::size_t layer = 0;
  double macs = 0.0;   // raw
  double flops = 0.0;  // after the binary divisor
  std::uint64_t weight_bits = 0;
};

/// Per weighted layer; layers without weights are omitted.
std::vector<LayerCost> layer_costs(const NetworkTemplate& tmpl, const ExpansionCode& code,
                                   Precision precision = Precision::Binary);

/// Binary-adjusted FLOPs only.
double count_flops(const NetworkTemplate& tmpl, const ExpansionCode& code,
                   Precision precision = Precision::Binary);

CostReport count_cost(const NetworkTemplate& tmpl, const ExpansionCode& code,
                      Precision precision = Precision::Binary);

}  // namespace bnas::arch
