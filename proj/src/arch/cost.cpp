#include "bnas/arch/cost.hpp"

namespace bnas::arch {

std::vector<LayerCost> layer_costs(const NetworkTemplate& tmpl, const ExpansionCode& code, Precision precision) {
  const std::vector<LayerShape> shapes = resolve_channels(tmpl, code);
  std::vector<LayerCost> costs;
  for (std::size_t i = 0; i < tmpl.layers.size(); ++i) {
    const LayerSpec& l = tmpl.layers[i];
    if (!l.is_weighted()) continue;
    const LayerShape& s = shapes[i];
    const bool binary = l.binarized && precision == Precision::Binary;
    LayerCost c{i};
    std::uint64_t weights = 0;
    if (l.kind == LayerKind::Conv) {
      weights = static_cast<std::uint64_t>(s.in_channels) * s.out_channels * l.kernel * l.kernel;
      c.macs = static_cast<double>(weights) * static_cast<double>(s.out_h * s.out_w);
    } else {
      weights = static_cast<std::uint64_t>(s.in_features) * s.out_channels;
      c.macs = static_cast<double>(weights);
    }
    c.flops = binary ? c.macs / kBinaryFlopDivisor : c.macs;
    c.weight_bits = binary ? weights + 32 : weights * 32;
    if (l.has_bias) c.weight_bits += 32ull * s.out_channels;
    costs.push_back(c);
  }
  return costs;
}

double count_flops(const NetworkTemplate& tmpl, const ExpansionCode& code, Precision precision) {
  double total = 0.0;
  for (const LayerCost& c : layer_costs(tmpl, code, precision)) total += c.flops;
  return total;
}

CostReport count_cost(const NetworkTemplate& tmpl, const ExpansionCode& code, Precision precision) {
  CostReport r;
  for (const LayerCost& c : layer_costs(tmpl, code, precision)) {
    r.flops += c.flops;
    r.weight_bits += c.weight_bits;
  }
  const ExpansionCode base = uniform_code(1.0, tmpl.n_genes);
  r.flops_norm = r.flops / count_flops(tmpl, base, Precision::Binary);
  r.speedup = count_flops(tmpl, base, Precision::Full) / r.flops;
  return r;
}

}  // namespace bnas::arch
