#include "bnas/arch/code.hpp"

#include "bnas/error.hpp"

namespace bnas::arch {
namespace {

constexpr std::array<std::size_t, Ratio::kCount> kQuarters{1, 2, 4, 8, 12, 16};
constexpr std::array<const char*, Ratio::kCount> kText{"0.25", "0.5", "1", "2", "3", "4"};
constexpr std::array<Ratio, Ratio::kCount> kAll{Ratio::from_index(0), Ratio::from_index(1),
                                               Ratio::from_index(2), Ratio::from_index(3),
                                               Ratio::from_index(4), Ratio::from_index(5)};

}  // namespace

Ratio Ratio::from_value(double value) {
  for (std::size_t i = 0; i < kCount; ++i)
    if (value * 4.0 == static_cast<double>(kQuarters[i])) return from_index(i);
  throw InputError("expansion ratio " + std::to_string(value) + " is not one of 0.25, 0.5, 1, 2, 3, 4");
}

std::span<const Ratio> Ratio::all() { return kAll; }

double Ratio::value() const { return static_cast<double>(kQuarters[index_]) / 4.0; }

std::size_t Ratio::quarters() const { return kQuarters[index_]; }

std::string Ratio::to_string() const { return kText[index_]; }

std::vector<double> ExpansionCode::values() const {
  std::vector<double> out;
  out.reserve(genes.size());
  for (Ratio r : genes) out.push_back(r.value());
  return out;
}

ExpansionCode ExpansionCode::from_values(std::span<const double> values) {
  ExpansionCode code;
  code.genes.reserve(values.size());
  for (double v : values) code.genes.push_back(Ratio::from_value(v));
  return code;
}

std::string ExpansionCode::to_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (i) out += ",";
    out += genes[i].to_string();
  }
  return out + "]";
}

ExpansionCode uniform_code(double ratio, std::size_t n) {
  return ExpansionCode{std::vector<Ratio>(n, Ratio::from_value(ratio))};
}

}  // namespace bnas::arch
