#pragma once
// JSON helpers shared by the harness formats.

#include <cmath>
#include <string>

#include "bnas/arch/code.hpp"
#include "bnas/error.hpp"
#include "json.hpp"

namespace bnas::harness::detail {

using Json = nlohmann::ordered_json;

/// Ratios as exact decimals: integers for 1..4, 0.25 and 0.5 otherwise.
inline Json code_to_json(const arch::ExpansionCode& code) {
  Json out = Json::array();
  for (const arch::Ratio r : code.genes) {
    const double v = r.value();
    if (v == std::floor(v))
      out.push_back(static_cast<int>(v));
    else
      out.push_back(v);
  }
  return out;
}

inline arch::ExpansionCode code_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + " must be an array of ratios");
  arch::ExpansionCode code;
  for (const Json& v : j) {
    if (!v.is_number()) throw InputError(what + " holds a non-numeric ratio");
    code.genes.push_back(arch::Ratio::from_value(v.get<double>()));
  }
  return code;
}

}  // namespace bnas::harness::detail
