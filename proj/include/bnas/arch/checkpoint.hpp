#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bnas/arch/code.hpp"
#include "bnas/arch/template.hpp"
#include "bnas/tensor.hpp"

namespace bnas::arch {

struct CheckpointMeta {
  std::string template_name;
  ExpansionCode code;
  std::uint64_t seed = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

/// Named parameter arrays of one instantiated network, in network order.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> entries;
  CheckpointMeta meta;

  const Tensor* find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

/// Initializes a network for `code` from a checkpoint of the 4x-widened
/// supernet: every array is the leading slice of the supernet array along
/// each axis.
Checkpoint inherit_weights(const Checkpoint& supernet, const NetworkTemplate& tmpl, const ExpansionCode& code);

}  // namespace bnas::arch
