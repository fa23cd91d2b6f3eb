#pragma once
// Binary checkpoint files.
//
//   "BNASCKPT"  u32 version  u32 entry_count
//   per entry:  u16 name_len, name bytes, u32 rank, u32 dims[rank], f32 payload
//   u32 meta_len, meta JSON {"template", "code", "seed"}
//
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bnas/arch/checkpoint.hpp"

namespace bnas::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const arch::Checkpoint& ckpt);
/// Throws FormatError with the failing byte offset.
arch::Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const arch::Checkpoint& ckpt);
arch::Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace bnas::harness
