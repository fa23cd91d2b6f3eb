#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>

namespace bnas::harness {

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace bnas::harness
