#pragma once
// Code files: {"template": name, "ratios": [..]} with ratios as exact decimals.

#include <filesystem>
#include <string>

#include "bnas/arch/code.hpp"

namespace bnas::harness {

struct CodeFile {
  std::string template_name;
  arch::ExpansionCode code;

  bool operator==(const CodeFile&) const = default;
};

std::string format_code_file(const CodeFile& file);
/// Throws InputError on unknown keys, missing fields or non-candidate ratios.
CodeFile parse_code_file(const std::string& text);

void write_code_file(const std::filesystem::path& path, const CodeFile& file);
CodeFile read_code_file(const std::filesystem::path& path);

}  // namespace bnas::harness
