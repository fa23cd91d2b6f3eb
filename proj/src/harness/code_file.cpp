#include "bnas/harness/code_file.hpp"

#include "bnas/arch/template.hpp"
#include "bnas/error.hpp"
#include "bnas/harness/fileio.hpp"
#include "json_util.hpp"

namespace bnas::harness {

std::string format_code_file(const CodeFile& file) {
  detail::Json j;
  j["template"] = file.template_name;
  j["ratios"] = detail::code_to_json(file.code);
  return j.dump() + "\n";
}

CodeFile parse_code_file(const std::string& text) {
  detail::Json j;
  try {
    j = detail::Json::parse(text);
  } catch (const detail::Json::parse_error& ex) {
    throw FormatError(std::string("code file is not valid JSON: ") + ex.what(), ex.byte);
  }
  if (!j.is_object()) throw InputError("code file must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "template" && key != "ratios") throw InputError("unknown key '" + key + "' in code file");
  if (!j.contains("template") || !j["template"].is_string()) throw InputError("code file needs a template name");
  if (!j.contains("ratios")) throw InputError("code file needs ratios");
  CodeFile file{j["template"].get<std::string>(), detail::code_from_json(j["ratios"], "ratios")};
  const std::size_t n = arch::template_by_name(file.template_name).n_genes;
  if (file.code.size() != n)
    throw InputError("template " + file.template_name + " takes " + std::to_string(n) + " ratios, code file has " +
                     std::to_string(file.code.size()));
  return file;
}

void write_code_file(const std::filesystem::path& path, const CodeFile& file) {
  write_file_atomic(path, format_code_file(file));
}

CodeFile read_code_file(const std::filesystem::path& path) { return parse_code_file(read_text_file(path)); }

}  // namespace bnas::harness
