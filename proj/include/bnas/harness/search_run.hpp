#pragma once
// A search run directory:
//   config.json        canonical copy of the run configuration
//   search_log.jsonl   one SearchLogRecord per line, rewritten atomically per generation
//   best_code.json     best code found (code file format)
//   supernet.ckpt      4x supernet, when supernet_init is on

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bnas/harness/config.hpp"
#include "bnas/search/evolution.hpp"

namespace bnas::harness {

inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kLogFile = "search_log.jsonl";
inline constexpr const char* kBestCodeFile = "best_code.json";
inline constexpr const char* kSupernetFile = "supernet.ckpt";

std::string format_log_record(const search::SearchLogRecord& rec);
std::string format_search_log(std::span<const search::SearchLogRecord> records);
/// Throws FormatError at the offset of the first malformed line.
std::vector<search::SearchLogRecord> parse_search_log(const std::string& text);
std::vector<search::SearchLogRecord> read_search_log(const std::filesystem::path& path);

struct SearchRunResult {
  search::SearchResult search;
  int resumed_generations = 0;  // generations taken from an existing log
};

/// Progress messages (one line each); may be empty.
using ProgressSink = std::function<void(const std::string&)>;

/// Runs (or resumes) the search described by `config` in config.output_dir.
/// Stops after `stop_after` generations of this call when positive.
SearchRunResult run_search(const RunConfig& config, const ProgressSink& progress = {}, int stop_after = 0);

}  // namespace bnas::harness
