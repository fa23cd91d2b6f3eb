#pragma once
// CSV tables for a run directory or a single code.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bnas/arch/code.hpp"
#include "bnas/arch/cost.hpp"
#include "bnas/arch/template.hpp"
#include "bnas/search/evolution.hpp"

namespace bnas::harness {

struct GenerationSummary {
  int generation = 0;
  double best_ever = 0.0;  // non-decreasing across generations
  double best = 0.0;
  double mean = 0.0;
  arch::ExpansionCode best_ever_code;
};

/// Records must come in whole generations, in log order.
std::vector<GenerationSummary> summarize_generations(std::span<const search::SearchLogRecord> log);

/// Space-separated ratios, e.g. "1 0.25 4".
std::string code_cell(const arch::ExpansionCode& code);

/// generation,best_ever,best,mean,best_ever_code
std::string generations_csv(std::span<const search::SearchLogRecord> log);

/// One row per width-expandable layer: code channels against base and uniform widths.
std::string channels_csv(const arch::NetworkTemplate& tmpl, const arch::ExpansionCode& code);

std::string cost_csv_header();
std::string cost_csv_row(const std::string& label, const arch::CostReport& cost);

/// Full-precision 1x, binary uniforms and, if given, the binary code.
std::string costs_csv(const arch::NetworkTemplate& tmpl, const arch::ExpansionCode* code);

struct ReportPaths {
  std::filesystem::path generations, channels, costs;
};

/// Reads config, log and best code from `run_dir` and writes the three tables into `out_dir`.
ReportPaths write_report(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

}  // namespace bnas::harness
