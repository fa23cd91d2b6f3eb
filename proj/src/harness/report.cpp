#include "bnas/harness/report.hpp"

#include <algorithm>
#include <charconv>

#include "bnas/error.hpp"
#include "bnas/harness/code_file.hpp"
#include "bnas/harness/config.hpp"
#include "bnas/harness/fileio.hpp"
#include "bnas/harness/search_run.hpp"

namespace bnas::harness {
namespace {

constexpr double kUniformRatios[] = {0.25, 0.5, 1.0, 2.0, 3.0, 4.0};

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Gene that sets the width of `layer`, following ties through pools and adds;
// npos for fixed widths.
std::size_t gene_of(const arch::NetworkTemplate& tmpl, std::size_t layer) {
  for (std::size_t hop = 0; hop <= tmpl.layers.size(); ++hop) {
    const arch::LayerSpec& l = tmpl.layers[layer];
    if (!l.is_weighted()) {
      if (l.inputs.empty() || l.inputs[0] == arch::kImageInput) return std::string::npos;
      layer = static_cast<std::size_t>(l.inputs[0]);
      continue;
    }
    if (l.width.rule == arch::Width::Rule::Gene) return l.width.index;
    if (l.width.rule == arch::Width::Rule::Fixed) return std::string::npos;
    layer = l.width.index;
  }
  return std::string::npos;
}

}  // namespace

std::vector<GenerationSummary> summarize_generations(std::span<const search::SearchLogRecord> log) {
  std::vector<GenerationSummary> out;
  std::size_t i = 0;
  bool have_best = false;
  GenerationSummary running;
  while (i < log.size()) {
    const int gen = log[i].generation;
    GenerationSummary row;
    row.generation = gen;
    double sum = 0.0;
    std::size_t count = 0;
    bool first = true;
    for (; i < log.size() && log[i].generation == gen; ++i, ++count) {
      const auto& r = log[i];
      sum += r.fitness;
      if (first || r.fitness > row.best) row.best = r.fitness;
      first = false;
      if (!have_best || r.fitness > running.best_ever) {
        running.best_ever = r.fitness;
        running.best_ever_code = r.code;
        have_best = true;
      }
    }
    row.mean = sum / static_cast<double>(count);
    row.best_ever = running.best_ever;
    row.best_ever_code = running.best_ever_code;
    if (!out.empty() && gen <= out.back().generation)
      throw FormatError("search log generations are out of order", i);
    out.push_back(std::move(row));
  }
  return out;
}

std::string code_cell(const arch::ExpansionCode& code) {
  std::string out;
  for (std::size_t g = 0; g < code.size(); ++g) {
    if (g) out += ' ';
    out += code.genes[g].to_string();
  }
  return out;
}

std::string generations_csv(std::span<const search::SearchLogRecord> log) {
  std::string out = "generation,best_ever,best,mean,best_ever_code\n";
  for (const auto& row : summarize_generations(log))
    out += std::to_string(row.generation) + "," + num(row.best_ever) + "," + num(row.best) + "," + num(row.mean) +
           "," + code_cell(row.best_ever_code) + "\n";
  return out;
}

std::string channels_csv(const arch::NetworkTemplate& tmpl, const arch::ExpansionCode& code) {
  if (code.size() != tmpl.n_genes)
    throw InputError("code has " + std::to_string(code.size()) + " genes, " + tmpl.name + " needs " +
                     std::to_string(tmpl.n_genes));
  const auto shapes = arch::resolve_channels(tmpl, code);
  const auto base = arch::base_channels(tmpl);
  std::vector<std::vector<arch::LayerShape>> uniforms;
  for (double r : kUniformRatios) uniforms.push_back(arch::resolve_channels(tmpl, arch::uniform_code(r, tmpl.n_genes)));

  std::string out = "layer,name,gene,ratio,base";
  for (double r : kUniformRatios) out += ",uniform_" + num(r);
  out += ",code\n";
  for (std::size_t l = 0; l < tmpl.layers.size(); ++l) {
    const std::size_t gene = tmpl.layers[l].is_weighted() ? gene_of(tmpl, l) : std::string::npos;
    if (gene == std::string::npos) continue;
    out += std::to_string(l) + "," + tmpl.layers[l].name + "," + std::to_string(gene) + "," +
           code.genes[gene].to_string() + "," + std::to_string(base[l].out_channels);
    for (const auto& u : uniforms) out += "," + std::to_string(u[l].out_channels);
    out += "," + std::to_string(shapes[l].out_channels) + "\n";
  }
  return out;
}

std::string cost_csv_header() { return "label,flops,flops_norm,speedup,weight_bits\n"; }

std::string cost_csv_row(const std::string& label, const arch::CostReport& cost) {
  return label + "," + num(cost.flops) + "," + num(cost.flops_norm) + "," + num(cost.speedup) + "," +
         std::to_string(cost.weight_bits) + "\n";
}

std::string costs_csv(const arch::NetworkTemplate& tmpl, const arch::ExpansionCode* code) {
  std::string out = cost_csv_header();
  out += cost_csv_row("full_precision_1x",
                      arch::count_cost(tmpl, arch::uniform_code(1.0, tmpl.n_genes), arch::Precision::Full));
  for (double r : kUniformRatios)
    out += cost_csv_row("binary_uniform_" + num(r), arch::count_cost(tmpl, arch::uniform_code(r, tmpl.n_genes)));
  if (code) out += cost_csv_row("binary_code " + code_cell(*code), arch::count_cost(tmpl, *code));
  return out;
}

ReportPaths write_report(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir) {
  const RunConfig config = read_run_config(run_dir / kConfigFile);
  const arch::NetworkTemplate tmpl = arch::template_by_name(config.template_name);
  const auto log = read_search_log(run_dir / kLogFile);
  if (log.empty()) throw InputError("search log in " + run_dir.string() + " is empty");
  const auto summary = summarize_generations(log);
  arch::ExpansionCode best = summary.back().best_ever_code;
  const auto best_path = run_dir / kBestCodeFile;
  if (std::filesystem::exists(best_path)) {
    const CodeFile file = read_code_file(best_path);
    if (file.template_name != tmpl.name) throw InputError(best_path.string() + " names template " + file.template_name);
    best = file.code;
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  ReportPaths paths{out_dir / "generations.csv", out_dir / "channels.csv", out_dir / "costs.csv"};
  write_file_atomic(paths.generations, generations_csv(log));
  write_file_atomic(paths.channels, channels_csv(tmpl, best));
  write_file_atomic(paths.costs, costs_csv(tmpl, &best));
  return paths;
}

}  // namespace bnas::harness
