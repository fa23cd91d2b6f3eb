#include "bnas/harness/search_run.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "bnas/arch/network.hpp"
#include "bnas/arch/template.hpp"
#include "bnas/error.hpp"
#include "bnas/harness/checkpoint_io.hpp"
#include "bnas/harness/code_file.hpp"
#include "bnas/harness/fileio.hpp"
#include "bnas/search/proxy.hpp"
#include "bnas/train/trainer.hpp"
#include "json_util.hpp"

namespace bnas::harness {
namespace {

using detail::Json;

constexpr std::uint64_t kSupernetStream = 0x5e9e7;

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("missing field ") + key);
  return j.at(key).get<T>();
}

std::string fmt(const char* format, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

}  // namespace

std::string format_log_record(const search::SearchLogRecord& rec) {
  Json j;
  j["generation"] = rec.generation;
  j["index"] = rec.index;
  j["code"] = detail::code_to_json(rec.code);
  j["acc"] = rec.acc;
  j["flops"] = rec.flops;
  j["flops_norm"] = rec.flops_norm;
  j["speedup"] = rec.speedup;
  j["weight_bits"] = rec.weight_bits;
  j["fitness"] = rec.fitness;
  j["eval_seed"] = rec.eval_seed;
  j["wall_time"] = rec.wall_time;
  j["elite"] = rec.elite;
  j["diverged"] = rec.diverged;
  j["selection_fallback"] = rec.selection_fallback;
  return j.dump();
}

std::string format_search_log(std::span<const search::SearchLogRecord> records) {
  std::string out;
  for (const auto& rec : records) out += format_log_record(rec) + "\n";
  return out;
}

std::vector<search::SearchLogRecord> parse_search_log(const std::string& text) {
  std::vector<search::SearchLogRecord> records;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) throw FormatError("search log ends without a newline", pos);
    const std::string line = text.substr(pos, end - pos);
    try {
      const Json j = Json::parse(line);
      if (!j.is_object() || j.size() != 14) throw std::invalid_argument("expected 14 fields");
      search::SearchLogRecord rec;
      rec.generation = field<int>(j, "generation");
      rec.index = field<std::size_t>(j, "index");
      rec.code = detail::code_from_json(j.at("code"), "code");
      rec.acc = field<double>(j, "acc");
      rec.flops = field<double>(j, "flops");
      rec.flops_norm = field<double>(j, "flops_norm");
      rec.speedup = field<double>(j, "speedup");
      rec.weight_bits = field<std::uint64_t>(j, "weight_bits");
      rec.fitness = field<double>(j, "fitness");
      rec.eval_seed = field<std::uint64_t>(j, "eval_seed");
      rec.wall_time = field<double>(j, "wall_time");
      rec.elite = field<bool>(j, "elite");
      rec.diverged = field<bool>(j, "diverged");
      rec.selection_fallback = field<bool>(j, "selection_fallback");
      records.push_back(std::move(rec));
    } catch (const Error& ex) {
      throw FormatError(std::string("corrupt search log line: ") + ex.what(), pos);
    } catch (const std::exception& ex) {
      throw FormatError(std::string("corrupt search log line: ") + ex.what(), pos);
    }
    pos = end + 1;
  }
  return records;
}

std::vector<search::SearchLogRecord> read_search_log(const std::filesystem::path& path) {
  return parse_search_log(read_text_file(path));
}

SearchRunResult run_search(const RunConfig& config, const ProgressSink& progress, int stop_after) {
  config.validate();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  const arch::NetworkTemplate tmpl = arch::template_by_name(config.template_name);
  config.dataset.require_files();

  namespace fs = std::filesystem;
  const fs::path dir = config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());

  const std::string canonical = format_run_config(config, false);
  const fs::path config_path = dir / kConfigFile;
  const fs::path log_path = dir / kLogFile;
  if (fs::exists(config_path)) {
    const RunConfig existing = read_run_config(config_path);
    if (format_run_config(existing, false) != canonical)
      throw InputError("run directory " + dir.string() + " holds a different configuration");
  } else if (fs::exists(log_path)) {
    throw InputError("run directory " + dir.string() + " has a search log but no " + kConfigFile);
  }
  write_file_atomic(config_path, format_run_config(config, true));

  std::vector<search::SearchLogRecord> log;
  if (fs::exists(log_path)) log = read_search_log(log_path);
  const std::size_t k = config.search.population_size;
  if (log.size() % k != 0)
    throw FormatError("search log holds a partial generation (" + std::to_string(log.size()) + " records)", 0);
  const int done = static_cast<int>(log.size() / k);
  if (done > 0) say("resuming after " + std::to_string(done) + " completed generation(s)");

  const data::Dataset full = config.dataset.load();
  const data::TrainValSplit split =
      data::stratified_split(full, config.proxy.train_per_class, config.proxy.val_per_class, config.proxy.split_seed);

  arch::Checkpoint supernet;
  search::ProxySetup setup;
  setup.tmpl = &tmpl;
  setup.train = &split.train;
  setup.val = &split.val;
  setup.train_config = config.proxy_train;
  setup.train_config.epochs = config.search.proxy_epochs;
  setup.lambda = config.search.lambda;
  if (config.supernet_init) {
    const fs::path ckpt_path = dir / kSupernetFile;
    if (fs::exists(ckpt_path)) {
      supernet = read_checkpoint(ckpt_path);
      say("loaded supernet from " + ckpt_path.string());
    } else {
      const std::uint64_t seed = train::mix_seed(config.search.master_seed, kSupernetStream);
      arch::Network net = arch::instantiate(tmpl, arch::uniform_code(4.0, tmpl.n_genes), seed);
      nn::TrainConfig tc = config.full_train;
      tc.seed = seed;
      say("training 4x supernet for " + std::to_string(tc.epochs) + " epoch(s)");
      train::train_network(net, split.train, tc, [&](const train::EpochStats& s) {
        say(fmt("supernet epoch %.0f loss %.4f", s.epoch, static_cast<double>(s.mean_loss)));
      });
      supernet = net.to_checkpoint();
      write_checkpoint(ckpt_path, supernet);
    }
    setup.supernet = &supernet;
  }

  search::SearchConfig sc = config.search;
  if (stop_after > 0) sc.generations = std::min(sc.generations, done + stop_after);

  auto on_generation = [&](std::span<const search::SearchLogRecord> records) {
    log.insert(log.end(), records.begin(), records.end());
    write_file_atomic(log_path, format_search_log(log));
    double best = 0.0, sum = 0.0;
    for (const auto& r : records) {
      best = std::max(best, r.fitness);
      sum += r.fitness;
    }
    say("generation " + std::to_string(records.front().generation) +
        fmt(": best fitness %.3f, mean %.3f", best, sum / static_cast<double>(records.size())));
  };

  const std::vector<search::SearchLogRecord> prior = log;
  SearchRunResult result;
  result.resumed_generations = done;
  result.search = search::evolve(tmpl.n_genes, search::proxy_evaluator(setup), sc, prior, on_generation);
  if (!result.search.log.empty())
    write_code_file(dir / kBestCodeFile, {config.template_name, result.search.best.code});
  return result;
}

}  // namespace bnas::harness
