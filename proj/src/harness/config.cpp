#include "bnas/harness/config.hpp"

#include <charconv>
#include <initializer_list>
#include <set>

#include "bnas/arch/template.hpp"
#include "bnas/error.hpp"
#include "bnas/harness/fileio.hpp"
#include "json_util.hpp"

namespace bnas::harness {
namespace {

using detail::Json;

void only_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.contains(key)) throw InputError("unknown key '" + key + "' in " + where);
}

template <class T>
void read_opt(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InputError(where + "." + key + " has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

void read_train(const Json& j, const std::string& where, nn::TrainConfig& cfg, bool with_epochs) {
  if (with_epochs)
    only_keys(j, where, {"epochs", "batch_size", "lr", "decay_epochs", "decay_factor", "momentum", "weight_decay",
                         "augment", "recalibrate_bn"});
  else
    only_keys(j, where, {"batch_size", "lr", "decay_epochs", "decay_factor", "momentum", "weight_decay", "augment",
                         "recalibrate_bn"});
  if (with_epochs) read_opt(j, "epochs", cfg.epochs, where);
  read_opt(j, "batch_size", cfg.batch_size, where);
  read_opt(j, "lr", cfg.schedule.base_lr, where);
  read_opt(j, "decay_epochs", cfg.schedule.decay_epochs, where);
  read_opt(j, "decay_factor", cfg.schedule.decay_factor, where);
  read_opt(j, "momentum", cfg.momentum, where);
  read_opt(j, "weight_decay", cfg.weight_decay, where);
  read_opt(j, "augment", cfg.augment, where);
  read_opt(j, "recalibrate_bn", cfg.recalibrate_bn, where);
}

// Shortest decimal that reads back as the same float, so 0.07f prints as 0.07.
Json float_json(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return Json(std::stod(std::string(buf, res.ptr)));
}

Json train_json(const nn::TrainConfig& cfg, bool with_epochs) {
  Json j;
  if (with_epochs) j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = float_json(cfg.schedule.base_lr);
  j["decay_epochs"] = cfg.schedule.decay_epochs;
  j["decay_factor"] = float_json(cfg.schedule.decay_factor);
  j["momentum"] = float_json(cfg.momentum);
  j["weight_decay"] = float_json(cfg.weight_decay);
  j["augment"] = cfg.augment;
  j["recalibrate_bn"] = cfg.recalibrate_bn;
  return j;
}

}  // namespace

void DatasetConfig::require_files() const {
  auto need = [](const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(p)) throw IoError("dataset file not found: " + p.string());
  };
  if (format == Format::Mnist) {
    need(images);
    need(labels);
  } else {
    if (batches.empty()) throw InputError("cifar10 dataset lists no batch files");
    for (const auto& b : batches) need(b);
  }
}

data::Dataset DatasetConfig::load() const {
  require_files();
  if (format == Format::Mnist) return data::load_mnist(images, labels);
  return data::load_cifar10(batches);
}

void RunConfig::validate() const {
  arch::template_by_name(template_name);
  search.validate();
  proxy_train.validate();
  full_train.validate();
  if (proxy.train_per_class == 0 || proxy.val_per_class == 0)
    throw InputError("proxy train_per_class and val_per_class must be positive");
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& ex) {
    throw FormatError(std::string("config is not valid JSON: ") + ex.what(), ex.byte);
  }
  only_keys(j, "config",
            {"template", "dataset", "proxy", "search", "proxy_train", "full_train", "supernet_init", "output_dir"});
  RunConfig cfg;
  if (!j.contains("template")) throw InputError("config needs a template");
  read_opt(j, "template", cfg.template_name, "config");

  if (!j.contains("dataset")) throw InputError("config needs a dataset");
  const Json& ds = j["dataset"];
  only_keys(ds, "dataset", {"format", "images", "labels", "batches"});
  std::string format = "mnist";
  read_opt(ds, "format", format, "dataset");
  if (format == "mnist") {
    cfg.dataset.format = DatasetConfig::Format::Mnist;
    if (!ds.contains("images") || !ds.contains("labels") || ds.contains("batches"))
      throw InputError("mnist dataset needs images and labels (and no batches)");
    std::string images, labels;
    read_opt(ds, "images", images, "dataset");
    read_opt(ds, "labels", labels, "dataset");
    cfg.dataset.images = resolve(base_dir, images);
    cfg.dataset.labels = resolve(base_dir, labels);
  } else if (format == "cifar10") {
    cfg.dataset.format = DatasetConfig::Format::Cifar10;
    if (!ds.contains("batches") || ds.contains("images") || ds.contains("labels"))
      throw InputError("cifar10 dataset needs batches (and no images/labels)");
    std::vector<std::string> batches;
    read_opt(ds, "batches", batches, "dataset");
    for (const auto& b : batches) cfg.dataset.batches.push_back(resolve(base_dir, b));
  } else {
    throw InputError("dataset.format must be mnist or cifar10, got '" + format + "'");
  }

  if (j.contains("proxy")) {
    const Json& p = j["proxy"];
    only_keys(p, "proxy", {"train_per_class", "val_per_class", "split_seed"});
    read_opt(p, "train_per_class", cfg.proxy.train_per_class, "proxy");
    read_opt(p, "val_per_class", cfg.proxy.val_per_class, "proxy");
    read_opt(p, "split_seed", cfg.proxy.split_seed, "proxy");
  }
  if (j.contains("search")) {
    const Json& s = j["search"];
    only_keys(s, "search",
              {"population_size", "generations", "lambda", "proxy_epochs", "tournament_size", "crossover_rate",
               "mutation_rate", "elitism_count", "master_seed", "inject_anchors", "workers"});
    search::SearchConfig& sc = cfg.search;
    read_opt(s, "population_size", sc.population_size, "search");
    read_opt(s, "generations", sc.generations, "search");
    read_opt(s, "lambda", sc.lambda, "search");
    read_opt(s, "proxy_epochs", sc.proxy_epochs, "search");
    read_opt(s, "tournament_size", sc.tournament_size, "search");
    read_opt(s, "crossover_rate", sc.crossover_rate, "search");
    if (s.contains("mutation_rate") && !s["mutation_rate"].is_null()) {
      double rate = 0.0;
      read_opt(s, "mutation_rate", rate, "search");
      sc.mutation_rate = rate;
    }
    read_opt(s, "elitism_count", sc.elitism_count, "search");
    read_opt(s, "master_seed", sc.master_seed, "search");
    read_opt(s, "inject_anchors", sc.inject_anchors, "search");
    read_opt(s, "workers", sc.workers, "search");
  }
  if (j.contains("proxy_train")) read_train(j["proxy_train"], "proxy_train", cfg.proxy_train, false);
  if (j.contains("full_train")) read_train(j["full_train"], "full_train", cfg.full_train, true);
  cfg.proxy_train.epochs = cfg.search.proxy_epochs;
  read_opt(j, "supernet_init", cfg.supernet_init, "config");
  std::string out = "run";
  read_opt(j, "output_dir", out, "config");
  cfg.output_dir = resolve(base_dir, out);
  cfg.validate();
  return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  return parse_run_config(read_text_file(path), base);
}

std::string format_run_config(const RunConfig& cfg, bool include_workers) {
  Json j;
  j["template"] = cfg.template_name;
  Json ds;
  if (cfg.dataset.format == DatasetConfig::Format::Mnist) {
    ds["format"] = "mnist";
    ds["images"] = cfg.dataset.images.string();
    ds["labels"] = cfg.dataset.labels.string();
  } else {
    ds["format"] = "cifar10";
    Json b = Json::array();
    for (const auto& p : cfg.dataset.batches) b.push_back(p.string());
    ds["batches"] = b;
  }
  j["dataset"] = ds;
  j["proxy"] = {{"train_per_class", cfg.proxy.train_per_class},
                {"val_per_class", cfg.proxy.val_per_class},
                {"split_seed", cfg.proxy.split_seed}};
  const search::SearchConfig& sc = cfg.search;
  Json s;
  s["population_size"] = sc.population_size;
  s["generations"] = sc.generations;
  s["lambda"] = sc.lambda;
  s["proxy_epochs"] = sc.proxy_epochs;
  s["tournament_size"] = sc.tournament_size;
  s["crossover_rate"] = sc.crossover_rate;
  s["mutation_rate"] = sc.mutation_rate ? Json(*sc.mutation_rate) : Json(nullptr);
  s["elitism_count"] = sc.elitism_count;
  s["master_seed"] = sc.master_seed;
  s["inject_anchors"] = sc.inject_anchors;
  if (include_workers) s["workers"] = sc.workers;
  j["search"] = s;
  j["proxy_train"] = train_json(cfg.proxy_train, false);
  j["full_train"] = train_json(cfg.full_train, true);
  j["supernet_init"] = cfg.supernet_init;
  j["output_dir"] = cfg.output_dir.string();
  return j.dump(2) + "\n";
}

}  // namespace bnas::harness
