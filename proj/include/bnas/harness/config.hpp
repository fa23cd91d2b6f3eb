#pragma once
// Run configuration files (JSON). Unknown keys are errors; relative paths are
// resolved against the directory holding the config file.
//
// {
//   "template": "vgg_small_mini",
//   "dataset": {"format": "mnist", "images": "...", "labels": "..."}
//            | {"format": "cifar10", "batches": ["...", ...]},
//   "proxy": {"train_per_class": 500, "val_per_class": 100, "split_seed": 0},
//   "search": {"population_size", "generations", "lambda", "proxy_epochs", "tournament_size",
//              "crossover_rate", "mutation_rate", "elitism_count", "master_seed",
//              "inject_anchors", "workers"},
//   "proxy_train": {"batch_size", "lr", "decay_epochs", "decay_factor", "momentum",
//                   "weight_decay", "augment", "recalibrate_bn"},
//   "full_train": {"epochs", ...same keys as proxy_train},
//   "supernet_init": false,
//   "output_dir": "run"
// }

#include <filesystem>
#include <string>
#include <vector>

#include "bnas/data/dataset.hpp"
#include "bnas/nn/sgd.hpp"
#include "bnas/search/evolution.hpp"

namespace bnas::harness {

struct DatasetConfig {
  enum class Format { Mnist, Cifar10 };
  Format format = Format::Mnist;
  std::filesystem::path images;  // MNIST
  std::filesystem::path labels;  // MNIST
  std::vector<std::filesystem::path> batches;  // CIFAR-10

  /// Throws IoError naming the first missing file.
  void require_files() const;
  data::Dataset load() const;
};

struct ProxyDataConfig {
  std::size_t train_per_class = 500;
  std::size_t val_per_class = 100;
  std::uint64_t split_seed = 0;
};

struct RunConfig {
  std::string template_name;
  DatasetConfig dataset;
  ProxyDataConfig proxy;
  search::SearchConfig search;
  /// Epochs come from search.proxy_epochs.
  nn::TrainConfig proxy_train;
  nn::TrainConfig full_train;
  bool supernet_init = false;
  std::filesystem::path output_dir = "run";

  void validate() const;
};

/// `base_dir` anchors relative paths.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig read_run_config(const std::filesystem::path& path);

/// Canonical JSON with absolute paths; `include_workers` false drops the
/// scheduling-only field.
std::string format_run_config(const RunConfig& config, bool include_workers = true);

}  // namespace bnas::harness
