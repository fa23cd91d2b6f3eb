// bnas: cost tables, search, training, evaluation, weight inheritance and reports.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "bnas/arch/checkpoint.hpp"
#include "bnas/arch/cost.hpp"
#include "bnas/arch/network.hpp"
#include "bnas/data/dataset.hpp"
#include "bnas/error.hpp"
#include "bnas/harness/checkpoint_io.hpp"
#include "bnas/harness/code_file.hpp"
#include "bnas/harness/config.hpp"
#include "bnas/harness/report.hpp"
#include "bnas/harness/search_run.hpp"
#include "bnas/simd/kernels.hpp"
#include "bnas/train/trainer.hpp"

namespace {

using namespace bnas;
namespace fs = std::filesystem;

constexpr int kUsageExit = 64;
constexpr int kInternalExit = 70;

// Code given as --uniform, --ratios or --code; the template may come from the code file.
struct CodeArgs {
  std::string template_name;
  std::optional<double> uniform;
  std::vector<double> ratios;
  std::string code_file;

  void add(CLI::App* cmd, bool need_template = true) {
    auto* t = cmd->add_option("--template", template_name, "vgg_small | vgg_small_mini | resnet18");
    if (need_template) t->check(CLI::IsMember(arch::template_names()));
    auto* u = cmd->add_option("--uniform", uniform, "every gene set to this ratio");
    auto* r = cmd->add_option("--ratios", ratios, "one ratio per gene")->delimiter(',');
    auto* c = cmd->add_option("--code", code_file, "code file");
    u->excludes(r)->excludes(c);
    r->excludes(c);
  }

  std::pair<arch::NetworkTemplate, arch::ExpansionCode> resolve(std::optional<std::string> fallback = {}) const {
    std::string name = template_name;
    arch::ExpansionCode code;
    if (!code_file.empty()) {
      const harness::CodeFile file = harness::read_code_file(code_file);
      if (!name.empty() && name != file.template_name)
        throw InputError(code_file + " is a " + file.template_name + " code, not " + name);
      name = file.template_name;
      code = file.code;
    }
    if (name.empty() && fallback) name = *fallback;
    if (name.empty()) throw InputError("--template is required");
    arch::NetworkTemplate tmpl = arch::template_by_name(name);
    if (uniform) code = arch::uniform_code(*uniform, tmpl.n_genes);
    else if (!ratios.empty()) code = arch::ExpansionCode::from_values(ratios);
    else if (code_file.empty()) throw InputError("give one of --uniform, --ratios or --code");
    if (code.size() != tmpl.n_genes)
      throw InputError(name + " needs " + std::to_string(tmpl.n_genes) + " genes, got " + std::to_string(code.size()));
    return {std::move(tmpl), std::move(code)};
  }
};

struct DataArgs {
  std::string mnist_images, mnist_labels;
  std::vector<std::string> cifar;
  std::size_t per_class = 0;
  std::uint64_t subset_seed = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--mnist-images", mnist_images, "MNIST IDX image file");
    cmd->add_option("--mnist-labels", mnist_labels, "MNIST IDX label file");
    cmd->add_option("--cifar", cifar, "CIFAR-10 binary batch files");
    cmd->add_option("--per-class", per_class, "stratified subset size per class (0: all)");
    cmd->add_option("--subset-seed", subset_seed, "seed of the stratified subset");
  }

  bool given() const { return !mnist_images.empty() || !mnist_labels.empty() || !cifar.empty(); }

  data::Dataset load(const harness::DatasetConfig* fallback) const {
    harness::DatasetConfig cfg;
    if (given()) {
      if (!cifar.empty() && (!mnist_images.empty() || !mnist_labels.empty()))
        throw InputError("give either MNIST or CIFAR-10 files, not both");
      if (cifar.empty()) {
        if (mnist_images.empty() || mnist_labels.empty())
          throw InputError("--mnist-images and --mnist-labels go together");
        cfg.images = mnist_images;
        cfg.labels = mnist_labels;
      } else {
        cfg.format = harness::DatasetConfig::Format::Cifar10;
        cfg.batches.assign(cifar.begin(), cifar.end());
      }
    } else if (fallback) {
      cfg = *fallback;
    } else {
      throw InputError("no dataset: pass --mnist-images/--mnist-labels, --cifar or --config");
    }
    cfg.require_files();
    data::Dataset ds = cfg.load();
    return per_class ? data::stratified_subset(ds, per_class, subset_seed) : ds;
  }
};

struct TrainArgs {
  std::optional<int> epochs, batch_size;
  std::optional<float> lr, momentum, weight_decay, decay_factor;
  std::optional<std::vector<int>> decay_epochs;
  bool augment = false, no_recalibrate = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch-size", batch_size, "minibatch size");
    cmd->add_option("--lr", lr, "base learning rate");
    cmd->add_option("--decay-epochs", decay_epochs, "epochs at which the rate decays")->delimiter(',');
    cmd->add_option("--decay-factor", decay_factor, "learning-rate decay factor");
    cmd->add_option("--momentum", momentum, "SGD momentum");
    cmd->add_option("--weight-decay", weight_decay, "L2 weight decay");
    cmd->add_flag("--augment", augment, "pad-crop-flip augmentation");
    cmd->add_flag("--no-recalibrate", no_recalibrate, "keep running batch-norm statistics");
  }

  nn::TrainConfig apply(nn::TrainConfig c) const {
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (lr) c.schedule.base_lr = *lr;
    if (decay_epochs) c.schedule.decay_epochs = *decay_epochs;
    if (decay_factor) c.schedule.decay_factor = *decay_factor;
    if (momentum) c.momentum = *momentum;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (augment) c.augment = true;
    if (no_recalibrate) c.recalibrate_bn = false;
    c.validate();
    return c;
  }
};

void print_cost(const std::string& label, const arch::CostReport& c) {
  std::printf("flops       %.6g (%.1fM)\n", c.flops, c.flops / 1e6);
  std::printf("flops_norm  %.6g\n", c.flops_norm);
  std::printf("speedup     %.6g\n", c.speedup);
  std::printf("weight_bits %llu\n", static_cast<unsigned long long>(c.weight_bits));
  std::cout << harness::cost_csv_header() << harness::cost_csv_row(label, c);
}

arch::Precision precision_of(bool full) { return full ? arch::Precision::Full : arch::Precision::Binary; }

std::string elapsed(std::chrono::steady_clock::time_point start) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fs", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary neural architecture search over channel widths"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "bnas 1.0");

  // flops
  auto* flops = app.add_subcommand("flops", "cost of a template at a code");
  CodeArgs flops_code;
  bool flops_full = false, flops_binary = false;
  flops_code.add(flops);
  auto* fb = flops->add_flag("--binary", flops_binary, "binarized inner layers (default)");
  flops->add_flag("--full-precision", flops_full, "every layer at 32 bits")->excludes(fb);

  // search
  auto* search = app.add_subcommand("search", "run or resume an evolutionary search");
  std::string search_config, search_out;
  std::optional<std::uint64_t> search_seed;
  std::optional<std::size_t> search_workers;
  bool supernet_init = false;
  int stop_after = 0;
  search->add_option("--config", search_config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  search->add_option("--out", search_out, "run directory (overrides output_dir)");
  search->add_option("--seed", search_seed, "master seed (overrides search.master_seed)");
  search->add_option("--workers", search_workers, "evaluation threads (default: config, 0 = all cores)");
  search->add_flag("--supernet-init", supernet_init, "inherit candidate weights from a 4x supernet");
  search->add_option("--stop-after", stop_after, "stop after this many new generations");

  // train
  auto* train_cmd = app.add_subcommand("train", "train one architecture and write a checkpoint");
  CodeArgs train_code;
  DataArgs train_data;
  TrainArgs train_args;
  std::string train_config, train_out, train_inherit;
  std::uint64_t train_seed = 0;
  bool train_full = false;
  train_code.add(train_cmd, false);
  train_data.add(train_cmd);
  train_args.add(train_cmd);
  train_cmd->add_option("--config", train_config, "run configuration supplying dataset and full_train")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--inherit", train_inherit, "initialize from a 4x supernet checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", train_seed, "initialization and batch-order seed");
  train_cmd->add_option("--out", train_out, "checkpoint to write")->required();
  train_cmd->add_flag("--full-precision", train_full, "train without binarization");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Top-1 accuracy of a checkpoint");
  DataArgs eval_data;
  std::string eval_ckpt, eval_config;
  bool eval_full = false;
  eval_cmd->add_option("checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval_data.add(eval_cmd);
  eval_cmd->add_option("--config", eval_config, "run configuration supplying the dataset")->check(CLI::ExistingFile);
  eval_cmd->add_flag("--full-precision", eval_full, "checkpoint holds a full-precision network");

  // inherit
  auto* inherit_cmd = app.add_subcommand("inherit", "slice a 4x supernet checkpoint down to a code");
  CodeArgs inherit_code;
  std::string inherit_supernet, inherit_out;
  inherit_code.add(inherit_cmd, false);
  inherit_cmd->add_option("--supernet", inherit_supernet, "4x supernet checkpoint")->required()->check(CLI::ExistingFile);
  inherit_cmd->add_option("--out", inherit_out, "checkpoint to write")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "CSV tables for a run directory or a code");
  std::string report_run, report_out;
  CodeArgs report_code;
  report_cmd->add_option("run_dir", report_run, "search run directory")->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report_out, "directory for the CSV files (default: run_dir)");
  report_code.add(report_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageExit;
  }

  try {
    if (*flops) {
      auto [tmpl, code] = flops_code.resolve();
      const auto cost = arch::count_cost(tmpl, code, precision_of(flops_full));
      print_cost(tmpl.name + (flops_full ? " full " : " binary ") + harness::code_cell(code), cost);
    } else if (*search) {
      harness::RunConfig cfg = harness::read_run_config(search_config);
      if (!search_out.empty()) cfg.output_dir = fs::absolute(search_out);
      if (search_seed) cfg.search.master_seed = *search_seed;
      if (search_workers) cfg.search.workers = *search_workers;
      if (cfg.search.workers == 0) cfg.search.workers = std::max(1u, std::thread::hardware_concurrency());
      if (supernet_init) cfg.supernet_init = true;
      std::cerr << "kernels: " << simd::isa_name(simd::active_isa()) << ", workers: " << cfg.search.workers << "\n";
      const auto start = std::chrono::steady_clock::now();
      const auto result = harness::run_search(cfg, [&](const std::string& msg) {
        std::cerr << "[" << elapsed(start) << "] " << msg << "\n";
      }, stop_after);
      const auto& best = result.search.best;
      std::printf("best code    %s\n", harness::code_cell(best.code).c_str());
      std::printf("best fitness %.4f (acc %.2f%%, flops_norm %.4f)\n", best.fitness, best.acc, best.cost.flops_norm);
      std::printf("run dir      %s\n", cfg.output_dir.string().c_str());
    } else if (*train_cmd) {
      std::optional<harness::RunConfig> cfg;
      if (!train_config.empty()) cfg = harness::read_run_config(train_config);
      auto [tmpl, code] = train_code.resolve(cfg ? std::optional(cfg->template_name) : std::nullopt);
      const data::Dataset ds = train_data.load(cfg ? &cfg->dataset : nullptr);
      nn::TrainConfig tc = train_args.apply(cfg ? cfg->full_train : nn::TrainConfig{});
      tc.seed = train_seed;
      arch::Network net = arch::instantiate(tmpl, code, train_seed, precision_of(train_full));
      if (!train_inherit.empty()) net.load_checkpoint(arch::inherit_weights(harness::read_checkpoint(train_inherit), tmpl, code));
      const auto start = std::chrono::steady_clock::now();
      const auto res = train::train_network(net, ds, tc, [&](const train::EpochStats& s) {
        std::fprintf(stderr, "[%s] epoch %d lr %.4g loss %.4f running acc %.2f%%\n", elapsed(start).c_str(), s.epoch,
                     static_cast<double>(s.lr), static_cast<double>(s.mean_loss), s.running_acc);
      });
      if (res.diverged) std::fprintf(stderr, "training diverged after %d epoch(s)\n", res.epochs_run);
      harness::write_checkpoint(train_out, net.to_checkpoint());
      std::printf("train top1 %.2f%%\n", train::evaluate_accuracy(net, ds));
      std::printf("checkpoint %s\n", train_out.c_str());
    } else if (*eval_cmd) {
      std::optional<harness::RunConfig> cfg;
      if (!eval_config.empty()) cfg = harness::read_run_config(eval_config);
      const arch::Checkpoint ckpt = harness::read_checkpoint(eval_ckpt);
      const data::Dataset ds = eval_data.load(cfg ? &cfg->dataset : nullptr);
      arch::Network net = arch::instantiate(arch::template_by_name(ckpt.meta.template_name), ckpt.meta.code,
                                            ckpt.meta.seed, precision_of(eval_full));
      net.load_checkpoint(ckpt);
      std::printf("top1 %.2f%%\n", train::evaluate_accuracy(net, ds));
    } else if (*inherit_cmd) {
      const arch::Checkpoint supernet = harness::read_checkpoint(inherit_supernet);
      auto [tmpl, code] = inherit_code.resolve(supernet.meta.template_name);
      harness::write_checkpoint(inherit_out, arch::inherit_weights(supernet, tmpl, code));
      std::printf("checkpoint %s\n", inherit_out.c_str());
    } else if (*report_cmd) {
      const bool code_given = report_code.uniform || !report_code.ratios.empty() || !report_code.code_file.empty();
      if (report_run.empty() == !code_given) throw InputError("report takes a run directory or a code, not both");
      if (!report_run.empty()) {
        const auto paths = harness::write_report(report_run, report_out.empty() ? report_run : report_out);
        for (const auto& p : {paths.generations, paths.channels, paths.costs}) std::printf("%s\n", p.string().c_str());
      } else {
        auto [tmpl, code] = report_code.resolve();
        std::cout << harness::channels_csv(tmpl, code) << "\n" << harness::costs_csv(tmpl, &code);
      }
    }
  } catch (const Error& e) {
    std::cerr << "bnas: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "bnas: internal error: " << e.what() << "\n";
    return kInternalExit;
  }
  return 0;
}
