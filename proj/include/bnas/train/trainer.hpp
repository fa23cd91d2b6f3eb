#pragma once

#include <cstdint>
#include <functional>

#include "bnas/arch/network.hpp"
#include "bnas/data/dataset.hpp"
#include "bnas/nn/sgd.hpp"

namespace bnas::train {

struct EpochStats {
  int epoch = 0;
  float lr = 0.0f;
  float mean_loss = 0.0f;
  /// Running accuracy over the epoch's train-mode forwards, percent.
  double running_acc = 0.0;
};

struct TrainResult {
  bool diverged = false;  // a non-finite loss stopped training
  int epochs_run = 0;
  float final_loss = 0.0f;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Minibatch SGD with momentum and weight decay on the step schedule.
TrainResult train_network(arch::Network& net, const data::Dataset& train, const nn::TrainConfig& config,
                          const EpochCallback& on_epoch = {});

/// Replaces batch-norm running statistics with the cumulative average of
/// train-mode batch statistics over `ds` (no augmentation, no weight update).
void recalibrate_batch_norm(arch::Network& net, const data::Dataset& ds, std::size_t batch_size);

/// Top-1 accuracy in percent with batch norm in eval mode.
double evaluate_accuracy(arch::Network& net, const data::Dataset& ds, std::size_t batch_size = 256);

/// Mixes (seed, a, b) into an independent 64-bit stream seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace bnas::train
