#pragma once

#include <cstdint>
#include <vector>

#include "bnas/tensor.hpp"

namespace bnas::nn {

/// Step decay: base_lr * decay_factor^(number of decay epochs <= epoch).
struct LrSchedule {
  float base_lr = 0.1f;
  std::vector<int> decay_epochs;
  float decay_factor = 0.1f;

  void validate() const;

  static LrSchedule cifar() { return {0.1f, {60, 120, 180}, 0.1f}; }
  static LrSchedule imagenet() { return {0.1f, {50, 100, 135}, 0.1f}; }
};

float lr_at_epoch(const LrSchedule& schedule, int epoch);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 128;
  float momentum = 0.9f;
  float weight_decay = 1e-4f;
  LrSchedule schedule = LrSchedule::cifar();
  std::uint64_t seed = 0;
  bool augment = false;
  /// Re-estimate batch-norm statistics over the training set after the last epoch.
  bool recalibrate_bn = true;

  void validate() const;
};

/// v <- momentum*v + grad + weight_decay*param;  param <- param - lr*v
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, float lr, float momentum,
              float weight_decay);

}  // namespace bnas::nn
