#include "bnas/nn/sgd.hpp"

#include <cmath>
#include <string>

#include "bnas/error.hpp"
#include "bnas/simd/kernels.hpp"

namespace bnas::nn {

void LrSchedule::validate() const {
  if (!(base_lr > 0.0f)) throw InputError("base_lr must be positive");
  if (!(decay_factor > 0.0f && decay_factor < 1.0f)) throw InputError("decay_factor must lie in (0,1)");
  for (std::size_t i = 1; i < decay_epochs.size(); ++i)
    if (decay_epochs[i] <= decay_epochs[i - 1]) throw InputError("decay_epochs must be strictly increasing");
}

float lr_at_epoch(const LrSchedule& schedule, int epoch) {
  int passed = 0;
  for (int e : schedule.decay_epochs)
    if (e <= epoch) ++passed;
  float lr = schedule.base_lr;
  for (int i = 0; i < passed; ++i) lr *= schedule.decay_factor;
  return lr;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw InputError("epochs must be non-negative");
  if (batch_size < 1) throw InputError("batch_size must be positive");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw InputError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0f)) throw InputError("weight_decay must be non-negative");
  schedule.validate();
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, float lr, float momentum,
              float weight_decay) {
  require_same_shape(param, grad, "sgd_step grad");
  require_same_shape(param, velocity, "sgd_step velocity");
  simd::kernels().sgd_update(param.ptr(), grad.ptr(), velocity.ptr(), param.size(), lr, momentum,
                             weight_decay);
}

}  // namespace bnas::nn
