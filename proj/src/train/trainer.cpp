#include "bnas/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bnas/error.hpp"
#include "bnas/nn/ops.hpp"

namespace bnas::train {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a running combination.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

TrainResult train_network(arch::Network& net, const data::Dataset& train, const nn::TrainConfig& config,
                          const EpochCallback& on_epoch) {
  config.validate();
  TrainResult result;
  std::vector<Tensor> velocity;
  for (const arch::Parameter& p : net.parameters())
    velocity.push_back(p.trainable ? Tensor(p.value.dims()) : Tensor());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const float lr = nn::lr_at_epoch(config.schedule, epoch);
    const auto batches = data::make_batches(train, static_cast<std::size_t>(config.batch_size),
                                            mix_seed(config.seed, 0xba7c4ull, static_cast<std::uint64_t>(epoch)),
                                            config.augment);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (const data::Batch& batch : batches) {
      const Tensor logits = net.forward(batch.images, nn::Mode::Train);
      nn::LossResult loss = nn::softmax_cross_entropy(logits, batch.labels);
      if (!std::isfinite(loss.loss)) {
        result.diverged = true;
        result.final_loss = loss.loss;
        return result;
      }
      const std::vector<int> pred = nn::argmax_rows(logits);
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
      seen += pred.size();
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(pred.size());

      net.backward(loss.grad);
      auto params = net.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].trainable) continue;
        nn::sgd_step(params[i].value, params[i].grad, velocity[i], lr, config.momentum, config.weight_decay);
      }
    }
    result.epochs_run = epoch + 1;
    result.final_loss = static_cast<float>(loss_sum / static_cast<double>(seen));
    if (on_epoch)
      on_epoch({epoch, lr, result.final_loss, 100.0 * static_cast<double>(correct) / static_cast<double>(seen)});
  }
  if (config.recalibrate_bn && result.epochs_run > 0)
    recalibrate_batch_norm(net, train, static_cast<std::size_t>(config.batch_size));
  return result;
}

void recalibrate_batch_norm(arch::Network& net, const data::Dataset& ds, std::size_t batch_size) {
  if (batch_size == 0) throw InputError("batch_size must be positive");
  std::size_t k = 0;
  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size, ++k) {
    const data::Batch batch = data::standardized(ds, begin, std::min(ds.size(), begin + batch_size));
    net.set_batch_norm_momentum(1.0f / static_cast<float>(k + 1));
    net.forward(batch.images, nn::Mode::Train);
  }
  net.set_batch_norm_momentum(nn::kBatchNormMomentum);
}

double evaluate_accuracy(arch::Network& net, const data::Dataset& ds, std::size_t batch_size) {
  if (ds.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const std::size_t end = std::min(ds.size(), begin + batch_size);
    const data::Batch batch = data::standardized(ds, begin, end);
    const std::vector<int> pred = nn::argmax_rows(net.forward(batch.images, nn::Mode::Eval));
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace bnas::train
