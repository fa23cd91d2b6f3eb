#pragma once
// Proxy evaluation of one candidate: short training on a subset, then
// validation accuracy and cost.

#include "bnas/arch/checkpoint.hpp"
#include "bnas/arch/template.hpp"
#include "bnas/data/dataset.hpp"
#include "bnas/nn/sgd.hpp"
#include "bnas/search/evolution.hpp"

namespace bnas::search {

struct ProxySetup {
  const arch::NetworkTemplate* tmpl = nullptr;
  const data::Dataset* train = nullptr;
  const data::Dataset* val = nullptr;
  /// epochs holds the proxy budget; seed is replaced by the candidate's eval seed.
  nn::TrainConfig train_config;
  double lambda = 4.0;
  /// 4x supernet to inherit from; null trains from scratch.
  const arch::Checkpoint* supernet = nullptr;
};

Individual evaluate_candidate(const arch::ExpansionCode& code, const ProxySetup& setup, std::uint64_t eval_seed);

/// Evaluator bound to `setup`, which must outlive it.
Evaluator proxy_evaluator(const ProxySetup& setup);

}  // namespace bnas::search
