#include "bnas/search/proxy.hpp"

#include "bnas/arch/cost.hpp"
#include "bnas/arch/network.hpp"
#include "bnas/error.hpp"
#include "bnas/train/trainer.hpp"

namespace bnas::search {

Individual evaluate_candidate(const arch::ExpansionCode& code, const ProxySetup& setup, std::uint64_t eval_seed) {
  if (!setup.tmpl || !setup.train || !setup.val) throw InputError("proxy setup is incomplete");
  arch::Network net = arch::instantiate(*setup.tmpl, code, eval_seed);
  if (setup.supernet) net.load_checkpoint(arch::inherit_weights(*setup.supernet, *setup.tmpl, code));

  nn::TrainConfig cfg = setup.train_config;
  cfg.seed = eval_seed;
  const train::TrainResult tr = train::train_network(net, *setup.train, cfg);

  Individual ind;
  ind.code = code;
  ind.eval_seed = eval_seed;
  ind.cost = arch::count_cost(*setup.tmpl, code);
  ind.diverged = tr.diverged;
  ind.acc = tr.diverged ? 0.0 : train::evaluate_accuracy(net, *setup.val);
  ind.fitness = fitness(ind.acc, ind.cost.flops_norm, setup.lambda);
  return ind;
}

Evaluator proxy_evaluator(const ProxySetup& setup) {
  return [&setup](const arch::ExpansionCode& code, std::uint64_t seed) { return evaluate_candidate(code, setup, seed); };
}

}  // namespace bnas::search
