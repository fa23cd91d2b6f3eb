#pragma once
// A concrete network: a template wired at the widths of one expansion code.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bnas/arch/checkpoint.hpp"
#include "bnas/arch/cost.hpp"
#include "bnas/arch/template.hpp"
#include "bnas/nn/ops.hpp"

namespace bnas::arch {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;  // false for batch-norm running statistics
};

class Network {
 public:
  Network(NetworkTemplate tmpl, ExpansionCode code, std::uint64_t seed, Precision precision = Precision::Binary);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const NetworkTemplate& network_template() const { return tmpl_; }
  const ExpansionCode& code() const { return code_; }
  const std::vector<LayerShape>& shapes() const { return shapes_; }
  Precision precision() const { return precision_; }
  std::uint64_t seed() const { return seed_; }

  /// images [N,C,H,W] -> logits [N,classes]. Train mode keeps what backward needs.
  Tensor forward(const Tensor& images, nn::Mode mode);
  /// Writes gradients of the last train-mode forward into every trainable Parameter::grad.
  void backward(const Tensor& grad_logits);

  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  Parameter& parameter(const std::string& name);

  Checkpoint to_checkpoint() const;
  /// Throws InputError if names or shapes differ from this network's.
  void load_checkpoint(const Checkpoint& ckpt);

  /// Weight of each new batch in the running statistics (default 0.1).
  void set_batch_norm_momentum(float momentum) { bn_momentum_ = momentum; }

  std::size_t conv_count() const;
  std::size_t fc_count() const;

 private:
  struct LayerState;

  NetworkTemplate tmpl_;
  ExpansionCode code_;
  std::uint64_t seed_;
  Precision precision_;
  float bn_momentum_ = nn::kBatchNormMomentum;
  std::vector<LayerShape> shapes_;
  std::vector<Parameter> params_;
  std::vector<LayerState> states_;
};

/// He-normal (fan-in) weights from `seed`, zero biases, BN gamma 1 / beta 0.
Network instantiate(const NetworkTemplate& tmpl, const ExpansionCode& code, std::uint64_t seed,
                    Precision precision = Precision::Binary);

}  // namespace bnas::arch
