#include "bnas/arch/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bnas/error.hpp"
#include "bnas/quant/binarize.hpp"

namespace bnas::arch {

namespace {
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

enum class Activation { None, Quantize, Relu };
}  // namespace

struct Network::LayerState {
  std::size_t weight = kNone, bias = kNone, gamma = kNone, beta = kNone, running_mean = kNone,
              running_var = kNone;
  Activation activation = Activation::None;
  bool binary_weights = false;

  // Forward caches (train mode).
  Tensor input;          // after the activation, as fed to conv/fc
  Tensor raw_input;      // before a ReLU
  std::vector<std::uint8_t> pass_mask;
  Tensor effective_weight;
  nn::BatchNormCache bn;
  std::vector<std::uint32_t> argmax;
  Shape in_dims;
  Tensor output;
};

Network::Network(NetworkTemplate tmpl, ExpansionCode code, std::uint64_t seed, Precision precision)
    : tmpl_(std::move(tmpl)), code_(std::move(code)), seed_(seed), precision_(precision) {
  shapes_ = resolve_channels(tmpl_, code_);
  for (ParameterShape& p : parameter_shapes(tmpl_, code_)) {
    Tensor value(p.dims);
    Tensor grad = p.trainable ? Tensor(p.dims) : Tensor();
    params_.push_back({std::move(p.name), std::move(value), std::move(grad), p.trainable});
  }
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return i;
    return kNone;
  };
  states_.resize(tmpl_.layers.size());
  std::mt19937_64 rng(seed_);
  for (std::size_t i = 0; i < tmpl_.layers.size(); ++i) {
    const LayerSpec& l = tmpl_.layers[i];
    if (!l.is_weighted()) continue;
    LayerState& st = states_[i];
    st.weight = index_of(l.name + ".weight");
    st.bias = index_of(l.name + ".bias");
    st.gamma = index_of(l.name + ".bn.gamma");
    st.beta = index_of(l.name + ".bn.beta");
    st.running_mean = index_of(l.name + ".bn.running_mean");
    st.running_var = index_of(l.name + ".bn.running_var");
    st.binary_weights = l.binarized && precision_ == Precision::Binary;
    if (l.inputs[0] != kImageInput)
      st.activation = precision_ == Precision::Binary ? Activation::Quantize : Activation::Relu;

    const LayerShape& s = shapes_[i];
    const std::size_t fan_in = l.kind == LayerKind::Conv ? s.in_channels * l.kernel * l.kernel : s.in_features;
    std::normal_distribution<float> normal(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (float& w : params_[st.weight].value.data()) w = normal(rng);
    if (st.gamma != kNone) params_[st.gamma].value.fill(1.0f);
    if (st.running_var != kNone) params_[st.running_var].value.fill(1.0f);
  }
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

Tensor Network::forward(const Tensor& images, nn::Mode mode) {
  const InputDims& in = tmpl_.input;
  if (images.rank() != 4 || images.dim(1) != in.channels || images.dim(2) != in.height || images.dim(3) != in.width)
    throw ShapeError("network " + tmpl_.name + " expects [N," + std::to_string(in.channels) + "," +
                     std::to_string(in.height) + "," + std::to_string(in.width) + "] input, got " +
                     shape_string(images.dims()));
  const bool train = mode == nn::Mode::Train;
  const std::size_t batch = images.dim(0);
  auto source = [&](int idx) -> const Tensor& {
    return idx == kImageInput ? images : states_[static_cast<std::size_t>(idx)].output;
  };

  for (std::size_t i = 0; i < tmpl_.layers.size(); ++i) {
    const LayerSpec& l = tmpl_.layers[i];
    LayerState& st = states_[i];
    const Tensor& x = source(l.inputs[0]);
    st.in_dims = x.dims();
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::FullyConnected: {
        Tensor act;
        switch (st.activation) {
          case Activation::None: act = x; break;
          case Activation::Quantize: {
            quant::QuantizedActivations q = quant::binarize_activations(x);
            act = std::move(q.values);
            if (train) st.pass_mask = std::move(q.pass_mask);
            break;
          }
          case Activation::Relu:
            act = nn::relu(x);
            if (train) st.raw_input = x;
            break;
        }
        const Tensor& w = params_[st.weight].value;
        Tensor w_eff = st.binary_weights ? quant::binarized_weight_values(w) : Tensor();
        const Tensor& weight = st.binary_weights ? w_eff : w;
        Tensor y;
        if (l.kind == LayerKind::Conv) {
          y = nn::conv2d(act, weight, l.stride, l.pad);
        } else {
          act = act.reshaped({batch, act.size() / batch});
          Tensor zero_bias;
          const Tensor& bias = st.bias != kNone ? params_[st.bias].value : (zero_bias = Tensor({weight.dim(1)}));
          y = nn::fully_connected(act, weight, bias);
        }
        if (l.batch_norm) {
          nn::RunningStats stats{std::move(params_[st.running_mean].value), std::move(params_[st.running_var].value)};
          y = nn::batch_norm(y, params_[st.gamma].value, params_[st.beta].value, stats, mode,
                             train ? &st.bn : nullptr, bn_momentum_);
          params_[st.running_mean].value = std::move(stats.mean);
          params_[st.running_var].value = std::move(stats.var);
        }
        if (train) {
          st.input = std::move(act);
          st.effective_weight = std::move(w_eff);
        }
        st.output = std::move(y);
        break;
      }
      case LayerKind::MaxPool: {
        nn::MaxPoolResult r = nn::max_pool2d(x, l.kernel, l.stride, l.pad);
        st.output = std::move(r.output);
        if (train) st.argmax = std::move(r.argmax);
        break;
      }
      case LayerKind::GlobalAvgPool: st.output = nn::global_avg_pool(x); break;
      case LayerKind::ResidualAdd: {
        const Tensor& other = source(l.inputs[1]);
        require_same_shape(x, other, "residual add");
        st.output = x;
        for (std::size_t k = 0; k < other.size(); ++k) st.output[k] += other[k];
        break;
      }
    }
  }
  Tensor logits = states_.back().output;
  if (!train)
    for (LayerState& st : states_) st.output = Tensor();
  return logits;
}

void Network::backward(const Tensor& grad_logits) {
  require_same_shape(grad_logits, states_.back().output, "network backward");
  std::vector<Tensor> grads(tmpl_.layers.size());
  grads.back() = grad_logits;
  auto accumulate = [&](int idx, Tensor g) {
    if (idx == kImageInput) return;
    Tensor& dst = grads[static_cast<std::size_t>(idx)];
    if (dst.empty()) {
      dst = std::move(g);
    } else {
      for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
    }
  };

  for (std::size_t i = tmpl_.layers.size(); i-- > 0;) {
    const LayerSpec& l = tmpl_.layers[i];
    LayerState& st = states_[i];
    Tensor g = std::move(grads[i]);
    if (g.empty()) continue;
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::FullyConnected: {
        if (l.batch_norm) {
          nn::BatchNormGrads bg = nn::batch_norm_backward(g, params_[st.gamma].value, st.bn);
          params_[st.gamma].grad = std::move(bg.gamma);
          params_[st.beta].grad = std::move(bg.beta);
          g = std::move(bg.input);
        }
        const Tensor& w = params_[st.weight].value;
        const Tensor& weight = st.binary_weights ? st.effective_weight : w;
        Tensor grad_input;
        if (l.kind == LayerKind::Conv) {
          nn::Conv2dGrads cg = nn::conv2d_backward(st.input, weight, g, l.stride, l.pad);
          params_[st.weight].grad = st.binary_weights ? quant::ste_weight_grad(cg.weight, w) : std::move(cg.weight);
          grad_input = std::move(cg.input);
        } else {
          nn::FullyConnectedGrads fg = nn::fully_connected_backward(st.input, weight, g);
          params_[st.weight].grad = st.binary_weights ? quant::ste_weight_grad(fg.weight, w) : std::move(fg.weight);
          if (st.bias != kNone) params_[st.bias].grad = std::move(fg.bias);
          grad_input = fg.input.reshaped(st.in_dims);
        }
        if (l.inputs[0] == kImageInput) break;
        switch (st.activation) {
          case Activation::None: break;
          case Activation::Quantize: grad_input = quant::ste_activation_grad(grad_input, st.pass_mask); break;
          case Activation::Relu: grad_input = nn::relu_backward(grad_input, st.raw_input); break;
        }
        accumulate(l.inputs[0], std::move(grad_input));
        break;
      }
      case LayerKind::MaxPool:
        accumulate(l.inputs[0], nn::max_pool2d_backward(g, st.argmax, st.in_dims));
        break;
      case LayerKind::GlobalAvgPool:
        accumulate(l.inputs[0], nn::global_avg_pool_backward(g, st.in_dims));
        break;
      case LayerKind::ResidualAdd:
        accumulate(l.inputs[1], g);
        accumulate(l.inputs[0], std::move(g));
        break;
    }
  }
}

Parameter& Network::parameter(const std::string& name) {
  for (Parameter& p : params_)
    if (p.name == name) return p;
  throw InputError("network has no parameter '" + name + "'");
}

Checkpoint Network::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta = {tmpl_.name, code_, seed_};
  ckpt.entries.reserve(params_.size());
  for (const Parameter& p : params_) ckpt.entries.emplace_back(p.name, p.value);
  return ckpt;
}

void Network::load_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.entries.size() != params_.size())
    throw InputError("checkpoint has " + std::to_string(ckpt.entries.size()) + " arrays, network needs " +
                     std::to_string(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& [name, value] = ckpt.entries[i];
    if (name != params_[i].name || value.dims() != params_[i].value.dims())
      throw InputError("checkpoint entry '" + name + "' " + shape_string(value.dims()) + " does not match '" +
                       params_[i].name + "' " + shape_string(params_[i].value.dims()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].value = ckpt.entries[i].second;
}

std::size_t Network::conv_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(tmpl_.layers, [](const LayerSpec& l) { return l.kind == LayerKind::Conv; }));
}

std::size_t Network::fc_count() const {
  return static_cast<std::size_t>(
      std::ranges::count_if(tmpl_.layers, [](const LayerSpec& l) { return l.kind == LayerKind::FullyConnected; }));
}

Network instantiate(const NetworkTemplate& tmpl, const ExpansionCode& code, std::uint64_t seed, Precision precision) {
  return Network(tmpl, code, seed, precision);
}

}  // namespace bnas::arch
