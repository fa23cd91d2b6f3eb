#pragma once
// Network templates: the fixed skeleton of a model family. Only the channel
// widths vary between candidates; kernels, strides and layer order do not.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bnas/arch/code.hpp"
#include "bnas/tensor.hpp"

namespace bnas::arch {

enum class LayerKind { Conv, FullyConnected, MaxPool, GlobalAvgPool, ResidualAdd };

std::string to_string(LayerKind kind);

/// How a conv/fc layer gets its output width.
struct Width {
  enum class Rule { Gene, Tied, Fixed };
  Rule rule = Rule::Fixed;
  std::size_t base = 0;   // 1x width (Gene, Fixed)
  std::size_t index = 0;  // gene index (Gene) or layer index (Tied)

  static Width gene(std::size_t gene_index, std::size_t base) { return {Rule::Gene, base, gene_index}; }
  /// Same width as the output of layer `layer`.
  static Width tied(std::size_t layer) { return {Rule::Tied, 0, layer}; }
  static Width fixed(std::size_t width) { return {Rule::Fixed, width, 0}; }
};

inline constexpr int kImageInput = -1;

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  std::size_t kernel = 1;  // square kernels / pool windows
  std::size_t stride = 1;
  std::size_t pad = 0;
  /// Producer layer indices; kImageInput is the network input. ResidualAdd has two.
  std::vector<int> inputs;
  Width width;             // conv / fc only
  bool binarized = false;  // conv / fc only
  bool batch_norm = false; // BN follows the conv / fc
  bool has_bias = false;   // fc only

  bool is_weighted() const { return kind == LayerKind::Conv || kind == LayerKind::FullyConnected; }
  std::optional<std::size_t> gene_index() const {
    if (is_weighted() && width.rule == Width::Rule::Gene) return width.index;
    return std::nullopt;
  }
};

struct InputDims {
  std::size_t channels, height, width;
};

struct NetworkTemplate {
  std::string name;
  InputDims input;
  std::size_t class_count = 0;
  std::size_t n_genes = 0;
  /// Topologically ordered; the last layer is the classifier.
  std::vector<LayerSpec> layers;

  /// Throws InputError if the structure is inconsistent.
  void validate() const;
};

/// Resolved geometry of one layer for a particular code.
struct LayerShape {
  std::size_t in_channels = 0, out_channels = 0;
  std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  /// Flattened input features (fc only).
  std::size_t in_features = 0;
};

std::vector<LayerShape> resolve_channels(const NetworkTemplate& tmpl, const ExpansionCode& code);

/// Output widths of the weighted layers at 1x (the "base" channels).
std::vector<LayerShape> base_channels(const NetworkTemplate& tmpl);

// Built-in families.
NetworkTemplate vgg_small();       // CIFAR-10, 3x32x32
NetworkTemplate vgg_small_mini();  // MNIST, 1x28x28
NetworkTemplate resnet18();        // ImageNet, 3x224x224

/// Looks up a built-in template by name: "vgg_small", "vgg_small_mini", "resnet18".
NetworkTemplate template_by_name(const std::string& name);
std::vector<std::string> template_names();

}  // namespace bnas::arch

namespace bnas::arch {

struct ParameterShape {
  std::string name;
  Shape dims;
  bool trainable = true;
};

/// Names and dims of every parameter array of (template, code), in network order.
/// Conv weights are [out,in,k,k]; fc weights are [in_features,out].
std::vector<ParameterShape> parameter_shapes(const NetworkTemplate& tmpl, const ExpansionCode& code);

}  // namespace bnas::arch
