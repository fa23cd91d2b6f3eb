#include "bnas/arch/template.hpp"

#include "bnas/error.hpp"
#include "bnas/nn/ops.hpp"

namespace bnas::arch {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::FullyConnected: return "fc";
    case LayerKind::MaxPool: return "pool";
    case LayerKind::GlobalAvgPool: return "avgpool";
    case LayerKind::ResidualAdd: return "residual-add";
  }
  return "?";
}

void NetworkTemplate::validate() const {
  if (layers.empty()) throw InputError("template " + name + " has no layers");
  std::vector<bool> gene_used(n_genes, false);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::size_t want_inputs = l.kind == LayerKind::ResidualAdd ? 2 : 1;
    if (l.inputs.size() != want_inputs)
      throw InputError("layer " + l.name + " needs " + std::to_string(want_inputs) + " inputs");
    for (int src : l.inputs)
      if (src < kImageInput || src >= static_cast<int>(i))
        throw InputError("layer " + l.name + " reads from a later layer");
    if (!l.is_weighted()) continue;
    if (l.width.rule == Width::Rule::Gene) {
      if (l.width.index >= n_genes) throw InputError("layer " + l.name + " gene index out of range");
      if (l.width.base % 4 != 0)
        throw InputError("layer " + l.name + " base width " + std::to_string(l.width.base) +
                         " is not divisible by 4");
      gene_used[l.width.index] = true;
    } else if (l.width.rule == Width::Rule::Tied && l.width.index >= i) {
      throw InputError("layer " + l.name + " is tied to a later layer");
    }
  }
  for (std::size_t g = 0; g < n_genes; ++g)
    if (!gene_used[g]) throw InputError("gene " + std::to_string(g) + " of " + name + " drives no layer");
  if (layers.back().kind != LayerKind::FullyConnected || layers.back().width.rule != Width::Rule::Fixed ||
      layers.back().width.base != class_count)
    throw InputError("template " + name + " must end in a classifier with " + std::to_string(class_count) +
                     " outputs");
}

std::vector<LayerShape> resolve_channels(const NetworkTemplate& tmpl, const ExpansionCode& code) {
  if (code.size() != tmpl.n_genes)
    throw InputError("code has " + std::to_string(code.size()) + " genes, template " + tmpl.name + " needs " +
                     std::to_string(tmpl.n_genes));
  std::vector<LayerShape> shapes(tmpl.layers.size());
  auto source = [&](int idx) {
    LayerShape s;
    if (idx == kImageInput) {
      s.out_channels = tmpl.input.channels;
      s.out_h = tmpl.input.height;
      s.out_w = tmpl.input.width;
    } else {
      s = shapes[static_cast<std::size_t>(idx)];
    }
    return s;
  };
  for (std::size_t i = 0; i < tmpl.layers.size(); ++i) {
    const LayerSpec& l = tmpl.layers[i];
    const LayerShape in = source(l.inputs[0]);
    LayerShape& s = shapes[i];
    s.in_channels = in.out_channels;
    s.in_h = in.out_h;
    s.in_w = in.out_w;
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::FullyConnected: {
        switch (l.width.rule) {
          case Width::Rule::Gene:
            s.out_channels = l.width.base * code.genes[l.width.index].quarters() / 4;
            break;
          case Width::Rule::Tied: s.out_channels = shapes[l.width.index].out_channels; break;
          case Width::Rule::Fixed: s.out_channels = l.width.base; break;
        }
        if (l.kind == LayerKind::Conv) {
          s.out_h = nn::window_output_size(s.in_h, l.kernel, l.stride, l.pad);
          s.out_w = nn::window_output_size(s.in_w, l.kernel, l.stride, l.pad);
        } else {
          s.in_features = s.in_channels * s.in_h * s.in_w;
          s.out_h = s.out_w = 1;
        }
        break;
      }
      case LayerKind::MaxPool:
        s.out_channels = s.in_channels;
        s.out_h = nn::window_output_size(s.in_h, l.kernel, l.stride, l.pad);
        s.out_w = nn::window_output_size(s.in_w, l.kernel, l.stride, l.pad);
        break;
      case LayerKind::GlobalAvgPool:
        s.out_channels = s.in_channels;
        s.out_h = s.out_w = 1;
        break;
      case LayerKind::ResidualAdd: {
        const LayerShape other = source(l.inputs[1]);
        if (other.out_channels != s.in_channels || other.out_h != s.in_h || other.out_w != s.in_w)
          throw InputError("residual add " + l.name + " joins " + std::to_string(s.in_channels) + " and " +
                           std::to_string(other.out_channels) + " channels");
        s.out_channels = s.in_channels;
        s.out_h = s.in_h;
        s.out_w = s.in_w;
        break;
      }
    }
  }
  return shapes;
}

std::vector<LayerShape> base_channels(const NetworkTemplate& tmpl) {
  return resolve_channels(tmpl, uniform_code(1.0, tmpl.n_genes));
}

namespace {

struct Builder {
  NetworkTemplate t;
  int last = kImageInput;

  int push(LayerSpec spec) {
    t.layers.push_back(std::move(spec));
    last = static_cast<int>(t.layers.size()) - 1;
    return last;
  }

  int conv(std::string name, int input, std::size_t k, std::size_t stride, std::size_t pad, Width width,
           bool binarized) {
    return push({std::move(name), LayerKind::Conv, k, stride, pad, {input}, width, binarized, true, false});
  }

  int fc(std::string name, int input, Width width, bool binarized, bool batch_norm) {
    return push({std::move(name), LayerKind::FullyConnected, 1, 1, 0, {input}, width, binarized, batch_norm, true});
  }

  int pool(std::string name, int input, std::size_t k, std::size_t stride, std::size_t pad) {
    return push({std::move(name), LayerKind::MaxPool, k, stride, pad, {input}, {}, false, false, false});
  }

  int avgpool(std::string name, int input) {
    return push({std::move(name), LayerKind::GlobalAvgPool, 1, 1, 0, {input}, {}, false, false, false});
  }

  int add(std::string name, int a, int b) {
    return push({std::move(name), LayerKind::ResidualAdd, 1, 1, 0, {a, b}, {}, false, false, false});
  }
};

// conv3x3 pairs with a 2x2 pool after each pair, then a binary fc and the
// full-precision classifier. One gene per conv and one for the hidden fc.
NetworkTemplate vgg_family(std::string name, InputDims input, std::array<std::size_t, 3> widths,
                           std::size_t hidden) {
  Builder b;
  b.t.name = std::move(name);
  b.t.input = input;
  b.t.class_count = 10;
  b.t.n_genes = 7;
  std::size_t gene = 0;
  int x = kImageInput;
  for (std::size_t stage = 0; stage < 3; ++stage) {
    for (std::size_t j = 0; j < 2; ++j) {
      const bool first = stage == 0 && j == 0;
      x = b.conv("conv" + std::to_string(gene + 1), x, 3, 1, 1, Width::gene(gene, widths[stage]), !first);
      ++gene;
    }
    x = b.pool("pool" + std::to_string(stage + 1), x, 2, 2, 0);
  }
  x = b.fc("fc1", x, Width::gene(gene, hidden), true, true);
  b.fc("fc2", x, Width::fixed(10), false, false);
  b.t.validate();
  return b.t;
}

}  // namespace

NetworkTemplate vgg_small() { return vgg_family("vgg_small", {3, 32, 32}, {128, 256, 512}, 1024); }

NetworkTemplate vgg_small_mini() { return vgg_family("vgg_small_mini", {1, 28, 28}, {16, 32, 64}, 128); }

NetworkTemplate resnet18() {
  Builder b;
  b.t.name = "resnet18";
  b.t.input = {3, 224, 224};
  b.t.class_count = 1000;
  std::size_t gene = 0;
  int x = b.conv("stem", kImageInput, 7, 2, 3, Width::gene(gene++, 64), false);
  x = b.pool("stem_pool", x, 3, 2, 1);
  const std::array<std::size_t, 4> widths{64, 128, 256, 512};
  for (std::size_t stage = 0; stage < 4; ++stage) {
    for (std::size_t block = 0; block < 2; ++block) {
      const std::string prefix = "layer" + std::to_string(stage + 1) + "." + std::to_string(block) + ".";
      const bool downsample = stage > 0 && block == 0;
      const std::size_t stride = downsample ? 2 : 1;
      const int block_in = x;
      const int c1 = b.conv(prefix + "conv1", block_in, 3, stride, 1, Width::gene(gene++, widths[stage]), true);
      if (downsample) {
        const Width out = Width::gene(gene++, widths[stage]);
        const int c2 = b.conv(prefix + "conv2", c1, 3, 1, 1, out, true);
        const int proj = b.conv(prefix + "downsample", block_in, 1, 2, 0, out, true);
        x = b.add(prefix + "add", c2, proj);
      } else {
        const int c2 = b.conv(prefix + "conv2", c1, 3, 1, 1, Width::tied(static_cast<std::size_t>(block_in)), true);
        x = b.add(prefix + "add", c2, block_in);
      }
    }
  }
  x = b.avgpool("avgpool", x);
  b.fc("fc", x, Width::fixed(1000), false, false);
  b.t.n_genes = gene;
  b.t.validate();
  return b.t;
}

NetworkTemplate template_by_name(const std::string& name) {
  if (name == "vgg_small") return vgg_small();
  if (name == "vgg_small_mini") return vgg_small_mini();
  if (name == "resnet18") return resnet18();
  throw InputError("unknown template '" + name + "'");
}

std::vector<std::string> template_names() { return {"vgg_small", "vgg_small_mini", "resnet18"}; }

}  // namespace bnas::arch

namespace bnas::arch {

std::vector<ParameterShape> parameter_shapes(const NetworkTemplate& tmpl, const ExpansionCode& code) {
  const std::vector<LayerShape> shapes = resolve_channels(tmpl, code);
  std::vector<ParameterShape> out;
  for (std::size_t i = 0; i < tmpl.layers.size(); ++i) {
    const LayerSpec& l = tmpl.layers[i];
    if (!l.is_weighted()) continue;
    const LayerShape& s = shapes[i];
    if (l.kind == LayerKind::Conv)
      out.push_back({l.name + ".weight", {s.out_channels, s.in_channels, l.kernel, l.kernel}, true});
    else
      out.push_back({l.name + ".weight", {s.in_features, s.out_channels}, true});
    if (l.has_bias) out.push_back({l.name + ".bias", {s.out_channels}, true});
    if (l.batch_norm) {
      out.push_back({l.name + ".bn.gamma", {s.out_channels}, true});
      out.push_back({l.name + ".bn.beta", {s.out_channels}, true});
      out.push_back({l.name + ".bn.running_mean", {s.out_channels}, false});
      out.push_back({l.name + ".bn.running_var", {s.out_channels}, false});
    }
  }
  return out;
}

}  // namespace bnas::arch
