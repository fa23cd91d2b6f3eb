#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bnas/arch/checkpoint.hpp"
#include "bnas/arch/cost.hpp"
#include "bnas/arch/network.hpp"
#include "bnas/arch/template.hpp"
#include "bnas/error.hpp"
#include "bnas/search/evolution.hpp"

using namespace bnas;
using namespace bnas::arch;

namespace {

std::vector<std::size_t> conv_widths(const NetworkTemplate& t, const ExpansionCode& code) {
  const auto shapes = resolve_channels(t, code);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < t.layers.size(); ++i)
    if (t.layers[i].kind == LayerKind::Conv) out.push_back(shapes[i].out_channels);
  return out;
}

ExpansionCode random_code(std::size_t n, std::uint64_t seed) {
  search::Rng rng(seed);
  return search::random_code(n, rng);
}

// Channel flow along every edge, including both summands of residual adds.
void expect_consistent(const NetworkTemplate& t, const ExpansionCode& code) {
  const auto s = resolve_channels(t, code);
  for (std::size_t i = 0; i < t.layers.size(); ++i) {
    const LayerSpec& l = t.layers[i];
    const auto out_of = [&](int producer) {
      return producer == kImageInput ? t.input.channels : s[static_cast<std::size_t>(producer)].out_channels;
    };
    if (l.kind == LayerKind::ResidualAdd) {
      EXPECT_EQ(out_of(l.inputs[0]), out_of(l.inputs[1])) << l.name;
      EXPECT_EQ(s[i].out_channels, out_of(l.inputs[0])) << l.name;
    } else {
      EXPECT_EQ(s[i].in_channels, out_of(l.inputs[0])) << l.name;
    }
  }
  EXPECT_EQ(s.back().out_channels, t.class_count);
}

}  // namespace

TEST(Ratio, CandidateSet) {
  EXPECT_EQ(Ratio::all().size(), 6u);
  std::vector<std::string> text;
  for (Ratio r : Ratio::all()) text.push_back(r.to_string());
  EXPECT_EQ(text, (std::vector<std::string>{"0.25", "0.5", "1", "2", "3", "4"}));
  EXPECT_EQ(Ratio::from_value(3.0).quarters(), 12u);
  EXPECT_THROW(Ratio::from_value(1.5), InputError);
  EXPECT_THROW(Ratio::from_value(0.0), InputError);
}

TEST(UniformCode, Examples) {
  EXPECT_EQ(uniform_code(1, 5).values(), (std::vector<double>{1, 1, 1, 1, 1}));
  EXPECT_EQ(uniform_code(4, 2).values(), (std::vector<double>{4, 4}));
  EXPECT_EQ(uniform_code(3, 12).values(), std::vector<double>(12, 3.0));
  EXPECT_THROW(uniform_code(5, 3), InputError);
}

TEST(Templates, StructuralInvariants) {
  for (const auto& name : template_names()) {
    const NetworkTemplate t = template_by_name(name);
    EXPECT_EQ(t.name, name);
    std::size_t first_weighted = t.layers.size();
    for (std::size_t i = 0; i < t.layers.size(); ++i) {
      const LayerSpec& l = t.layers[i];
      if (!l.is_weighted()) continue;
      if (first_weighted == t.layers.size()) first_weighted = i;
      const bool edge = i == first_weighted || i + 1 == t.layers.size();
      EXPECT_EQ(l.binarized, !edge) << name << " " << l.name;
      if (l.width.rule == Width::Rule::Gene) {
        EXPECT_EQ(l.width.base % 4, 0u) << l.name;
      }
    }
  }
  EXPECT_EQ(vgg_small().n_genes, 7u);
  EXPECT_EQ(vgg_small_mini().n_genes, 7u);
  EXPECT_EQ(resnet18().n_genes, 12u);
  EXPECT_THROW(template_by_name("alexnet"), InputError);
}

TEST(ResolveChannels, Examples) {
  const NetworkTemplate r18 = resnet18();
  const auto s = resolve_channels(r18, uniform_code(1, r18.n_genes));
  std::vector<std::size_t> stage_out;
  for (std::size_t i = 0; i < r18.layers.size(); ++i) {
    const auto& name = r18.layers[i].name;
    if (name == "stem") {
      EXPECT_EQ(s[i].out_channels, 64u);
    }
    if (name.ends_with(".1.conv2")) stage_out.push_back(s[i].out_channels);
    if (name == "fc") {
      EXPECT_EQ(s[i].in_features, 512u);
      EXPECT_EQ(s[i].out_channels, 1000u);
    }
  }
  EXPECT_EQ(stage_out, (std::vector<std::size_t>{64, 128, 256, 512}));

  const NetworkTemplate vgg = vgg_small();
  EXPECT_EQ(conv_widths(vgg, uniform_code(4, 7)), (std::vector<std::size_t>{512, 512, 1024, 1024, 2048, 2048}));
  EXPECT_EQ(conv_widths(vgg, uniform_code(1, 7)), (std::vector<std::size_t>{128, 128, 256, 256, 512, 512}));

  ExpansionCode quarter = uniform_code(1, r18.n_genes);
  quarter.genes[0] = Ratio::from_value(0.25);
  EXPECT_EQ(resolve_channels(r18, quarter)[0].out_channels, 16u);
  EXPECT_EQ(resolve_channels(r18, quarter)[0].in_channels, 3u);

  EXPECT_THROW(resolve_channels(vgg, uniform_code(1, 6)), InputError);
}

TEST(ResolveChannels, ConsistentForRandomCodes) {
  for (const auto& name : template_names()) {
    const NetworkTemplate t = template_by_name(name);
    for (std::uint64_t seed = 0; seed < 50; ++seed) expect_consistent(t, random_code(t.n_genes, seed));
  }
}

TEST(Instantiate, Examples) {
  const NetworkTemplate mini = vgg_small_mini();
  const ExpansionCode code = random_code(7, 3);
  EXPECT_EQ(instantiate(mini, code, 42).to_checkpoint(), instantiate(mini, code, 42).to_checkpoint());
  EXPECT_NE(instantiate(mini, code, 42).to_checkpoint(), instantiate(mini, code, 43).to_checkpoint());

  const NetworkTemplate vgg = vgg_small();
  std::size_t binary_conv = 0, binary_fc = 0, fp_fc = 0, fp_conv = 0;
  for (const auto& l : vgg.layers) {
    if (l.kind == LayerKind::Conv) (l.binarized ? binary_conv : fp_conv)++;
    if (l.kind == LayerKind::FullyConnected) (l.binarized ? binary_fc : fp_fc)++;
  }
  // The first conv keeps full-precision weights; the other five are binary.
  EXPECT_EQ(binary_conv + fp_conv, 6u);
  EXPECT_EQ(binary_conv, 5u);
  EXPECT_EQ(binary_fc, 1u);
  EXPECT_EQ(fp_fc, 1u);

  const Network r18 = instantiate(resnet18(), uniform_code(1, 12), 0);
  EXPECT_EQ(r18.conv_count(), 20u);
  EXPECT_EQ(r18.fc_count(), 1u);
}

TEST(Instantiate, HeNormalInitialization) {
  const NetworkTemplate vgg = vgg_small();
  Network net = instantiate(vgg, uniform_code(1, 7), 9);
  const Tensor& w = net.parameter("conv3.weight").value;  // fan-in 128*9
  double sum = 0.0, sq = 0.0;
  for (float v : w.data()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(w.size());
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 2.0 / (128.0 * 9.0), 0.1 * 2.0 / (128.0 * 9.0));
  EXPECT_EQ(net.parameter("conv3.bn.gamma").value, Tensor({256}, 1.0f));
  EXPECT_EQ(net.parameter("conv3.bn.beta").value, Tensor({256}));
}

TEST(CountCost, HandFormula) {
  NetworkTemplate t;
  t.name = "one_conv";
  t.input = {16, 8, 8};
  t.class_count = 10;
  t.n_genes = 0;
  t.layers.push_back({"stem", LayerKind::Conv, 1, 1, 0, {kImageInput}, Width::fixed(16), false, false, false});
  t.layers.push_back({"conv", LayerKind::Conv, 3, 1, 1, {0}, Width::fixed(16), true, false, false});
  t.layers.push_back({"head", LayerKind::FullyConnected, 1, 1, 0, {1}, Width::fixed(10), false, false, true});
  t.validate();
  const auto costs = layer_costs(t, ExpansionCode{});
  ASSERT_EQ(costs.size(), 3u);
  EXPECT_EQ(costs[1].macs, 147456.0);
  EXPECT_EQ(costs[1].flops, 2304.0);
  EXPECT_EQ(costs[1].weight_bits, 16u * 16 * 9 + 32);
  EXPECT_EQ(costs[2].flops, 1024.0 * 10);
  EXPECT_EQ(costs[2].weight_bits, 32u * (1024 * 10 + 10));
}

TEST(CountCost, ReferenceTables) {
  const NetworkTemplate r18 = resnet18(), vgg = vgg_small();
  const double r18_target[] = {149e6, 352e6, 607e6, 915e6}, r18_speed[] = {12.2, 5.2, 3.0, 2.0};
  const double vgg_target[] = {13.2e6, 45.3e6, 96.2e6, 166e6};
  for (int r = 1; r <= 4; ++r) {
    const CostReport c = count_cost(r18, uniform_code(r, 12));
    EXPECT_NEAR(c.flops / r18_target[r - 1], 1.0, 0.05) << "resnet18 " << r << "x";
    EXPECT_NEAR(c.speedup / r18_speed[r - 1], 1.0, 0.05) << "resnet18 " << r << "x";
    EXPECT_NEAR(count_flops(vgg, uniform_code(r, 7)) / vgg_target[r - 1], 1.0, 0.03) << "vgg_small " << r << "x";
  }
  EXPECT_NEAR(count_flops(r18, uniform_code(1, 12), Precision::Full) / 1820e6, 1.0, 0.05);
  EXPECT_NEAR(count_flops(vgg, uniform_code(1, 7), Precision::Full) / 608e6, 1.0, 0.03);
}

TEST(CountCost, Properties) {
  for (const auto& name : template_names()) {
    const NetworkTemplate t = template_by_name(name);
    const double fp = count_flops(t, uniform_code(1, t.n_genes), Precision::Full);
    EXPECT_DOUBLE_EQ(count_cost(t, uniform_code(1, t.n_genes)).flops_norm, 1.0);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const ExpansionCode code = random_code(t.n_genes, seed);
      const CostReport c = count_cost(t, code);
      EXPECT_GT(c.flops, 0.0);
      EXPECT_GT(c.weight_bits, 0u);
      EXPECT_NEAR(c.speedup * c.flops / fp, 1.0, 1e-12);
      for (std::size_t g = 0; g < t.n_genes; ++g) {
        if (code.genes[g].index() + 1 == Ratio::kCount) continue;
        ExpansionCode up = code;
        up.genes[g] = Ratio::from_index(code.genes[g].index() + 1);
        EXPECT_GE(count_flops(t, up), c.flops) << name << " gene " << g;
      }
    }
    EXPECT_LT(count_cost(t, uniform_code(0.25, t.n_genes)).flops_norm, count_cost(t, uniform_code(4, t.n_genes)).flops_norm);
  }
}

TEST(InheritWeights, AllFourIsIdentity) {
  for (const auto& name : {"vgg_small_mini", "vgg_small"}) {
    const NetworkTemplate t = template_by_name(name);
    const Checkpoint super = instantiate(t, uniform_code(4, t.n_genes), 5).to_checkpoint();
    EXPECT_EQ(inherit_weights(super, t, uniform_code(4, t.n_genes)), super);
  }
}

TEST(InheritWeights, LeadingSlices) {
  const NetworkTemplate r18 = resnet18();
  const Checkpoint super = instantiate(r18, uniform_code(4, 12), 1).to_checkpoint();
  ExpansionCode code = uniform_code(1, 12);
  code.genes[0] = Ratio::from_value(3);  // stem -> layer1.1.conv1 input
  code.genes[2] = Ratio::from_value(2);  // layer1.1.conv1 output
  const Checkpoint out = inherit_weights(super, r18, code);
  const Tensor* src = super.find("layer1.1.conv1.weight");
  const Tensor* dst = out.find("layer1.1.conv1.weight");
  ASSERT_TRUE(src && dst);
  EXPECT_EQ(src->dims(), (Shape{256, 256, 3, 3}));
  EXPECT_EQ(dst->dims(), (Shape{128, 192, 3, 3}));
  for (std::size_t o = 0; o < 128; o += 17)
    for (std::size_t i = 0; i < 192; i += 13)
      for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ((*dst)[((o * 192) + i) * 9 + k], (*src)[((o * 256) + i) * 9 + k]);
  // The stem never loses input channels.
  EXPECT_EQ(out.find("stem.weight")->dims(), (Shape{192, 3, 7, 7}));
  const Tensor* gamma = out.find("layer1.1.conv1.bn.gamma");
  EXPECT_EQ(gamma->dims(), (Shape{128}));

  // Instantiating the sliced code and loading works.
  Network net = instantiate(r18, code, 2);
  EXPECT_NO_THROW(net.load_checkpoint(out));
}

TEST(InheritWeights, FlattenedFcKeepsLeadingChannels) {
  const NetworkTemplate mini = vgg_small_mini();
  const Checkpoint super = instantiate(mini, uniform_code(4, 7), 3).to_checkpoint();
  ExpansionCode code = uniform_code(4, 7);
  code.genes[5] = Ratio::from_value(1);  // conv6 64 of 256 channels
  const Checkpoint out = inherit_weights(super, mini, code);
  const Tensor& src = *super.find("fc1.weight");
  const Tensor& dst = *out.find("fc1.weight");
  ASSERT_EQ(dst.dim(0), 64u * 3 * 3);
  for (std::size_t row = 0; row < dst.dim(0); row += 7)
    for (std::size_t col = 0; col < dst.dim(1); col += 5) EXPECT_EQ(dst[row * dst.dim(1) + col], src[row * src.dim(1) + col]);
}

TEST(InheritWeights, Errors) {
  const NetworkTemplate mini = vgg_small_mini();
  const Checkpoint small = instantiate(mini, uniform_code(1, 7), 3).to_checkpoint();
  EXPECT_THROW(inherit_weights(small, mini, uniform_code(2, 7)), InputError);
  EXPECT_THROW(inherit_weights(small, vgg_small(), uniform_code(1, 7)), InputError);
}
