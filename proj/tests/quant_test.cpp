#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "bnas/arch/network.hpp"
#include "bnas/data/dataset.hpp"
#include "bnas/error.hpp"
#include "bnas/nn/ops.hpp"
#include "bnas/quant/binarize.hpp"
#include "bnas/train/trainer.hpp"
#include "test_support.hpp"

using namespace bnas;
using bnas::testing::random_tensor;
using bnas::testing::relative_error;
using bnas::testing::to_double;

TEST(BinarizeWeights, Examples) {
  const auto b = quant::binarize_weights(Tensor({4}, {0.5f, -1.5f, 0.25f, -0.75f}));
  EXPECT_EQ(b.scale, 0.75f);
  EXPECT_EQ(b.reconstruct(), Tensor({4}, {0.75f, -0.75f, 0.75f, -0.75f}));

  const auto z = quant::binarize_weights(Tensor({3}));
  EXPECT_EQ(z.scale, 0.0f);
  EXPECT_EQ(z.reconstruct(), Tensor({3}));
  EXPECT_EQ(z.signs, Tensor({3}, 1.0f));

  EXPECT_EQ(quant::binarized_weight_values(Tensor({3}, 0.3f)), Tensor({3}, 0.3f));
  EXPECT_THROW(quant::binarize_weights(Tensor()), InputError);
}

TEST(BinarizeWeights, SignPatternAndTwoMagnitudes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor w = random_tensor({3, 4, 3, 3}, seed);
    w[5] = 0.0f;
    const auto b = quant::binarize_weights(w);
    double mean = 0.0;
    for (float v : w.data()) mean += std::abs(v);
    EXPECT_NEAR(b.scale, mean / static_cast<double>(w.size()), 1e-6);
    std::set<float> values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_EQ(b.signs[i], w[i] >= 0.0f ? 1.0f : -1.0f);
      values.insert(b.scale * b.signs[i]);
    }
    EXPECT_LE(values.size(), 2u);
    EXPECT_EQ(quant::binarized_weight_values(w), b.reconstruct());
  }
}

TEST(BinarizeActivations, Examples) {
  const auto q = quant::binarize_activations(Tensor({4}, {-0.3f, 0.2f, 0.7f, 1.4f}));
  EXPECT_EQ(q.values, Tensor({4}, {0, 0, 1, 1}));
  EXPECT_EQ(q.pass_mask, (std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_EQ(quant::binarize_activations(Tensor({1}, 0.5f)).values[0], 1.0f);
  const Tensor bits({5}, {0, 1, 1, 0, 1});
  EXPECT_EQ(quant::binarize_activations(bits).values, bits);
  // Mask boundaries are inclusive.
  EXPECT_EQ(quant::binarize_activations(Tensor({2}, {0.0f, 1.0f})).pass_mask, (std::vector<std::uint8_t>{1, 1}));
}

TEST(BinarizeActivations, BinaryAndIdempotent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = random_tensor({257}, seed, -2.0f, 3.0f);
    const auto q = quant::binarize_activations(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_TRUE(q.values[i] == 0.0f || q.values[i] == 1.0f);
      EXPECT_EQ(q.values[i], std::round(std::clamp(x[i], 0.0f, 1.0f)));
      EXPECT_EQ(q.pass_mask[i], x[i] >= 0.0f && x[i] <= 1.0f);
    }
    EXPECT_EQ(quant::binarize_activations(q.values).values, q.values);
  }
}

TEST(SteGradients, Examples) {
  const Tensor g = random_tensor({6}, 1);
  EXPECT_EQ(quant::ste_weight_grad(g, random_tensor({6}, 2, -3.0f, 3.0f)), g);
  EXPECT_EQ(quant::ste_weight_grad(Tensor({2}), Tensor({2}, {0.3f, -0.9f})), Tensor({2}));
  EXPECT_EQ(quant::ste_weight_grad(Tensor({2}, {1, -2}), Tensor({2}, {0.3f, -0.9f})), Tensor({2}, {1, -2}));
  EXPECT_THROW(quant::ste_weight_grad(Tensor({2}), Tensor({3})), ShapeError);

  const Tensor x({4}, {-0.3f, 0.2f, 0.7f, 1.4f});
  EXPECT_EQ(quant::ste_activation_grad(Tensor({4}, 1.0f), x), Tensor({4}, {0, 1, 1, 0}));
  const Tensor inside = random_tensor({6}, 3, 0.0f, 1.0f);
  EXPECT_EQ(quant::ste_activation_grad(g, inside), g);
  EXPECT_EQ(quant::ste_activation_grad(Tensor({4}), x), Tensor({4}));
  EXPECT_THROW(quant::ste_activation_grad(Tensor({2}), x), ShapeError);
}

TEST(BinaryConv, Examples) {
  EXPECT_EQ(quant::binary_conv2d(Tensor({1, 1, 2, 2}, 0.9f), Tensor({1, 1, 1, 1}, 0.5f), 1, 0),
            Tensor({1, 1, 2, 2}, 0.5f));
  EXPECT_EQ(quant::binary_conv2d(random_tensor({1, 2, 3, 3}, 4, -2.0f, -0.1f), random_tensor({2, 2, 3, 3}, 5), 1, 1),
            Tensor({1, 2, 3, 3}));
  const Tensor y = quant::binary_conv2d(Tensor({1, 1, 1, 1}, 1.0f), Tensor({2, 1, 1, 1}, {0.4f, -0.4f}), 1, 0);
  EXPECT_EQ(y, Tensor({1, 2, 1, 1}, {0.4f, -0.4f}));
}

// Gradient of <conv(clip-surrogate(x), identity-surrogate(w)), r> at the
// quantized forward point, from direct loops in double.
TEST(BinaryConv, SteMatchesSurrogateNetworkGradient) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t stride = 1 + seed % 2;
    const Tensor x = random_tensor({2, 3, 6, 6}, 10 + seed, -0.5f, 1.5f);
    const Tensor w = random_tensor({4, 3, 3, 3}, 20 + seed);
    quant::BinaryConvCache cache;
    const Tensor y = quant::binary_conv2d(x, w, stride, 1, &cache);
    const Tensor r = random_tensor(y.dims(), 30 + seed);
    const auto g = quant::binary_conv2d_backward(cache, w, r, stride, 1);

    const Tensor xb = quant::binarize_activations(x).values;
    const Tensor wb = quant::binarize_weights(w).reconstruct();
    std::vector<double> gx(x.size(), 0.0), gw(w.size(), 0.0);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t co = 0; co < 4; ++co)
        for (std::size_t oy = 0; oy < y.dim(2); ++oy)
          for (std::size_t ox = 0; ox < y.dim(3); ++ox)
            for (std::size_t ci = 0; ci < 3; ++ci)
              for (std::size_t ky = 0; ky < 3; ++ky)
                for (std::size_t kx = 0; kx < 3; ++kx) {
                  const long iy = static_cast<long>(oy * stride + ky) - 1, ix = static_cast<long>(ox * stride + kx) - 1;
                  if (iy < 0 || ix < 0 || iy >= 6 || ix >= 6) continue;
                  const double up = r.at(n, co, oy, ox);
                  const std::size_t xi = ((n * 3 + ci) * 6 + iy) * 6 + ix;
                  const bool pass = x[xi] >= 0.0f && x[xi] <= 1.0f;
                  if (pass) gx[xi] += up * wb.at(co, ci, ky, kx);
                  gw[((co * 3 + ci) * 3 + ky) * 3 + kx] += up * xb[xi];
                }
    EXPECT_LT(relative_error(to_double(g.weight), gw), 1e-6);
    EXPECT_LT(relative_error(to_double(g.input), gx), 1e-6);
  }
}

TEST(BinaryTraining, ThreeEpochsBeatInitialization) {
  const std::filesystem::path dir = BNAS_DATA_DIR "/mnist5k";
  if (!std::filesystem::exists(dir / "train-images-idx3-ubyte")) GTEST_SKIP() << "MNIST subset not present";
  const data::Dataset all = data::load_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  const data::Dataset ds = data::stratified_subset(all, 100, 0);
  const auto tmpl = arch::vgg_small_mini();
  arch::Network net = arch::instantiate(tmpl, arch::uniform_code(1.0, tmpl.n_genes), 7);
  const double before = train::evaluate_accuracy(net, ds);
  nn::TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 16;
  tc.schedule = {0.07f, {}, 0.1f};
  tc.seed = 7;
  train::train_network(net, ds, tc);
  EXPECT_GT(train::evaluate_accuracy(net, ds), before);
}
