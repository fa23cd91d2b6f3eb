#include <gtest/gtest.h>

#include <cmath>

#include "bnas/error.hpp"
#include "bnas/nn/ops.hpp"
#include "bnas/nn/sgd.hpp"
#include "test_support.hpp"

using namespace bnas;
using bnas::testing::dot;
using bnas::testing::numeric_grad;
using bnas::testing::random_tensor;
using bnas::testing::relative_error;
using bnas::testing::to_double;

namespace {

// Direct loops; one fma chain per output over (ci, ky, kx), skipping padding.
Tensor conv_reference(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  const std::size_t ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  Tensor y({n, cout, ho, wo});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          float acc = 0.0f;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc = std::fma(x.at(b, ci, iy, ix), w.at(co, ci, ky, kx), acc);
              }
          y.at(b, co, oy, ox) = acc;
        }
  return y;
}

// Exact gradients of <conv(x,w), r> in double.
void conv_grads_double(const Tensor& x, const Tensor& w, const Tensor& r, std::size_t stride, std::size_t pad,
                       std::vector<double>& gx, std::vector<double>& gw) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  const std::size_t ho = r.dim(2), wo = r.dim(3);
  gx.assign(x.size(), 0.0);
  gw.assign(w.size(), 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                const double g = r.at(b, co, oy, ox);
                gx[((b * cin + ci) * h + iy) * wd + ix] += g * w.at(co, ci, ky, kx);
                gw[((co * cin + ci) * k + ky) * k + kx] += g * x.at(b, ci, iy, ix);
              }
}

}  // namespace

// ---- conv2d -----------------------------------------------------------------

TEST(Conv2d, OneByOneKernelScales) {
  const Tensor y = nn::conv2d(Tensor({1, 1, 3, 3}, 1.0f), Tensor({1, 1, 1, 1}, 2.0f), 1, 0);
  EXPECT_EQ(y, Tensor({1, 1, 3, 3}, 2.0f));
}

TEST(Conv2d, PaddedOnesCountWindowOverlap) {
  const Tensor y = nn::conv2d(Tensor({1, 1, 4, 4}, 1.0f), Tensor({1, 1, 3, 3}, 1.0f), 1, 1);
  const float expect[4][4] = {{4, 6, 6, 4}, {6, 9, 9, 6}, {6, 9, 9, 6}, {4, 6, 6, 4}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y.at(0, 0, i, j), expect[i][j]) << i << "," << j;
}

TEST(Conv2d, ResNetStemShape) {
  const Tensor y = nn::conv2d(Tensor({1, 3, 224, 224}), Tensor({64, 3, 7, 7}), 2, 3);
  EXPECT_EQ(y.dims(), (Shape{1, 64, 112, 112}));
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  EXPECT_THROW(nn::conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), 1, 0), ShapeError);
  EXPECT_THROW(nn::conv2d(Tensor({1, 1, 2, 2}), Tensor({1, 1, 3, 3}), 1, 0), ShapeError);
}

TEST(Conv2d, MatchesNestedLoopReferenceExactly) {
  struct Case { Shape x, w; std::size_t stride, pad; };
  const Case cases[] = {
      {{2, 4, 8, 8}, {5, 4, 3, 3}, 1, 1}, {{2, 4, 8, 8}, {3, 4, 3, 3}, 2, 1}, {{1, 3, 7, 7}, {4, 3, 1, 1}, 1, 0},
      {{2, 2, 8, 8}, {6, 2, 5, 5}, 1, 2}, {{1, 4, 8, 8}, {2, 4, 3, 3}, 1, 0}, {{2, 3, 9, 9}, {8, 3, 7, 7}, 2, 3},
  };
  std::uint64_t seed = 1;
  for (const auto& c : cases) {
    const Tensor x = random_tensor(c.x, seed++), w = random_tensor(c.w, seed++);
    EXPECT_EQ(nn::conv2d(x, w, c.stride, c.pad), conv_reference(x, w, c.stride, c.pad))
        << shape_string(c.x) << " * " << shape_string(c.w);
  }
}

TEST(Conv2d, BackwardMatchesDoubleReference) {
  const Tensor x = random_tensor({2, 3, 7, 7}, 11), w = random_tensor({4, 3, 3, 3}, 12);
  for (std::size_t stride : {1, 2}) {
    const Tensor y = nn::conv2d(x, w, stride, 1);
    const Tensor r = random_tensor(y.dims(), 13);
    const nn::Conv2dGrads g = nn::conv2d_backward(x, w, r, stride, 1);
    std::vector<double> gx, gw;
    conv_grads_double(x, w, r, stride, 1, gx, gw);
    EXPECT_LT(relative_error(to_double(g.input), gx), 1e-4);
    EXPECT_LT(relative_error(to_double(g.weight), gw), 1e-4);
  }
}

TEST(Conv2d, FiniteDifferences) {
  Tensor x = random_tensor({2, 2, 5, 5}, 21), w = random_tensor({3, 2, 3, 3}, 22);
  const Tensor r = random_tensor({2, 3, 3, 3}, 23);
  const auto loss = [&] { return dot(nn::conv2d(x, w, 2, 1), r); };
  const nn::Conv2dGrads g = nn::conv2d_backward(x, w, r, 2, 1);
  EXPECT_LT(relative_error(to_double(g.input), numeric_grad(x, loss)), 1e-2);
  EXPECT_LT(relative_error(to_double(g.weight), numeric_grad(w, loss)), 1e-2);
}

// ---- fully connected ----------------------------------------------------------

TEST(FullyConnected, Examples) {
  EXPECT_EQ(nn::fully_connected(Tensor({1, 2}, {1, 2}), Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2})),
            Tensor({1, 2}, {1, 2}));
  EXPECT_EQ(nn::fully_connected(Tensor({1, 2}, {1, 1}), Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, {3, -3})),
            Tensor({1, 2}, {4, -2}));
  EXPECT_EQ(nn::fully_connected(Tensor({3, 512}), Tensor({512, 1000}), Tensor({1000})).dims(), (Shape{3, 1000}));
  EXPECT_THROW(nn::fully_connected(Tensor({1, 3}), Tensor({2, 2}), Tensor({2})), ShapeError);
  EXPECT_THROW(nn::fully_connected(Tensor({1, 2}), Tensor({2, 2}), Tensor({3})), ShapeError);
}

TEST(FullyConnected, FiniteDifferences) {
  Tensor x = random_tensor({3, 5}, 31), w = random_tensor({5, 4}, 32), b = random_tensor({4}, 33);
  const Tensor r = random_tensor({3, 4}, 34);
  const auto loss = [&] { return dot(nn::fully_connected(x, w, b), r); };
  const nn::FullyConnectedGrads g = nn::fully_connected_backward(x, w, r);
  EXPECT_LT(relative_error(to_double(g.input), numeric_grad(x, loss)), 1e-2);
  EXPECT_LT(relative_error(to_double(g.weight), numeric_grad(w, loss)), 1e-2);
  EXPECT_LT(relative_error(to_double(g.bias), numeric_grad(b, loss)), 1e-2);
}

// ---- batch norm -------------------------------------------------------------

TEST(BatchNorm, ConstantInputGivesBeta) {
  auto stats = nn::RunningStats::identity(2);
  const Tensor y = nn::batch_norm(Tensor({2, 2, 3, 3}, 5.0f), Tensor({2}, 1.0f), Tensor({2}, {0.25f, -0.5f}), stats,
                                  nn::Mode::Train);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(y.at(n, 0, i, j), 0.25f);
        EXPECT_EQ(y.at(n, 1, i, j), -0.5f);
      }
}

TEST(BatchNorm, PlusMinusOneNormalizes) {
  Tensor x({2, 1, 1, 2}, {-1, 1, 1, -1});
  auto stats = nn::RunningStats::identity(1);
  const Tensor y = nn::batch_norm(x, Tensor({1}, 1.0f), Tensor({1}), stats, nn::Mode::Train);
  const float expect = 1.0f / std::sqrt(1.0f + nn::kBatchNormEps);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], x[i] * expect, 1e-6f);
  // Running stats moved 10% toward the batch (mean 0, unbiased var 4/3).
  EXPECT_NEAR(stats.mean[0], 0.0f, 1e-7f);
  EXPECT_NEAR(stats.var[0], 0.9f + 0.1f * 4.0f / 3.0f, 1e-6f);
}

TEST(BatchNorm, EvalWithIdentityStatsIsIdentity) {
  const Tensor x = random_tensor({2, 3, 4, 4}, 41);
  auto stats = nn::RunningStats::identity(3);
  const Tensor y = nn::batch_norm(x, Tensor({3}, 1.0f), Tensor({3}), stats, nn::Mode::Eval);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-5f);
  EXPECT_THROW(nn::batch_norm(x, Tensor({2}, 1.0f), Tensor({2}), stats, nn::Mode::Eval), ShapeError);
}

TEST(BatchNorm, FiniteDifferences) {
  for (const Shape& dims : {Shape{3, 2, 3, 3}, Shape{5, 4}}) {
    Tensor x = random_tensor(dims, 51);
    const std::size_t c = dims[1];
    Tensor gamma = random_tensor({c}, 52, 0.5f, 1.5f), beta = random_tensor({c}, 53);
    const Tensor r = random_tensor(dims, 54);
    const auto loss = [&] {
      auto s = nn::RunningStats::identity(c);
      return dot(nn::batch_norm(x, gamma, beta, s, nn::Mode::Train), r);
    };
    auto stats = nn::RunningStats::identity(c);
    nn::BatchNormCache cache;
    nn::batch_norm(x, gamma, beta, stats, nn::Mode::Train, &cache);
    const nn::BatchNormGrads g = nn::batch_norm_backward(r, gamma, cache);
    EXPECT_LT(relative_error(to_double(g.input), numeric_grad(x, loss)), 1e-2);
    EXPECT_LT(relative_error(to_double(g.gamma), numeric_grad(gamma, loss)), 1e-2);
    EXPECT_LT(relative_error(to_double(g.beta), numeric_grad(beta, loss)), 1e-2);
  }
}

// ---- pooling ----------------------------------------------------------------

TEST(MaxPool, Examples) {
  const auto r = nn::max_pool2d(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  EXPECT_EQ(r.output, Tensor({1, 1, 1, 1}, 4.0f));
  EXPECT_EQ(nn::max_pool2d(Tensor({1, 128, 32, 32}), 2, 2).output.dims(), (Shape{1, 128, 16, 16}));
  EXPECT_THROW(nn::max_pool2d(Tensor({1, 1, 1, 1}), 2, 2), ShapeError);
}

TEST(MaxPool, TiesRouteToFirstElement) {
  const Tensor x({1, 1, 4, 4}, 7.0f);
  const auto r = nn::max_pool2d(x, 2, 2);
  EXPECT_EQ(r.output, Tensor({1, 1, 2, 2}, 7.0f));
  const Tensor g = nn::max_pool2d_backward(Tensor({1, 1, 2, 2}, 1.0f), r.argmax, x.dims());
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(g.at(0, 0, i, j), (i % 2 == 0 && j % 2 == 0) ? 1.0f : 0.0f);
  // Padded windows: padding never wins, even over negative values.
  const auto p = nn::max_pool2d(Tensor({1, 1, 2, 2}, -3.0f), 3, 2, 1);
  EXPECT_EQ(p.output, Tensor({1, 1, 1, 1}, -3.0f));
  EXPECT_EQ(p.argmax[0], 0u);
}

TEST(MaxPool, FiniteDifferences) {
  Tensor x = random_tensor({2, 2, 6, 6}, 61);  // distinct values, no ties
  const auto fwd = nn::max_pool2d(x, 3, 2, 1);
  const Tensor r = random_tensor(fwd.output.dims(), 62);
  const auto loss = [&] { return dot(nn::max_pool2d(x, 3, 2, 1).output, r); };
  const Tensor g = nn::max_pool2d_backward(r, fwd.argmax, x.dims());
  EXPECT_LT(relative_error(to_double(g), numeric_grad(x, loss, 1e-4f)), 1e-2);
}

TEST(GlobalAvgPoolAndRelu, FiniteDifferences) {
  Tensor x = random_tensor({2, 3, 4, 4}, 71);
  const Tensor r = random_tensor({2, 3}, 72);
  const auto loss = [&] { return dot(nn::global_avg_pool(x), r); };
  EXPECT_LT(relative_error(to_double(nn::global_avg_pool_backward(r, x.dims())), numeric_grad(x, loss)), 1e-2);

  Tensor z = random_tensor({3, 7}, 73);
  for (float& v : z.data())
    if (std::abs(v) < 0.01f) v = 0.5f;
  const Tensor rz = random_tensor({3, 7}, 74);
  const auto relu_loss = [&] { return dot(nn::relu(z), rz); };
  EXPECT_LT(relative_error(to_double(nn::relu_backward(rz, z)), numeric_grad(z, relu_loss)), 1e-2);
}

// ---- loss -------------------------------------------------------------------

TEST(SoftmaxCrossEntropy, Examples) {
  const int labels10[] = {3};
  EXPECT_NEAR(nn::softmax_cross_entropy(Tensor({1, 10}, 0.7f), labels10).loss, std::log(10.0f), 1e-6f);
  Tensor big({1, 10});
  big[3] = 1e4f;
  EXPECT_NEAR(nn::softmax_cross_entropy(big, labels10).loss, 0.0f, 1e-6f);
  const int label1[] = {1};
  EXPECT_NEAR(nn::softmax_cross_entropy(Tensor({1, 2}, {1, 2}), label1).loss, 0.313262f, 1e-6f);
  const int bad[] = {10};
  EXPECT_THROW(nn::softmax_cross_entropy(Tensor({1, 10}), bad), InputError);
}

TEST(SoftmaxCrossEntropy, ShiftInvariantAndGradient) {
  Tensor logits = random_tensor({4, 6}, 81, -3.0f, 3.0f);
  const int labels[] = {0, 5, 2, 2};
  const auto base = nn::softmax_cross_entropy(logits, labels);
  for (float shift : {-50.0f, 3.0f, 100.0f}) {
    Tensor moved = logits;
    for (std::size_t j = 0; j < 6; ++j) moved[6 + j] += shift;  // one row
    EXPECT_NEAR(nn::softmax_cross_entropy(moved, labels).loss, base.loss, 1e-6f);
  }
  const auto loss = [&] { return static_cast<double>(nn::softmax_cross_entropy(logits, labels).loss); };
  EXPECT_LT(relative_error(to_double(base.grad), numeric_grad(logits, loss)), 1e-2);
}

// ---- optimizer --------------------------------------------------------------

TEST(Sgd, Examples) {
  Tensor p = random_tensor({5}, 91), v({5});
  const Tensor keep = p;
  nn::sgd_step(p, random_tensor({5}, 92), v, 0.0f, 0.9f, 1e-4f);
  EXPECT_EQ(p, keep);

  Tensor one({1}, 1.0f), v1({1});
  nn::sgd_step(one, Tensor({1}, 0.5f), v1, 0.1f, 0.0f, 0.0f);
  EXPECT_FLOAT_EQ(one[0], 0.95f);

  Tensor z({1}), vz({1});
  nn::sgd_step(z, Tensor({1}, 1.0f), vz, 1.0f, 0.9f, 0.0f);
  EXPECT_FLOAT_EQ(z[0], -1.0f);
  nn::sgd_step(z, Tensor({1}, 1.0f), vz, 1.0f, 0.9f, 0.0f);
  EXPECT_FLOAT_EQ(z[0], -2.9f);

  EXPECT_THROW(nn::sgd_step(z, Tensor({2}), vz, 1.0f, 0.9f, 0.0f), ShapeError);
}

TEST(LrSchedule, Examples) {
  EXPECT_FLOAT_EQ(nn::lr_at_epoch(nn::LrSchedule::cifar(), 0), 0.1f);
  EXPECT_NEAR(nn::lr_at_epoch(nn::LrSchedule::cifar(), 130), 0.001f, 1e-9f);
  EXPECT_NEAR(nn::lr_at_epoch(nn::LrSchedule::imagenet(), 140), 0.0001f, 1e-10f);
  EXPECT_NEAR(nn::lr_at_epoch(nn::LrSchedule::cifar(), 60), 0.01f, 1e-9f);
  EXPECT_THROW((nn::LrSchedule{0.1f, {60, 60}, 0.1f}.validate()), InputError);
  EXPECT_THROW((nn::LrSchedule{0.0f, {}, 0.1f}.validate()), InputError);
}

TEST(TensorBasics, InvariantsHold) {
  EXPECT_THROW(Tensor({2, 0, 3}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  const Tensor t({2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.reshaped({3, 2}).dims(), (Shape{3, 2}));
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}
