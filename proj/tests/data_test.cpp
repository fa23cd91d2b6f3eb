#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "bnas/data/dataset.hpp"
#include "bnas/error.hpp"
#include "test_support.hpp"

using namespace bnas;
using namespace bnas::data;

namespace {

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t n, std::uint32_t rows, std::uint32_t cols) {
  std::vector<std::uint8_t> b;
  put_be32(b, kMnistImageMagic);
  put_be32(b, n);
  put_be32(b, rows);
  put_be32(b, cols);
  for (std::uint32_t i = 0; i < n * rows * cols; ++i) b.push_back(static_cast<std::uint8_t>(i * 37));
  return b;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t n) {
  std::vector<std::uint8_t> b;
  put_be32(b, kMnistLabelMagic);
  put_be32(b, n);
  for (std::uint32_t i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(i % 10));
  return b;
}

std::vector<std::uint8_t> cifar_records(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint8_t> b(n * kCifarRecordBytes);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>(rng());
  for (std::size_t r = 0; r < n; ++r) b[r * kCifarRecordBytes] = static_cast<std::uint8_t>(rng() % 10);
  return b;
}

Dataset labelled(std::size_t per_class, std::size_t classes = 10) {
  Dataset ds;
  const std::size_t n = per_class * classes;
  ds.images = bnas::testing::random_tensor({n, 1, 4, 4}, 1, 0.0f, 1.0f);
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>((i * 7) % classes));
  ds.class_count = classes;
  ds.source = Source::Mnist;
  return ds;
}

}  // namespace

TEST(Mnist, ParsesHeaderAndScalesPixels) {
  const auto images = idx_images(3, 4, 5);
  const Dataset ds = parse_mnist_idx(images, idx_labels(3));
  EXPECT_EQ(ds.images.dims(), (Shape{3, 1, 4, 5}));
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 1, 2}));
  for (std::size_t i = 0; i < ds.images.size(); ++i) EXPECT_EQ(ds.images[i], images[16 + i] / 255.0f);

  std::vector<std::uint8_t> white = idx_images(1, 1, 1);
  white.back() = 255;
  EXPECT_EQ(parse_mnist_idx(white, idx_labels(1)).images[0], 1.0f);
}

TEST(Mnist, HeaderOnlyFileOfFullSize) {
  std::vector<std::uint8_t> header;
  put_be32(header, kMnistImageMagic);
  put_be32(header, 60000);
  put_be32(header, 28);
  put_be32(header, 28);
  header.resize(16 + 60000ull * 28 * 28, 0);
  std::vector<std::uint8_t> labels;
  put_be32(labels, kMnistLabelMagic);
  put_be32(labels, 60000);
  labels.resize(8 + 60000, 3);
  EXPECT_EQ(parse_mnist_idx(header, labels).images.dims(), (Shape{60000, 1, 28, 28}));
}

TEST(Mnist, Errors) {
  auto images = idx_images(3, 2, 2);
  auto labels = idx_labels(3);
  auto bad = images;
  bad[3] = 0x01;
  try {
    parse_mnist_idx(bad, labels);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  EXPECT_THROW(parse_mnist_idx(images, idx_labels(4)), FormatError);
  images.pop_back();
  EXPECT_THROW(parse_mnist_idx(images, labels), FormatError);
  EXPECT_THROW(parse_mnist_idx(std::vector<std::uint8_t>{0, 0}, labels), FormatError);
}

TEST(Cifar, ParsesRecordsAndPlaneOrder) {
  std::vector<std::uint8_t> rec(kCifarRecordBytes);
  rec[0] = 6;
  std::fill(rec.begin() + 1, rec.begin() + 1 + 1024, 10);
  std::fill(rec.begin() + 1 + 1024, rec.begin() + 1 + 2048, 20);
  std::fill(rec.begin() + 1 + 2048, rec.end(), 30);
  rec[1] = 200;  // red plane, pixel (0,0)
  const Dataset ds = parse_cifar10_bin(rec);
  EXPECT_EQ(ds.images.dims(), (Shape{1, 3, 32, 32}));
  EXPECT_EQ(ds.labels[0], 6);
  EXPECT_EQ(ds.images.at(0, 0, 0, 0), 200 / 255.0f);
  EXPECT_EQ(ds.images.at(0, 0, 0, 1), 10 / 255.0f);
  EXPECT_EQ(ds.images.at(0, 1, 5, 7), 20 / 255.0f);
  EXPECT_EQ(ds.images.at(0, 2, 31, 31), 30 / 255.0f);
  EXPECT_EQ(parse_cifar10_bin(cifar_records(10000, 1)).images.dims(), (Shape{10000, 3, 32, 32}));
}

TEST(Cifar, RoundTripIsByteIdentical) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto bytes = cifar_records(17, seed);
    EXPECT_EQ(serialize_cifar10_bin(parse_cifar10_bin(bytes)), bytes);
  }
}

TEST(Cifar, Errors) {
  auto bytes = cifar_records(2, 4);
  bytes.pop_back();
  EXPECT_THROW(parse_cifar10_bin(bytes), FormatError);
  bytes = cifar_records(2, 4);
  bytes[kCifarRecordBytes] = 10;
  try {
    parse_cifar10_bin(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), kCifarRecordBytes);
  }
}

TEST(StratifiedSubset, ExactHistogramAndDeterminism) {
  const Dataset ds = labelled(20);
  const Dataset sub = stratified_subset(ds, 5, 3);
  EXPECT_EQ(sub.size(), 50u);
  std::map<int, int> hist;
  for (int l : sub.labels) ++hist[l];
  for (int c = 0; c < 10; ++c) EXPECT_EQ(hist[c], 5);
  EXPECT_EQ(stratified_subset(ds, 5, 3).images, sub.images);
  EXPECT_NE(stratified_subset(ds, 5, 4).images, sub.images);

  const Dataset full = stratified_subset(ds, 20, 9);
  EXPECT_EQ(full.size(), ds.size());
  EXPECT_EQ(full.digest(), ds.digest());  // sorted selection of everything

  try {
    stratified_subset(ds, 21, 0);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("class 0"), std::string::npos);
  }
}

TEST(StratifiedSubset, ThousandClassesOfFifty) {
  Dataset ds;
  ds.class_count = 1000;
  const std::size_t n = 1000 * 52;
  ds.images = Tensor({n, 1, 1, 1});
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(i % 1000));
  EXPECT_EQ(stratified_subset(ds, 50, 0).size(), 50000u);
}

TEST(StratifiedSplit, DisjointStratifiedParts) {
  Dataset ds = labelled(12);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.images[i * 16] = static_cast<float>(i);  // tag samples
  const TrainValSplit s = stratified_split(ds, 8, 3, 1);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.val.size(), 30u);
  std::set<float> tags;
  for (std::size_t i = 0; i < s.train.size(); ++i) tags.insert(s.train.images[i * 16]);
  for (std::size_t i = 0; i < s.val.size(); ++i) EXPECT_FALSE(tags.contains(s.val.images[i * 16]));
  EXPECT_EQ(s.val.split, Split::Val);
}

TEST(MakeBatches, SizesDeterminismAndRange) {
  const Dataset ds = labelled(1);
  std::vector<std::size_t> sizes;
  for (const auto& b : make_batches(ds, 3, 0, false)) sizes.push_back(b.labels.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 3, 1}));

  const auto a = make_batches(ds, 4, 7, false), b = make_batches(ds, 4, 7, false);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].images, b[i].images);
    EXPECT_EQ(a[i].labels, b[i].labels);
  }
  const float lo = (0.0f - 0.1307f) / 0.3081f, hi = (1.0f - 0.1307f) / 0.3081f;
  for (const auto& batch : a)
    for (float v : batch.images.data()) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, lo - 1e-5f);
      EXPECT_LE(v, hi + 1e-5f);
    }
  EXPECT_THROW(make_batches(ds, 0, 0, false), InputError);
}

TEST(MakeBatches, CifarAugmentationKeepsShapeAndRange) {
  const Dataset ds = parse_cifar10_bin(cifar_records(6, 2));
  const auto batches = make_batches(ds, 4, 1, true);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].images.dims(), (Shape{4, 3, 32, 32}));
  for (const auto& b : batches)
    for (float v : b.images.data()) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_LT(std::abs(v), 3.0f);
    }
}

TEST(FlipHorizontal, IsAnInvolution) {
  const Tensor x = bnas::testing::random_tensor({2, 3, 5, 6}, 8);
  Tensor y = x;
  flip_horizontal(y);
  EXPECT_NE(y, x);
  EXPECT_EQ(y.at(1, 2, 3, 0), x.at(1, 2, 3, 5));
  flip_horizontal(y);
  EXPECT_EQ(y, x);
}

TEST(MnistSubsetFile, LoadsWhenPresent) {
  const std::filesystem::path dir = BNAS_DATA_DIR "/mnist5k";
  if (!std::filesystem::exists(dir / "train-images-idx3-ubyte")) GTEST_SKIP();
  const Dataset ds = load_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  EXPECT_EQ(ds.images.dims(), (Shape{5000, 1, 28, 28}));
  std::map<int, int> hist;
  for (int l : ds.labels) ++hist[l];
  for (int c = 0; c < 10; ++c) EXPECT_EQ(hist[c], 500);
}
