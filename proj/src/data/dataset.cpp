#include "bnas/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "bnas/error.hpp"

namespace bnas::data {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw FormatError("truncated header", offset);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

float pixel(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(ds.class_count);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  return by_class;
}

void standardize_into(const Dataset& ds, const Normalization& norm, std::size_t sample, float* dst) {
  const std::size_t c = ds.images.dim(1), plane = ds.images.dim(2) * ds.images.dim(3);
  const float* src = ds.images.ptr() + sample * c * plane;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float inv = 1.0f / norm.std[ch];
    for (std::size_t p = 0; p < plane; ++p) dst[ch * plane + p] = (src[ch * plane + p] - norm.mean[ch]) * inv;
  }
}

// Reflect-pad by `pad`, crop at (dy,dx) back to HxW, optionally mirror.
void augment_into(const float* src, std::size_t c, std::size_t h, std::size_t w, std::size_t pad, std::size_t dy,
                  std::size_t dx, bool flip, float* dst) {
  auto reflect = [](std::ptrdiff_t i, std::size_t n) {
    const auto len = static_cast<std::ptrdiff_t>(n);
    if (i < 0) i = -i;
    if (i >= len) i = 2 * len - 2 - i;
    return static_cast<std::size_t>(i);
  };
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t sy = reflect(static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(pad), h);
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t ox = flip ? w - 1 - x : x;
        const std::size_t sx = reflect(static_cast<std::ptrdiff_t>(ox + dx) - static_cast<std::ptrdiff_t>(pad), w);
        dst[(ch * h + y) * w + x] = src[(ch * h + sy) * w + sx];
      }
    }
  }
}

}  // namespace

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_count = class_count;
  out.split = split;
  out.source = source;
  if (indices.empty()) return out;
  Shape dims = images.dims();
  const std::size_t sample = images.size() / dims[0];
  dims[0] = indices.size();
  out.images = Tensor(dims);
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(images.ptr() + indices[i] * sample, sample, out.images.ptr() + i * sample);
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

std::uint64_t Dataset::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (std::size_t d : images.dims()) {
    const std::uint64_t v = d;
    mix(&v, sizeof v);
  }
  mix(images.ptr(), images.size() * sizeof(float));
  for (int l : labels) mix(&l, sizeof l);
  return h;
}

Normalization Normalization::for_source(Source source, std::size_t channels) {
  if (source == Source::Mnist && channels == 1) return {{0.1307f}, {0.3081f}};
  if (source == Source::Cifar10 && channels == 3) return {{0.4914f, 0.4822f, 0.4465f}, {0.2470f, 0.2435f, 0.2616f}};
  return {std::vector<float>(channels, 0.5f), std::vector<float>(channels, 0.5f)};
}

Dataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (read_be32(images, 0) != kMnistImageMagic) throw FormatError("bad MNIST image magic", 0);
  if (read_be32(labels, 0) != kMnistLabelMagic) throw FormatError("bad MNIST label magic", 0);
  const std::size_t n = read_be32(images, 4), rows = read_be32(images, 8), cols = read_be32(images, 12);
  const std::size_t n_labels = read_be32(labels, 4);
  if (n != n_labels)
    throw FormatError("image count " + std::to_string(n) + " differs from label count " + std::to_string(n_labels), 4);
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("empty MNIST dimensions", 4);
  const std::size_t pixels = n * rows * cols;
  if (images.size() < 16 + pixels) throw FormatError("truncated image payload", images.size());
  if (labels.size() < 8 + n) throw FormatError("truncated label payload", labels.size());

  Dataset ds;
  ds.source = Source::Mnist;
  ds.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < pixels; ++i) ds.images[i] = pixel(images[16 + i]);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t l = labels[8 + i];
    if (l > 9) throw FormatError("label " + std::to_string(l) + " outside [0,10)", 8 + i);
    ds.labels[i] = l;
  }
  return ds;
}

Dataset parse_cifar10_bin(std::span<const std::uint8_t> bytes) {
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
    throw FormatError("length " + std::to_string(bytes.size()) + " is not a multiple of 3073", bytes.size());
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Dataset ds;
  ds.source = Source::Cifar10;
  ds.images = Tensor({n, 3, 32, 32});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t offset = i * kCifarRecordBytes;
    if (bytes[offset] > 9) throw FormatError("label byte " + std::to_string(bytes[offset]) + " > 9", offset);
    ds.labels[i] = bytes[offset];
    float* dst = ds.images.ptr() + i * 3072;
    for (std::size_t p = 0; p < 3072; ++p) dst[p] = pixel(bytes[offset + 1 + p]);
  }
  return ds;
}

std::vector<std::uint8_t> serialize_cifar10_bin(const Dataset& ds) {
  if (ds.images.dims() != Shape{ds.size(), 3, 32, 32})
    throw ShapeError("CIFAR-10 records need [N,3,32,32], got " + shape_string(ds.images.dims()));
  std::vector<std::uint8_t> out(ds.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::uint8_t* rec = out.data() + i * kCifarRecordBytes;
    rec[0] = static_cast<std::uint8_t>(ds.labels[i]);
    const float* src = ds.images.ptr() + i * 3072;
    for (std::size_t p = 0; p < 3072; ++p)
      rec[1 + p] = static_cast<std::uint8_t>(std::lround(std::clamp(src[p], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lbl = read_file(labels);
  return parse_mnist_idx(img, lbl);
}

Dataset load_cifar10(std::span<const std::filesystem::path> batches) {
  if (batches.empty()) throw InputError("no CIFAR-10 batch files given");
  std::vector<std::uint8_t> all;
  for (const auto& path : batches) {
    const auto bytes = read_file(path);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return parse_cifar10_bin(all);
}

Dataset stratified_subset(const Dataset& ds, std::size_t per_class, std::uint64_t seed) {
  return stratified_split(ds, per_class, 0, seed).train;
}

TrainValSplit stratified_split(const Dataset& ds, std::size_t train_per_class, std::size_t val_per_class,
                               std::uint64_t seed) {
  auto by_class = indices_by_class(ds);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, val;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < train_per_class + val_per_class)
      throw InputError("class " + std::to_string(c) + " has " + std::to_string(idx.size()) + " samples, " +
                       std::to_string(train_per_class + val_per_class) + " requested");
    std::shuffle(idx.begin(), idx.end(), rng);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_per_class));
    val.insert(val.end(), idx.begin() + static_cast<std::ptrdiff_t>(train_per_class),
               idx.begin() + static_cast<std::ptrdiff_t>(train_per_class + val_per_class));
  }
  std::ranges::sort(train);
  std::ranges::sort(val);
  TrainValSplit out{ds.select(train), ds.select(val)};
  out.train.split = Split::Train;
  out.val.split = Split::Val;
  return out;
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed, bool augment) {
  if (batch_size == 0) throw InputError("batch_size must be positive");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const Shape& dims = ds.images.dims();
  const std::size_t c = dims[1], h = dims[2], w = dims[3], sample = c * h * w;
  const Normalization norm = Normalization::for_source(ds.source, c);
  const bool do_augment = augment && ds.source == Source::Cifar10;
  constexpr std::size_t kPad = 4;
  std::vector<float> scratch(sample);

  std::vector<Batch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - begin);
    Batch b{Tensor({count, c, h, w}), std::vector<int>(count)};
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t idx = order[begin + i];
      b.labels[i] = ds.labels[idx];
      float* dst = b.images.ptr() + i * sample;
      if (do_augment) {
        const std::size_t dy = rng() % (2 * kPad + 1), dx = rng() % (2 * kPad + 1);
        const bool flip = (rng() & 1) != 0;
        augment_into(ds.images.ptr() + idx * sample, c, h, w, kPad, dy, dx, flip, scratch.data());
        for (std::size_t ch = 0; ch < c; ++ch) {
          const float inv = 1.0f / norm.std[ch];
          for (std::size_t p = 0; p < h * w; ++p) dst[ch * h * w + p] = (scratch[ch * h * w + p] - norm.mean[ch]) * inv;
        }
      } else {
        standardize_into(ds, norm, idx, dst);
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

Batch standardized(const Dataset& ds, std::size_t begin, std::size_t end) {
  const Shape& dims = ds.images.dims();
  const std::size_t sample = dims[1] * dims[2] * dims[3];
  const Normalization norm = Normalization::for_source(ds.source, dims[1]);
  Batch b{Tensor({end - begin, dims[1], dims[2], dims[3]}), {}};
  for (std::size_t i = begin; i < end; ++i) {
    standardize_into(ds, norm, i, b.images.ptr() + (i - begin) * sample);
    b.labels.push_back(ds.labels[i]);
  }
  return b;
}

void flip_horizontal(Tensor& images) {
  const std::size_t w = images.dim(3);
  const std::size_t rows = images.size() / w;
  for (std::size_t r = 0; r < rows; ++r) std::reverse(images.ptr() + r * w, images.ptr() + (r + 1) * w);
}

}  // namespace bnas::data
