#pragma once
// MNIST (IDX) and CIFAR-10 (binary) ingestion, stratified sampling and batching.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bnas/tensor.hpp"

namespace bnas::data {

enum class Source { Mnist, Cifar10, Synthetic };
enum class Split { Train, Val, Test };

struct Dataset {
  Tensor images;  // [N,C,H,W], pixels in [0,1]
  std::vector<int> labels;
  std::size_t class_count = 10;
  Split split = Split::Train;
  Source source = Source::Synthetic;

  std::size_t size() const { return labels.size(); }
  /// Copies the listed samples, in order.
  Dataset select(std::span<const std::size_t> indices) const;
  /// FNV-1a over dims, pixels and labels.
  std::uint64_t digest() const;
};

/// Per-channel standardization constants.
struct Normalization {
  std::vector<float> mean;
  std::vector<float> std;

  static Normalization for_source(Source source, std::size_t channels);
};

inline constexpr std::uint32_t kMnistImageMagic = 0x00000803;
inline constexpr std::uint32_t kMnistLabelMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 3073;

Dataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);
Dataset parse_cifar10_bin(std::span<const std::uint8_t> bytes);
/// Inverse of parse_cifar10_bin for datasets whose pixels are multiples of 1/255.
std::vector<std::uint8_t> serialize_cifar10_bin(const Dataset& ds);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);
/// Concatenates one or more CIFAR-10 batch files.
Dataset load_cifar10(std::span<const std::filesystem::path> batches);

/// Exactly `per_class` samples of every class, chosen by a seeded shuffle.
Dataset stratified_subset(const Dataset& ds, std::size_t per_class, std::uint64_t seed);

struct TrainValSplit {
  Dataset train;
  Dataset val;
};

/// Disjoint stratified train/validation subsets carved from one dataset.
TrainValSplit stratified_split(const Dataset& ds, std::size_t train_per_class, std::size_t val_per_class,
                               std::uint64_t seed);

struct Batch {
  Tensor images;  // standardized
  std::vector<int> labels;
};

/// One epoch of batches: seeded shuffle, optional CIFAR augmentation
/// (reflect-pad 4, random crop, horizontal flip), then standardization.
/// The last short batch is kept.
std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed, bool augment);

/// Standardized copy of the whole dataset, in order (evaluation).
Batch standardized(const Dataset& ds, std::size_t begin, std::size_t end);

/// Reverses the width axis of every image plane in place.
void flip_horizontal(Tensor& images);

}  // namespace bnas::data
