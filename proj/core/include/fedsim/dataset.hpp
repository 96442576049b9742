#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsim/codec.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

/// Synthetic stand-in for frozen base-model features: k Gaussian blobs.
struct DatasetSpec {
  std::size_t n_samples = 5000;
  std::size_t n_features = 32;
  std::size_t n_classes = 10;
  double class_separation = 2.0;
  std::uint64_t seed = 0;

  bool operator==(const DatasetSpec&) const = default;
};

struct Dataset {
  Matrix features;
  std::vector<std::uint32_t> labels;
};

/// Class centers are drawn on the sphere of radius class_separation; each
/// sample is its center plus unit-variance noise. Labels cycle 0..k-1, so
/// class counts differ by at most one. Throws kInvalidSpec.
Dataset generate_dataset(const DatasetSpec& spec);

struct PartitionScheme {
  enum class Kind { kIid, kLabelSkew };
  Kind kind = Kind::kIid;
  double alpha = 0.5;  // Dirichlet concentration for kLabelSkew

  bool operator==(const PartitionScheme&) const = default;
};

/// Fraction of each shard used for training; the remainder is its test split.
inline constexpr double kTrainFraction = 0.8;

/// Splits the dataset into disjoint shards covering every sample. iid:
/// seeded shuffle then contiguous near-equal split. label_skew: per-class
/// shard proportions from a symmetric Dirichlet(alpha). Each shard is then
/// shuffled and split 80/20 train/test. Throws kTooManyShards,
/// kValidationError (alpha <= 0).
std::vector<Shard> partition(const Dataset& data, std::size_t n_shards,
                             const PartitionScheme& scheme, std::uint64_t seed);

/// Shard file: encode_config({num_classes, train_count}) followed by
/// encode_parameters([features [n, d], labels [n]]).
Bytes encode_shard(const Shard& shard, std::size_t num_classes);

struct ShardFile {
  Shard shard;
  std::size_t num_classes = 0;
};

/// Throws the codec errors, or kMalformedEncoding for inconsistent content.
ShardFile decode_shard(ByteView bytes);

void write_shard_file(const std::filesystem::path& path, const Shard& shard,
                      std::size_t num_classes);
ShardFile read_shard_file(const std::filesystem::path& path);

}  // namespace fedsim
