#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "fedsim/dataset.hpp"
#include "fedsim/model.hpp"
#include "test_util.hpp"

namespace fedsim {
namespace {

DatasetSpec spec(std::size_t n, std::size_t d, std::size_t k, double sep, std::uint64_t seed) {
  DatasetSpec s;
  s.n_samples = n;
  s.n_features = d;
  s.n_classes = k;
  s.class_separation = sep;
  s.seed = seed;
  return s;
}

// Multiset of (label, row bytes) so shards can be compared to the source.
std::multiset<std::vector<double>> rows_of(const Matrix& x, const std::vector<std::uint32_t>& y,
                                           std::size_t begin, std::size_t end) {
  std::multiset<std::vector<double>> out;
  for (std::size_t r = begin; r < end; ++r) {
    std::vector<double> row(x.row(r).begin(), x.row(r).end());
    row.push_back(y[r]);
    out.insert(std::move(row));
  }
  return out;
}

TEST(Generate, SeededAndBalanced) {
  const auto a = generate_dataset(spec(103, 5, 4, 2.0, 1));
  const auto b = generate_dataset(spec(103, 5, 4, 2.0, 1));
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  std::vector<int> counts(4);
  for (auto y : a.labels) counts[y]++;
  EXPECT_LE(*std::max_element(counts.begin(), counts.end()) -
                *std::min_element(counts.begin(), counts.end()),
            1);
}

TEST(Generate, InvalidSpecs) {
  EXPECT_ERROR_CODE(generate_dataset(spec(3, 5, 4, 2.0, 1)), ErrorCode::kInvalidSpec);
  EXPECT_ERROR_CODE(generate_dataset(spec(10, 5, 4, 0.0, 1)), ErrorCode::kInvalidSpec);
  EXPECT_ERROR_CODE(generate_dataset(spec(10, 0, 4, 1.0, 1)), ErrorCode::kInvalidSpec);
  EXPECT_ERROR_CODE(generate_dataset(spec(10, 5, 1, 1.0, 1)), ErrorCode::kInvalidSpec);
}

TEST(Generate, WellSeparatedBinaryIsLearnable) {
  const auto data = generate_dataset(spec(1000, 32, 2, 10.0, 3));
  Shard s{data.features, data.labels, data.labels.size()};
  auto m = HeadModel::random(32, 2, 0);
  train_local(m, s, TrainOptions{5, 0.1, 32, 1});
  const auto st = evaluate_rows(m, s.features, s.labels, 0, s.size());
  EXPECT_GE(st.accuracy, 0.99);
}

TEST(Partition, SingleIidShardHoldsEverything) {
  const auto data = generate_dataset(spec(50, 3, 2, 1.0, 1));
  const auto shards = partition(data, 1, {}, 7);
  ASSERT_EQ(shards.size(), 1u);
  EXPECT_EQ(shards[0].size(), 50u);
  EXPECT_EQ(shards[0].train_count, 40u);
  EXPECT_EQ(rows_of(shards[0].features, shards[0].labels, 0, 50),
            rows_of(data.features, data.labels, 0, 50));
}

TEST(Partition, ShardsCoverDatasetDisjointly) {
  const auto data = generate_dataset(spec(503, 4, 5, 1.0, 2));
  const auto all = rows_of(data.features, data.labels, 0, 503);
  for (PartitionScheme scheme : {PartitionScheme{PartitionScheme::Kind::kIid, 0.5},
                                 PartitionScheme{PartitionScheme::Kind::kLabelSkew, 0.3}}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto shards = partition(data, 7, scheme, seed);
      ASSERT_EQ(shards.size(), 7u);
      std::multiset<std::vector<double>> seen;
      for (const auto& s : shards) {
        EXPECT_GE(s.size(), 1u);
        EXPECT_GE(s.train_count, 1u);
        EXPECT_LE(s.train_count, s.size());
        const auto r = rows_of(s.features, s.labels, 0, s.size());
        seen.insert(r.begin(), r.end());
      }
      EXPECT_EQ(seen, all);
    }
  }
}

TEST(Partition, IidSizesNearEqual) {
  const auto data = generate_dataset(spec(5000, 4, 10, 1.0, 2));
  const auto shards = partition(data, 10, {}, 0);
  for (const auto& s : shards) {
    EXPECT_EQ(s.size(), 500u);
    EXPECT_EQ(s.train_count, 400u);
  }
}

TEST(Partition, StrongLabelSkewDropsClasses) {
  const auto data = generate_dataset(spec(2000, 4, 10, 1.0, 2));
  bool missing = false;
  for (std::uint64_t seed = 0; seed < 5 && !missing; ++seed) {
    const auto shards =
        partition(data, 10, PartitionScheme{PartitionScheme::Kind::kLabelSkew, 0.1}, seed);
    for (const auto& s : shards) {
      std::set<std::uint32_t> classes(s.labels.begin(), s.labels.end());
      if (classes.size() < 10) missing = true;
    }
  }
  EXPECT_TRUE(missing);
}

TEST(Partition, Errors) {
  const auto data = generate_dataset(spec(10, 2, 2, 1.0, 1));
  EXPECT_ERROR_CODE(partition(data, 11, {}, 0), ErrorCode::kTooManyShards);
  EXPECT_ERROR_CODE(partition(data, 2, PartitionScheme{PartitionScheme::Kind::kLabelSkew, 0.0}, 0),
                    ErrorCode::kValidationError);
}

TEST(ShardFile, RoundTrip) {
  const auto shard = test::small_shard(30, 3, 4, 9);
  const auto bytes = encode_shard(shard, 4);
  const auto back = decode_shard(bytes);
  EXPECT_EQ(back.shard, shard);
  EXPECT_EQ(back.num_classes, 4u);

  const auto path = std::filesystem::temp_directory_path() / "fedsim_shard_test.bin";
  write_shard_file(path, shard, 4);
  EXPECT_EQ(read_shard_file(path).shard, shard);
  std::filesystem::remove(path);
}

TEST(ShardFile, CorruptContent) {
  auto bytes = encode_shard(test::small_shard(30, 3, 4, 9), 4);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(decode_shard(bytes), Error);
}

}  // namespace
}  // namespace fedsim
