#include "fedsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.n_features < 1) fail(ErrorCode::kInvalidSpec, "n_features must be >= 1");
  if (spec.n_classes < 2) fail(ErrorCode::kInvalidSpec, "n_classes must be >= 2");
  if (spec.n_samples < spec.n_classes) {
    fail(ErrorCode::kInvalidSpec, "n_samples must be >= n_classes");
  }
  if (!(spec.class_separation > 0.0) || !std::isfinite(spec.class_separation)) {
    fail(ErrorCode::kInvalidSpec, "class_separation must be > 0");
  }
  const auto d = spec.n_features;
  const auto k = spec.n_classes;
  Rng rng(spec.seed);

  Matrix centers(k, d);
  for (std::size_t c = 0; c < k; ++c) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        centers(c, j) = rng.normal();
        norm += centers(c, j) * centers(c, j);
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      centers(c, j) *= spec.class_separation / norm;
    }
  }

  Dataset out{Matrix(spec.n_samples, d), std::vector<std::uint32_t>(spec.n_samples)};
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const auto y = static_cast<std::uint32_t>(i % k);
    out.labels[i] = y;
    for (std::size_t j = 0; j < d; ++j) {
      out.features(i, j) = centers(y, j) + rng.normal();
    }
  }
  return out;
}

namespace {

Shard make_shard(const Dataset& data, std::vector<std::size_t> rows, Rng& rng) {
  rng.shuffle(std::span<std::size_t>(rows));
  const auto d = data.features.cols;
  Shard s;
  s.features = Matrix(rows.size(), d);
  s.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(data.features.row(rows[i]).begin(), d, s.features.data.begin() + i * d);
    s.labels[i] = data.labels[rows[i]];
  }
  s.train_count = static_cast<std::size_t>(std::floor(kTrainFraction * rows.size()));
  if (s.train_count == 0 && !rows.empty()) s.train_count = 1;
  return s;
}

}  // namespace

std::vector<Shard> partition(const Dataset& data, std::size_t n_shards,
                             const PartitionScheme& scheme, std::uint64_t seed) {
  const auto n = data.labels.size();
  if (n_shards == 0) fail(ErrorCode::kValidationError, "n_shards must be >= 1");
  if (n_shards > n) {
    fail(ErrorCode::kTooManyShards, std::to_string(n_shards) + " shards for " +
                                        std::to_string(n) + " samples");
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> assignment(n_shards);

  if (scheme.kind == PartitionScheme::Kind::kIid) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t start = 0;
    for (std::size_t s = 0; s < n_shards; ++s) {
      const auto len = n / n_shards + (s < n % n_shards ? 1 : 0);
      assignment[s].assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(start + len));
      start += len;
    }
  } else {
    if (!(scheme.alpha > 0.0)) fail(ErrorCode::kValidationError, "alpha must be > 0");
    std::uint32_t max_label = 0;
    for (auto y : data.labels) max_label = std::max(max_label, y);
    std::vector<std::vector<std::size_t>> by_class(max_label + 1);
    for (std::size_t i = 0; i < n; ++i) by_class[data.labels[i]].push_back(i);
    for (auto& members : by_class) {
      rng.shuffle(std::span<std::size_t>(members));
      const auto props = rng.dirichlet(scheme.alpha, n_shards);
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t s = 0; s < n_shards; ++s) {
        cum += props[s];
        auto end = s + 1 == n_shards
                       ? members.size()
                       : std::min(members.size(),
                                  static_cast<std::size_t>(std::llround(cum * members.size())));
        end = std::max(end, start);
        assignment[s].insert(assignment[s].end(),
                             members.begin() + static_cast<std::ptrdiff_t>(start),
                             members.begin() + static_cast<std::ptrdiff_t>(end));
        start = end;
      }
    }
    // Every shard needs at least one sample; take it from the largest.
    for (auto& shard : assignment) {
      if (!shard.empty()) continue;
      auto largest = std::max_element(
          assignment.begin(), assignment.end(),
          [](const auto& a, const auto& b) { return a.size() < b.size(); });
      shard.push_back(largest->back());
      largest->pop_back();
    }
  }

  std::vector<Shard> shards;
  shards.reserve(n_shards);
  for (auto& rows : assignment) shards.push_back(make_shard(data, std::move(rows), rng));
  return shards;
}

Bytes encode_shard(const Shard& shard, std::size_t num_classes) {
  ByteWriter w;
  ConfigMap meta;
  meta.set("num_classes", static_cast<std::int64_t>(num_classes));
  meta.set("train_count", static_cast<std::int64_t>(shard.train_count));
  encode_config(meta, w);
  Parameters p;
  p.tensors.push_back(make_tensor({static_cast<std::uint32_t>(shard.features.rows),
                                   static_cast<std::uint32_t>(shard.features.cols)},
                                  shard.features.data));
  const auto n = static_cast<std::uint32_t>(shard.labels.size());
  p.tensors.push_back(
      make_tensor({n}, std::vector<double>(shard.labels.begin(), shard.labels.end())));
  encode_parameters(p, w);
  return std::move(w).take();
}

ShardFile decode_shard(ByteView bytes) {
  ByteReader r(bytes);
  const auto meta = decode_config(r);
  const auto p = decode_parameters(r);
  if (!r.at_end()) fail(ErrorCode::kMalformedEncoding, "trailing bytes in shard file");
  if (p.tensors.size() != 2 || p.tensors[0].ndims() != 2 || p.tensors[1].ndims() != 1 ||
      p.tensors[0].shape()[0] != p.tensors[1].shape()[0]) {
    fail(ErrorCode::kMalformedEncoding, "shard needs features [n, d] and labels [n]");
  }
  ShardFile out;
  auto& s = out.shard;
  s.features.rows = p.tensors[0].shape()[0];
  s.features.cols = p.tensors[0].shape()[1];
  s.features.data = p.tensors[0].data();
  std::uint32_t max_label = 0;
  for (auto v : p.tensors[1].data()) {
    if (v < 0.0 || v != std::floor(v) || v > 4294967295.0) {
      fail(ErrorCode::kMalformedEncoding, "label " + std::to_string(v) + " is not a class index");
    }
    s.labels.push_back(static_cast<std::uint32_t>(v));
    max_label = std::max(max_label, s.labels.back());
  }
  const auto train = meta.get_int("train_count");
  if (train < 0 || static_cast<std::uint64_t>(train) > s.labels.size()) {
    fail(ErrorCode::kMalformedEncoding, "train_count out of range");
  }
  s.train_count = static_cast<std::size_t>(train);
  out.num_classes = meta.contains("num_classes")
                        ? static_cast<std::size_t>(meta.get_int("num_classes"))
                        : static_cast<std::size_t>(max_label) + 1;
  if (!s.labels.empty() && max_label >= out.num_classes) {
    fail(ErrorCode::kMalformedEncoding, "label exceeds num_classes");
  }
  return out;
}

void write_shard_file(const std::filesystem::path& path, const Shard& shard,
                      std::size_t num_classes) {
  const auto bytes = encode_shard(shard, num_classes);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

ShardFile read_shard_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_shard(bytes);
}

}  // namespace fedsim
