#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fedsim/rng.hpp"
#include "fedsim/tensor.hpp"

namespace fedsim {

/// Row-major dense matrix used for features and probabilities.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }

  bool operator==(const Matrix&) const = default;
};

/// One client's local data. Rows [0, train_count) are the train split, the
/// rest are the test split.
struct Shard {
  Matrix features;
  std::vector<std::uint32_t> labels;
  std::size_t train_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t test_count() const noexcept { return size() - train_count; }
  std::size_t feature_dim() const noexcept { return features.cols; }

  bool operator==(const Shard&) const = default;
};

/// Softmax classifier over precomputed features: probabilities are
/// softmax(x W + b) with W of shape [d, k] and b of shape [k].
struct HeadModel {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> weights;  // [d, k] row-major
  std::vector<double> bias;     // [k]

  HeadModel() = default;
  HeadModel(std::size_t d, std::size_t k);  // zero-initialized

  /// Uniform(-0.05, 0.05) weights and zero bias from `seed`.
  static HeadModel random(std::size_t d, std::size_t k, std::uint64_t seed);
  /// Expects [W [d, k], b [k]]; throws kShapeMismatch otherwise.
  static HeadModel from_parameters(const Parameters& p);

  Parameters to_parameters() const;

  bool operator==(const HeadModel&) const = default;
};

/// Row-wise softmax of X W + b with max subtraction. Throws kShapeMismatch.
Matrix head_forward(const HeadModel& model, const Matrix& features);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad_weights;  // [d, k]
  std::vector<double> grad_bias;     // [k]
};

/// Mean cross-entropy and its closed-form gradients over the given rows:
/// grad W = X^T (P - Y) / n and grad b = colmean(P - Y).
/// Throws kShapeMismatch, kLabelOutOfRange, kEmptyShard (no rows).
LossGrad head_loss_grad(const HeadModel& model, const Matrix& features,
                        std::span<const std::uint32_t> labels);

/// Same, restricted to a subset of row indices.
LossGrad head_loss_grad(const HeadModel& model, const Matrix& features,
                        std::span<const std::uint32_t> labels,
                        std::span<const std::size_t> rows);

/// Called before each mini-batch with that batch's sample count. Returning
/// false stops training before the batch runs.
using BatchGate = std::function<bool(std::size_t batch_samples)>;

struct EpochStats {
  std::uint64_t sample_visits = 0;
  std::uint64_t batches = 0;
  bool stopped = false;
};

/// One pass over the train split in rng-shuffled order. Throws kEmptyShard,
/// kValidationError for batch_size == 0 or a negative learning rate.
EpochStats sgd_epoch(HeadModel& model, const Shard& shard, double learning_rate,
                     std::uint32_t batch_size, Rng& rng, const BatchGate& gate = {});

struct TrainOptions {
  std::uint32_t epochs = 1;
  double learning_rate = 0.05;
  std::uint32_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainStats {
  std::uint64_t sample_visits = 0;
  std::uint64_t batches = 0;
  double completed_epochs = 0.0;
  bool stopped = false;
};

/// `epochs` x sgd_epoch with one generator seeded from options.seed.
TrainStats train_local(HeadModel& model, const Shard& shard, const TrainOptions& options,
                       const BatchGate& gate = {});

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
  std::uint64_t num_examples = 0;
};

/// Mean cross-entropy and top-1 accuracy on the test split.
EvalStats evaluate_head(const HeadModel& model, const Shard& shard);

/// Same over rows [begin, end).
EvalStats evaluate_rows(const HeadModel& model, const Matrix& features,
                        std::span<const std::uint32_t> labels, std::size_t begin,
                        std::size_t end);

}  // namespace fedsim
