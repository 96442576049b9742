#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/error.hpp"

namespace fedsim {

HeadModel::HeadModel(std::size_t d, std::size_t k)
    : feature_dim(d), num_classes(k), weights(d * k, 0.0), bias(k, 0.0) {
  if (d < 1 || k < 2) {
    fail(ErrorCode::kShapeMismatch, "head needs d >= 1 and k >= 2, got d=" +
                                        std::to_string(d) + " k=" + std::to_string(k));
  }
}

HeadModel HeadModel::random(std::size_t d, std::size_t k, std::uint64_t seed) {
  HeadModel m(d, k);
  Rng rng(seed);
  for (auto& w : m.weights) w = rng.uniform(-0.05, 0.05);
  return m;
}

HeadModel HeadModel::from_parameters(const Parameters& p) {
  if (p.tensors.size() != 2 || p.tensors[0].ndims() != 2 || p.tensors[1].ndims() != 1 ||
      p.tensors[0].shape()[1] != p.tensors[1].shape()[0]) {
    fail(ErrorCode::kShapeMismatch, "head parameters must be [W [d, k], b [k]]");
  }
  HeadModel m(p.tensors[0].shape()[0], p.tensors[0].shape()[1]);
  m.weights = p.tensors[0].data();
  m.bias = p.tensors[1].data();
  return m;
}

Parameters HeadModel::to_parameters() const {
  Parameters p;
  p.tensors.push_back(make_tensor({static_cast<std::uint32_t>(feature_dim),
                                   static_cast<std::uint32_t>(num_classes)},
                                  weights));
  p.tensors.push_back(make_tensor({static_cast<std::uint32_t>(num_classes)}, bias));
  return p;
}

namespace {

void check_features(const HeadModel& model, const Matrix& features) {
  if (features.cols != model.feature_dim) {
    fail(ErrorCode::kShapeMismatch, "features have " + std::to_string(features.cols) +
                                        " columns, head expects " +
                                        std::to_string(model.feature_dim));
  }
}

// Writes softmax(x W + b) into probs and returns log-sum-exp of the logits.
double row_softmax(const HeadModel& model, std::span<const double> x,
                   std::span<double> probs) {
  const auto k = model.num_classes;
  std::copy(model.bias.begin(), model.bias.end(), probs.begin());
  for (std::size_t j = 0; j < model.feature_dim; ++j) {
    const double xj = x[j];
    const double* wrow = model.weights.data() + j * k;
    for (std::size_t c = 0; c < k; ++c) probs[c] += xj * wrow[c];
  }
  const double max_logit = *std::max_element(probs.begin(), probs.end());
  double sum = 0.0;
  for (auto& z : probs) {
    z = std::exp(z - max_logit);
    sum += z;
  }
  for (auto& z : probs) z /= sum;
  return max_logit + std::log(sum);
}

double class_logit(const HeadModel& model, std::span<const double> x, std::size_t c) {
  double z = model.bias[c];
  for (std::size_t j = 0; j < model.feature_dim; ++j) {
    z += x[j] * model.weights[j * model.num_classes + c];
  }
  return z;
}

}  // namespace

Matrix head_forward(const HeadModel& model, const Matrix& features) {
  check_features(model, features);
  Matrix probs(features.rows, model.num_classes);
  for (std::size_t r = 0; r < features.rows; ++r) {
    row_softmax(model, features.row(r),
                std::span<double>(probs.data).subspan(r * model.num_classes,
                                                      model.num_classes));
  }
  return probs;
}

LossGrad head_loss_grad(const HeadModel& model, const Matrix& features,
                        std::span<const std::uint32_t> labels,
                        std::span<const std::size_t> rows) {
  check_features(model, features);
  if (labels.size() != features.rows) {
    fail(ErrorCode::kShapeMismatch, std::to_string(labels.size()) + " labels for " +
                                        std::to_string(features.rows) + " rows");
  }
  if (rows.empty()) fail(ErrorCode::kEmptyShard, "no rows to evaluate the loss on");
  const auto d = model.feature_dim;
  const auto k = model.num_classes;
  LossGrad out;
  out.grad_weights.assign(d * k, 0.0);
  out.grad_bias.assign(k, 0.0);
  std::vector<double> probs(k);
  double loss_sum = 0.0;
  for (auto r : rows) {
    const auto y = labels[r];
    if (y >= k) {
      fail(ErrorCode::kLabelOutOfRange,
           "label " + std::to_string(y) + " at row " + std::to_string(r));
    }
    const auto x = features.row(r);
    const double lse = row_softmax(model, x, probs);
    loss_sum += lse - class_logit(model, x, y);
    probs[y] -= 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double xj = x[j];
      double* g = out.grad_weights.data() + j * k;
      for (std::size_t c = 0; c < k; ++c) g[c] += xj * probs[c];
    }
    for (std::size_t c = 0; c < k; ++c) out.grad_bias[c] += probs[c];
  }
  const double n = static_cast<double>(rows.size());
  out.loss = loss_sum / n;
  for (auto& g : out.grad_weights) g /= n;
  for (auto& g : out.grad_bias) g /= n;
  return out;
}

LossGrad head_loss_grad(const HeadModel& model, const Matrix& features,
                        std::span<const std::uint32_t> labels) {
  std::vector<std::size_t> rows(features.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return head_loss_grad(model, features, labels, rows);
}

EpochStats sgd_epoch(HeadModel& model, const Shard& shard, double learning_rate,
                     std::uint32_t batch_size, Rng& rng, const BatchGate& gate) {
  if (shard.train_count == 0) fail(ErrorCode::kEmptyShard, "train split is empty");
  if (batch_size == 0) fail(ErrorCode::kValidationError, "batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) {
    fail(ErrorCode::kValidationError, "learning_rate must be non-negative");
  }
  std::vector<std::size_t> order(shard.train_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));

  EpochStats stats;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto len = std::min<std::size_t>(batch_size, order.size() - start);
    if (gate && !gate(len)) {
      stats.stopped = true;
      break;
    }
    const auto batch = std::span<const std::size_t>(order).subspan(start, len);
    const auto lg = head_loss_grad(model, shard.features, shard.labels, batch);
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
      model.weights[i] -= learning_rate * lg.grad_weights[i];
    }
    for (std::size_t i = 0; i < model.bias.size(); ++i) {
      model.bias[i] -= learning_rate * lg.grad_bias[i];
    }
    stats.sample_visits += len;
    ++stats.batches;
  }
  return stats;
}

TrainStats train_local(HeadModel& model, const Shard& shard, const TrainOptions& options,
                       const BatchGate& gate) {
  if (shard.train_count == 0) fail(ErrorCode::kEmptyShard, "train split is empty");
  Rng rng(options.seed);
  TrainStats stats;
  for (std::uint32_t e = 0; e < options.epochs && !stats.stopped; ++e) {
    const auto epoch = sgd_epoch(model, shard, options.learning_rate,
                                 options.batch_size, rng, gate);
    stats.sample_visits += epoch.sample_visits;
    stats.batches += epoch.batches;
    stats.stopped = epoch.stopped;
  }
  stats.completed_epochs =
      static_cast<double>(stats.sample_visits) / static_cast<double>(shard.train_count);
  return stats;
}

EvalStats evaluate_rows(const HeadModel& model, const Matrix& features,
                        std::span<const std::uint32_t> labels, std::size_t begin,
                        std::size_t end) {
  check_features(model, features);
  if (end <= begin) fail(ErrorCode::kEmptyShard, "no rows to evaluate");
  const auto k = model.num_classes;
  std::vector<double> probs(k);
  double loss_sum = 0.0;
  std::uint64_t correct = 0;
  for (std::size_t r = begin; r < end; ++r) {
    const auto y = labels[r];
    if (y >= k) {
      fail(ErrorCode::kLabelOutOfRange,
           "label " + std::to_string(y) + " at row " + std::to_string(r));
    }
    const auto x = features.row(r);
    const double lse = row_softmax(model, x, probs);
    loss_sum += lse - class_logit(model, x, y);
    const auto best = static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (best == y) ++correct;
  }
  EvalStats s;
  s.num_examples = end - begin;
  s.loss = loss_sum / static_cast<double>(s.num_examples);
  s.accuracy = static_cast<double>(correct) / static_cast<double>(s.num_examples);
  return s;
}

EvalStats evaluate_head(const HeadModel& model, const Shard& shard) {
  if (shard.test_count() == 0) fail(ErrorCode::kEmptyShard, "test split is empty");
  return evaluate_rows(model, shard.features, shard.labels, shard.train_count, shard.size());
}

}  // namespace fedsim
