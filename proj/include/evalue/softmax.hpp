#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "evalue/dataset.hpp"
#include "evalue/error.hpp"
#include "evalue/specmath.hpp"

namespace evalue::valuers {

using datahub::EmbeddingDataset;

// Multinomial logistic regression: logits = W x + b.
struct SoftmaxModel {
  Matrix weights;  // C x d
  Vector bias;     // C

  SoftmaxModel() = default;
  SoftmaxModel(std::size_t classes, std::size_t dim) : weights(classes, dim), bias(classes, 0.0) {}

  std::size_t classes() const noexcept { return bias.size(); }
  std::size_t dim() const noexcept { return weights.cols(); }

  void logits(std::span<const double> x, std::span<double> out) const {
    for (std::size_t c = 0; c < classes(); ++c) out[c] = dot(weights.row(c), x) + bias[c];
  }

  Vector predict_proba(std::span<const double> x) const {
    Vector p(classes());
    logits(x, p);
    const double top = *std::max_element(p.begin(), p.end());
    double total = 0.0;
    for (double& v : p) {
      v = std::exp(v - top);
      total += v;
    }
    for (double& v : p) v /= total;
    return p;
  }

  // Argmax of the logits; ties go to the lowest class index.
  std::uint32_t predict(std::span<const double> x) const {
    Vector z(classes());
    logits(x, z);
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c) {
      if (z[c] > z[best]) best = c;
    }
    return static_cast<std::uint32_t>(best);
  }

  bool operator==(const SoftmaxModel&) const = default;
};

struct LossAndGradient {
  double loss = 0.0;
  Matrix grad_weights;
  Vector grad_bias;
};

// Mean softmax cross-entropy over the dataset and its gradient.
inline LossAndGradient softmax_loss_and_gradient(const SoftmaxModel& model,
                                                 const EmbeddingDataset& data) {
  const std::size_t n = data.size();
  const std::size_t c_count = model.classes();
  const std::size_t d = model.dim();
  LossAndGradient out{0.0, Matrix(c_count, d), Vector(c_count, 0.0)};
  Vector z(c_count);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.features.row(i);
    model.logits(x, z);
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double& v : z) {
      v = std::exp(v - top);
      total += v;
    }
    const std::uint32_t y = data.labels[i];
    out.loss += -std::log(z[y] / total);
    for (std::size_t c = 0; c < c_count; ++c) {
      const double g = z[c] / total - (c == y ? 1.0 : 0.0);
      out.grad_bias[c] += g;
      auto row = out.grad_weights.row(c);
      for (std::size_t j = 0; j < d; ++j) row[j] += g * x[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss *= inv_n;
  for (double& g : out.grad_weights.data()) g *= inv_n;
  for (double& g : out.grad_bias) g *= inv_n;
  return out;
}

struct TrainConfig {
  int epochs = 30;
  double lr = 0.01;
};

// Full-batch gradient descent from a zero initialization; exactly `epochs`
// update steps.
inline SoftmaxModel train_softmax(const EmbeddingDataset& train, const TrainConfig& cfg = {}) {
  if (train.size() == 0) throw Error(ErrorCode::kInvalidArgument, "cannot train on an empty set");
  if (cfg.epochs < 0) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 0");
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.labels[i] >= train.num_classes) {
      throw Error(ErrorCode::kLabelOutOfRange,
                  "label " + std::to_string(train.labels[i]) + " at row " + std::to_string(i));
    }
  }
  SoftmaxModel model(train.num_classes, train.dim());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto step = softmax_loss_and_gradient(model, train);
    if (!std::isfinite(step.loss)) {
      throw Error(ErrorCode::kNonFinite,
                  "loss diverged at epoch " + std::to_string(epoch) + "; lower the learning rate");
    }
    auto w = model.weights.data();
    const auto gw = step.grad_weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.lr * gw[i];
    for (std::size_t c = 0; c < model.bias.size(); ++c) model.bias[c] -= cfg.lr * step.grad_bias[c];
  }
  if (!all_finite(model.weights.data()) || !all_finite(model.bias)) {
    throw Error(ErrorCode::kNonFinite, "trained parameters are not finite");
  }
  return model;
}

inline double evaluate(const SoftmaxModel& model, const EmbeddingDataset& test) {
  if (test.dim() != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model dim " + std::to_string(model.dim()) + " vs test dim " +
                    std::to_string(test.dim()));
  }
  if (test.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (model.predict(test.features.row(i)) == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace evalue::valuers
