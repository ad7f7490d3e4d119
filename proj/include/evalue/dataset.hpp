#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evalue/error.hpp"
#include "evalue/specmath.hpp"

namespace evalue::datahub {

using Label = std::uint32_t;

// n x d embeddings with integer class labels in [0, num_classes).
struct EmbeddingDataset {
  Matrix features;
  std::vector<Label> labels;
  std::uint32_t num_classes = 0;
  std::string domain_tag;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  void validate() const {
    if (size() == 0) throw Error(ErrorCode::kInvalidArgument, "dataset is empty");
    if (labels.size() != size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "dataset has " + std::to_string(size()) + " rows but " +
                      std::to_string(labels.size()) + " labels");
    }
    if (!all_finite(features.data())) {
      throw Error(ErrorCode::kNonFinite, "dataset features are not finite");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= num_classes) {
        throw Error(ErrorCode::kLabelOutOfRange,
                    "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                        " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }
};

struct NormalizationRecord {
  Vector column_means;
  bool row_norm_applied = false;
  double ridge_applied = 0.0;
};

inline EmbeddingDataset subset(const EmbeddingDataset& data,
                               std::span<const std::size_t> indices) {
  EmbeddingDataset out;
  out.features = Matrix(indices.size(), data.dim());
  out.labels.reserve(indices.size());
  out.num_classes = data.num_classes;
  out.domain_tag = data.domain_tag;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = data.features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels.push_back(data.labels[indices[r]]);
  }
  return out;
}

inline EmbeddingDataset concat(const EmbeddingDataset& a, const EmbeddingDataset& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "cannot concatenate datasets of different width");
  }
  EmbeddingDataset out;
  out.features = Matrix(a.size() + b.size(), a.dim());
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::copy(a.features.row(i).begin(), a.features.row(i).end(), out.features.row(i).begin());
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    std::copy(b.features.row(i).begin(), b.features.row(i).end(),
              out.features.row(a.size() + i).begin());
  }
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.num_classes = std::max(a.num_classes, b.num_classes);
  out.domain_tag = a.domain_tag;
  return out;
}

inline Vector column_means(const Matrix& rows) {
  Vector means(rows.cols(), 0.0);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto x = rows.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) means[j] += x[j];
  }
  for (double& m : means) m /= static_cast<double>(rows.rows());
  return means;
}

// Subtracts column means in place and returns them.
inline Vector center_columns(Matrix& rows) {
  Vector means = column_means(rows);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto x = rows.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] -= means[j];
  }
  return means;
}

// Row L2 normalization followed by column centering.
inline std::pair<EmbeddingDataset, NormalizationRecord> normalize(const EmbeddingDataset& raw) {
  raw.validate();
  if (raw.size() < 2) throw Error(ErrorCode::kInvalidArgument, "normalize needs n >= 2");
  EmbeddingDataset out = raw;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto x = out.features.row(i);
    const double len = norm2(x);
    if (len < 1e-12) {
      throw Error(ErrorCode::kZeroRow, "row " + std::to_string(i) + " has zero norm");
    }
    for (double& v : x) v /= len;
  }
  NormalizationRecord record;
  record.row_norm_applied = true;
  record.column_means = center_columns(out.features);
  return {std::move(out), std::move(record)};
}

}  // namespace evalue::datahub
