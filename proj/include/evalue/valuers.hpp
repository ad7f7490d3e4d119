#pragma once

// Baseline in-distribution valuers: exact KNN-Shapley, its brute-force
// oracle, Data-OOB and the uniform random valuer.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "evalue/dataset.hpp"
#include "evalue/error.hpp"
#include "evalue/parallel.hpp"
#include "evalue/softmax.hpp"
#include "evalue/value_vector.hpp"

namespace evalue::valuers {

struct ShapleyConfig {
  std::size_t k_neighbors = 1000;
  // Utility of the empty coalition. Fixed at 0; the closed-form recursion is
  // exact only under this convention.
  double empty_set_utility = 0.0;
};

namespace detail {

inline void check_pair(const EmbeddingDataset& train, const EmbeddingDataset& val,
                       const ShapleyConfig& cfg) {
  if (val.size() == 0) throw Error(ErrorCode::kEmptyValidation, "validation set is empty");
  if (train.size() == 0) throw Error(ErrorCode::kInvalidArgument, "training set is empty");
  if (cfg.k_neighbors == 0 || cfg.k_neighbors > train.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "K=" + std::to_string(cfg.k_neighbors) + " must lie in [1, n=" +
                    std::to_string(train.size()) + "]");
  }
  if (train.dim() != val.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "train dim " + std::to_string(train.dim()) + " vs validation dim " +
                    std::to_string(val.dim()));
  }
}

// Training indices sorted by ascending distance to `query`, ties by index.
inline std::vector<std::size_t> neighbor_order(const Matrix& train, std::span<const double> query) {
  const std::size_t n = train.rows();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = train.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - query[j];
      acc += diff * diff;
    }
    dist[i] = acc;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  });
  return order;
}

constexpr std::size_t kValidationBlock = 32;

}  // namespace detail

// Exact Shapley values under the K-nearest-neighbor accuracy utility via the
// closed-form recursion from the farthest neighbor inwards:
//   s_N = 1[y_N == y] / N
//   s_i = s_{i+1} + (1[y_i == y] - 1[y_{i+1} == y]) * min(K, i) / (K * i)
// averaged over validation points.
inline ValueVector knn_shapley(const EmbeddingDataset& train, const EmbeddingDataset& val,
                               const ShapleyConfig& cfg) {
  detail::check_pair(train, val, cfg);
  const std::size_t n = train.size();
  const double k = static_cast<double>(cfg.k_neighbors);
  const std::size_t blocks = (val.size() + detail::kValidationBlock - 1) / detail::kValidationBlock;
  // Per-block partial sums; the block layout is independent of the worker
  // count so the final reduction is reproducible.
  std::vector<Vector> partial(blocks, Vector(n, 0.0));
  parallel_for(blocks, [&](std::size_t block) {
    const std::size_t begin = block * detail::kValidationBlock;
    const std::size_t end = std::min(val.size(), begin + detail::kValidationBlock);
    Vector& acc = partial[block];
    for (std::size_t v = begin; v < end; ++v) {
      const auto order = detail::neighbor_order(train.features, val.features.row(v));
      const auto label = val.labels[v];
      auto match = [&](std::size_t rank) { return train.labels[order[rank]] == label ? 1.0 : 0.0; };
      double s = match(n - 1) / static_cast<double>(n);
      acc[order[n - 1]] += s;
      for (std::size_t rank = n - 1; rank-- > 0;) {
        const double i = static_cast<double>(rank + 1);
        s += (match(rank) - match(rank + 1)) * std::min(k, i) / (k * i);
        acc[order[rank]] += s;
      }
    }
  });
  ValueVector out;
  out.method = "knn-shapley";
  out.scores.resize(n);
  Vector column(blocks);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < blocks; ++b) column[b] = partial[b][i];
    out.scores[i] = pairwise_sum(column) / static_cast<double>(val.size());
  }
  return out;
}

// U(S): mean over validation points of (1/K) * matching labels among the
// min(K, |S|) nearest members of S. U(empty) = cfg.empty_set_utility.
inline double knn_utility(const EmbeddingDataset& train, const EmbeddingDataset& val,
                          const ShapleyConfig& cfg, std::uint32_t subset_mask) {
  if (subset_mask == 0) return cfg.empty_set_utility;
  const double k = static_cast<double>(cfg.k_neighbors);
  double total = 0.0;
  for (std::size_t v = 0; v < val.size(); ++v) {
    const auto order = detail::neighbor_order(train.features, val.features.row(v));
    std::size_t taken = 0;
    double matches = 0.0;
    for (std::size_t idx : order) {
      if (taken == cfg.k_neighbors) break;
      if ((subset_mask >> idx) & 1U) {
        ++taken;
        if (train.labels[idx] == val.labels[v]) matches += 1.0;
      }
    }
    total += matches / k;
  }
  return total / static_cast<double>(val.size());
}

// Exact Shapley values by enumerating all 2^n coalitions. Test oracle only.
inline ValueVector shapley_oracle(const EmbeddingDataset& train, const EmbeddingDataset& val,
                                  const ShapleyConfig& cfg) {
  detail::check_pair(train, val, cfg);
  const std::size_t n = train.size();
  if (n > 12) {
    throw Error(ErrorCode::kTooLarge,
                "shapley_oracle enumerates 2^n subsets; n=" + std::to_string(n) + " > 12");
  }
  const std::uint32_t subsets = 1U << n;
  Vector utility(subsets);
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    utility[mask] = knn_utility(train, val, cfg, mask);
  }
  Vector factorial(n + 1, 1.0);
  for (std::size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  ValueVector out;
  out.method = "shapley-oracle";
  out.scores.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint32_t bit = 1U << k;
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(mask));
      const double weight = factorial[size] * factorial[n - size - 1] / factorial[n];
      out.scores[k] += weight * (utility[mask | bit] - utility[mask]);
    }
  }
  return out;
}

struct DataOobConfig {
  std::size_t num_models = 100;
  TrainConfig trainer{10, 0.01};
};

struct DataOobResult {
  ValueVector values;
  std::vector<std::size_t> never_out_of_bag;
};

// Data-OOB from explicit bootstrap index lists (one per model).
inline DataOobResult data_oob_from_bootstraps(const EmbeddingDataset& train,
                                              const std::vector<std::vector<std::size_t>>& bootstraps,
                                              const TrainConfig& trainer) {
  const std::size_t n = train.size();
  const std::size_t models = bootstraps.size();
  // Per-model 0/1 indicators; integer totals make the reduction exact.
  std::vector<std::vector<std::uint8_t>> oob(models), correct(models);
  parallel_for(models, [&](std::size_t m) {
    std::vector<std::uint8_t> in_bag(n, 0);
    for (std::size_t idx : bootstraps[m]) {
      if (idx >= n) throw Error(ErrorCode::kInvalidArgument, "bootstrap index out of range");
      in_bag[idx] = 1;
    }
    SoftmaxModel model;
    try {
      model = train_softmax(subset(train, bootstraps[m]), trainer);
    } catch (const Error& e) {
      throw Error(e.code(), "Data-OOB model " + std::to_string(m) + ": " + e.what());
    }
    oob[m].assign(n, 0);
    correct[m].assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      oob[m][i] = 1;
      correct[m][i] = model.predict(train.features.row(i)) == train.labels[i] ? 1 : 0;
    }
  });
  DataOobResult out;
  out.values.method = "data-oob";
  out.values.scores.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t oob_count = 0;
    std::size_t hits = 0;
    for (std::size_t m = 0; m < models; ++m) {
      oob_count += oob[m][i];
      hits += correct[m][i];
    }
    if (oob_count == 0) {
      out.never_out_of_bag.push_back(i);
    } else {
      out.values.scores[i] = static_cast<double>(hits) / static_cast<double>(oob_count);
    }
  }
  return out;
}

// Bootstrap m is drawn from a generator seeded with seed + m.
inline std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

inline DataOobResult data_oob(const EmbeddingDataset& train, const DataOobConfig& cfg,
                              std::int64_t seed) {
  if (cfg.num_models < 1) throw Error(ErrorCode::kInvalidArgument, "num_models must be >= 1");
  if (train.size() < 2) throw Error(ErrorCode::kInvalidArgument, "Data-OOB needs n >= 2");
  std::vector<std::vector<std::size_t>> bootstraps(cfg.num_models);
  for (std::size_t m = 0; m < cfg.num_models; ++m) {
    bootstraps[m] = bootstrap_indices(train.size(), static_cast<std::uint64_t>(seed) + m);
  }
  auto result = data_oob_from_bootstraps(train, bootstraps, cfg.trainer);
  result.values.seed = seed;
  return result;
}

inline ValueVector random_valuer(std::size_t n, std::int64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "random valuer needs n >= 1");
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  ValueVector out;
  out.method = "random";
  out.seed = seed;
  out.scores.resize(n);
  for (double& s : out.scores) s = uniform(rng);
  return out;
}

}  // namespace evalue::valuers
