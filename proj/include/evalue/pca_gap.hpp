#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "evalue/dataset.hpp"
#include "evalue/error.hpp"
#include "evalue/evcore.hpp"
#include "evalue/specmath.hpp"
#include "evalue/value_vector.hpp"

namespace evalue::datahub {

struct VarianceGap {
  double var_top = 0.0;
  double var_bottom = 0.0;
  std::size_t group_size = 0;
  std::size_t components = 0;
};

// Point indices ordered by descending score, ties by ascending index.
inline std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Projects the dataset onto its top-3 principal directions and reports the
// total variance of the top-valued and bottom-valued groups.
inline VarianceGap pca_variance_gap(const EmbeddingDataset& dataset, const ValueVector& values,
                                    double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "top_fraction must lie in (0, 0.5]");
  }
  values.validate(dataset.size());
  Matrix centered = dataset.features;
  center_columns(centered);
  const SymMatrix sigma = specmath::covariance(centered);
  const auto pairs = specmath::eig_full(sigma);
  if (evcore::is_singular(pairs.front().value, pairs.back().value)) {
    throw SingularCovarianceError(pairs.back().value, evcore::suggested_ridge(sigma),
                                  "pca_variance_gap on a singular covariance");
  }
  const std::size_t components = std::min<std::size_t>(3, pairs.size());
  const std::size_t group =
      std::max<std::size_t>(1, static_cast<std::size_t>(top_fraction * dataset.size()));
  const auto order = rank_by_score(values.scores);

  auto group_variance = [&](std::span<const std::size_t> members) {
    double total = 0.0;
    for (std::size_t c = 0; c < components; ++c) {
      Vector proj;
      proj.reserve(members.size());
      for (std::size_t idx : members) proj.push_back(dot(pairs[c].vector, centered.row(idx)));
      const double mean = std::accumulate(proj.begin(), proj.end(), 0.0) / proj.size();
      double var = 0.0;
      for (double p : proj) var += (p - mean) * (p - mean);
      total += var / static_cast<double>(proj.size());
    }
    return total;
  };
  const std::span<const std::size_t> all(order);
  return {group_variance(all.first(group)), group_variance(all.last(group)), group, components};
}

}  // namespace evalue::datahub
