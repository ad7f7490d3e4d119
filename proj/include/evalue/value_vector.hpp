#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evalue/error.hpp"
#include "evalue/specmath.hpp"

namespace evalue {

// Per-point scores produced by one valuation method.
struct ValueVector {
  std::string method;
  Vector scores;
  double weight_w = 0.0;  // 0 when no EV combination was applied
  std::optional<std::int64_t> seed;

  std::size_t size() const noexcept { return scores.size(); }

  void validate(std::size_t expected_size) const {
    if (scores.size() != expected_size) {
      throw Error(ErrorCode::kDimensionMismatch,
                  method + " produced " + std::to_string(scores.size()) +
                      " scores for " + std::to_string(expected_size) + " points");
    }
    if (!all_finite(scores)) throw Error(ErrorCode::kNonFinite, method + " scores not finite");
  }
};

}  // namespace evalue
