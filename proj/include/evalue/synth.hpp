#pragma once

// Synthetic covariate-shift pairs under the matching-marginal assumption:
// Sigma_OOD = Sigma_ID + E with E symmetric and zero on the diagonal, both
// covariances having unit diagonal, and one shared labeling teacher.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include "evalue/dataset.hpp"
#include "evalue/error.hpp"
#include "evalue/softmax.hpp"
#include "evalue/specmath.hpp"

namespace evalue::datahub {

inline constexpr const char* kGeneratorIdentity =
    "std::mt19937_64 + libstdc++ normal/uniform distributions";

struct ShiftSpec {
  std::size_t n_id = 2000;
  std::size_t n_ood = 1000;
  std::size_t d = 32;
  std::uint32_t num_classes = 4;
  double shift_strength = 0.3;
  std::uint64_t seed = 0;
};

struct ShiftPair {
  EmbeddingDataset id_set;
  EmbeddingDataset ood_set;
  valuers::SoftmaxModel teacher;
  SymMatrix sigma_id;
  SymMatrix sigma_ood;
  SymMatrix requested_shift;  // E as drawn, before PSD repair
  double shift_retained = 1.0;  // ||Sigma_OOD - Sigma_ID||_F / ||E||_F
  std::size_t clip_rounds = 0;
  NormalizationRecord id_norm;
  NormalizationRecord ood_norm;
};

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return std::mt19937_64(seq);
}

// D^{-1/2} M D^{-1/2} with the diagonal set to exactly 1.
inline Matrix unit_diagonal(const Matrix& m) {
  const std::size_t d = m.rows();
  Vector inv_sqrt(d);
  for (std::size_t i = 0; i < d; ++i) inv_sqrt[i] = 1.0 / std::sqrt(m(i, i));
  Matrix out(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out(i, j) = i == j ? 1.0 : m(i, j) * inv_sqrt[i] * inv_sqrt[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = avg;
      out(j, i) = avg;
    }
  }
  return out;
}

inline EmbeddingDataset sample_gaussian(const SymMatrix& sigma, std::size_t n,
                                        const valuers::SoftmaxModel& teacher,
                                        std::mt19937_64& rng, std::string tag) {
  const std::size_t d = sigma.dim();
  const Matrix chol = specmath::cholesky(sigma);
  std::normal_distribution<double> normal;
  EmbeddingDataset out;
  out.features = Matrix(n, d);
  out.labels.resize(n);
  out.num_classes = static_cast<std::uint32_t>(teacher.classes());
  out.domain_tag = std::move(tag);
  Vector z(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : z) v = normal(rng);
    auto x = out.features.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b <= a; ++b) acc += chol(a, b) * z[b];
      x[a] = acc;
    }
    out.labels[i] = teacher.predict(x);
  }
  return out;
}

}  // namespace detail

inline ShiftPair synth_shift_pair(const ShiftSpec& spec) {
  constexpr double kFloor = 1e-3;
  const std::size_t d = spec.d;
  if (d < 2 || spec.n_id < 2 || spec.n_ood < 2 || spec.num_classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "synth needs d, n_id, n_ood, classes >= 2");
  }
  if (!(spec.shift_strength >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "shift strength must be >= 0");
  }

  ShiftPair pair;
  {
    auto rng = detail::stream(spec.seed, 0);
    std::normal_distribution<double> normal;
    Matrix a(d, d);
    for (double& v : a.data()) v = normal(rng);
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) {
        const double v = dot(a.row(i), a.row(j)) / static_cast<double>(d) + (i == j ? 0.1 : 0.0);
        m(i, j) = v;
        m(j, i) = v;
      }
    }
    pair.sigma_id = SymMatrix(detail::unit_diagonal(m));
  }

  Matrix e(d, d);
  {
    auto rng = detail::stream(spec.seed, 1);
    std::uniform_real_distribution<double> uniform(-spec.shift_strength, spec.shift_strength);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        const double v = spec.shift_strength > 0.0 ? uniform(rng) : 0.0;
        e(i, j) = v;
        e(j, i) = v;
      }
    }
  }
  pair.requested_shift = SymMatrix(e);

  Matrix ood(d, d);
  for (std::size_t i = 0; i < ood.data().size(); ++i) {
    ood.data()[i] = pair.sigma_id.matrix().data()[i] + e.data()[i];
  }
  // PSD repair: clip eigenvalues at a floor, restore the unit diagonal, and
  // raise the floor until the rescaled matrix keeps lambda_min >= 1e-3.
  double floor = kFloor;
  while (specmath::eigenvalues(SymMatrix(ood)).back() < kFloor) {
    const auto pairs = specmath::eig_full(SymMatrix(ood));
    Matrix clipped(d, d);
    for (const auto& p : pairs) {
      const double lambda = std::max(p.value, floor);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) clipped(i, j) += lambda * p.vector[i] * p.vector[j];
      }
    }
    double max_diag = 0.0;
    for (std::size_t i = 0; i < d; ++i) max_diag = std::max(max_diag, clipped(i, i));
    ood = detail::unit_diagonal(SymMatrix::symmetrized(clipped).matrix());
    floor = std::max(floor * 1.5, kFloor * max_diag);
    if (++pair.clip_rounds > 200) {
      throw Error(ErrorCode::kInfeasibleShift, "PSD repair did not settle");
    }
  }
  pair.sigma_ood = SymMatrix(ood);

  const double requested = pair.requested_shift.frobenius();
  if (requested > 0.0) {
    Matrix diff(d, d);
    for (std::size_t i = 0; i < diff.data().size(); ++i) {
      diff.data()[i] = ood.data()[i] - pair.sigma_id.matrix().data()[i];
    }
    const double realized = norm2(diff.data());
    pair.shift_retained = realized / requested;
    if (std::abs(realized - requested) > 0.5 * requested) {
      throw Error(ErrorCode::kInfeasibleShift,
                  "PSD repair changed ||E||_F from " + std::to_string(requested) + " to " +
                      std::to_string(realized) + "; lower the shift strength");
    }
  }

  {
    auto rng = detail::stream(spec.seed, 2);
    std::normal_distribution<double> normal;
    pair.teacher = valuers::SoftmaxModel(spec.num_classes, d);
    for (double& v : pair.teacher.weights.data()) v = normal(rng);
  }
  auto id_rng = detail::stream(spec.seed, 3);
  auto ood_rng = detail::stream(spec.seed, 4);
  auto id_raw = detail::sample_gaussian(pair.sigma_id, spec.n_id, pair.teacher, id_rng, "synthetic-id");
  auto ood_raw =
      detail::sample_gaussian(pair.sigma_ood, spec.n_ood, pair.teacher, ood_rng, "synthetic-ood");
  std::tie(pair.id_set, pair.id_norm) = normalize(id_raw);
  std::tie(pair.ood_set, pair.ood_norm) = normalize(ood_raw);
  return pair;
}

}  // namespace evalue::datahub
