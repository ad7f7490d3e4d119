#include "evalue/specmath.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace evalue::specmath {
namespace {

TEST(Covariance, AntipodalUnitVectors) {
  const auto sigma = covariance(Matrix::from_rows({{1, 0}, {-1, 0}}));
  EXPECT_DOUBLE_EQ(sigma(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(sigma(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(sigma(1, 1), 0.0);
}

TEST(Covariance, RankOne) {
  const double r = 1.0 / std::sqrt(2.0);
  const auto sigma = covariance(Matrix::from_rows({{r, r}, {-r, -r}}));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(sigma(i, j), 0.5, 1e-15);
  }
}

TEST(Covariance, MatchesNaiveSummation) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  Matrix rows(50, 4);
  for (double& x : rows.data()) x = normal(rng);
  datahub::center_columns(rows);
  const auto sigma = covariance(rows);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 50; ++i) acc += rows(i, a) * rows(i, b);
      EXPECT_NEAR(sigma(a, b), acc / 50.0, 1e-12);
      EXPECT_EQ(sigma(a, b), sigma(b, a));
    }
  }
}

TEST(Covariance, RejectsUncenteredAndNonFinite) {
  try {
    covariance(Matrix::from_rows({{1, 0}, {2, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotCentered);
  }
  try {
    covariance(Matrix::from_rows({{NAN, 0}, {1, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(SymMatrix, RejectsAsymmetric) {
  try {
    SymMatrix(Matrix::from_rows({{1, 2}, {3, 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotSymmetric);
  }
}

TEST(EigFull, Diagonal) {
  const auto pairs = eig_full(SymMatrix::diagonal(Vector{0.5, 3, 1}));
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_NEAR(pairs[0].value, 3.0, 1e-12);
  EXPECT_NEAR(pairs[1].value, 1.0, 1e-12);
  EXPECT_NEAR(pairs[2].value, 0.5, 1e-12);
  EXPECT_NEAR(std::abs(pairs[0].vector[1]), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(pairs[1].vector[2]), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(pairs[2].vector[0]), 1.0, 1e-12);
}

TEST(EigFull, TwoByTwo) {
  const auto pairs = eig_full(SymMatrix(Matrix::from_rows({{2, 1}, {1, 2}})));
  EXPECT_NEAR(pairs[0].value, 3.0, 1e-12);
  EXPECT_NEAR(pairs[1].value, 1.0, 1e-12);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(pairs[0].vector[0], r, 1e-12);
  EXPECT_NEAR(pairs[0].vector[1], r, 1e-12);
}

TEST(EigFull, SpectralIdentitiesAndReconstruction) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrix m(testing::random_symmetric(8, rng));
    const auto pairs = eig_full(m);
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& p : pairs) {
      sum += p.value;
      sum_sq += p.value * p.value;
    }
    EXPECT_NEAR(sum, m.trace(), 1e-10 * std::max(1.0, std::abs(m.trace())));
    const double fro_sq = m.frobenius() * m.frobenius();
    EXPECT_NEAR(sum_sq, fro_sq, 1e-9 * fro_sq);
    for (std::size_t i = 0; i + 1 < pairs.size(); ++i) EXPECT_GE(pairs[i].value, pairs[i + 1].value);
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = i + 1; j < 8; ++j) EXPECT_NEAR(dot(pairs[i].vector, pairs[j].vector), 0.0, 1e-9);
    }
    double err = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        double acc = 0.0;
        for (const auto& p : pairs) acc += p.value * p.vector[i] * p.vector[j];
        err += (acc - m(i, j)) * (acc - m(i, j));
      }
    }
    EXPECT_LE(std::sqrt(err), 1e-9 * m.frobenius());
  }
}

TEST(EigFull, CanonicalSign) {
  std::mt19937_64 rng(5);
  const auto pairs = eig_full(SymMatrix(testing::random_symmetric(6, rng)));
  for (const auto& p : pairs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.vector.size(); ++i) {
      if (std::abs(p.vector[i]) > std::abs(p.vector[best])) best = i;
    }
    EXPECT_GE(p.vector[best], 0.0);
  }
}

TEST(EigExtreme, IdentityIsDegenerate) {
  const auto r = eig_extreme(SymMatrix::identity(4), 1e-12);
  EXPECT_NEAR(r.summary.lambda_max, 1.0, 1e-12);
  EXPECT_NEAR(r.summary.lambda_min, 1.0, 1e-12);
  EXPECT_TRUE(r.degenerate);
  EXPECT_NEAR(norm2(r.summary.u_min), 1.0, 1e-10);
}

TEST(EigExtreme, DiagonalFourOne) {
  const auto r = eig_extreme(SymMatrix::diagonal(Vector{4, 1}), 1e-14);
  EXPECT_NEAR(r.summary.lambda_max, 4.0, 1e-10);
  EXPECT_NEAR(r.summary.lambda_min, 1.0, 1e-10);
  EXPECT_NEAR(r.summary.u_max[0], 1.0, 1e-8);
  EXPECT_NEAR(r.summary.u_min[1], 1.0, 1e-8);
  EXPECT_FALSE(r.degenerate);
}

TEST(EigExtreme, AgreesWithJacobiOnRandomSpd) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const SymMatrix m(testing::random_spd(32, rng));
    const auto full = eig_full(m);
    const auto r = eig_extreme(m, 1e-12, 1000000);
    EXPECT_NEAR(r.summary.lambda_max, full.front().value, 1e-7);
    EXPECT_NEAR(r.summary.lambda_min, full.back().value, 1e-7);
    EXPECT_NEAR(std::abs(dot(r.summary.u_max, full.front().vector)), 1.0, 1e-6);
    EXPECT_NEAR(std::abs(dot(r.summary.u_min, full.back().vector)), 1.0, 1e-6);
    // SpectralSummary invariants.
    const auto& s = r.summary;
    EXPECT_NEAR(norm2(s.u_max), 1.0, 1e-10);
    EXPECT_NEAR(norm2(s.u_min), 1.0, 1e-10);
    for (const auto& [lambda, u] : {std::pair{s.lambda_max, s.u_max}, std::pair{s.lambda_min, s.u_min}}) {
      const auto mu = m.multiply(u);
      double res = 0.0;
      for (std::size_t i = 0; i < mu.size(); ++i) res += (mu[i] - lambda * u[i]) * (mu[i] - lambda * u[i]);
      EXPECT_LE(std::sqrt(res), 1e-8 * std::max(1.0, std::abs(lambda)));
    }
  }
}

TEST(EigExtreme, IndefiniteMatrix) {
  const auto r = eig_extreme(SymMatrix::diagonal(Vector{1, -5, 2}), 1e-14);
  EXPECT_NEAR(r.summary.lambda_max, 2.0, 1e-9);
  EXPECT_NEAR(r.summary.lambda_min, -5.0, 1e-9);
}

TEST(EigExtreme, RejectsBadTolerance) {
  EXPECT_THROW(eig_extreme(SymMatrix::identity(2), 0.0), Error);
}

TEST(EigExtreme, NoConvergenceWhenStarved) {
  std::mt19937_64 rng(2);
  try {
    eig_extreme(SymMatrix(testing::random_spd(16, rng)), 1e-15, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoConvergence);
  }
}

TEST(Rayleigh, Basics) {
  EXPECT_DOUBLE_EQ(rayleigh(SymMatrix::identity(3), Vector{1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(rayleigh(SymMatrix::diagonal(Vector{4, 1}), Vector{1, 0}), 4.0);
  try {
    rayleigh(SymMatrix::identity(2), Vector{0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroVector);
  }
}

// Rayleigh quotients of PSD matrices lie between the extreme eigenvalues.
TEST(Rayleigh, SandwichProperty) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> dim(1, 10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = dim(rng);
    const SymMatrix m(testing::random_psd(d, d > static_cast<std::size_t>(trial % 3) ? d - trial % 3 : 1, rng));
    Vector v(d);
    for (double& x : v) x = normal(rng);
    const auto pairs = eig_full(m);
    const double q = rayleigh(m, v);
    const double slack = 1e-12 * std::max(1.0, pairs.front().value);
    EXPECT_LE(q, pairs.front().value + slack);
    EXPECT_GE(q, pairs.back().value - slack);
  }
}

// lambda_max <= ||m||_F <= sqrt(rank) * lambda_max for SPD m.
TEST(Frobenius, BoundsOnSpd) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const SymMatrix m(testing::random_spd(2 + trial % 9, rng));
    const auto values = eigenvalues(m);
    std::size_t rank = 0;
    for (double v : values) rank += v > 1e-10 * values.front() ? 1 : 0;
    const double fro = m.frobenius();
    EXPECT_LE(values.front(), fro * (1 + 1e-12));
    EXPECT_LE(fro, std::sqrt(static_cast<double>(rank)) * values.front() * (1 + 1e-12));
  }
}

TEST(Cholesky, Reconstructs) {
  std::mt19937_64 rng(31);
  const SymMatrix m(testing::random_spd(7, rng));
  const Matrix l = cholesky(m);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 7; ++k) acc += l(i, k) * l(j, k);
      EXPECT_NEAR(acc, m(i, j), 1e-12);
    }
  }
}

TEST(EigenCounter, CountsExtractions) {
  const auto before = eigen_call_count();
  eig_full(SymMatrix::identity(2));
  eig_extreme(SymMatrix::identity(2));
  EXPECT_EQ(eigen_call_count() - before, 2u);
}

}  // namespace
}  // namespace evalue::specmath
