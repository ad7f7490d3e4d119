#pragma once

// Eigen-Value scoring. A point's EV score is the change in the spectral
// discrepancy bound f(Sigma) = (lambda_max*sqrt(d) + sqrt(d^2 - d)) / lambda_min
// caused by removing that point from the covariance. The approximate path uses
// first-order eigenvalue perturbation around a single eigen-extraction; the
// exact path recomputes the leave-one-out spectrum for every point.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "evalue/error.hpp"
#include "evalue/parallel.hpp"
#include "evalue/specmath.hpp"
#include "evalue/value_vector.hpp"

namespace evalue::evcore {

using specmath::SpectralSummary;

struct PerturbationDelta {
  std::size_t index = 0;
  double delta_max = 0.0;
  double delta_min = 0.0;
};

struct EvOptions {
  // Adds ridge_scale * trace(Sigma)/d to the diagonal before the spectrum is
  // taken. Off by default.
  bool ridge = false;
  double ridge_scale = 1e-8;
  double tol = 1e-12;
  std::size_t max_iter = 200000;
};

struct EvDiagnostics {
  SpectralSummary summary;
  double ridge_applied = 0.0;
  bool degenerate = false;
};

inline double suggested_ridge(const SymMatrix& sigma, double scale = 1e-8) {
  return scale * sigma.trace() / static_cast<double>(sigma.dim());
}

inline bool is_singular(double lambda_max, double lambda_min) {
  return !(lambda_min > 1e-12 * std::max(1.0, lambda_max));
}

namespace detail {

inline double numerator(double lambda_max, std::size_t dim) {
  const double d = static_cast<double>(dim);
  return lambda_max * std::sqrt(d) + std::sqrt(d * d - d);
}

}  // namespace detail

// f(Sigma) from the extreme eigenvalues.
inline double discrepancy_bound(double lambda_max, double lambda_min, std::size_t dim,
                                double ridge_hint = 0.0) {
  if (is_singular(lambda_max, lambda_min)) {
    throw SingularCovarianceError(lambda_min, ridge_hint,
                                  "covariance is singular for the discrepancy bound");
  }
  return detail::numerator(lambda_max, dim) / lambda_min;
}

inline double discrepancy_bound(const SpectralSummary& s, double ridge_hint = 0.0) {
  return discrepancy_bound(s.lambda_max, s.lambda_min, s.dim, ridge_hint);
}

// delta^(k) = u^T Delta_k u with Delta_k = -(1/n) x_k x_k^T, for both extreme
// eigenvectors.
inline std::vector<PerturbationDelta> perturbation_deltas(const Matrix& rows,
                                                          const SpectralSummary& s) {
  if (rows.cols() != s.dim || s.u_max.size() != s.dim || s.u_min.size() != s.dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "rows have width " + std::to_string(rows.cols()) + ", spectrum has dim " +
                    std::to_string(s.dim));
  }
  const std::size_t n = rows.rows();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "perturbation needs n >= 2");
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<PerturbationDelta> deltas(n);
  parallel_for(n, [&](std::size_t k) {
    const double pmax = dot(s.u_max, rows.row(k));
    const double pmin = dot(s.u_min, rows.row(k));
    deltas[k] = {k, -pmax * pmax * inv_n, -pmin * pmin * inv_n};
  });
  return deltas;
}

// First-order estimate of f(Sigma_{-k}) - f(Sigma):
//   sqrt(d) * delta_max / B - A * delta_min / B^2,
// with A = lambda_max*sqrt(d) + sqrt(d^2 - d) and B = lambda_min.
inline double ev_marginal(const SpectralSummary& s, const PerturbationDelta& delta) {
  if (is_singular(s.lambda_max, s.lambda_min)) {
    throw SingularCovarianceError(s.lambda_min, 0.0, "ev_marginal on singular spectrum");
  }
  const double a = detail::numerator(s.lambda_max, s.dim);
  const double b = s.lambda_min;
  return std::sqrt(static_cast<double>(s.dim)) * delta.delta_max / b -
         a * delta.delta_min / (b * b);
}

// Approximate EV scores for centered rows: one covariance, one eigen-extraction
// and n first-order updates.
inline ValueVector ev_scores(const Matrix& rows, const EvOptions& opts = {},
                             EvDiagnostics* diagnostics = nullptr) {
  SymMatrix sigma = specmath::covariance(rows);
  const double ridge = suggested_ridge(sigma, opts.ridge_scale);
  if (opts.ridge) sigma = sigma.shifted(ridge);
  auto extreme = specmath::eig_extreme(sigma, opts.tol, opts.max_iter);
  SpectralSummary& s = extreme.summary;
  s.discrepancy = discrepancy_bound(s, ridge);

  const auto deltas = perturbation_deltas(rows, s);
  ValueVector out;
  out.method = "ev-approx";
  out.scores.resize(rows.rows());
  parallel_for(rows.rows(), [&](std::size_t k) { out.scores[k] = ev_marginal(s, deltas[k]); });
  if (diagnostics != nullptr) {
    diagnostics->summary = s;
    diagnostics->ridge_applied = opts.ridge ? ridge : 0.0;
    diagnostics->degenerate = extreme.degenerate;
  }
  return out;
}

// Brute-force oracle: rebuilds Sigma_{-k} = (1/(n-1)) sum_{i != k} x_i x_i^T
// for every k and takes its full spectrum. O(n d^3).
inline ValueVector ev_scores_exact(const Matrix& rows, const EvOptions& opts = {}) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  if (n < 3) throw Error(ErrorCode::kInvalidArgument, "exact EV scores need n >= 3");
  const SymMatrix sigma = specmath::covariance(rows);

  auto bound_of = [&](const SymMatrix& m, const std::string& what) {
    const double ridge = suggested_ridge(m, opts.ridge_scale);
    const Vector values = specmath::eigenvalues(opts.ridge ? m.shifted(ridge) : m);
    try {
      return discrepancy_bound(values.front(), values.back(), d, ridge);
    } catch (const SingularCovarianceError& e) {
      throw SingularCovarianceError(e.lambda_min(), e.suggested_ridge(), what);
    }
  };
  const double full = bound_of(sigma, "full covariance is singular");

  const double scale_n = static_cast<double>(n);
  const double inv_n1 = 1.0 / static_cast<double>(n - 1);
  ValueVector out;
  out.method = "ev-exact";
  out.scores.resize(n);
  parallel_for(n, [&](std::size_t k) {
    const auto x = rows.row(k);
    Matrix loo(d, d);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) {
        const double v = (scale_n * sigma(a, b) - x[a] * x[b]) * inv_n1;
        loo(a, b) = v;
        loo(b, a) = v;
      }
    }
    out.scores[k] =
        bound_of(SymMatrix(std::move(loo)),
                 "leave-one-out covariance without point " + std::to_string(k) +
                     " is singular") -
        full;
  });
  return out;
}

// Standardizes the EV scores with the baseline's own statistics and adds them:
//   base + w * (ev - mean(base)) / std(base),
// std with divisor n.
inline ValueVector combine(const ValueVector& base, const ValueVector& ev, double w) {
  if (base.size() != ev.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "combine: " + std::to_string(base.size()) + " base scores vs " +
                    std::to_string(ev.size()) + " EV scores");
  }
  if (!(w >= 0.0 && w <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "combine weight must lie in [0, 1]");
  }
  if (base.size() == 0) throw Error(ErrorCode::kInvalidArgument, "combine: empty scores");
  ValueVector out;
  out.method = base.method + "+ev";
  out.weight_w = w;
  out.seed = base.seed;
  const double count = static_cast<double>(base.size());
  double mean = 0.0;
  for (double v : base.scores) mean += v;
  mean /= count;
  double var = 0.0;
  for (double v : base.scores) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / count);
  if (sd <= 1e-12) {
    throw Error(ErrorCode::kDegenerateBase,
                "baseline scores of " + base.method + " are constant (std " +
                    std::to_string(sd) + ")");
  }
  if (w == 0.0) {
    out.scores = base.scores;
    return out;
  }
  out.scores.resize(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    out.scores[i] = base.scores[i] + w * (ev.scores[i] - mean) / sd;
  }
  return out;
}

}  // namespace evalue::evcore
