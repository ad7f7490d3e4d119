#pragma once

// Dense symmetric linear algebra used by the valuation code: covariance
// construction, a cyclic Jacobi eigensolver (exact path) and shifted power
// iteration for the two extreme eigenpairs (fast path).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evalue/error.hpp"

namespace evalue {

using Vector = std::vector<double>;

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "matrix data has " + std::to_string(data_.size()) +
                      " entries, expected " + std::to_string(rows_ * cols_));
    }
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != cols) {
        throw Error(ErrorCode::kDimensionMismatch, "ragged row " + std::to_string(i));
      }
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * b[i];
  return total;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

// Symmetric d x d matrix. Construction validates symmetry and finiteness.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Matrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) {
      throw Error(ErrorCode::kDimensionMismatch, "symmetric matrix must be square and non-empty");
    }
    if (!all_finite(m_.data())) {
      throw Error(ErrorCode::kNonFinite, "symmetric matrix has non-finite entries");
    }
    const std::size_t d = m_.rows();
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        const double a = m_(i, j);
        const double b = m_(j, i);
        if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
          throw Error(ErrorCode::kNotSymmetric,
                      "entries (" + std::to_string(i) + "," + std::to_string(j) +
                          ") differ from their transpose");
        }
      }
    }
  }

  static SymMatrix identity(std::size_t d) { return diagonal(Vector(d, 1.0)); }

  static SymMatrix diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return SymMatrix(std::move(m));
  }

  // Averages m with its transpose, then validates.
  static SymMatrix symmetrized(const Matrix& m) {
    Matrix s(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    }
    return SymMatrix(std::move(s));
  }

  std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
    return t;
  }

  double frobenius() const { return norm2(m_.data()); }

  Vector multiply(std::span<const double> v) const {
    Vector out(dim());
    for (std::size_t i = 0; i < dim(); ++i) out[i] = dot(m_.row(i), v);
    return out;
  }

  // Returns this + shift * I.
  SymMatrix shifted(double shift) const {
    Matrix m = m_;
    for (std::size_t i = 0; i < dim(); ++i) m(i, i) += shift;
    return SymMatrix(std::move(m));
  }

 private:
  Matrix m_;
};

namespace specmath {

// Counts eigen-extractions (eig_full + eig_extreme) process-wide; used to
// check that the approximate valuation path performs exactly one.
inline std::atomic<std::uint64_t>& eigen_call_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}
inline std::uint64_t eigen_call_count() { return eigen_call_counter().load(); }

struct EigenPair {
  double value = 0.0;
  Vector vector;
};

struct SpectralSummary {
  std::size_t dim = 0;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  Vector u_max;
  Vector u_min;
  std::optional<double> discrepancy;  // f(Sigma); filled in by evcore
};

struct ExtremeResult {
  SpectralSummary summary;
  bool degenerate = false;  // lambda_max - lambda_min <= tol
  std::size_t iterations = 0;
};

// Flips v so that its entry of largest magnitude is non-negative.
inline void canonicalize_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (!v.empty() && v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

// (1/n) rows^T rows for column-centered rows.
inline SymMatrix covariance(const Matrix& rows) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  if (n < 2 || d == 0) {
    throw Error(ErrorCode::kInvalidArgument, "covariance needs at least 2 rows and 1 column");
  }
  if (!all_finite(rows.data())) {
    throw Error(ErrorCode::kNonFinite, "covariance input has non-finite entries");
  }
  Vector means(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = rows.row(i);
    for (std::size_t j = 0; j < d; ++j) means[j] += x[j];
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (std::abs(means[j] / static_cast<double>(n)) > 1e-8) {
      throw Error(ErrorCode::kNotCentered,
                  "column " + std::to_string(j) + " has mean " +
                      std::to_string(means[j] / static_cast<double>(n)));
    }
  }
  Matrix acc(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = rows.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = x[a];
      if (xa == 0.0) continue;
      auto out = acc.row(a);
      for (std::size_t b = a; b < d; ++b) out[b] += xa * x[b];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      acc(a, b) *= inv_n;
      acc(b, a) = acc(a, b);
    }
  }
  return SymMatrix(std::move(acc));
}

namespace detail {

// Cyclic Jacobi on a working copy. Returns the eigenvalues on the diagonal of
// `a` and, when `vectors` is non-null, the eigenvectors in its columns.
inline void jacobi_in_place(Matrix& a, Matrix* vectors) {
  const std::size_t d = a.rows();
  const double scale = norm2(a.data());
  if (vectors != nullptr) {
    *vectors = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) (*vectors)(i, i) = 1.0;
  }
  if (scale == 0.0 || d == 1) return;
  const double threshold = 1e-12 * scale;
  const std::size_t max_sweeps = 100 * d * d;
  for (std::size_t sweep = 0;; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) off = std::max(off, std::abs(a(p, q)));
    }
    if (off <= threshold) return;
    if (sweep >= max_sweeps) {
      throw Error(ErrorCode::kNoConvergence,
                  "Jacobi exceeded " + std::to_string(max_sweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double app = a(p, p);
        const double aqq = a(q, q);
        for (std::size_t k = 0; k < d; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          const double new_p = c * akp - s * akq;
          const double new_q = s * akp + c * akq;
          a(k, p) = new_p;
          a(p, k) = new_p;
          a(k, q) = new_q;
          a(q, k) = new_q;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        if (vectors != nullptr) {
          Matrix& v = *vectors;
          for (std::size_t k = 0; k < d; ++k) {
            const double vkp = v(k, p);
            const double vkq = v(k, q);
            v(k, p) = c * vkp - s * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
}

inline std::vector<std::size_t> descending_order(const Matrix& a) {
  std::vector<std::size_t> order(a.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  return order;
}

}  // namespace detail

// Full eigendecomposition, eigenvalues descending, eigenvectors unit length
// with canonical sign.
inline std::vector<EigenPair> eig_full(const SymMatrix& m) {
  ++eigen_call_counter();
  Matrix a = m.matrix();
  Matrix v;
  detail::jacobi_in_place(a, &v);
  const std::size_t d = m.dim();
  std::vector<EigenPair> pairs;
  pairs.reserve(d);
  for (std::size_t idx : detail::descending_order(a)) {
    EigenPair pair{a(idx, idx), Vector(d)};
    for (std::size_t k = 0; k < d; ++k) pair.vector[k] = v(k, idx);
    const double len = norm2(pair.vector);
    for (double& x : pair.vector) x /= len;
    canonicalize_sign(pair.vector);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// Eigenvalues only, descending. Same Jacobi iteration as eig_full without
// accumulating rotations.
inline Vector eigenvalues(const SymMatrix& m) {
  ++eigen_call_counter();
  Matrix a = m.matrix();
  detail::jacobi_in_place(a, nullptr);
  Vector values;
  values.reserve(m.dim());
  for (std::size_t idx : detail::descending_order(a)) values.push_back(a(idx, idx));
  return values;
}

namespace detail {

struct PowerResult {
  double value = 0.0;
  Vector vector;
  std::size_t iterations = 0;
};

// Power iteration for the algebraically largest eigenpair of m. A Gershgorin
// shift makes the iterated operator PSD so the dominant eigenvalue in
// magnitude is also the largest. Stops once successive Rayleigh quotients
// differ by <= tol and the residual meets the SpectralSummary bound; if only
// the first condition is met when max_iter runs out, the current pair is
// returned. The residual bound is scaled by the eigenvalue the caller will
// report, reported_base - value when `flipped`, value otherwise.
inline PowerResult power_top(const SymMatrix& m, double tol, std::size_t max_iter,
                             std::uint64_t seed, bool flipped = false,
                             double reported_base = 0.0) {
  const std::size_t d = m.dim();
  double gersh_lo = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double radius = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (j != i) radius += std::abs(m(i, j));
    }
    gersh_lo = std::min(gersh_lo, m(i, i) - radius);
  }
  const double shift = -gersh_lo;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(d);
  for (double& x : v) x = normal(rng);
  double len = norm2(v);
  for (double& x : v) x /= len;

  Vector w(d);
  double previous = 0.0;
  bool rayleigh_converged = false;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Matrix& a = m.matrix();
    for (std::size_t i = 0; i < d; ++i) w[i] = dot(a.row(i), v) + shift * v[i];
    const double rho = dot(v, w);
    double residual_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = w[i] - rho * v[i];
      residual_sq += r * r;
    }
    const double lambda = rho - shift;
    const double wlen = norm2(w);
    if (wlen == 0.0) return {lambda, v, it + 1};
    rayleigh_converged = it > 0 && std::abs(rho - previous) <= tol;
    const double reported = flipped ? reported_base - lambda : lambda;
    const bool residual_ok =
        std::sqrt(residual_sq) <= 1e-8 * std::max(1.0, std::abs(reported));
    if (rayleigh_converged && residual_ok) return {lambda, v, it + 1};
    if (rayleigh_converged && it + 1 == max_iter) return {lambda, v, it + 1};
    previous = rho;
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / wlen;
  }
  throw Error(ErrorCode::kNoConvergence,
              "power iteration did not converge in " + std::to_string(max_iter) +
                  " iterations");
}

}  // namespace detail

// lambda_max by power iteration on m; lambda_min by power iteration on the
// shifted operator lambda_max*I - m.
inline ExtremeResult eig_extreme(const SymMatrix& m, double tol = 1e-12,
                                 std::size_t max_iter = 200000) {
  if (!(tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tol must be positive");
  ++eigen_call_counter();
  ExtremeResult result;
  auto top = detail::power_top(m, tol, max_iter, 0x9e3779b97f4a7c15ULL);
  Matrix flipped(m.dim(), m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i) {
    for (std::size_t j = 0; j < m.dim(); ++j) flipped(i, j) = -m(i, j);
    flipped(i, i) += top.value;
  }
  auto bottom = detail::power_top(SymMatrix(std::move(flipped)), tol, max_iter,
                                  0xd1b54a32d192ed03ULL, true, top.value);
  canonicalize_sign(top.vector);
  canonicalize_sign(bottom.vector);
  result.summary.dim = m.dim();
  result.summary.lambda_max = top.value;
  result.summary.lambda_min = top.value - bottom.value;
  result.summary.u_max = std::move(top.vector);
  result.summary.u_min = std::move(bottom.vector);
  result.degenerate = result.summary.lambda_max - result.summary.lambda_min <= tol;
  result.iterations = top.iterations + bottom.iterations;
  return result;
}

// Summary built from the exact solver; used as an oracle and for small d.
inline SpectralSummary summary_from_full(const std::vector<EigenPair>& pairs) {
  SpectralSummary s;
  s.dim = pairs.size();
  s.lambda_max = pairs.front().value;
  s.u_max = pairs.front().vector;
  s.lambda_min = pairs.back().value;
  s.u_min = pairs.back().vector;
  return s;
}

inline double rayleigh(const SymMatrix& m, std::span<const double> v) {
  if (v.size() != m.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "rayleigh vector length mismatch");
  }
  const double vv = dot(v, v);
  if (!(vv > 0.0)) throw Error(ErrorCode::kZeroVector, "rayleigh needs a nonzero vector");
  const Vector mv = m.multiply(v);
  return dot(v, mv) / vv;
}

// Lower-triangular Cholesky factor of an SPD matrix.
inline Matrix cholesky(const SymMatrix& m) {
  const std::size_t d = m.dim();
  Matrix l(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    double diag = m(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "matrix is not positive definite");
    }
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < d; ++i) {
      double acc = m(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / l(j, j);
    }
  }
  return l;
}

}  // namespace specmath
}  // namespace evalue
