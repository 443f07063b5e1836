#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "linalg.hpp"

namespace lowsync {

/// ||I - V^T V||_F
inline double loss_of_orthogonality(MatrixView v) {
  const DenseMatrix g = gram(v);
  double s = 0.0;
  for (std::size_t j = 0; j < g.cols(); ++j)
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double d = (i == j ? 1.0 : 0.0) - g(i, j);
      s += d * d;
    }
  return std::sqrt(s);
}

/// Dense S = (I + L^T)^{-1} L^T.
inline DenseMatrix s_matrix(const LowerTriangular& l) {
  const std::size_t n = l.order();
  DenseMatrix s(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    // Column j of L^T is row j of L, padded with zeros.
    Vector c(n, 0.0);
    auto r = l.row(j);
    std::copy(r.begin(), r.end(), c.begin());
    const Vector x = backward_solve_unit_transpose(l, c);
    std::copy(x.begin(), x.end(), s.col(j).begin());
  }
  return s;
}

/// ||S||_2 with S = (I + L^T)^{-1} L^T. Exact (via a symmetric
/// eigensolve of S^T S) below order 500, power iteration above.
inline double s_metric(const LowerTriangular& l) {
  const std::size_t n = l.order();
  if (n < 2) return 0.0;
  if (n < 500) {
    const DenseMatrix s = s_matrix(l);
    const double lmax = symmetric_eigenvalues(s.transpose() * s).back();
    return std::sqrt(std::max(lmax, 0.0));
  }
  // S x = (I + L^T)^{-1} L^T x and S^T y = L (I + L)^{-1} y.
  Vector x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double est = 0.0;
  for (int it = 0; it < 500; ++it) {
    const Vector sx = backward_solve_unit_transpose(l, lower_transpose_times(l, x));
    const double sigma = std::sqrt(detail::sum_squares(sx));
    Vector z = lower_times(l, forward_solve_unit(l, sx));
    const double zn = std::sqrt(detail::sum_squares(z));
    if (zn == 0.0) return sigma;
    detail::scale(z, 1.0 / zn);
    x.swap(z);
    if (it > 0 && std::abs(sigma - est) <= 1e-8 * sigma) return sigma;
    est = sigma;
  }
  return est;
}

/// Henrici departure from normality of a triangular matrix: the Frobenius
/// norm of its off-diagonal part. Entries are summed row by row.
inline double henrici_departure_triangular(const DenseMatrix& t) {
  const std::size_t n = t.rows();
  if (t.cols() != n) throw DimensionError("henrici_departure_triangular: matrix not square");
  bool lower = true, upper = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (j > i && t(i, j) != 0.0) lower = false;
      if (j < i && t(i, j) != 0.0) upper = false;
    }
  if (!lower && !upper) throw std::invalid_argument("henrici_departure_triangular: matrix is not triangular");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) s += t(i, j) * t(i, j);
  return std::sqrt(s);
}

/// Departure of I + L; equal to ||L||_F.
inline double henrici_departure(const LowerTriangular& l) { return l.frobenius_norm(); }

/// ||b - A x|| / (||b|| + ||A|| ||x||) with a caller supplied ||A||_2.
template <LinearOperator Op>
double backward_error(const Op& a, std::span<const double> b, std::span<const double> x, double norm_a) {
  Vector r = matvec(a, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  const double denom = std::sqrt(detail::sum_squares(b)) + norm_a * std::sqrt(detail::sum_squares(x));
  return denom == 0.0 ? 0.0 : std::sqrt(detail::sum_squares(r)) / denom;
}

template <LinearOperator Op>
double backward_error(const Op& a, std::span<const double> b, std::span<const double> x) {
  return backward_error(a, b, x, norm2_estimate(a));
}

/// One row of a convergence history. The three spectral quantities are
/// only filled on the diagnostic cadence.
struct IterationRecord {
  std::size_t k = 0;
  double arnoldi_rel_residual = 0.0;
  double true_rel_residual = 0.0;
  double beta = 0.0;
  double loo_frobenius = 0.0;
  double l_frobenius = 0.0;
  std::optional<double> s_norm;
  std::optional<double> sigma_min_v;
  std::optional<double> spectral_radius_mn;
  std::size_t reductions = 0;
  /// ||A V_k - V_{k+1} H_k||_F / ||A||_F
  double arnoldi_relation = 0.0;
};

enum class Termination { converged, max_iter, breakdown };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iter: return "max_iter";
    case Termination::breakdown: return "breakdown";
  }
  return "?";
}

struct ConvergenceHistory {
  std::vector<IterationRecord> records;
  Termination termination = Termination::max_iter;
  std::string breakdown_reason;
};

/// Default cadence for the expensive spectral diagnostics.
inline std::size_t default_cadence(std::size_t n) { return n <= 500 ? 1 : 10; }

/// Builds iteration records for one solve. The Gram matrix of the basis is
/// extended one column at a time, and the Arnoldi relation residual is
/// accumulated column by column, so each record costs two products with A
/// and O(n k) work beyond the spectral diagnostics.
template <LinearOperator Op>
class IterationRecorder {
 public:
  IterationRecorder(const Op& a, std::span<const double> b, std::span<const double> x0, std::size_t cadence)
      : a_(&a), b_(b.begin(), b.end()), x0_(x0.begin(), x0.end()), cadence_(cadence == 0 ? 1 : cadence) {
    norm_a_ = norm2_estimate(a);
    fro_a_ = a.frobenius_norm();
    norm_b_ = std::sqrt(detail::sum_squares(b_));
    Vector r0 = matvec(a, x0_);
    for (std::size_t i = 0; i < r0.size(); ++i) r0[i] = b_[i] - r0[i];
    norm_r0_ = std::sqrt(detail::sum_squares(r0));
  }

  double norm_a() const { return norm_a_; }

  Vector solution(MatrixView vk, std::span<const double> y) const {
    Vector x = x0_;
    detail::axpy(1.0, std::span<const double>(vk.times(y)), x);
    return x;
  }

  /// `v` holds (at least) k + 1 orthonormalized columns, `h` the leading
  /// (k+1) x k Hessenberg block. `solver_l` is the algorithm's own
  /// strictly lower Gram factor, when it keeps one. After a happy
  /// breakdown (`invariant`) the (k+1)-th direction is numerical noise and
  /// only the first k columns enter the orthogonality measures.
  IterationRecord record(std::size_t k, MatrixView v, const DenseMatrix& h, std::span<const double> y,
                         double arnoldi_residual, const LowerTriangular* solver_l, std::size_t reductions,
                         bool invariant = false) {
    const std::size_t cols = invariant ? k : k + 1;
    const MatrixView basis = v.leading(cols);
    extend_gram(basis);
    extend_relation(basis, h, k);

    IterationRecord rec;
    rec.k = k;
    rec.reductions = reductions;
    rec.arnoldi_rel_residual = norm_r0_ == 0.0 ? 0.0 : arnoldi_residual / norm_r0_;

    const Vector x = solution(v.leading(k), y);
    Vector r = matvec(*a_, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b_[i] - r[i];
    const double rn = std::sqrt(detail::sum_squares(r));
    rec.true_rel_residual = norm_r0_ == 0.0 ? 0.0 : rn / norm_r0_;
    const double denom = norm_b_ + norm_a_ * std::sqrt(detail::sum_squares(x));
    rec.beta = denom == 0.0 ? 0.0 : rn / denom;

    double loo = 0.0;
    for (std::size_t j = 0; j < cols; ++j)
      for (std::size_t i = 0; i < cols; ++i) {
        const double d = (i == j ? 1.0 : 0.0) - g(i, j);
        loo += d * d;
      }
    rec.loo_frobenius = std::sqrt(loo);

    LowerTriangular l = solver_l ? solver_l->leading(cols) : gram_lower(cols);
    rec.l_frobenius = l.frobenius_norm();
    rec.arnoldi_relation = fro_a_ == 0.0 ? 0.0 : std::sqrt(relation_sq_) / fro_a_;

    if (k % cadence_ == 0) {
      rec.s_norm = s_metric(l);
      DenseMatrix gk(cols, cols);
      for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < cols; ++i) gk(i, j) = g(i, j);
      rec.sigma_min_v = std::sqrt(std::max(symmetric_eigenvalues(std::move(gk)).front(), 0.0));
      rec.spectral_radius_mn = gelfand_spectral_radius(l);
    }
    return rec;
  }

 private:
  double g(std::size_t i, std::size_t j) const { return i <= j ? gcols_[j][i] : gcols_[i][j]; }

  LowerTriangular gram_lower(std::size_t order) const {
    LowerTriangular l;
    Vector row;
    for (std::size_t i = 0; i < order; ++i) {
      row.resize(i);
      for (std::size_t j = 0; j < i; ++j) row[j] = gcols_[i][j];
      l.append_row(row);
    }
    return l;
  }

  void extend_gram(MatrixView v) {
    for (std::size_t j = gcols_.size(); j < v.cols(); ++j) {
      Vector c(j + 1);
      for (std::size_t i = 0; i <= j; ++i) c[i] = detail::dot(v.col(i), v.col(j));
      gcols_.push_back(std::move(c));
    }
  }

  void extend_relation(MatrixView v, const DenseMatrix& h, std::size_t k) {
    for (std::size_t j = relation_cols_; j < k; ++j) {
      Vector r = matvec(*a_, v.col(j));
      for (std::size_t i = 0; i <= j + 1 && i < v.cols(); ++i) detail::axpy(-h(i, j), v.col(i), r);
      relation_sq_ += detail::sum_squares(r);
    }
    relation_cols_ = std::max(relation_cols_, k);
  }

  const Op* a_;
  Vector b_, x0_;
  std::size_t cadence_;
  double norm_a_ = 0.0, fro_a_ = 0.0, norm_b_ = 0.0, norm_r0_ = 0.0;
  std::vector<Vector> gcols_;
  std::size_t relation_cols_ = 0;
  double relation_sq_ = 0.0;
};

}  // namespace lowsync
