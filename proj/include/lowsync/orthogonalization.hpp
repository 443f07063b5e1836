#pragma once

#include <limits>
#include <stdexcept>
#include <string>

#include "linalg.hpp"

namespace lowsync {

/// A new direction vanished under projection, or a lagged norm turned
/// negative through cancellation. `index()` is the 1-based column (or
/// Arnoldi loop index) at which it was detected.
class BreakdownError : public std::runtime_error {
 public:
  BreakdownError(std::size_t index, const std::string& what)
      : std::runtime_error(what + " at index " + std::to_string(index)), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Result of a QR factorization A = Q R.
///
/// For the Gauss-Seidel variants `L` is the strictly lower matrix the
/// algorithm itself builds (rows of Q^T Q, computed one column late). For
/// the other variants it is the strict lower part of the computed Gram
/// matrix.
struct QrState {
  DenseMatrix Q;
  DenseMatrix R;
  LowerTriangular L;
};

/// Threshold below which a projected vector is treated as zero.
inline double breakdown_threshold(std::size_t n, double reference_norm) {
  return static_cast<double>(n) * std::numeric_limits<double>::epsilon() * reference_norm;
}

/// Gram-Schmidt QR in inverse compact WY form with lagged normalization.
/// One or two Gauss-Seidel sweeps per column; the two-sweep form costs two
/// global reductions per column, the one-sweep form one.
///
/// Columns are pushed one at a time. Between pushes the object holds a
/// two-deep pipeline: the last pushed column is still unnormalized and its
/// diagonal entry of R is unknown until the next push or finalize().
class GaussSeidelQr {
 public:
  GaussSeidelQr(std::size_t rows, int sweeps, ReductionLedger& ledger)
      : sweeps_(sweeps), ledger_(&ledger), q_(rows, 0) {
    if (sweeps != 1 && sweeps != 2) throw std::invalid_argument("GaussSeidelQr: sweeps must be 1 or 2");
  }

  std::size_t columns() const { return q_.cols(); }

  void add_column(std::span<const double> a) {
    if (a.size() != q_.rows()) throw DimensionError("GaussSeidelQr::add_column: length mismatch");
    require_finite(a, "column");
    const std::size_t c = q_.cols();
    r_cols_.emplace_back(c + 1, 0.0);
    if (c == 0) {
      ledger_->begin_iteration(1, true);
      const double r11 = norm2(a, *ledger_);
      if (!(r11 > 0.0)) throw BreakdownError(1, "zero first column");
      Vector q(a.begin(), a.end());
      detail::scale(q, 1.0 / r11);
      q_.append_col(q);
      r_cols_[0][0] = r11;
      l_.append_row({});
      return;
    }
    if (c == 1) {
      ledger_->begin_iteration(2, true);
      double r12, asq;
      {
        auto batch = ledger_->fuse();
        r12 = dot(q_.col(0), a, *ledger_);
        asq = dot(a, a, *ledger_);
      }
      Vector w(a.begin(), a.end());
      detail::axpy(-r12, q_.col(0), w);
      q_.append_col(w);
      r_cols_[1][0] = r12;
      pending_ref_norm_ = std::sqrt(asq);
      return;
    }

    // Column k = c + 1 (1-based); w_{k-1} sits unnormalized in column c - 1.
    const std::size_t k = c + 1;
    ledger_->begin_iteration(k);
    Vector lrow, r0;
    double gsq, asq;
    {
      auto batch = ledger_->fuse();
      lrow = block_inner(q_.leading(c - 1), q_.col(c - 1), *ledger_);
      r0 = block_inner(q_.view(), a, *ledger_);
      gsq = dot(q_.col(c - 1), q_.col(c - 1), *ledger_);
      asq = dot(a, a, *ledger_);
    }
    const double gamma = complete_pending(k - 1, gsq, lrow);
    // Only the entry against w_{k-1} carries the missing normalization.
    r0.back() /= gamma;

    const Vector r1 = forward_solve_unit(l_, r0);
    Vector w(a.begin(), a.end());
    q_.view().subtract_times(r1, w);
    Vector& rcol = r_cols_[c];
    std::copy(r1.begin(), r1.end(), rcol.begin());
    if (sweeps_ == 2) {
      const Vector r2 = block_inner(q_.view(), w, *ledger_);
      const Vector r3 = forward_solve_unit(l_, r2);
      q_.view().subtract_times(r3, w);
      for (std::size_t i = 0; i < c; ++i) rcol[i] += r3[i];
    }
    q_.append_col(w);
    pending_ref_norm_ = std::sqrt(asq);
  }

  /// Normalizes the last column (one more reduction) and returns the
  /// factors. The object is left empty.
  QrState finalize() {
    const std::size_t m = q_.cols();
    if (m >= 2) {
      ledger_->begin_finalize();
      Vector lrow;
      double gsq;
      {
        auto batch = ledger_->fuse();
        lrow = block_inner(q_.leading(m - 1), q_.col(m - 1), *ledger_);
        gsq = dot(q_.col(m - 1), q_.col(m - 1), *ledger_);
      }
      complete_pending(m, gsq, lrow);
    }
    QrState s;
    s.R = DenseMatrix(m, m);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i <= j; ++i) s.R(i, j) = r_cols_[j][i];
    s.Q = std::move(q_);
    s.L = std::move(l_);
    q_ = DenseMatrix(s.Q.rows(), 0);
    r_cols_.clear();
    return s;
  }

 private:
  // Normalizes the pending column j (1-based), fixes R(j, j) and appends
  // row j of L.
  double complete_pending(std::size_t j, double gsq, Vector& lrow) {
    const double gamma = std::sqrt(gsq);
    if (!(gamma > breakdown_threshold(q_.rows(), pending_ref_norm_)))
      throw BreakdownError(j, "column became linearly dependent");
    detail::scale(q_.col(j - 1), 1.0 / gamma);
    detail::scale(lrow, 1.0 / gamma);
    l_.append_row(lrow);
    r_cols_[j - 1][j - 1] = gamma;
    return gamma;
  }

  int sweeps_;
  ReductionLedger* ledger_;
  DenseMatrix q_;
  LowerTriangular l_;
  std::vector<Vector> r_cols_;
  double pending_ref_norm_ = 0.0;
};

namespace detail {

inline QrState gauss_seidel_qr(const DenseMatrix& a, int sweeps, ReductionLedger& ledger) {
  GaussSeidelQr qr(a.rows(), sweeps, ledger);
  for (std::size_t j = 0; j < a.cols(); ++j) qr.add_column(a.col(j));
  return qr.finalize();
}

}  // namespace detail

/// Two Gauss-Seidel sweeps per column: two global reductions per column.
inline QrState igs2_qr(const DenseMatrix& a, ReductionLedger& ledger) {
  return detail::gauss_seidel_qr(a, 2, ledger);
}

/// One Gauss-Seidel sweep per column (the first sweep only).
inline QrState igs1_qr(const DenseMatrix& a, ReductionLedger& ledger) {
  return detail::gauss_seidel_qr(a, 1, ledger);
}

/// Classical modified Gram-Schmidt: column j costs j global reductions.
inline QrState mgs_qr(const DenseMatrix& a, ReductionLedger& ledger) {
  const std::size_t n = a.rows(), m = a.cols();
  QrState s{DenseMatrix(n, 0), DenseMatrix(m, m), {}};
  for (std::size_t c = 0; c < m; ++c) {
    ledger.begin_iteration(c + 1);
    Vector w(a.col(c).begin(), a.col(c).end());
    require_finite(w, "column");
    double anorm = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      double h;
      if (i == 0) {
        auto batch = ledger.fuse();
        h = dot(s.Q.col(0), w, ledger);
        anorm = std::sqrt(dot(w, w, ledger));
      } else {
        h = dot(s.Q.col(i), w, ledger);
      }
      s.R(i, c) = h;
      detail::axpy(-h, s.Q.col(i), w);
    }
    const double g = norm2(w, ledger);
    if (c == 0) anorm = g;
    if (!(g > (c == 0 ? 0.0 : breakdown_threshold(n, anorm))))
      throw BreakdownError(c + 1, "column became linearly dependent");
    s.R(c, c) = g;
    detail::scale(w, 1.0 / g);
    s.Q.append_col(w);
  }
  s.L = strict_lower_gram(s.Q);
  return s;
}

/// Classical Gram-Schmidt with full reorthogonalization: three global
/// reductions per column.
inline QrState cgs2_qr(const DenseMatrix& a, ReductionLedger& ledger) {
  const std::size_t n = a.rows(), m = a.cols();
  QrState s{DenseMatrix(n, 0), DenseMatrix(m, m), {}};
  for (std::size_t c = 0; c < m; ++c) {
    ledger.begin_iteration(c + 1);
    Vector w(a.col(c).begin(), a.col(c).end());
    require_finite(w, "column");
    double anorm = 0.0;
    if (c > 0) {
      Vector r;
      {
        auto batch = ledger.fuse();
        r = block_inner(s.Q.view(), w, ledger);
        anorm = std::sqrt(dot(w, w, ledger));
      }
      s.Q.view().subtract_times(r, w);
      const Vector r2 = block_inner(s.Q.view(), w, ledger);
      s.Q.view().subtract_times(r2, w);
      for (std::size_t i = 0; i < c; ++i) s.R(i, c) = r[i] + r2[i];
    }
    const double g = norm2(w, ledger);
    if (c == 0) anorm = g;
    if (!(g > (c == 0 ? 0.0 : breakdown_threshold(n, anorm))))
      throw BreakdownError(c + 1, "column became linearly dependent");
    s.R(c, c) = g;
    detail::scale(w, 1.0 / g);
    s.Q.append_col(w);
  }
  s.L = strict_lower_gram(s.Q);
  return s;
}

/// T1 = (I + L)^{-1}, the correction matrix of one Gauss-Seidel sweep.
inline DenseMatrix build_T1(const LowerTriangular& l) {
  const std::size_t n = l.order();
  DenseMatrix t(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vector x = forward_solve_unit(l, e);
    std::copy(x.begin(), x.end(), t.col(j).begin());
    e[j] = 0.0;
  }
  return t;
}

/// T2 = T1 - T1 L^T T1, the correction matrix of two sweeps.
inline DenseMatrix build_T2(const LowerTriangular& l) {
  const DenseMatrix t1 = build_T1(l);
  DenseMatrix t2 = t1 * l.to_dense().transpose() * t1;
  t2.scale(-1.0);
  for (std::size_t j = 0; j < t1.cols(); ++j) detail::axpy(1.0, t1.col(j), t2.col(j));
  return t2;
}

}  // namespace lowsync
