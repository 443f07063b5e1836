#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace lowsync {

using Vector = std::vector<double>;

/// Thrown when operand shapes do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an input carries NaN or Inf.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

inline void require_finite(std::span<const double> x, const char* what) {
  if (!all_finite(x)) throw NonFiniteError(std::string(what) + " contains a non-finite value");
}

namespace detail {

// All reductions below run left to right so results are bitwise
// reproducible for a given build.
inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double sum_squares(std::span<const double> x) { return dot(x, x); }

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(std::span<double> x, double a) {
  for (double& v : x) v *= a;
}

}  // namespace detail

/// Non-owning view of the leading columns of a column-major matrix.
class MatrixView {
 public:
  MatrixView() = default;
  MatrixView(const double* data, std::size_t rows, std::size_t cols)
      : data_(data), rows_(rows), cols_(cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> col(std::size_t j) const { return {data_ + j * rows_, rows_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  /// The first `ncols` columns.
  MatrixView leading(std::size_t ncols) const {
    if (ncols > cols_) throw DimensionError("leading: more columns requested than available");
    return {data_, rows_, ncols};
  }

  /// y = V x, where x has one entry per column.
  Vector times(std::span<const double> x) const {
    if (x.size() != cols_) throw DimensionError("MatrixView::times: length mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t j = 0; j < cols_; ++j) detail::axpy(x[j], col(j), y);
    return y;
  }

  /// y -= V x
  void subtract_times(std::span<const double> x, std::span<double> y) const {
    if (x.size() != cols_ || y.size() != rows_)
      throw DimensionError("MatrixView::subtract_times: length mismatch");
    for (std::size_t j = 0; j < cols_; ++j) detail::axpy(-x[j], col(j), y);
  }

 private:
  const double* data_ = nullptr;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

/// Column-major dense matrix. Krylov bases grow one column at a time, so
/// appending a column is cheap.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  /// Row-wise literal, convenient in tests: from_rows({{1, 2}, {3, 4}}).
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("from_rows: ragged rows");
      std::size_t j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return values_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[j * rows_ + i]; }

  std::span<double> col(std::size_t j) { return {values_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {values_.data() + j * rows_, rows_}; }

  std::span<const double> data() const { return values_; }

  MatrixView view() const { return {values_.data(), rows_, cols_}; }
  MatrixView leading(std::size_t ncols) const { return view().leading(ncols); }
  operator MatrixView() const { return view(); }

  void reserve_cols(std::size_t c) { values_.reserve(rows_ * c); }

  void append_col(std::span<const double> x) {
    if (x.size() != rows_) throw DimensionError("append_col: length mismatch");
    values_.insert(values_.end(), x.begin(), x.end());
    ++cols_;
  }

  /// Grows or shrinks the column count, zero filling new columns.
  void resize_cols(std::size_t c) {
    values_.resize(rows_ * c, 0.0);
    cols_ = c;
  }

  /// Copy of the leading r x c block.
  DenseMatrix block(std::size_t r, std::size_t c) const {
    if (r > rows_ || c > cols_) throw DimensionError("block: out of range");
    DenseMatrix b(r, c);
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t i = 0; i < r; ++i) b(i, j) = (*this)(i, j);
    return b;
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
    return t;
  }

  double frobenius_norm() const { return std::sqrt(detail::sum_squares(values_)); }

  void scale(double a) { detail::scale(values_, a); }

  void apply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != cols_ || y.size() != rows_) throw DimensionError("DenseMatrix::apply: length mismatch");
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t j = 0; j < cols_; ++j) detail::axpy(x[j], col(j), y);
  }

  void apply_transpose(std::span<const double> x, std::span<double> y) const {
    if (x.size() != rows_ || y.size() != cols_)
      throw DimensionError("DenseMatrix::apply_transpose: length mismatch");
    for (std::size_t j = 0; j < cols_; ++j) y[j] = detail::dot(col(j), x);
  }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matrix product: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t p = 0; p < a.cols(); ++p) detail::axpy(b(p, j), a.col(p), c.col(j));
  return c;
}

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row.
class CsrMatrix {
 public:
  struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
  };

  CsrMatrix() = default;

  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
            std::vector<std::size_t> col_idx, std::vector<double> values)
      : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
        values_(std::move(values)) {
    if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != values_.size() ||
        col_idx_.size() != values_.size())
      throw DimensionError("CsrMatrix: inconsistent arrays");
    for (std::size_t i = 0; i < rows_; ++i) {
      if (row_ptr_[i] > row_ptr_[i + 1]) throw DimensionError("CsrMatrix: row pointers decrease");
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        if (col_idx_[p] >= cols_) throw DimensionError("CsrMatrix: column index out of range");
        if (p > row_ptr_[i] && col_idx_[p] <= col_idx_[p - 1])
          throw DimensionError("CsrMatrix: column indices not strictly increasing");
      }
    }
  }

  /// Duplicates are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t) {
    for (const auto& e : t)
      if (e.row >= rows || e.col >= cols) throw DimensionError("from_triplets: index out of range");
    std::stable_sort(t.begin(), t.end(),
                     [](const Triplet& a, const Triplet& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
    std::vector<std::size_t> ptr(rows + 1, 0);
    std::vector<std::size_t> idx;
    std::vector<double> val;
    idx.reserve(t.size());
    val.reserve(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (k > 0 && t[k].row == t[k - 1].row && t[k].col == t[k - 1].col) {
        val.back() += t[k].value;
        continue;
      }
      idx.push_back(t[k].col);
      val.push_back(t[k].value);
      ++ptr[t[k].row + 1];
    }
    std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
    return CsrMatrix(rows, cols, std::move(ptr), std::move(idx), std::move(val));
  }

  static CsrMatrix from_dense(const DenseMatrix& a) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j)
        if (a(i, j) != 0.0) t.push_back({i, j, a(i, j)});
    return from_triplets(a.rows(), a.cols(), std::move(t));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  DenseMatrix to_dense() const {
    DenseMatrix a(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) a(i, col_idx_[p]) = values_[p];
    return a;
  }

  double frobenius_norm() const { return std::sqrt(detail::sum_squares(values_)); }

  void apply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != cols_ || y.size() != rows_) throw DimensionError("CsrMatrix::apply: length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) s += values_[p] * x[col_idx_[p]];
      y[i] = s;
    }
  }

  void apply_transpose(std::span<const double> x, std::span<double> y) const {
    if (x.size() != rows_ || y.size() != cols_)
      throw DimensionError("CsrMatrix::apply_transpose: length mismatch");
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) y[col_idx_[p]] += values_[p] * x[i];
  }

  bool operator==(const CsrMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

template <class Op>
concept LinearOperator = requires(const Op& a, std::span<const double> x, std::span<double> y) {
  { a.rows() } -> std::convertible_to<std::size_t>;
  { a.cols() } -> std::convertible_to<std::size_t>;
  { a.frobenius_norm() } -> std::convertible_to<double>;
  a.apply(x, y);
  a.apply_transpose(x, y);
};

template <LinearOperator Op>
Vector matvec(const Op& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw DimensionError("matvec: length mismatch");
  Vector y(a.rows());
  a.apply(x, y);
  return y;
}

template <LinearOperator Op>
Vector matvec_transpose(const Op& a, std::span<const double> x) {
  if (x.size() != a.rows()) throw DimensionError("matvec_transpose: length mismatch");
  Vector y(a.cols());
  a.apply_transpose(x, y);
  return y;
}

/// Strictly lower triangular matrix stored row by row. Row i holds i
/// entries, so the matrix can grow by appending rows as columns of a basis
/// are finished.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(std::size_t order) : order_(order), values_(offset(order), 0.0) {}

  std::size_t order() const { return order_; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + offset(i), i}; }
  std::span<double> row(std::size_t i) { return {values_.data() + offset(i), i}; }

  /// Entry (i, j); zero on and above the diagonal.
  double operator()(std::size_t i, std::size_t j) const { return j < i ? values_[offset(i) + j] : 0.0; }

  /// Appends row `order()`, which must have exactly `order()` entries.
  void append_row(std::span<const double> r) {
    if (r.size() != order_) throw DimensionError("LowerTriangular::append_row: row length must equal order");
    values_.insert(values_.end(), r.begin(), r.end());
    ++order_;
  }

  /// Leading principal block of the given order.
  LowerTriangular leading(std::size_t order) const {
    if (order > order_) throw DimensionError("LowerTriangular::leading: order too large");
    LowerTriangular l;
    l.order_ = order;
    l.values_.assign(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(offset(order)));
    return l;
  }

  double frobenius_norm() const { return std::sqrt(detail::sum_squares(values_)); }

  DenseMatrix to_dense() const {
    DenseMatrix d(order_, order_);
    for (std::size_t i = 0; i < order_; ++i)
      for (std::size_t j = 0; j < i; ++j) d(i, j) = (*this)(i, j);
    return d;
  }

  std::span<const double> packed() const { return values_; }

 private:
  // Row i starts after rows 0..i-1, which hold i(i-1)/2 entries (zero for i = 0).
  static std::size_t offset(std::size_t i) { return i * (i - 1) / 2; }

  std::size_t order_ = 0;
  std::vector<double> values_;
};

/// Counts global reductions, the synchronisation points of a distributed
/// run. A batch opened with fuse() costs one reduction no matter how many
/// dot products or norms it contains.
///
/// Counts are attributed to the current slot: a loop iteration index, or
/// the finalize slot that drains a pipelined method.
class ReductionLedger {
 public:
  class Batch {
   public:
    explicit Batch(ReductionLedger& l) : ledger_(&l) { ++ledger_->depth_; }
    Batch(const Batch&) = delete;
    Batch& operator=(const Batch&) = delete;
    ~Batch() {
      if (--ledger_->depth_ == 0 && ledger_->pending_) {
        ledger_->pending_ = false;
        ledger_->count_one();
      }
    }

   private:
    ReductionLedger* ledger_;
  };

  /// Subsequent reductions belong to loop iteration k. Priming iterations
  /// are the start-up steps of a pipelined method.
  void begin_iteration(std::size_t k, bool priming = false) {
    slot_ = k;
    in_finalize_ = false;
    if (per_iteration_.size() <= k) per_iteration_.resize(k + 1, 0);
    if (priming) priming_slots_.push_back(k);
  }

  void begin_finalize() { in_finalize_ = true; }

  /// One reduction, or membership of the open batch.
  void record() {
    if (depth_ > 0)
      pending_ = true;
    else
      count_one();
  }

  [[nodiscard]] Batch fuse() { return Batch(*this); }

  std::size_t total() const { return total_; }
  std::size_t finalize() const { return finalize_; }
  std::size_t at_iteration(std::size_t k) const { return k < per_iteration_.size() ? per_iteration_[k] : 0; }
  std::size_t last_iteration() const { return per_iteration_.empty() ? 0 : per_iteration_.size() - 1; }
  bool is_priming(std::size_t k) const {
    return std::find(priming_slots_.begin(), priming_slots_.end(), k) != priming_slots_.end();
  }
  std::size_t priming() const {
    std::size_t s = 0;
    for (std::size_t k : priming_slots_) s += at_iteration(k);
    return s;
  }

  void reset() { *this = ReductionLedger(); }

 private:
  void count_one() {
    ++total_;
    if (in_finalize_)
      ++finalize_;
    else {
      if (per_iteration_.size() <= slot_) per_iteration_.resize(slot_ + 1, 0);
      ++per_iteration_[slot_];
    }
  }

  std::size_t slot_ = 0;
  bool in_finalize_ = false;
  int depth_ = 0;
  bool pending_ = false;
  std::size_t total_ = 0;
  std::size_t finalize_ = 0;
  std::vector<std::size_t> per_iteration_;
  std::vector<std::size_t> priming_slots_;
};

/// Q^T x over all columns of Q: one global reduction.
inline Vector block_inner(MatrixView q, std::span<const double> x, ReductionLedger& ledger) {
  if (x.size() != q.rows()) throw DimensionError("block_inner: length mismatch");
  Vector r(q.cols());
  for (std::size_t j = 0; j < q.cols(); ++j) r[j] = detail::dot(q.col(j), x);
  ledger.record();
  return r;
}

inline double dot(std::span<const double> x, std::span<const double> y, ReductionLedger& ledger) {
  if (x.size() != y.size()) throw DimensionError("dot: length mismatch");
  ledger.record();
  return detail::dot(x, y);
}

inline double norm2(std::span<const double> x, ReductionLedger& ledger) {
  ledger.record();
  return std::sqrt(detail::sum_squares(x));
}

/// Solves (I + L) x = b by forward substitution.
inline Vector forward_solve_unit(const LowerTriangular& l, std::span<const double> b) {
  if (b.size() != l.order()) throw DimensionError("forward_solve_unit: length mismatch");
  Vector x(b.begin(), b.end());
  for (std::size_t i = 1; i < x.size(); ++i) x[i] -= detail::dot(l.row(i), std::span<const double>(x.data(), i));
  return x;
}

/// Solves (I + L^T) x = b by back substitution.
inline Vector backward_solve_unit_transpose(const LowerTriangular& l, std::span<const double> b) {
  if (b.size() != l.order()) throw DimensionError("backward_solve_unit_transpose: length mismatch");
  Vector x(b.begin(), b.end());
  for (std::size_t i = x.size(); i-- > 1;) {
    auto r = l.row(i);
    for (std::size_t j = 0; j < i; ++j) x[j] -= r[j] * x[i];
  }
  return x;
}

inline Vector lower_times(const LowerTriangular& l, std::span<const double> x) {
  Vector y(l.order(), 0.0);
  for (std::size_t i = 1; i < l.order(); ++i) y[i] = detail::dot(l.row(i), x.subspan(0, i));
  return y;
}

inline Vector lower_transpose_times(const LowerTriangular& l, std::span<const double> x) {
  Vector y(l.order(), 0.0);
  for (std::size_t i = 1; i < l.order(); ++i) detail::axpy(x[i], l.row(i), std::span<double>(y.data(), i));
  return y;
}

/// Estimate of ||A||_2 by power iteration on A^T A, started from the
/// normalised ones vector. Iteration stops once successive estimates agree
/// to a relative 1e-6, which keeps the estimate within about 1e-4 of the
/// true value when the two leading singular values are at least one
/// percent apart, or after 500 steps.
template <LinearOperator Op>
double norm2_estimate(const Op& a, double rel_change = 1e-6, int max_steps = 500) {
  const std::size_t n = a.cols();
  if (n == 0) return 0.0;
  Vector x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Vector ax(a.rows());
  double est = 0.0;
  for (int it = 0; it < max_steps; ++it) {
    a.apply(x, ax);
    const double sigma = std::sqrt(detail::sum_squares(ax));
    Vector z(n);
    a.apply_transpose(ax, z);
    const double zn = std::sqrt(detail::sum_squares(z));
    if (zn == 0.0) return sigma;
    detail::scale(z, 1.0 / zn);
    x.swap(z);
    if (it > 0 && std::abs(sigma - est) <= rel_change * sigma) return sigma;
    est = sigma;
  }
  return est;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline Vector symmetric_eigenvalues(DenseMatrix g, double rel_tol = 1e-14, int max_sweeps = 100) {
  const std::size_t n = g.rows();
  if (g.cols() != n) throw DimensionError("symmetric_eigenvalues: matrix not square");
  const double fro = g.frobenius_norm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < j; ++i) off += g(i, j) * g(i, j);
    if (std::sqrt(2.0 * off) <= rel_tol * fro) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = g(p, q);
        if (apq == 0.0) continue;
        const double theta = (g(q, q) - g(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double gkp = g(k, p);
          const double gkq = g(k, q);
          g(k, p) = c * gkp - s * gkq;
          g(k, q) = s * gkp + c * gkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double gpk = g(p, k);
          const double gqk = g(q, k);
          g(p, k) = c * gpk - s * gqk;
          g(q, k) = s * gpk + c * gqk;
        }
      }
    }
  }
  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = g(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// V^T V with the same summation order as block_inner.
inline DenseMatrix gram(MatrixView v) {
  const std::size_t k = v.cols();
  DenseMatrix g(k, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i <= j; ++i) g(i, j) = g(j, i) = detail::dot(v.col(i), v.col(j));
  return g;
}

/// Strictly lower part of V^T V.
inline LowerTriangular strict_lower_gram(MatrixView v) {
  LowerTriangular l;
  Vector row;
  for (std::size_t i = 0; i < v.cols(); ++i) {
    row.resize(i);
    for (std::size_t j = 0; j < i; ++j) row[j] = detail::dot(v.col(i), v.col(j));
    l.append_row(row);
  }
  return l;
}

/// Smallest singular value of V from the eigenvalues of V^T V.
inline double gram_sigma_min(MatrixView v) {
  if (v.cols() == 0) throw DimensionError("gram_sigma_min: no columns");
  const double lmin = symmetric_eigenvalues(gram(v)).front();
  return std::sqrt(std::max(lmin, 0.0));
}

/// Spectral radius of M^{-1} N for the splitting M = I + L, N = -L^T,
/// estimated as ||(M^{-1} N)^p||_F^{1/p}. The powers are built by applying
/// N and then a forward solve with M to each column, without forming
/// M^{-1} N. Each power is renormalised and the logs of the scale factors
/// accumulated, so tiny radii do not underflow. For finite p the estimate
/// sits above the true radius.
inline double gelfand_spectral_radius(const LowerTriangular& l, int p = 32) {
  const std::size_t n = l.order();
  if (n == 0 || p <= 0) return 0.0;
  DenseMatrix x = DenseMatrix::identity(n);
  double log_scale = 0.0;
  for (int step = 0; step < p; ++step) {
    for (std::size_t j = 0; j < n; ++j) {
      Vector nx = lower_transpose_times(l, x.col(j));
      for (double& v : nx) v = -v;
      const Vector y = forward_solve_unit(l, nx);
      std::copy(y.begin(), y.end(), x.col(j).begin());
    }
    const double f = x.frobenius_norm();
    if (f == 0.0) return 0.0;
    x.scale(1.0 / f);
    log_scale += std::log(f);
  }
  return std::exp(log_scale / p);
}

}  // namespace lowsync
