#pragma once

#include <cmath>
#include <stdexcept>

#include "linalg.hpp"

namespace lowsync {

/// The upper triangular factor of a Hessenberg least squares problem is
/// exactly singular.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// min ||rho e1 - H y|| for an upper Hessenberg H that grows one column at
/// a time. Each new column is reduced with the Givens rotations gathered so
/// far plus one new rotation, so the residual after k columns is the
/// magnitude of the last rotated right-hand side entry.
class GivensLeastSquares {
 public:
  explicit GivensLeastSquares(double rho) : g_{rho} {}

  std::size_t size() const { return cs_.size(); }

  /// h holds rows 1..k+1 of column k. Returns the new residual norm.
  double add_column(std::span<const double> h) {
    const std::size_t k = cs_.size();
    if (h.size() != k + 2) throw DimensionError("GivensLeastSquares::add_column: column must have k + 1 entries");
    require_finite(h, "Hessenberg column");
    Vector col(h.begin(), h.end());
    for (std::size_t i = 0; i < k; ++i) {
      const double a = col[i], b = col[i + 1];
      col[i] = cs_[i] * a + sn_[i] * b;
      col[i + 1] = -sn_[i] * a + cs_[i] * b;
    }
    const double a = col[k], b = col[k + 1];
    const double r = std::hypot(a, b);
    const double c = r == 0.0 ? 1.0 : a / r;
    const double s = r == 0.0 ? 0.0 : b / r;
    cs_.push_back(c);
    sn_.push_back(s);
    col[k] = r;
    col.pop_back();
    r_cols_.push_back(std::move(col));
    g_.push_back(-s * g_[k]);
    g_[k] = c * g_[k];
    return std::abs(g_[k + 1]);
  }

  double residual() const { return std::abs(g_.back()); }

  /// Back substitution on the rotated triangular factor.
  Vector solve() const {
    const std::size_t k = cs_.size();
    Vector y(g_.begin(), g_.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t i = k; i-- > 0;) {
      for (std::size_t j = i + 1; j < k; ++j) y[i] -= r_cols_[j][i] * y[j];
      if (r_cols_[i][i] == 0.0) throw SingularSystemError("Hessenberg least squares: singular triangular factor");
      y[i] /= r_cols_[i][i];
    }
    return y;
  }

 private:
  Vector cs_, sn_, g_;
  std::vector<Vector> r_cols_;
};

struct LsqResult {
  Vector y;
  double arnoldi_residual;
};

/// Solves min ||rho e1 - H y|| for a (k+1) x k upper Hessenberg H.
inline LsqResult hessenberg_lsq(const DenseMatrix& h, double rho) {
  const std::size_t k = h.cols();
  if (h.rows() != k + 1) throw DimensionError("hessenberg_lsq: H must be (k+1) x k");
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = j + 2; i <= k; ++i)
      if (h(i, j) != 0.0) throw DimensionError("hessenberg_lsq: H is not upper Hessenberg");
  GivensLeastSquares g(rho);
  for (std::size_t j = 0; j < k; ++j) g.add_column(h.col(j).subspan(0, j + 2));
  return {g.solve(), g.residual()};
}

}  // namespace lowsync
