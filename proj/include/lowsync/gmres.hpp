#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "diagnostics.hpp"
#include "hessenberg.hpp"
#include "linalg.hpp"
#include "orthogonalization.hpp"

namespace lowsync {

enum class Variant { igs2, igs1, hybrid1, mgs, hh };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::igs2: return "igs2";
    case Variant::igs1: return "igs1";
    case Variant::hybrid1: return "hybrid1";
    case Variant::mgs: return "mgs";
    case Variant::hh: return "hh";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  for (Variant v : {Variant::igs2, Variant::igs1, Variant::hybrid1, Variant::mgs, Variant::hh})
    if (s == to_string(v)) return v;
  return std::nullopt;
}

struct SolverConfig {
  Variant variant = Variant::igs2;
  /// Capped at n - 2: the expansion A V_k = V_{k+1} H_k needs k + 1 < n
  /// columns to stay meaningful.
  std::size_t max_iter = 100;
  /// Stop once the Arnoldi residual drops to rtol * ||r0||. Zero runs the
  /// full max_iter steps.
  double rtol = 0.0;
  /// Spectral diagnostics every diag_every iterations; 0 picks the default
  /// for the problem size.
  std::size_t diag_every = 0;
  /// When false a breakdown other than the happy one ends the run with
  /// termination = breakdown instead of throwing.
  bool throw_on_breakdown = true;
};

/// The Arnoldi relation A V_k = V_{k+1} H_k at the end of a solve.
/// After a happy breakdown V has only k columns.
struct ArnoldiState {
  DenseMatrix V;
  DenseMatrix H;
  /// Strictly lower factor kept by the Gauss-Seidel and hybrid methods.
  LowerTriangular L;
  double rho = 0.0;
  std::size_t completed = 0;
};

struct SolveResult {
  Vector x;
  Vector y;
  ArnoldiState arnoldi;
  ConvergenceHistory history;
  std::size_t iterations() const { return arnoldi.completed; }
  double arnoldi_residual = 0.0;
};

namespace detail {

// Bookkeeping shared by the variants: the growing Hessenberg matrix, the
// progressive least squares solve and per-column diagnostics.
template <LinearOperator Op>
class ArnoldiRun {
  bool valid_;

 public:
  ArnoldiRun(const Op& a, std::span<const double> b, std::span<const double> x0, const SolverConfig& cfg,
             ReductionLedger& ledger)
      : valid_(validate(a, b, x0, cfg)), a(a), ledger(ledger), n(a.rows()), m(std::min(cfg.max_iter, std::max<std::size_t>(a.rows(), 3) - 2)), rtol_(cfg.rtol),
        recorder_(a, b, x0, cfg.diag_every == 0 ? default_cadence(a.rows()) : cfg.diag_every),
        x0_(x0.begin(), x0.end()), lsq_(0.0), throw_on_breakdown_(cfg.throw_on_breakdown) {
    state.H = DenseMatrix(m + 1, m);
    state.V = DenseMatrix(n, 0);
    state.V.reserve_cols(m + 1);
  }

  static bool validate(const Op& a, std::span<const double> b, std::span<const double> x0,
                       const SolverConfig& cfg) {
    if (a.rows() != a.cols()) throw DimensionError("GMRES: matrix must be square");
    if (b.size() != a.rows() || x0.size() != a.rows())
      throw DimensionError("GMRES: right-hand side or x0 has wrong length");
    if (cfg.max_iter == 0) throw std::invalid_argument("GMRES: max_iter must be positive");
    require_finite(b, "right-hand side");
    require_finite(x0, "initial guess");
    return true;
  }

  Vector initial_residual(std::span<const double> b) const {
    Vector r = matvec(a, x0_);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    return r;
  }

  void set_rho(double rho) {
    state.rho = rho;
    lsq_ = GivensLeastSquares(rho);
  }

  double& h(std::size_t i, std::size_t j) { return state.H(i, j); }

  /// Column j (1-based) of H is final. `basis` holds j + 1 normalized
  /// columns, or only j after a happy breakdown. Returns true when the run
  /// should stop.
  bool complete(std::size_t j, MatrixView basis, const LowerTriangular* l, bool happy = false) {
    residual_ = lsq_.add_column(state.H.col(j - 1).subspan(0, j + 1));
    y_ = lsq_.solve();
    const std::size_t reductions = ledger.at_iteration(j + 1);
    history.records.push_back(recorder_.record(j, basis, state.H, y_, residual_, l, reductions, happy));
    state.completed = j;
    if (happy) {
      happy_ = true;
      history.termination = Termination::breakdown;
      history.breakdown_reason = "happy breakdown: the Krylov space is invariant";
      return true;
    }
    if (rtol_ > 0.0 && residual_ <= rtol_ * state.rho) {
      history.termination = Termination::converged;
      return true;
    }
    if (j == m) history.termination = Termination::max_iter;
    return false;
  }

  SolveResult finish(DenseMatrix v, LowerTriangular l) {
    SolveResult r;
    const std::size_t k = state.completed;
    const std::size_t keep = std::min(v.cols(), happy_ ? k : k + 1);
    v.resize_cols(keep);
    r.x = k == 0 ? x0_ : recorder_.solution(v.leading(k), y_);
    r.y = y_;
    r.arnoldi_residual = k == 0 ? state.rho : residual_;
    r.arnoldi.V = std::move(v);
    r.arnoldi.H = state.H.block(k + 1, k);
    r.arnoldi.L = std::move(l);
    r.arnoldi.rho = state.rho;
    r.arnoldi.completed = k;
    r.history = std::move(history);
    return r;
  }

  /// A breakdown the method cannot recover from at loop k: throws, or ends
  /// the run keeping the columns completed so far.
  void fail(std::size_t k, const std::string& what) {
    if (throw_on_breakdown_) throw BreakdownError(k, what);
    history.termination = Termination::breakdown;
    history.breakdown_reason = what + " at loop " + std::to_string(k);
  }

  /// Zero initial residual: x0 already solves the system.
  SolveResult trivial() {
    history.termination = Termination::converged;
    return finish(DenseMatrix(n, 0), {});
  }

  const Op& a;
  ReductionLedger& ledger;
  const std::size_t n;
  const std::size_t m;
  ArnoldiState state;
  ConvergenceHistory history;

 private:
  double rtol_;
  IterationRecorder<Op> recorder_;
  Vector x0_;
  GivensLeastSquares lsq_;
  Vector y_;
  double residual_ = 0.0;
  bool happy_ = false;
  bool throw_on_breakdown_;
};

inline void scale_vec(Vector& v, double a) { detail::scale(v, a); }

}  // namespace detail

/// Iterated Gauss-Seidel GMRES with lagged normalization. sweeps = 2 is
/// the two-reduce method: loop k spends one reduction on the lagged norm,
/// the delayed row of L and the first projection, and one on the second
/// projection. sweeps = 1 keeps only the first.
///
/// Loop k (k >= 3) normalizes basis vector k - 1, which completes column
/// k - 2 of H. Loops 1 and 2 prime the pipeline and a final drain
/// completes the last column.
template <LinearOperator Op>
SolveResult gauss_seidel_gmres(const Op& a, std::span<const double> b, std::span<const double> x0,
                               const SolverConfig& cfg, ReductionLedger& ledger, int sweeps) {
  detail::ArnoldiRun<Op> run(a, b, x0, cfg, ledger);
  const std::size_t n = run.n, m = run.m;
  DenseMatrix& V = run.state.V;
  LowerTriangular L;

  ledger.begin_iteration(1, true);
  Vector r0 = run.initial_residual(b);
  const double rho = norm2(r0, ledger);
  if (rho == 0.0) return run.trivial();
  run.set_rho(rho);
  detail::scale_vec(r0, 1.0 / rho);
  V.append_col(r0);
  L.append_row({});

  ledger.begin_iteration(2, true);
  Vector w = matvec(a, V.col(0));
  double h11, wsq;
  {
    auto batch = ledger.fuse();
    h11 = dot(V.col(0), w, ledger);
    wsq = dot(w, w, ledger);
  }
  detail::axpy(-h11, V.col(0), w);
  run.h(0, 0) = h11;
  V.append_col(w);
  double pre_norm = std::sqrt(wsq);

  for (std::size_t k = 3;; ++k) {
    const std::size_t j = k - 2;  // column of H completed in this loop
    const bool drain = j == m;
    if (drain)
      ledger.begin_finalize();
    else
      ledger.begin_iteration(k);

    Vector vk, lrow, r;
    double gsq, vsq = 0.0;
    if (!drain) vk = matvec(a, V.col(j));
    {
      auto batch = ledger.fuse();
      lrow = block_inner(V.leading(j), V.col(j), ledger);
      if (!drain) r = block_inner(V.view(), vk, ledger);
      gsq = dot(V.col(j), V.col(j), ledger);
      if (!drain) vsq = dot(vk, vk, ledger);
    }
    const double gamma = std::sqrt(gsq);
    run.h(j, j - 1) = gamma;
    if (!(gamma > breakdown_threshold(n, pre_norm))) {
      run.complete(j, V.view(), &L, true);
      break;
    }
    detail::scale(V.col(j), 1.0 / gamma);
    detail::scale_vec(lrow, 1.0 / gamma);
    L.append_row(lrow);
    if (run.complete(j, V.view(), &L) || drain) break;

    // v_k = A w_{k-1} carries the factor gamma twice in its last
    // coefficient: once through v_k itself, once through w_{k-1}.
    detail::scale_vec(r, 1.0 / gamma);
    r.back() /= gamma;
    detail::scale_vec(vk, 1.0 / gamma);

    const Vector r1 = forward_solve_unit(L, r);
    V.view().subtract_times(r1, vk);
    Vector hcol = r1;
    if (sweeps == 2) {
      const Vector r2 = block_inner(V.view(), vk, ledger);
      const Vector r3 = forward_solve_unit(L, r2);
      V.view().subtract_times(r3, vk);
      for (std::size_t i = 0; i < hcol.size(); ++i) hcol[i] += r3[i];
    }
    for (std::size_t i = 0; i <= j; ++i) run.h(i, j) = hcol[i];
    V.append_col(vk);
    pre_norm = std::sqrt(vsq) / gamma;
  }
  return run.finish(std::move(V), std::move(L));
}

/// One-reduce GMRES: a Jacobi step on the lagged vector, a Gauss-Seidel
/// step on the new one, and the norm recovered from ||u||^2 - ||r||^2, all
/// from a single reduction per loop. Column k - 2 of H is completed in
/// loop k, as for the Gauss-Seidel variant.
///
/// The rows of L kept here are Jacobi projection coefficients, not rows of
/// the Gram matrix.
template <LinearOperator Op>
SolveResult hybrid_gmres(const Op& a, std::span<const double> b, std::span<const double> x0,
                         const SolverConfig& cfg, ReductionLedger& ledger) {
  detail::ArnoldiRun<Op> run(a, b, x0, cfg, ledger);
  const std::size_t n = run.n, m = run.m;
  DenseMatrix& V = run.state.V;
  LowerTriangular L;

  ledger.begin_iteration(1, true);
  Vector r0 = run.initial_residual(b);
  const double rho = norm2(r0, ledger);
  if (rho == 0.0) return run.trivial();
  run.set_rho(rho);
  detail::scale_vec(r0, 1.0 / rho);
  V.append_col(r0);
  L.append_row({});

  ledger.begin_iteration(2, true);
  Vector u = matvec(a, V.col(0));
  double h11, usq0;
  {
    auto batch = ledger.fuse();
    h11 = dot(V.col(0), u, ledger);
    usq0 = dot(u, u, ledger);
  }
  detail::axpy(-h11, V.col(0), u);
  Vector r4{h11};
  double pre_norm = std::sqrt(usq0);

  for (std::size_t k = 3;; ++k) {
    const std::size_t j = k - 2;  // V holds j normalized columns; u is u_{k-1}
    const bool drain = j == m;
    if (drain)
      ledger.begin_finalize();
    else
      ledger.begin_iteration(k);

    Vector au, r2, r0a;
    double r0b = 0.0, uu, ausq = 0.0;
    if (!drain) au = matvec(a, u);
    {
      auto batch = ledger.fuse();
      r2 = block_inner(V.view(), u, ledger);
      if (!drain) {
        r0a = block_inner(V.view(), au, ledger);
        r0b = dot(u, au, ledger);
        ausq = dot(au, au, ledger);
      }
      uu = dot(u, u, ledger);
    }
    const Vector r3 = forward_solve_unit(L, r2);
    const double gsq = uu - detail::sum_squares(r2);
    for (std::size_t i = 0; i < j; ++i) run.h(i, j - 1) = r4[i] + r3[i];

    if (!(std::sqrt(uu) > breakdown_threshold(n, pre_norm))) {
      run.h(j, j - 1) = std::sqrt(std::max(gsq, 0.0));
      run.complete(j, V.view(), nullptr, true);
      break;
    }
    if (!(gsq > 0.0)) {
      run.fail(k, "lagged norm lost to cancellation");
      break;
    }
    const double gamma = std::sqrt(gsq);
    run.h(j, j - 1) = gamma;

    Vector lrow = r2;
    detail::scale_vec(lrow, 1.0 / gamma);
    L.append_row(lrow);
    V.view().subtract_times(r2, u);
    detail::scale_vec(u, 1.0 / gamma);
    V.append_col(u);
    if (run.complete(j, V.view(), nullptr) || drain) break;

    Vector r1 = r0a;
    r1.push_back(r0b);
    detail::scale_vec(r1, 1.0 / gamma);
    r1.back() /= gamma;
    r1.back() -= detail::dot(lrow, std::span<const double>(r1.data(), j));

    Vector unew = au;
    detail::scale_vec(unew, 1.0 / gamma);
    V.view().subtract_times(r1, unew);
    u.swap(unew);

    // Correction of the next column's coefficients for the Jacobi step
    // just taken: r4 = r1 - H_{1:j+1,1:j} r3 / gamma.
    r4 = r1;
    for (std::size_t c = 0; c < j; ++c)
      for (std::size_t i = 0; i <= c + 1; ++i) r4[i] -= run.h(i, c) * r3[c] / gamma;
    pre_norm = std::sqrt(ausq) / gamma;
  }
  return run.finish(std::move(V), std::move(L));
}

/// Modified Gram-Schmidt Arnoldi: loop k costs k reductions (k - 1
/// projections and one norm).
template <LinearOperator Op>
SolveResult mgs_gmres(const Op& a, std::span<const double> b, std::span<const double> x0,
                      const SolverConfig& cfg, ReductionLedger& ledger) {
  detail::ArnoldiRun<Op> run(a, b, x0, cfg, ledger);
  const std::size_t n = run.n, m = run.m;
  DenseMatrix& V = run.state.V;

  ledger.begin_iteration(1);
  Vector r0 = run.initial_residual(b);
  const double rho = norm2(r0, ledger);
  if (rho == 0.0) return run.trivial();
  run.set_rho(rho);
  detail::scale_vec(r0, 1.0 / rho);
  V.append_col(r0);

  for (std::size_t j = 1; j <= m; ++j) {
    ledger.begin_iteration(j + 1);
    Vector w = matvec(a, V.col(j - 1));
    double pre_norm = 0.0;
    for (std::size_t i = 0; i < j; ++i) {
      double h;
      if (i == 0) {
        auto batch = ledger.fuse();
        h = dot(V.col(0), w, ledger);
        pre_norm = std::sqrt(dot(w, w, ledger));
      } else {
        h = dot(V.col(i), w, ledger);
      }
      run.h(i, j - 1) = h;
      detail::axpy(-h, V.col(i), w);
    }
    const double g = norm2(w, ledger);
    run.h(j, j - 1) = g;
    if (!(g > breakdown_threshold(n, pre_norm))) {
      run.complete(j, V.view(), nullptr, true);
      break;
    }
    detail::scale_vec(w, 1.0 / g);
    V.append_col(w);
    if (run.complete(j, V.view(), nullptr)) break;
  }
  return run.finish(std::move(V), strict_lower_gram(V.view()));
}

/// Householder Arnoldi. Each reflector application and each reflector
/// construction is counted as one reduction. Basis vectors are sign
/// normalized so the subdiagonal of H is nonnegative, which makes H
/// comparable entry by entry with the Gram-Schmidt variants.
template <LinearOperator Op>
SolveResult hh_gmres(const Op& a, std::span<const double> b, std::span<const double> x0,
                     const SolverConfig& cfg, ReductionLedger& ledger) {
  detail::ArnoldiRun<Op> run(a, b, x0, cfg, ledger);
  const std::size_t n = run.n, m = run.m;
  DenseMatrix& V = run.state.V;
  std::vector<Vector> refl;  // unit vectors u_i, P_i = I - 2 u_i u_i^T, zero above entry i
  std::vector<double> sign;  // sign[i] relates basis vector i to the raw reflector column

  // Builds the reflector mapping z[i:] onto alpha e_i; returns alpha.
  auto make_reflector = [&](Vector& z, std::size_t i) {
    Vector u(n, 0.0);
    double xsq = 0.0;
    for (std::size_t p = i; p < n; ++p) xsq += z[p] * z[p];
    ledger.record();
    const double xn = std::sqrt(xsq);
    if (xn == 0.0) {
      refl.push_back(std::move(u));
      return 0.0;
    }
    const double alpha = z[i] >= 0.0 ? -xn : xn;
    for (std::size_t p = i; p < n; ++p) u[p] = z[p];
    u[i] -= alpha;
    const double un = std::sqrt(xsq - 2.0 * alpha * z[i] + alpha * alpha);
    for (std::size_t p = i; p < n; ++p) u[p] /= un;
    refl.push_back(std::move(u));
    return alpha;
  };
  auto apply = [&](std::size_t i, Vector& z) {
    const double t = 2.0 * dot(refl[i], z, ledger);
    detail::axpy(-t, refl[i], z);
  };
  // P_0 ... P_{i} e_i
  auto basis_vector = [&](std::size_t i) {
    Vector e(n, 0.0);
    e[i] = 1.0;
    for (std::size_t p = i + 1; p-- > 0;) apply(p, e);
    return e;
  };

  ledger.begin_iteration(1);
  Vector z = run.initial_residual(b);
  const double alpha0 = make_reflector(z, 0);
  const double rho = std::abs(alpha0);
  if (rho == 0.0) return run.trivial();
  run.set_rho(rho);
  sign.push_back(alpha0 >= 0.0 ? 1.0 : -1.0);
  Vector v = basis_vector(0);
  detail::scale_vec(v, sign[0]);
  V.append_col(v);

  for (std::size_t j = 1; j <= m; ++j) {
    ledger.begin_iteration(j + 1);
    z = matvec(a, V.col(j - 1));
    detail::scale_vec(z, sign[j - 1]);  // product with the raw reflector column
    for (std::size_t i = 0; i < j; ++i) apply(i, z);
    const double alpha = j < n ? make_reflector(z, j) : 0.0;
    double pre = alpha * alpha;
    for (std::size_t i = 0; i < j; ++i) pre += z[i] * z[i];
    const double sj = alpha * sign[j - 1] >= 0.0 ? 1.0 : -1.0;
    sign.push_back(sj);
    for (std::size_t i = 0; i < j; ++i) run.h(i, j - 1) = sign[i] * z[i] * sign[j - 1];
    run.h(j, j - 1) = std::abs(alpha);
    if (!(std::abs(alpha) > breakdown_threshold(n, std::sqrt(pre)))) {
      run.complete(j, V.view(), nullptr, true);
      break;
    }
    v = basis_vector(j);
    detail::scale_vec(v, sj);
    V.append_col(v);
    if (run.complete(j, V.view(), nullptr)) break;
  }
  return run.finish(std::move(V), strict_lower_gram(V.view()));
}

/// Runs the variant named in the configuration.
template <LinearOperator Op>
SolveResult solve(const Op& a, std::span<const double> b, std::span<const double> x0, const SolverConfig& cfg,
                  ReductionLedger& ledger) {
  switch (cfg.variant) {
    case Variant::igs2: return gauss_seidel_gmres(a, b, x0, cfg, ledger, 2);
    case Variant::igs1: return gauss_seidel_gmres(a, b, x0, cfg, ledger, 1);
    case Variant::hybrid1: return hybrid_gmres(a, b, x0, cfg, ledger);
    case Variant::mgs: return mgs_gmres(a, b, x0, cfg, ledger);
    case Variant::hh: return hh_gmres(a, b, x0, cfg, ledger);
  }
  throw std::invalid_argument("unknown variant");
}

}  // namespace lowsync
