// Acceptance checks, one line per criterion:
//   criterion N: PASS|FAIL <details>
// `acceptance` runs all of them; `acceptance N` runs one. The exit status is
// nonzero when any selected criterion fails.
//
// Orthogonality, singular values, condition numbers and the Arnoldi
// relation are recomputed here with Eigen from the solver's final basis
// rather than read back from the library's own diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lowsync/lowsync.hpp"
#include "oracles.hpp"

using namespace lowsync;

namespace {

constexpr double eps = std::numeric_limits<double>::epsilon();

struct Outcome {
  bool pass;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

struct Problem {
  std::string name;
  Matrix a;
  Vector b, x0;
  std::size_t n() const { return matrix_rows(a); }
};

/// Loads a named problem with the right-hand side the experiments use.
/// Returns nullopt (and records the name) when a corpus file is absent.
std::optional<Problem> load(const std::string& name, std::vector<std::string>* missing = nullptr) {
  for (const auto& e : corpus_entries)
    if (name == e.name && !std::filesystem::exists(corpus_path(name))) {
      if (missing) missing->push_back(name);
      return std::nullopt;
    }
  Problem p;
  p.name = name;
  p.a = load_problem_matrix(name);
  ProblemSpec spec;
  spec.matrix = name;
  spec.rhs = default_rhs(name);
  auto [b, x0] = build_rhs(spec, p.a);
  p.b = std::move(b);
  p.x0 = std::move(x0);
  return p;
}

struct Run {
  SolveResult result;
  ReductionLedger ledger;
};

Run solve_problem(const Problem& p, Variant v, std::size_t max_iter = 100, std::size_t diag_every = 1000000) {
  Run r;
  SolverConfig cfg;
  cfg.variant = v;
  cfg.max_iter = max_iter;
  cfg.diag_every = diag_every;
  cfg.throw_on_breakdown = false;
  r.result = std::visit([&](const auto& op) { return solve(op, p.b, p.x0, cfg, r.ledger); }, p.a);
  return r;
}

std::vector<double> arnoldi_residuals(const SolveResult& r) {
  std::vector<double> out;
  for (const auto& rec : r.history.records) out.push_back(rec.arnoldi_rel_residual);
  return out;
}

/// Per-k orthogonality of the computed basis: loss of orthogonality and
/// smallest singular value of the first k + 1 columns (k columns after a
/// happy breakdown).
struct BasisQuality {
  std::vector<double> loo, sigma_min;
};

BasisQuality basis_quality(const SolveResult& r) {
  const Eigen::MatrixXd v = oracle::to_eigen(r.arnoldi.V);
  const Eigen::MatrixXd g = v.transpose() * v;
  BasisQuality q;
  for (std::size_t k = 1; k <= r.arnoldi.completed; ++k) {
    const Eigen::Index c = std::min<Eigen::Index>(static_cast<Eigen::Index>(k + 1), v.cols());
    const Eigen::MatrixXd gk = g.topLeftCorner(c, c);
    q.loo.push_back((Eigen::MatrixXd::Identity(c, c) - gk).norm());
    q.sigma_min.push_back(oracle::sigma_min(v.leftCols(c)));
  }
  return q;
}

/// max over k of ||A V_k - V_{k+1} H_k||_F / ||A||_F.
double worst_arnoldi_relation(const Problem& p, const SolveResult& r) {
  const Eigen::MatrixXd a = std::visit([](const auto& m) { return oracle::to_eigen(m); }, p.a);
  const Eigen::MatrixXd v = oracle::to_eigen(r.arnoldi.V);
  const Eigen::MatrixXd h = oracle::to_eigen(r.arnoldi.H);
  const std::size_t k = r.arnoldi.completed;
  double sq = 0.0, worst = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    Eigen::VectorXd col = a * v.col(static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i <= j + 1 && i < static_cast<std::size_t>(v.cols()); ++i)
      col -= h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v.col(static_cast<Eigen::Index>(i));
    sq += col.squaredNorm();
    worst = std::max(worst, std::sqrt(sq));
  }
  return worst / a.norm();
}

// Longest run of at least `len` consecutive iterations inside [lo_k, hi_k]
// whose residuals lie in [lo, hi] and vary by less than a factor of two.
std::size_t longest_plateau(const std::vector<double>& res, std::size_t lo_k, std::size_t hi_k, double lo, double hi) {
  std::size_t best = 0;
  for (std::size_t s = lo_k; s <= hi_k && s <= res.size(); ++s) {
    double mn = res[s - 1], mx = res[s - 1];
    for (std::size_t e = s; e <= hi_k && e <= res.size(); ++e) {
      const double v = res[e - 1];
      if (v < lo || v > hi) break;
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      if (mx >= 2.0 * mn) break;
      best = std::max(best, e - s + 1);
    }
  }
  return best;
}

Outcome criterion_1() {
  auto p = load("fs1836");
  if (!p) return {false, "missing corpus file fs1836"};
  const Run mgs = solve_problem(*p, Variant::mgs, 60);
  const Run igs = solve_problem(*p, Variant::igs2, 50);
  const auto rm = arnoldi_residuals(mgs.result), ri = arnoldi_residuals(igs.result);

  const std::size_t plateau = longest_plateau(rm, 40, 55, 1e-8, 1e-6);
  double lo = rm.at(39), hi = rm.at(39);
  for (std::size_t k = 40; k <= 55; ++k) {
    lo = std::min(lo, rm.at(k - 1));
    hi = std::max(hi, rm.at(k - 1));
  }
  bool monotone = ri.size() >= 50;
  std::size_t first_bump = 0;
  for (std::size_t k = 2; k <= std::min<std::size_t>(50, ri.size()); ++k)
    if (!(ri[k - 1] < ri[k - 2])) {
      monotone = false;
      if (!first_bump) first_bump = k;
    }
  const double beta50 = igs.result.history.records.at(49).beta;
  const double beta_ref = backward_error(std::get<CsrMatrix>(p->a), p->b, igs.result.x,
                                         oracle::norm2(oracle::to_eigen(std::get<CsrMatrix>(p->a))));

  std::ostringstream d;
  d << "mgs plateau in [1e-8,1e-6] over 40..55: " << plateau << " iterations (need >= 4; residual range " << sci(lo)
    << ".." << sci(hi) << "); igs2 strictly decreasing through 50: " << (monotone ? "yes" : "no");
  if (first_bump) d << " (first non-decrease at " << first_bump << ")";
  d << "; beta(x50) = " << sci(beta50) << " (exact-norm oracle " << sci(beta_ref) << ", need <= 1e-13)";
  return {plateau >= 4 && monotone && beta50 <= 1e-13 && beta_ref <= 1e-13, d.str()};
}

Outcome criterion_2() {
  auto p = load("simoncini");
  const Run mgs = solve_problem(*p, Variant::mgs, 100, 1);
  const Run igs = solve_problem(*p, Variant::igs2, 100);
  const auto& recs = mgs.result.history.records;
  const auto rm = arnoldi_residuals(mgs.result);

  const double r85 = rm.at(84);
  const double s85 = recs.at(84).s_norm.value_or(0.0);
  double later_min = r85;
  for (std::size_t k = 85; k <= rm.size(); ++k) later_min = std::min(later_min, rm[k - 1]);
  const bool stagnates = r85 >= 1e-13 && r85 <= 1e-11 && later_min >= r85 / 10.0 && s85 >= 0.95;

  const auto ri = arnoldi_residuals(igs.result);
  bool monotone = true;
  std::size_t reach = 0;
  for (std::size_t k = 1; k <= ri.size(); ++k) {
    if (k > 1 && !reach && ri[k - 1] > ri[k - 2]) monotone = false;
    if (!reach && ri[k - 1] <= 1e-14) reach = k;
  }
  const auto q = basis_quality(igs.result);
  const double max_loo = *std::max_element(q.loo.begin(), q.loo.end());

  std::ostringstream d;
  d << "mgs residual at 85 = " << sci(r85) << ", min over 85..100 = " << sci(later_min) << ", ||S_85|| = " << sci(s85)
    << "; igs2 monotone: " << (monotone ? "yes" : "no") << ", reaches 1e-14 at k = " << reach
    << ", max loss of orthogonality " << sci(max_loo);
  return {stagnates && monotone && reach > 0 && max_loo <= 1e-13, d.str()};
}

Outcome criterion_3() {
  auto p = load("walker");
  const Run igs = solve_problem(*p, Variant::igs2, 100);
  const auto q = basis_quality(igs.result);
  const double max_loo = *std::max_element(q.loo.begin(), q.loo.end());
  const auto r = arnoldi_residuals(igs.result);
  std::size_t reach = 0;
  for (std::size_t k = 1; k <= r.size() && !reach; ++k)
    if (r[k - 1] <= 1e-12) reach = k;
  // A plateau longer than 3 iterations: four consecutive residuals with an
  // overall reduction factor above 0.9.
  std::size_t plateau_at = 0;
  const std::size_t stop = reach ? reach : r.size();
  for (std::size_t k = 1; k + 3 <= stop && !plateau_at; ++k)
    if (r[k + 2] > 0.9 * r[k - 1]) plateau_at = k;
  const double dep = henrici_departure_triangular(std::get<DenseMatrix>(p->a));

  std::ostringstream d;
  d << "max loss of orthogonality " << sci(max_loo) << " (need <= 1e-13); residual <= 1e-12 at k = " << reach
    << "; plateau longer than 3: " << (plateau_at ? "at k = " + std::to_string(plateau_at) : std::string("none"))
    << "; dep(A) = " << dep;
  return {max_loo <= 1e-13 && reach > 0 && !plateau_at && dep == 2000.0, d.str()};
}

Outcome criterion_4() {
  std::vector<std::string> missing;
  std::ostringstream d;
  bool pass = true;
  for (const std::string name : {"steam1", "impcol_e", "west0132", "add32", "helmert", "embree"}) {
    auto p = load(name, &missing);
    if (!p) continue;
    const double n = static_cast<double>(p->n());
    const Run two = solve_problem(*p, Variant::igs2);
    const auto q2 = basis_quality(two.result);
    const double loo2 = *std::max_element(q2.loo.begin(), q2.loo.end());
    const double smin = *std::min_element(q2.sigma_min.begin(), q2.sigma_min.end());
    const bool ok2 = loo2 <= 1000.0 * n * eps && smin >= 0.999;

    const Run one = solve_problem(*p, Variant::igs1);
    const auto q1 = basis_quality(one.result);
    bool ok1 = true;
    double worst_ratio = 0.0;
    if (p->n() <= 240) {
      // B_k = [r0, A V_k] from the one-sweep run's own basis.
      const Eigen::MatrixXd a = std::visit([](const auto& m) { return oracle::to_eigen(m); }, p->a);
      const Eigen::MatrixXd v = oracle::to_eigen(one.result.arnoldi.V);
      Eigen::VectorXd r0 = Eigen::Map<const Eigen::VectorXd>(p->b.data(), p->b.size()) -
                           a * Eigen::Map<const Eigen::VectorXd>(p->x0.data(), p->x0.size());
      const Eigen::MatrixXd av = a * v;
      for (std::size_t k = 1; k <= one.result.arnoldi.completed && k <= static_cast<std::size_t>(v.cols()); ++k) {
        Eigen::MatrixXd bk(a.rows(), static_cast<Eigen::Index>(k + 1));
        bk.col(0) = r0;
        bk.rightCols(static_cast<Eigen::Index>(k)) = av.leftCols(static_cast<Eigen::Index>(k));
        const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXd>(bk).singularValues();
        const double kappa = s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
        const double bound = 1000.0 * n * eps * kappa;
        worst_ratio = std::max(worst_ratio, q1.loo[k - 1] / bound);
        if (q1.loo[k - 1] > bound) ok1 = false;
      }
    }
    d << name << ": igs2 loo " << sci(loo2) << " sigma_min " << std::to_string(smin);
    if (p->n() <= 240) d << ", igs1 loo/bound " << sci(worst_ratio);
    d << (ok1 && ok2 ? " ok" : " VIOLATED") << "; ";
    pass = pass && ok1 && ok2;
  }
  if (!missing.empty()) {
    pass = false;
    d << "missing corpus files:";
    for (const auto& m : missing) d << ' ' << m;
  }
  return {pass, d.str()};
}

Outcome criterion_5() {
  auto p = load("embree");
  const Run igs = solve_problem(*p, Variant::igs2, 100);
  const auto r = arnoldi_residuals(igs.result);
  std::size_t reach = 0;
  for (std::size_t k = 1; k <= r.size() && !reach; ++k)
    if (r[k - 1] <= 1e-12) reach = k;
  const double true_res = reach ? igs.result.history.records[reach - 1].true_rel_residual : 1.0;
  std::ostringstream d;
  d << "relative residual <= 1e-12 at k = " << reach << " (need <= 20; true residual there " << sci(true_res) << ")";
  return {reach > 0 && reach <= 20, d.str()};
}

Outcome criterion_6() {
  std::ostringstream d;
  bool pass = true;
  for (const std::string name : {"fs1836", "walker", "simoncini"}) {
    auto p = load(name);
    if (!p) {
      d << name << " missing; ";
      continue;
    }
    for (Variant v : {Variant::igs2, Variant::hybrid1, Variant::mgs}) {
      const Run run = solve_problem(*p, v, 60);
      const ReductionLedger& l = run.ledger;
      std::size_t bad = 0, checked = 0;
      for (std::size_t k = 1; k <= l.last_iteration(); ++k) {
        std::size_t expect;
        if (v == Variant::mgs)
          expect = k;
        else if (l.is_priming(k))
          continue;
        else
          expect = v == Variant::igs2 ? 2 : 1;
        ++checked;
        if (l.at_iteration(k) != expect && !bad) bad = k;
      }
      d << name << '/' << to_string(v) << ": " << checked << " iterations " << (bad ? "MISMATCH at k=" + std::to_string(bad) : "exact")
        << "; ";
      pass = pass && !bad && checked > 0;
    }
  }
  return {pass, d.str()};
}

Outcome criterion_7() {
  std::vector<std::string> missing;
  std::ostringstream d;
  bool pass = true;
  for (const std::string name : {"fs1836", "add32"}) {
    auto p = load(name, &missing);
    if (!p) continue;
    const Run two = solve_problem(*p, Variant::igs2);
    const Run one = solve_problem(*p, Variant::hybrid1);
    const std::size_t k = std::min(two.result.arnoldi.completed, one.result.arnoldi.completed);
    double worst = 0.0;
    std::size_t first_bad = 0;
    for (std::size_t j = 1; j <= k; ++j) {
      const double g2 = two.result.arnoldi.H(j, j - 1), g1 = one.result.arnoldi.H(j, j - 1);
      const double rel = std::abs(g1 - g2) / std::abs(g2);
      worst = std::max(worst, rel);
      if (rel > 1e-8 && !first_bad) first_bad = j;
    }
    d << name << ": " << k << " diagonal entries compared, max relative difference " << sci(worst);
    if (first_bad) d << ", first above 1e-8 at k = " << first_bad;
    d << "; ";
    pass = pass && !first_bad;
  }
  if (!missing.empty()) {
    pass = false;
    d << "missing corpus files:";
    for (const auto& m : missing) d << ' ' << m;
  }
  return {pass, d.str()};
}

Outcome criterion_8() {
  double worst_r = 0.0, worst_y = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const Eigen::MatrixXd a = oracle::random_matrix(60, 30, 1000 + t);
    ReductionLedger ledger;
    const QrState s = igs2_qr(oracle::from_eigen(a), ledger);
    const Eigen::MatrixXd ref = oracle::householder_r(a);
    worst_r = std::max(worst_r, (oracle::to_eigen(s.R) - ref).norm() / ref.norm());
  }
  std::mt19937_64 gen(2024);
  for (std::uint64_t t = 0; t < 50; ++t) {
    const std::size_t k = 1 + gen() % 30;
    Eigen::MatrixXd h = oracle::random_matrix(k + 1, k, 5000 + t);
    for (Eigen::Index j = 0; j < h.cols(); ++j)
      for (Eigen::Index i = j + 2; i < h.rows(); ++i) h(i, j) = 0.0;
    const double rho = 0.5 + static_cast<double>(t);
    const LsqResult got = hessenberg_lsq(oracle::from_eigen(h), rho);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(h.rows());
    e(0) = rho;
    const Eigen::VectorXd y = oracle::dense_lsq(h, e);
    const Eigen::Map<const Eigen::VectorXd> yg(got.y.data(), static_cast<Eigen::Index>(got.y.size()));
    worst_y = std::max(worst_y, (yg - y).norm() / y.norm());
  }
  std::ostringstream d;
  d << "igs2_qr vs Householder R: worst relative difference " << sci(worst_r) << " (<= 1e-12); hessenberg_lsq vs dense: "
    << sci(worst_y) << " (<= 1e-10)";
  return {worst_r <= 1e-12 && worst_y <= 1e-10, d.str()};
}

Outcome criterion_9() {
  std::vector<std::string> missing;
  std::ostringstream d;
  bool pass = true;
  std::size_t runs = 0;
  for (const std::string name :
       {"fs1836", "west0132", "steam1", "impcol_e", "add32", "walker", "simoncini", "embree", "helmert"}) {
    auto p = load(name, &missing);
    if (!p) continue;
    const double bound = 1000.0 * static_cast<double>(p->n()) * eps;
    double worst = 0.0;
    for (Variant v : {Variant::igs2, Variant::igs1, Variant::hybrid1, Variant::mgs, Variant::hh}) {
      const Run run = solve_problem(*p, v);
      const double rel = worst_arnoldi_relation(*p, run.result);
      worst = std::max(worst, rel);
      ++runs;
      if (rel > bound) {
        pass = false;
        d << name << '/' << to_string(v) << " VIOLATED " << sci(rel) << "; ";
      }
    }
    d << name << ": worst " << sci(worst / bound) << " of bound; ";
  }
  d << runs << " runs checked";
  if (!missing.empty()) {
    pass = false;
    d << "; missing corpus files:";
    for (const auto& m : missing) d << ' ' << m;
  }
  return {pass, d.str()};
}

Outcome criterion_10() {
  // Production-scale and parallel experiments cannot be run here; their
  // stand-ins are the exact reduction counts and the property suites.
  const Outcome c6 = criterion_6(), c8 = criterion_8();
  return {c6.pass && c8.pass,
          std::string("not reproducible at desk scale; substituted by criterion 6 (") + (c6.pass ? "PASS" : "FAIL") +
              ") and criterion 8 (" + (c8.pass ? "PASS" : "FAIL") + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                      criterion_5, criterion_6, criterion_7, criterion_8,
                                                      criterion_9, criterion_10};
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int c = std::atoi(argv[i]);
    if (c < 1 || c > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: acceptance [criterion 1-%zu]...\n", criteria.size());
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(c));
  }
  if (selected.empty())
    for (std::size_t c = 1; c <= criteria.size(); ++c) selected.push_back(c);

  bool all = true;
  for (std::size_t c : selected) {
    Outcome o;
    try {
      o = criteria[c - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    while (o.detail.ends_with(' ') || o.detail.ends_with(';')) o.detail.pop_back();
    std::printf("criterion %zu: %s %s\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
