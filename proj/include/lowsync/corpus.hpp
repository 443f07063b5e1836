#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "format.hpp"
#include "linalg.hpp"

#ifndef LOWSYNC_DATA_DIR
#define LOWSYNC_DATA_DIR "data/matrices"
#endif

namespace lowsync {

/// diag(1, 2, ..., n) with alpha in the top right corner.
inline DenseMatrix gen_walker(std::size_t n = 100, double alpha = 2000.0) {
  if (n < 2) throw std::invalid_argument("gen_walker: n must be at least 2");
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = static_cast<double>(i + 1);
  a(0, n - 1) += alpha;
  return a;
}

/// diag(1e-4, 2, 3, ..., 100).
inline DenseMatrix gen_simoncini() {
  DenseMatrix a(100, 100);
  a(0, 0) = 1e-4;
  for (std::size_t i = 1; i < 100; ++i) a(i, i) = static_cast<double>(i + 1);
  return a;
}

/// Unit upper bidiagonal with delta on the superdiagonal: a single Jordan
/// block for any nonzero delta.
inline DenseMatrix gen_embree(std::size_t n = 100, double delta = 0.1) {
  if (n < 1) throw std::invalid_argument("gen_embree: n must be positive");
  DenseMatrix a = DenseMatrix::identity(n);
  for (std::size_t i = 0; i + 1 < n; ++i) a(i, i + 1) = delta;
  return a;
}

/// Orthogonal Helmert matrix: a constant first row, then rows that
/// contrast entry i with the mean of the entries before it.
inline DenseMatrix gen_helmert(std::size_t n = 18) {
  if (n < 1) throw std::invalid_argument("gen_helmert: n must be positive");
  DenseMatrix a(n, n);
  const double c = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t j = 0; j < n; ++j) a(0, j) = c;
  for (std::size_t i = 2; i <= n; ++i) {
    const double d = std::sqrt(static_cast<double>(i) * static_cast<double>(i - 1));
    for (std::size_t j = 0; j + 1 < i; ++j) a(i - 1, j) = 1.0 / d;
    a(i - 1, i - 1) = -static_cast<double>(i - 1) / d;
  }
  return a;
}

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line), message_(message) {}
  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Reads a real coordinate Matrix Market stream, general or symmetric.
inline CsrMatrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty input");
  ++lineno;
  const auto head = detail::split_ws(detail::lower(line));
  if (head.size() != 5 || head[0] != "%%matrixmarket" || head[1] != "matrix")
    throw ParseError(lineno, "expected '%%MatrixMarket matrix coordinate real general|symmetric'");
  if (head[2] != "coordinate") throw ParseError(lineno, "only coordinate format is supported, got '" + head[2] + "'");
  if (head[3] != "real" && head[3] != "integer")
    throw ParseError(lineno, "unsupported field '" + head[3] + "' (need real)");
  const bool symmetric = head[4] == "symmetric";
  if (!symmetric && head[4] != "general")
    throw ParseError(lineno, "unsupported symmetry '" + head[4] + "' (need general or symmetric)");

  std::size_t rows = 0, cols = 0, declared = 0, seen = 0;
  bool have_size = false;
  std::vector<CsrMatrix::Triplet> t;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (!have_size) {
      if (tok.size() != 3) throw ParseError(lineno, "size line must hold rows, columns and entry count");
      const auto r = parse_unsigned(tok[0]), c = parse_unsigned(tok[1]), z = parse_unsigned(tok[2]);
      if (!r || !c || !z) throw ParseError(lineno, "malformed size line");
      rows = *r;
      cols = *c;
      declared = *z;
      if (symmetric && rows != cols) throw ParseError(lineno, "symmetric matrix must be square");
      t.reserve(symmetric ? 2 * declared : declared);
      have_size = true;
      continue;
    }
    if (tok.size() != 3) throw ParseError(lineno, "entry line must hold row, column and value");
    const auto i = parse_unsigned(tok[0]), j = parse_unsigned(tok[1]);
    const auto v = parse_double(tok[2]);
    if (!i || !j || !v) throw ParseError(lineno, "malformed entry");
    if (*i < 1 || *i > rows || *j < 1 || *j > cols) throw ParseError(lineno, "index out of bounds");
    if (!std::isfinite(*v)) throw ParseError(lineno, "non-finite value");
    if (++seen > declared) throw ParseError(lineno, "more entries than declared");
    t.push_back({*i - 1, *j - 1, *v});
    if (symmetric && *i != *j) t.push_back({*j - 1, *i - 1, *v});
  }
  if (!have_size) throw ParseError(lineno, "missing size line");
  if (seen != declared)
    throw ParseError(lineno, "expected " + std::to_string(declared) + " entries, found " + std::to_string(seen));
  return CsrMatrix::from_triplets(rows, cols, std::move(t));
}

inline CsrMatrix load_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_matrix_market(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.message());
  }
}

/// Writes a general coordinate file. Values use the shortest round-trip
/// form, so reading the file back reproduces the matrix exactly.
inline void write_matrix_market(std::ostream& out, const CsrMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t p = a.row_ptr()[i]; p < a.row_ptr()[i + 1]; ++p)
      out << i + 1 << ' ' << a.col_idx()[p] + 1 << ' ' << format_double(a.values()[p]) << '\n';
}

/// splitmix64: a 64-bit state advanced by a fixed odd increment and
/// finalised by two xor-shift-multiply rounds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Standard normal samples by the Box-Muller transform, two per pair of
/// uniforms: sqrt(-2 ln u1) cos(2 pi u2), then the sine partner. u1 is
/// drawn from (0, 1] so the log is finite.
inline Vector standard_normal(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Vector z(n);
  for (std::size_t i = 0; i < n; i += 2) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    z[i] = r * std::cos(t);
    if (i + 1 < n) z[i + 1] = r * std::sin(t);
  }
  return z;
}

enum class RhsKind { ones, a_times_ones, unit_random, file };
enum class X0Kind { zero, file };

struct ProblemSpec {
  /// Generator name with optional colon separated parameters
  /// ("walker:100:2000"), a corpus name ("fs1836"), or a .mtx path.
  std::string matrix;
  RhsKind rhs = RhsKind::ones;
  std::uint64_t seed = 42;
  std::string rhs_path;
  X0Kind x0 = X0Kind::zero;
  std::string x0_path;
};

using Matrix = std::variant<DenseMatrix, CsrMatrix>;

inline std::size_t matrix_rows(const Matrix& a) {
  return std::visit([](const auto& m) { return m.rows(); }, a);
}

/// Thrown for a matrix name that is neither a generator, a corpus entry
/// nor a readable path.
class UnknownMatrixError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CorpusEntry {
  const char* name;
  const char* file;
  RhsKind rhs;
};

/// Public sparse matrices used by the experiments, looked up under the
/// data directory.
inline constexpr CorpusEntry corpus_entries[] = {
    {"fs1836", "fs_183_6.mtx", RhsKind::ones},
    {"west0132", "west0132.mtx", RhsKind::ones},
    {"steam1", "steam1.mtx", RhsKind::a_times_ones},
    {"impcol_e", "impcol_e.mtx", RhsKind::a_times_ones},
    {"add32", "add32.mtx", RhsKind::ones},
};

/// LOWSYNC_DATA_DIR from the environment, else the build-time default.
inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("LOWSYNC_DATA_DIR"); env && *env) return env;
  return LOWSYNC_DATA_DIR;
}

inline std::filesystem::path corpus_path(const std::string& name, const std::filesystem::path& dir = data_dir()) {
  for (const auto& e : corpus_entries)
    if (name == e.name) return dir / e.file;
  throw UnknownMatrixError("not a corpus matrix: " + name);
}

/// Right-hand side the experiments use for a named matrix.
inline RhsKind default_rhs(const std::string& matrix) {
  const std::string base = matrix.substr(0, matrix.find(':'));
  if (base == "simoncini") return RhsKind::unit_random;
  for (const auto& e : corpus_entries)
    if (base == e.name) return e.rhs;
  return RhsKind::ones;
}

namespace detail {

inline std::vector<std::string> split_colon(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t p = s.find(':', start);
    parts.push_back(s.substr(start, p == std::string::npos ? std::string::npos : p - start));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return parts;
}

inline std::size_t size_param(const std::vector<std::string>& p, std::size_t i, std::size_t dflt,
                              const std::string& name) {
  if (p.size() <= i) return dflt;
  const auto v = parse_unsigned(p[i]);
  if (!v || *v == 0) throw UnknownMatrixError("bad size parameter in '" + name + "'");
  return static_cast<std::size_t>(*v);
}

inline double real_param(const std::vector<std::string>& p, std::size_t i, double dflt, const std::string& name) {
  if (p.size() <= i) return dflt;
  const auto v = parse_double(p[i]);
  if (!v || !std::isfinite(*v)) throw UnknownMatrixError("bad numeric parameter in '" + name + "'");
  return *v;
}

}  // namespace detail

/// Resolves a matrix name: identity[:n], walker[:n[:alpha]], simoncini,
/// embree[:n[:delta]], helmert[:n], a corpus name, or a path to a .mtx file.
inline Matrix load_problem_matrix(const std::string& name, const std::filesystem::path& dir = data_dir()) {
  const auto p = detail::split_colon(name);
  const std::string& base = p[0];
  auto nparams = [&](std::size_t maxp) {
    if (p.size() > maxp + 1) throw UnknownMatrixError("too many parameters in '" + name + "'");
  };
  if (base == "identity") {
    nparams(1);
    return DenseMatrix::identity(detail::size_param(p, 1, 10, name));
  }
  if (base == "walker") {
    nparams(2);
    const std::size_t n = detail::size_param(p, 1, 100, name);
    if (n < 2) throw UnknownMatrixError("walker needs n >= 2");
    return gen_walker(n, detail::real_param(p, 2, 2000.0, name));
  }
  if (base == "simoncini") {
    nparams(0);
    return gen_simoncini();
  }
  if (base == "embree") {
    nparams(2);
    return gen_embree(detail::size_param(p, 1, 100, name), detail::real_param(p, 2, 0.1, name));
  }
  if (base == "helmert") {
    nparams(1);
    return gen_helmert(detail::size_param(p, 1, 18, name));
  }
  for (const auto& e : corpus_entries)
    if (name == e.name) return load_matrix_market(dir / e.file);
  if (name.ends_with(".mtx")) return load_matrix_market(name);
  throw UnknownMatrixError("unknown matrix '" + name + "'");
}

/// Reads a vector: whitespace separated values, '%' comment lines
/// skipped. A Matrix Market array header and its size line are accepted.
inline Vector read_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Vector v;
  std::string line;
  std::size_t lineno = 0;
  bool array_header = false, skipped_size = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && detail::lower(line).starts_with("%%matrixmarket")) {
      array_header = true;
      continue;
    }
    if (line.empty() || line[0] == '%') continue;
    if (array_header && !skipped_size) {
      skipped_size = true;
      continue;
    }
    for (const auto& tok : detail::split_ws(line)) {
      const auto x = parse_double(tok);
      if (!x || !std::isfinite(*x)) throw ParseError(lineno, path.string() + ": malformed value '" + tok + "'");
      v.push_back(*x);
    }
  }
  return v;
}

/// Right-hand side and initial guess for a problem.
template <LinearOperator Op>
std::pair<Vector, Vector> build_rhs(const ProblemSpec& spec, const Op& a) {
  const std::size_t n = a.rows();
  Vector b;
  switch (spec.rhs) {
    case RhsKind::ones: b.assign(n, 1.0); break;
    case RhsKind::a_times_ones: b = matvec(a, Vector(a.cols(), 1.0)); break;
    case RhsKind::unit_random: {
      b = standard_normal(n, spec.seed);
      const double nb = std::sqrt(detail::sum_squares(b));
      detail::scale(b, 1.0 / nb);
      break;
    }
    case RhsKind::file: b = read_vector(spec.rhs_path); break;
  }
  if (b.size() != n) throw DimensionError("right-hand side has length " + std::to_string(b.size()) + ", need " + std::to_string(n));
  Vector x0 = spec.x0 == X0Kind::file ? read_vector(spec.x0_path) : Vector(n, 0.0);
  if (x0.size() != n) throw DimensionError("initial guess has length " + std::to_string(x0.size()) + ", need " + std::to_string(n));
  return {std::move(b), std::move(x0)};
}

inline std::pair<Vector, Vector> build_rhs(const ProblemSpec& spec, const Matrix& a) {
  return std::visit([&](const auto& m) { return build_rhs(spec, m); }, a);
}

}  // namespace lowsync
