// Command-line front end: `run` solves a problem with one or more GMRES
// variants and writes convergence histories; `compare` lines up histories
// and reports where the residual curves part ways.
//
// Exit status: 0 success (a recorded solver breakdown included), 1 usage
// error, 2 I/O error, 3 internal invariant violation.

#include <CLI11.hpp>
#include <iostream>

#include "harness.hpp"

namespace {

using namespace lowsync;
using namespace lowsync::harness;

enum Exit { ok = 0, usage = 1, io = 2, internal = 3 };

ProblemSpec problem_from_flags(const std::string& matrix, const std::string& rhs, std::uint64_t seed,
                               const std::string& x0) {
  ProblemSpec p;
  p.matrix = matrix;
  p.seed = seed;
  if (rhs.empty())
    p.rhs = default_rhs(matrix);
  else if (rhs == "ones")
    p.rhs = RhsKind::ones;
  else if (rhs == "a_times_ones")
    p.rhs = RhsKind::a_times_ones;
  else if (rhs == "unit_random")
    p.rhs = RhsKind::unit_random;
  else {
    p.rhs = RhsKind::file;
    p.rhs_path = rhs;
  }
  if (x0 != "zero") {
    p.x0 = X0Kind::file;
    p.x0_path = x0;
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-synchronization GMRES experiments"};
  app.require_subcommand(1);

  std::string matrix, rhs, x0 = "zero", out = "out", data = data_dir().string();
  std::vector<std::string> variants, formats{"csv"};
  std::uint64_t seed = 42;
  std::size_t max_iter = 100, diag_every = 0;
  double rtol = 0.0;
  bool parallel = false;

  auto* run_cmd = app.add_subcommand("run", "solve a problem and write convergence histories");
  run_cmd->add_option("--matrix", matrix,
                      "identity[:n], walker[:n[:alpha]], simoncini, embree[:n[:delta]], helmert[:n], "
                      "fs1836, west0132, steam1, impcol_e, add32, or a .mtx path")
      ->required();
  run_cmd->add_option("--variant", variants, "igs2 | igs1 | hybrid1 | mgs | hh (repeatable)")->required();
  run_cmd->add_option("--rhs", rhs, "ones | a_times_ones | unit_random | <file>; default depends on the matrix");
  run_cmd->add_option("--seed", seed, "seed for --rhs unit_random");
  run_cmd->add_option("--max-iter", max_iter, "maximum Krylov dimension (at most n - 2)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--x0", x0, "zero | <file>");
  run_cmd->add_option("--diag-every", diag_every, "spectral diagnostics cadence; 0 = every iteration up to n = 500, else every 10th");
  run_cmd->add_option("--rtol", rtol, "stop at this relative Arnoldi residual; 0 runs max-iter steps");
  run_cmd->add_option("--out", out, "output directory");
  run_cmd->add_option("--format", formats, "csv | json | svg (repeatable)")
      ->check(CLI::IsMember({"csv", "json", "svg"}));
  run_cmd->add_option("--data-dir", data, "directory holding the corpus .mtx files");
  run_cmd->add_flag("--parallel", parallel, "solve the variants concurrently");

  std::vector<std::string> files;
  std::string report;
  auto* cmp_cmd = app.add_subcommand("compare", "align histories and report per-iteration deltas");
  cmp_cmd->add_option("files", files, "history CSV files; the first is the reference")->required()->expected(2, -1);
  cmp_cmd->add_option("--out", report, "also write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }

  try {
    if (*run_cmd) {
      RunManifest m;
      m.problem = problem_from_flags(matrix, rhs, seed, x0);
      for (const auto& v : variants) {
        const auto pv = parse_variant(v);
        if (!pv) throw UsageError("unknown variant '" + v + "'");
        m.variants.push_back(*pv);
      }
      m.formats.clear();
      for (const auto& f : formats)
        m.formats.push_back(f == "json" ? Format::json : f == "svg" ? Format::svg : Format::csv);
      m.max_iter = max_iter;
      m.diag_every = diag_every;
      m.rtol = rtol;
      m.out = out;
      m.data_dir = data;
      m.parallel = parallel;
      for (const auto& o : run(m)) {
        const auto& recs = o.history.records;
        std::cout << o.problem << ' ' << to_string(o.variant) << ": " << recs.size() << " iterations, "
                  << to_string(o.history.termination);
        if (!recs.empty()) std::cout << ", arnoldi_rel_residual " << format_double(recs.back().arnoldi_rel_residual);
        std::cout << ", reductions " << o.total_reductions << '\n';
      }
    } else if (*cmp_cmd) {
      std::vector<HistoryTable> tables;
      for (const auto& f : files) tables.push_back(parse_history_csv(read_file(f), f));
      std::vector<Comparison> cs;
      for (std::size_t i = 1; i < tables.size(); ++i) cs.push_back(compare(tables[0], tables[i]));
      const std::string text = comparison_text(cs);
      std::cout << text;
      if (!report.empty()) write_file(report, text);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return internal;
  }
  return ok;
}
