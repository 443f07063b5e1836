#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lowsync/lowsync.hpp"

namespace lowsync::harness {

inline constexpr const char* csv_header =
    "k,arnoldi_rel_residual,true_rel_residual,beta,loo_frobenius,l_frobenius,s_norm,sigma_min_v,"
    "spectral_radius_mn,reductions";

/// Bumped whenever a JSON field is renamed or removed.
inline constexpr int json_schema_version = 1;

/// Bad input from the user: unknown names, malformed options.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Files that cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Format { csv, json, svg };

struct RunManifest {
  ProblemSpec problem;
  std::vector<Variant> variants;
  std::size_t max_iter = 100;
  std::size_t diag_every = 0;
  double rtol = 0.0;
  std::filesystem::path out = ".";
  std::filesystem::path data_dir = lowsync::data_dir();
  std::vector<Format> formats{Format::csv};
  bool parallel = false;
};

struct RunOutcome {
  std::string problem;
  Variant variant = Variant::igs2;
  ConvergenceHistory history;
  std::size_t total_reductions = 0;
  std::size_t priming_reductions = 0;
  std::size_t finalize_reductions = 0;
  double final_beta = 0.0;
};

/// File-name friendly label for a matrix name or path.
inline std::string problem_label(const std::string& matrix) {
  std::string s = matrix;
  if (s.ends_with(".mtx")) s = std::filesystem::path(s).stem().string();
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return s;
}

inline std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::string history_csv(const ConvergenceHistory& h) {
  std::ostringstream os;
  os << csv_header << '\n';
  for (const auto& r : h.records) {
    os << r.k << ',' << format_double(r.arnoldi_rel_residual) << ',' << format_double(r.true_rel_residual) << ','
       << format_double(r.beta) << ',' << format_double(r.loo_frobenius) << ',' << format_double(r.l_frobenius)
       << ',' << opt(r.s_norm) << ',' << opt(r.sigma_min_v) << ',' << opt(r.spectral_radius_mn) << ','
       << r.reductions << '\n';
  }
  return os.str();
}

namespace detail {

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline nlohmann::ordered_json record_json(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["arnoldi_rel_residual"] = r.arnoldi_rel_residual;
  j["true_rel_residual"] = r.true_rel_residual;
  j["beta"] = r.beta;
  j["loo_frobenius"] = r.loo_frobenius;
  j["l_frobenius"] = r.l_frobenius;
  j["s_norm"] = detail::opt_json(r.s_norm);
  j["sigma_min_v"] = detail::opt_json(r.sigma_min_v);
  j["spectral_radius_mn"] = detail::opt_json(r.spectral_radius_mn);
  j["reductions"] = r.reductions;
  j["arnoldi_relation"] = r.arnoldi_relation;
  return j;
}

inline std::string history_json(const RunOutcome& o) {
  nlohmann::ordered_json j;
  j["schema_version"] = json_schema_version;
  j["problem"] = o.problem;
  j["variant"] = to_string(o.variant);
  j["termination"] = to_string(o.history.termination);
  if (!o.history.breakdown_reason.empty()) j["breakdown_reason"] = o.history.breakdown_reason;
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : o.history.records) j["records"].push_back(record_json(r));
  return detail::dump(j);
}

inline nlohmann::ordered_json summary_entry(const RunOutcome& o) {
  const auto& recs = o.history.records;
  nlohmann::ordered_json j;
  j["problem"] = o.problem;
  j["variant"] = to_string(o.variant);
  j["iterations"] = recs.size();
  j["termination"] = to_string(o.history.termination);
  j["breakdown_reason"] = o.history.breakdown_reason.empty() ? nlohmann::ordered_json(nullptr)
                                                             : nlohmann::ordered_json(o.history.breakdown_reason);
  j["final_arnoldi_rel_residual"] =
      recs.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(recs.back().arnoldi_rel_residual);
  j["final_true_rel_residual"] =
      recs.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(recs.back().true_rel_residual);
  j["final_beta"] = o.final_beta;
  std::optional<double> sigma, smax;
  std::optional<std::size_t> s_one;
  double loo_max = 0.0;
  for (const auto& r : recs) {
    if (r.sigma_min_v) sigma = r.sigma_min_v;
    if (r.s_norm) {
      smax = std::max(smax.value_or(0.0), *r.s_norm);
      if (!s_one && *r.s_norm >= 0.95) s_one = r.k;
    }
    loo_max = std::max(loo_max, r.loo_frobenius);
  }
  j["final_sigma_min_v"] = detail::opt_json(sigma);
  j["max_loo_frobenius"] = loo_max;
  j["max_s_norm"] = detail::opt_json(smax);
  // ||S_k||_2 near one marks the point where the basis has lost rank.
  j["s_norm_reached_one"] = s_one.has_value();
  j["first_k_s_norm_ge_0_95"] = s_one ? nlohmann::ordered_json(*s_one) : nlohmann::ordered_json(nullptr);
  j["total_reductions"] = o.total_reductions;
  j["priming_reductions"] = o.priming_reductions;
  j["finalize_reductions"] = o.finalize_reductions;
  return j;
}

inline std::string summary_json(const std::vector<RunOutcome>& outcomes) {
  nlohmann::ordered_json j;
  j["schema_version"] = json_schema_version;
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& o : outcomes) j["runs"].push_back(summary_entry(o));
  return detail::dump(j);
}

/// Static line chart of log10 metrics against the iteration index.
inline std::string svg_plot(const ConvergenceHistory& h, const std::string& title) {
  constexpr double W = 800, Ht = 500, L = 70, R = 170, T = 40, B = 50;
  struct Series {
    const char* name;
    const char* color;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<Series> series{{"arnoldi_rel_residual", "#1f77b4", {}},
                             {"true_rel_residual", "#ff7f0e", {}},
                             {"loo_frobenius", "#2ca02c", {}},
                             {"l_frobenius", "#d62728", {}},
                             {"s_norm", "#9467bd", {}}};
  auto add = [](Series& s, double k, double v) {
    if (v > 0 && std::isfinite(v)) s.pts.emplace_back(k, std::log10(v));
  };
  for (const auto& r : h.records) {
    const double k = static_cast<double>(r.k);
    add(series[0], k, r.arnoldi_rel_residual);
    add(series[1], k, r.true_rel_residual);
    add(series[2], k, r.loo_frobenius);
    add(series[3], k, r.l_frobenius);
    if (r.s_norm) add(series[4], k, *r.s_norm);
  }
  double kmax = 1, ymin = 0, ymax = 0;
  bool any = false;
  for (const auto& s : series)
    for (auto [k, y] : s.pts) {
      kmax = std::max(kmax, k);
      ymin = any ? std::min(ymin, y) : y;
      ymax = any ? std::max(ymax, y) : y;
      any = true;
    }
  ymin = std::floor(std::min(ymin, -1.0));
  ymax = std::ceil(std::max(ymax, 0.0));
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double k) { return L + (W - L - R) * (k / kmax); };
  auto py = [&](double y) { return T + (Ht - T - B) * (ymax - y) / (ymax - ymin); };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return std::string(b);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Ht
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << Ht - B << "\" x2=\"" << W - R << "\" y2=\"" << Ht - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << Ht - B << "\" stroke=\"black\"/>\n";
  const int ystep = static_cast<int>(std::max(1.0, std::ceil((ymax - ymin) / 10)));
  for (int y = static_cast<int>(ymin); y <= static_cast<int>(ymax); y += ystep)
    os << "<text x=\"" << L - 6 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">1e" << y << "</text>\n";
  const int kstep = static_cast<int>(std::max(1.0, std::ceil(kmax / 10)));
  for (int k = 0; k <= static_cast<int>(kmax); k += kstep)
    os << "<text x=\"" << num(px(k)) << "\" y=\"" << Ht - B + 18 << "\" text-anchor=\"middle\">" << k << "</text>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << Ht - 10 << "\" text-anchor=\"middle\">iteration k</text>\n";
  os << "<text x=\"16\" y=\"" << Ht / 2 << "\" transform=\"rotate(-90 16 " << Ht / 2
     << ")\" text-anchor=\"middle\">log10 value</text>\n";
  double ly = T + 10;
  for (const auto& s : series) {
    if (s.pts.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.pts.size(); ++i)
      os << (i ? " " : "") << num(px(s.pts[i].first)) << ',' << num(py(s.pts[i].second));
    os << "\"/>\n";
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << s.name << "</text>\n";
    ly += 18;
  }
  os << "</svg>\n";
  return os.str();
}

/// Solves one (problem, variant) pair.
inline RunOutcome run_one(const Matrix& a, const Vector& b, const Vector& x0, const RunManifest& m, Variant v) {
  RunOutcome o;
  o.problem = problem_label(m.problem.matrix);
  o.variant = v;
  SolverConfig cfg;
  cfg.variant = v;
  cfg.max_iter = m.max_iter;
  cfg.diag_every = m.diag_every;
  cfg.rtol = m.rtol;
  cfg.throw_on_breakdown = false;
  ReductionLedger ledger;
  std::visit(
      [&](const auto& op) {
        SolveResult r = solve(op, b, x0, cfg, ledger);
        o.final_beta = r.history.records.empty() ? backward_error(op, b, r.x) : r.history.records.back().beta;
        o.history = std::move(r.history);
      },
      a);
  o.total_reductions = ledger.total();
  o.priming_reductions = ledger.priming();
  o.finalize_reductions = ledger.finalize();
  return o;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f << content;
  if (!f) throw IoError("failed writing " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

/// Solves every variant of the manifest and writes one history file per
/// variant and format plus summary.json.
inline std::vector<RunOutcome> run(const RunManifest& m) {
  if (m.variants.empty()) throw UsageError("at least one variant is required");
  Matrix a;
  try {
    a = load_problem_matrix(m.problem.matrix, m.data_dir);
  } catch (const UnknownMatrixError& e) {
    throw UsageError(e.what());
  } catch (const ParseError& e) {
    throw IoError(e.what());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  std::pair<Vector, Vector> rhs;
  try {
    rhs = build_rhs(m.problem, a);
  } catch (const ParseError& e) {
    throw IoError(e.what());
  } catch (const DimensionError& e) {
    throw UsageError(e.what());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  const auto& [b, x0] = rhs;

  std::vector<RunOutcome> outcomes;
  if (m.parallel) {
    std::vector<std::future<RunOutcome>> jobs;
    for (Variant v : m.variants)
      jobs.push_back(std::async(std::launch::async, [&, v] { return run_one(a, b, x0, m, v); }));
    for (auto& j : jobs) outcomes.push_back(j.get());
  } else {
    for (Variant v : m.variants) outcomes.push_back(run_one(a, b, x0, m, v));
  }

  std::error_code ec;
  std::filesystem::create_directories(m.out, ec);
  if (ec) throw IoError("cannot create " + m.out.string() + ": " + ec.message());
  for (const auto& o : outcomes) {
    const std::string stem = o.problem + "_" + to_string(o.variant);
    for (Format f : m.formats) {
      switch (f) {
        case Format::csv: write_file(m.out / (stem + ".csv"), history_csv(o.history)); break;
        case Format::json: write_file(m.out / (stem + ".json"), history_json(o)); break;
        case Format::svg: write_file(m.out / (stem + ".svg"), svg_plot(o.history, o.problem + " / " + to_string(o.variant))); break;
      }
    }
  }
  write_file(m.out / "summary.json", summary_json(outcomes));
  return outcomes;
}

/// A history read back from CSV; absent optional fields are nullopt.
struct HistoryTable {
  std::string name;
  std::vector<IterationRecord> records;
};

inline HistoryTable parse_history_csv(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header) throw IoError(name + ": unexpected CSV header");
  HistoryTable t{name, {}};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto p = line.find(',', start);
      f.push_back(line.substr(start, p == std::string::npos ? std::string::npos : p - start));
      if (p == std::string::npos) break;
      start = p + 1;
    }
    auto bad = [&] { return IoError(name + ": malformed row at line " + std::to_string(lineno)); };
    if (f.size() != 10) throw bad();
    auto req = [&](const std::string& s) {
      const auto v = parse_double(s);
      if (!v) throw bad();
      return *v;
    };
    auto optv = [&](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return req(s);
    };
    IterationRecord r;
    const auto k = parse_unsigned(f[0]);
    const auto red = parse_unsigned(f[9]);
    if (!k || !red) throw bad();
    r.k = *k;
    r.arnoldi_rel_residual = req(f[1]);
    r.true_rel_residual = req(f[2]);
    r.beta = req(f[3]);
    r.loo_frobenius = req(f[4]);
    r.l_frobenius = req(f[5]);
    r.s_norm = optv(f[6]);
    r.sigma_min_v = optv(f[7]);
    r.spectral_radius_mn = optv(f[8]);
    r.reductions = *red;
    t.records.push_back(r);
  }
  return t;
}

struct CompareRow {
  std::size_t k;
  double delta_log10_residual;
  double delta_log10_loo;
};

struct Comparison {
  std::string reference;
  std::string other;
  std::vector<CompareRow> rows;
  double max_abs_delta = 0.0;
  /// First k at which the Arnoldi residual curves differ by more than a
  /// decade.
  std::optional<std::size_t> first_divergence;
};

inline double safe_log10(double v) { return std::log10(std::max(v, 1e-300)); }

/// Aligns `other` against `reference` by iteration index.
inline Comparison compare(const HistoryTable& reference, const HistoryTable& other) {
  Comparison c{reference.name, other.name, {}, 0.0, std::nullopt};
  std::size_t j = 0;
  for (const auto& r : reference.records) {
    while (j < other.records.size() && other.records[j].k < r.k) ++j;
    if (j == other.records.size()) break;
    if (other.records[j].k != r.k) continue;
    const auto& o = other.records[j];
    CompareRow row{r.k, safe_log10(o.arnoldi_rel_residual) - safe_log10(r.arnoldi_rel_residual),
                   safe_log10(o.loo_frobenius) - safe_log10(r.loo_frobenius)};
    c.max_abs_delta = std::max(c.max_abs_delta, std::abs(row.delta_log10_residual));
    if (!c.first_divergence && std::abs(row.delta_log10_residual) > 1.0) c.first_divergence = r.k;
    c.rows.push_back(row);
  }
  return c;
}

inline std::string comparison_text(const std::vector<Comparison>& cs) {
  std::ostringstream os;
  for (const auto& c : cs) {
    os << "reference: " << c.reference << "\nother: " << c.other << '\n';
    os << "k,delta_log10_arnoldi_rel_residual,delta_log10_loo_frobenius\n";
    for (const auto& r : c.rows)
      os << r.k << ',' << format_double(r.delta_log10_residual) << ',' << format_double(r.delta_log10_loo) << '\n';
    os << "max_abs_delta_log10_residual: " << format_double(c.max_abs_delta) << '\n';
    os << "first_divergence_k: " << (c.first_divergence ? std::to_string(*c.first_divergence) : std::string("none"))
       << "\n\n";
  }
  return os.str();
}

}  // namespace lowsync::harness
