#include <catch_amalgamated.hpp>
#include <filesystem>

#include "harness.hpp"

using namespace lowsync;
using namespace lowsync::harness;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p;
}

RunManifest manifest(const std::string& matrix, std::vector<Variant> variants, const std::string& dir) {
  RunManifest m;
  m.problem.matrix = matrix;
  m.problem.rhs = default_rhs(matrix);
  m.variants = std::move(variants);
  m.out = fresh_dir(dir);
  return m;
}

HistoryTable table(const RunOutcome& o) {
  return parse_history_csv(history_csv(o.history), to_string(o.variant));
}

}  // namespace

TEST_CASE("identity run writes one CSV row", "[harness]") {
  RunManifest m = manifest("identity:5", {Variant::igs2}, "lowsync_h_identity");
  m.formats = {Format::csv, Format::json, Format::svg};
  const auto out = run(m);
  REQUIRE(out.size() == 1);
  const std::string csv = read_file(m.out / "identity_5_igs2.csv");
  CHECK(csv.starts_with(std::string(csv_header) + "\n"));
  const HistoryTable t = parse_history_csv(csv, "identity");
  REQUIRE(t.records.size() == 1);
  CHECK(t.records[0].arnoldi_rel_residual <= 1e-15);
  CHECK(std::filesystem::exists(m.out / "identity_5_igs2.svg"));

  const auto js = nlohmann::json::parse(read_file(m.out / "identity_5_igs2.json"));
  CHECK(js["schema_version"] == json_schema_version);
  CHECK(js["records"].size() == 1);
  const auto summary = nlohmann::json::parse(read_file(m.out / "summary.json"));
  CHECK(summary["runs"][0]["termination"] == "breakdown");
  CHECK(summary["runs"][0]["iterations"] == 1);
}

TEST_CASE("output is byte deterministic", "[harness]") {
  RunManifest m1 = manifest("walker:40:100", {Variant::igs2, Variant::hybrid1}, "lowsync_h_det1");
  RunManifest m2 = manifest("walker:40:100", {Variant::igs2, Variant::hybrid1}, "lowsync_h_det2");
  m1.formats = m2.formats = {Format::csv, Format::json};
  m2.parallel = true;
  run(m1);
  run(m2);
  for (const char* f : {"walker_40_100_igs2.csv", "walker_40_100_hybrid1.json", "summary.json"})
    CHECK(read_file(m1.out / f) == read_file(m2.out / f));
}

TEST_CASE("CSV round trip preserves every value", "[harness]") {
  RunManifest m = manifest("walker:30:50", {Variant::mgs}, "lowsync_h_rt");
  m.diag_every = 3;
  const auto out = run(m);
  const HistoryTable t = table(out[0]);
  REQUIRE(t.records.size() == out[0].history.records.size());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& a = t.records[i];
    const auto& b = out[0].history.records[i];
    CHECK(a.k == b.k);
    CHECK(a.arnoldi_rel_residual == b.arnoldi_rel_residual);
    CHECK(a.loo_frobenius == b.loo_frobenius);
    CHECK(a.s_norm == b.s_norm);
    CHECK(a.sigma_min_v == b.sigma_min_v);
    CHECK(a.reductions == b.reductions);
  }
}

TEST_CASE("comparisons", "[harness]") {
  RunManifest w = manifest("walker", {Variant::igs2, Variant::hh}, "lowsync_h_walker");
  const auto wo = run(w);
  const Comparison same = compare(table(wo[0]), table(wo[0]));
  CHECK(same.max_abs_delta == 0.0);
  CHECK_FALSE(same.first_divergence);
  CHECK(comparison_text({same}).find("first_divergence_k: none") != std::string::npos);
  CHECK(compare(table(wo[0]), table(wo[1])).max_abs_delta <= 1.0);

  RunManifest s = manifest("simoncini", {Variant::igs2, Variant::mgs}, "lowsync_h_simoncini");
  const auto so = run(s);
  const Comparison c = compare(table(so[0]), table(so[1]));
  REQUIRE(c.first_divergence);
  CHECK(*c.first_divergence <= 80);
  const auto summary = nlohmann::json::parse(read_file(s.out / "summary.json"));
  CHECK(summary["runs"][1]["variant"] == "mgs");
  CHECK(summary["runs"][1]["s_norm_reached_one"] == true);
  CHECK(summary["runs"][1]["max_s_norm"].get<double>() == Catch::Approx(1.0).margin(0.05));
  CHECK(summary["runs"][0]["s_norm_reached_one"] == false);
}

TEST_CASE("fs1836 with mgs and igs2", "[harness]") {
  RunManifest m = manifest("fs1836", {Variant::mgs, Variant::igs2}, "lowsync_h_fs");
  m.max_iter = 50;
  m.diag_every = 50;
  const auto out = run(m);
  const auto& mgs = out[0].history.records;
  const auto& igs = out[1].history.records;
  REQUIRE(mgs.size() == 50);
  REQUIRE(igs.size() == 50);
  for (std::size_t k = 43; k <= 50; ++k) CHECK(mgs[k - 1].arnoldi_rel_residual >= 1e-8);
  for (std::size_t k = 1; k < 50; ++k) CHECK(igs[k].arnoldi_rel_residual < igs[k - 1].arnoldi_rel_residual);
}

TEST_CASE("harness errors", "[harness]") {
  CHECK_THROWS_AS(run(manifest("nonsense", {Variant::igs2}, "lowsync_h_err")), UsageError);
  CHECK_THROWS_AS(run(manifest("identity:3", {}, "lowsync_h_err")), UsageError);
  RunManifest missing = manifest("add32", {Variant::igs2}, "lowsync_h_err");
  missing.data_dir = "/nonexistent";
  CHECK_THROWS_AS(run(missing), IoError);
  CHECK_THROWS_AS(parse_history_csv("k,wrong\n", "x"), IoError);
  CHECK_THROWS_AS(parse_history_csv(std::string(csv_header) + "\n1,2\n", "x"), IoError);
  CHECK_THROWS_AS(parse_history_csv(std::string(csv_header) + "\n1,a,1,1,1,1,,,,3\n", "x"), IoError);
  CHECK(problem_label("/a/b/west0132.mtx") == "west0132");
  CHECK(problem_label("walker:10:2") == "walker_10_2");
}
