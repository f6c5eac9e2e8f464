#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "nami/commands.hpp"
#include "nami/config.hpp"
#include "nami/csv.hpp"
#include "nami/error.hpp"
#include "nami/inference.hpp"

using namespace nami;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = NAMI_SOURCE_DIR;
const fs::path kAnorexia = kSource / "configs" / "anorexia.json";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nami_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NAMI_CLI_PATH) + " " + args + " 2>/dev/null >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p) { return json::parse(read_text(p)); }

void write_json(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(2)); }

}  // namespace

TEST_CASE("csv round trip preserves doubles") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  CsvTable t;
  t.header = {"a", "b,with comma", "c \"quoted\""};
  std::vector<std::vector<double>> values;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> row{n01(rng) * 1e6, std::exp(20 * n01(rng)), n01(rng) * 1e-9};
    values.push_back(row);
    t.rows.push_back({format_double(row[0]), format_double(row[1]), format_double(row[2])});
  }
  const fs::path dir = scratch("csv");
  write_file_atomic(dir / "t.csv", format_csv(t));
  const CsvTable back = read_csv(dir / "t.csv");
  CHECK(back.header == t.header);
  REQUIRE(back.rows.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double v = 0.0;
      REQUIRE(parse_double(back.rows[i][j], v));
      CHECK(std::abs(v - values[i][j]) <= 1e-12 * std::max(1.0, std::abs(values[i][j])));
      CHECK(v == values[i][j]);
    }

  write_gzip_atomic(dir / "t.csv.gz", format_csv(t));
  CHECK(read_gzip(dir / "t.csv.gz") == format_csv(t));
}

TEST_CASE("csv parsing details") {
  const CsvTable t = parse_csv("\xEF\xBB\xBFx,\"y\"\r\n1,\"a \"\"b\"\"\"\r\n\r\n2,\"line\nbreak\"\r\n");
  CHECK(t.header == std::vector<std::string>{"x", "y"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "a \"b\"");
  CHECK(t.rows[1][1] == "line\nbreak");
  CHECK(t.column("y") == 1);
  CHECK(t.column("z") == -1);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), InputError);
  double v = 0.0;
  CHECK_FALSE(parse_double("1.5x", v));
  CHECK_FALSE(parse_double("", v));
  CHECK(parse_double("-2.5e-3", v));
  CHECK(v == -2.5e-3);
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("analysis configs reject unknown keys and fill defaults") {
  json j = read_json(kAnorexia);
  const AnalysisConfig c = analysis_config_from_json(j, kAnorexia.parent_path());
  CHECK(fs::path(c.data_path).is_absolute());
  CHECK(c.outcome.basis == BasisKind::linear);
  CHECK(c.options.multiplicity == Multiplicity::max_t);

  json bad = j;
  bad["colour"] = "red";
  CHECK_THROWS_AS(analysis_config_from_json(bad), ConfigError);
  json bad_schema = j;
  bad_schema["schema"] = "nami-analysis/9";
  CHECK_THROWS_AS(analysis_config_from_json(bad_schema), ConfigError);

  json surv = j;
  surv["outcome"] = {{"name", "t"}, {"type", "survival"}, {"time", "time"}, {"event", "status"}};
  const AnalysisConfig s = analysis_config_from_json(surv, kAnorexia.parent_path());
  CHECK(s.outcome.basis == BasisKind::bernstein);
  CHECK(s.outcome.log_scale);
  CHECK(s.outcome.link == LinkKind::cloglog);

  json ord = j;
  ord["outcome"] = {{"name", "grade"}, {"type", "ordinal"}, {"levels", {"low", "mid", "high"}}};
  const AnalysisConfig o = analysis_config_from_json(ord, kAnorexia.parent_path());
  CHECK(o.outcome.basis == BasisKind::step);
  CHECK(o.outcome.link == LinkKind::logit);
}

TEST_CASE("datasets name the missing column") {
  const AnalysisConfig c = load_analysis_config(kAnorexia);
  CsvTable t = read_csv(c.data_path);
  const Dataset ds = load_dataset(c, t);
  CHECK(ds.data.rows() == 72);
  CHECK(ds.arm_labels == std::vector<std::string>{"Cont", "CBT", "FT"});
  t.header[3] = "Post";
  try {
    load_dataset(c, t);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("Postwt") != std::string::npos);
    CHECK(std::string(e.what()).find("Post") != std::string::npos);
  }
}

TEST_CASE("anorexia fit through the library") {
  const AnalysisConfig c = load_analysis_config(kAnorexia);
  const json r = run_analysis(c);
  REQUIRE(r["convergence"]["converged"].get<bool>());
  const auto& te = r["treatment_effects"];
  CHECK(te[0]["estimate"].get<double>() == doctest::Approx(0.64).epsilon(0.02 / 0.64));
  CHECK(te[1]["estimate"].get<double>() == doctest::Approx(1.24).epsilon(0.02 / 1.24));
  CHECK(r["prognostic"][0]["p_adjusted"].get<double>() > 0.05);
  for (const auto& arm : r["predictive"]) CHECK(arm["tests"][0]["p_adjusted"].get<double>() < 0.05);
}

TEST_CASE("an empty covariate list reproduces the marginal fit exactly") {
  AnalysisConfig c = load_analysis_config(kAnorexia);
  c.covariates.clear();
  const json r = run_analysis(c);
  const Dataset ds = load_dataset(c, read_csv(c.data_path));
  const MarginalFit mi = fit_marginal(ds.spec.marginals.back(), ds.data.observations(0));
  CHECK(r["treatment_effects"][0]["estimate"].get<double>() == mi.model.tau[0]);
  CHECK(r["treatment_effects"][1]["estimate"].get<double>() == mi.model.tau[1]);
  CHECK(r["treatment_effects"][0]["se"].get<double>() == mi.tau_se(0));
}

TEST_CASE("warm start from fit.json reaches the same optimum") {
  const fs::path a = scratch("warm_a"), b = scratch("warm_b");
  CHECK(run_cli("fit --config " + kAnorexia.string() + " --out " + a.string()) == 0);
  CHECK(run_cli("fit --config " + kAnorexia.string() + " --out " + b.string() + " --init " +
                (a / "fit.json").string()) == 0);
  const json ja = read_json(a / "fit.json"), jb = read_json(b / "fit.json");
  CHECK(std::abs(ja["loglik"].get<double>() - jb["loglik"].get<double>()) <= 1e-8);
  CHECK(fs::exists(a / "fit_summary.csv"));
}

TEST_CASE("rerunning from the echoed config is bit identical") {
  const fs::path a = scratch("echo_a"), b = scratch("echo_b");
  CHECK(run_cli("fit --config " + kAnorexia.string() + " --out " + a.string()) == 0);
  const json first = read_json(a / "fit.json");
  write_json(b / "config.json", first["config"]);
  CHECK(run_cli("fit --config " + (b / "config.json").string() + " --out " + b.string()) == 0);
  CHECK(read_text(a / "fit.json") == read_text(b / "fit.json"));
  CHECK(read_text(a / "fit_summary.csv") == read_text(b / "fit_summary.csv"));
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(run_cli("version") == 0);
  CHECK(run_cli("fit") == 2);
  CHECK(run_cli("fit --config " + (dir / "missing.json").string()) == 2);

  json bad = read_json(kAnorexia);
  bad["data"] = (kSource / "data" / "anorexia.csv").string();
  bad["treatment"]["column"] = "Trt";
  write_json(dir / "bad.json", bad);
  CHECK(run_cli("fit --config " + (dir / "bad.json").string() + " --out " + dir.string()) == 2);

  // A constant outcome has no information about its transformation.
  CsvTable t = read_csv(kSource / "data" / "anorexia.csv");
  for (auto& row : t.rows) row[3] = "80";
  write_file_atomic(dir / "const.csv", format_csv(t));
  json flat = read_json(kAnorexia);
  flat["data"] = (dir / "const.csv").string();
  write_json(dir / "const.json", flat);
  CHECK(run_cli("fit --config " + (dir / "const.json").string() + " --out " + dir.string()) == 3);

  json sim{{"schema", kSimSchema}, {"replications", 0}};
  write_json(dir / "sim.json", sim);
  CHECK(run_cli("simulate --config " + (dir / "sim.json").string() + " --out " + dir.string()) == 2);
}

TEST_CASE("theory grid rows") {
  const fs::path dir = scratch("theory");
  json grid{{"schema", kTheorySchema},
            {"tau", {0.5}},
            {"lambda", {{"from", -1.0}, {"to", 1.0}, {"by", 0.25}}},
            {"gamma", {-1.0, 0.0, 0.5, 1.0}},
            {"n_per_arm", 41}};
  write_json(dir / "grid.json", grid);
  TheoryCommand cmd;
  cmd.config = dir / "grid.json";
  cmd.out = dir;
  std::ostringstream err;
  REQUIRE(cmd_theory(cmd, err) == 0);
  const CsvTable t = read_csv(dir / "theory.csv");
  CHECK(t.rows.size() == 9u * 4u);
  auto col = [&](const std::vector<std::string>& row, const char* name) {
    double v = 0.0;
    REQUIRE(parse_double(row[static_cast<std::size_t>(t.column(name))], v));
    return v;
  };
  int worst = 0, prog = 0, null = 0;
  for (const auto& row : t.rows) {
    const double l = col(row, "lambda"), g = col(row, "gamma");
    if (l == -g / 2) {
      ++worst;
      CHECK(col(row, "ratio") == doctest::Approx(1.0).epsilon(1e-14));
    }
    if (l == 0.25 && g == 0.0) {
      ++prog;
      CHECK(col(row, "rho0") == doctest::Approx(-0.2425).epsilon(1e-3));
      CHECK(col(row, "rho1") == col(row, "rho0"));
    }
    if (l == 0.0 && g == 0.0) {
      ++null;
      CHECK(col(row, "se_adjusted") == se_lemma1(0.5, 41));
      CHECK(col(row, "se_unadjusted") == se_lemma1(0.5, 41));
    }
    CHECK(col(row, "se_adjusted") <= col(row, "se_unadjusted") * (1 + 1e-15));
  }
  CHECK(worst == 4);
  CHECK(prog == 1);
  CHECK(null == 1);
  CHECK(read_json(dir / "theory_config.json")["n_per_arm"] == 41);
}

TEST_CASE("simulate with one replication writes one record per cell") {
  const fs::path dir = scratch("simulate");
  json sim{{"schema", kSimSchema},
           {"outcomes", {"continuous", "binary"}},
           {"tau", {0.0, 0.5}},
           {"gamma", {0.0}},
           {"replications", 1},
           {"max_t_draws", 2000}};
  write_json(dir / "sim.json", sim);
  CHECK(run_cli("simulate --config " + (dir / "sim.json").string() + " --out " + dir.string() + " --seed 5") == 0);
  const CsvTable rec = parse_csv(read_gzip(dir / "sim_replications.csv.gz"));
  CHECK(rec.rows.size() == 4);
  const CsvTable sum = read_csv(dir / "sim_summary.csv");
  // One row per outcome, model, tau and gamma.
  CHECK(sum.rows.size() == 8);
  const json echo = read_json(dir / "sim_config.json");
  CHECK(echo["seed"] == 5);
  CHECK(echo["replications"] == 1);

  // The echoed config reproduces the run.
  const fs::path again = scratch("simulate_again");
  CHECK(run_cli("simulate --config " + (dir / "sim_config.json").string() + " --out " + again.string()) == 0);
  CHECK(read_text(dir / "sim_summary.csv") == read_text(again / "sim_summary.csv"));
  CHECK(read_gzip(dir / "sim_replications.csv.gz") == read_gzip(again / "sim_replications.csv.gz"));
}

TEST_CASE("study configs expand into seeded cells") {
  json j{{"schema", kSimSchema}, {"outcomes", {"survival"}}, {"tau", {0.0, 0.5}}, {"gamma", {0.0, 0.25}}};
  const SimStudyConfig s = sim_config_from_json(j);
  const auto cells = s.cells();
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].n_per_arm == 131);
  CHECK(cells[0].seed != cells[1].seed);
  CHECK(cells[3].tau == 0.5);
  CHECK(cells[3].gamma == 0.25);
  CHECK(sim_config_from_json(to_json(s)).cells()[2].seed == cells[2].seed);
  CHECK(value_range(0.0, 1.0, 0.25).size() == 5);
}
