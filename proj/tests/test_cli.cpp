#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "matcpd/bench.hpp"
#include "matcpd/ingest.hpp"
#include "matcpd/report.hpp"
#include "matcpd/scenario_json.hpp"
#include "matcpd/simulate.hpp"
#include "schema_check.hpp"

using namespace matcpd;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string temp_name(const std::string& tag) {
  static int counter = 0;
  return "/tmp/matcpd_test_" + tag + "_" + std::to_string(counter++);
}

struct CliResult {
  int code = -1;
  std::string out, err;
};

// Paths are baked in at configure time; the environment can override them.
const char* env_or(const char* var, const char* fallback) {
  const char* v = std::getenv(var);
  return v != nullptr ? v : fallback;
}

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const char* bin = env_or("MATCPD_BIN", MATCPD_BIN);
  const std::string base = temp_name("cli");
  const std::string cmd = env_prefix + "\"" + bin + "\" " + args + " > " + base +
                          ".out 2> " + base + ".err";
  const int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(base + ".out");
  r.err = slurp(base + ".err");
  std::remove((base + ".out").c_str());
  std::remove((base + ".err").c_str());
  return r;
}

json normalized(json j) {
  j["wall_clock_sec"] = 0.0;
  return j;
}

schema_check::Validator load_validator() {
  const char* dir = env_or("MATCPD_SCHEMA_DIR", MATCPD_SCHEMA_DIR);
  return schema_check::Validator(
      json::parse(slurp(std::string(dir) + "/report.schema.json")));
}

void check_schema(const json& report) {
  static schema_check::Validator validator = load_validator();
  std::string why;
  const bool ok = validator.validate(report, &why);
  INFO("schema violation: " << why);
  CHECK(ok);
}

std::string fixture(const char* name) {
  return std::string(env_or("MATCPD_DATA_DIR", MATCPD_DATA_DIR)) + "/" + name;
}

const char* kTinyCsv = "t,i,j,x\n1,1,1,1\n1,1,2,2\n2,1,1,3\n2,1,2,4\n";

}  // namespace

TEST_CASE("long CSV hand example") {
  const MatrixSeriesXd x = parse_long_csv(kTinyCsv, "tiny");
  CHECK(x.n() == 2);
  CHECK(x.p1() == 1);
  CHECK(x.p2() == 2);
  CHECK(x.obs(1)(0, 0) == 1.0);
  CHECK(x.obs(1)(0, 1) == 2.0);
  CHECK(x.obs(2)(0, 0) == 3.0);
  CHECK(x.obs(2)(0, 1) == 4.0);
}

TEST_CASE("long CSV accepts CRLF and blank lines") {
  const MatrixSeriesXd unix_style = parse_long_csv(kTinyCsv, "a");
  const MatrixSeriesXd dos_style = parse_long_csv(
      "t,i,j,x\r\n1,1,1,1\r\n1,1,2,2\r\n2,1,1,3\r\n2,1,2,4\r\n\r\n", "b");
  CHECK(unix_style.flat() == dos_style.flat());
}

TEST_CASE("long CSV structural errors") {
  auto code_of = [](const std::string& text) {
    try {
      parse_long_csv(text, "x");
    } catch (const Error& e) {
      return e.code();
    }
    return errc::internal;
  };
  auto message_of = [](const std::string& text) -> std::string {
    try {
      parse_long_csv(text, "x");
    } catch (const Error& e) {
      return e.what();
    }
    return "";
  };

  // missing cell names the absent key
  const char* missing = "t,i,j,x\n1,1,1,1\n1,1,2,2\n2,1,1,3\n";
  CHECK(code_of(missing) == errc::schema);
  CHECK(message_of(missing).find("(t=2,i=1,j=2)") != std::string::npos);

  const char* dup = "t,i,j,x\n1,1,1,1\n1,1,2,2\n2,1,1,3\n2,1,2,4\n1,1,1,9\n";
  CHECK(code_of(dup) == errc::schema);
  CHECK(message_of(dup).find("duplicate cell (t=1,i=1,j=1)") != std::string::npos);
  CHECK(message_of(dup).find("line 6") != std::string::npos);

  CHECK(code_of("a,b,c\n1,1,1,1\n") == errc::schema);
  CHECK(message_of("a,b,c\n1,1,1,1\n").find("expected header") != std::string::npos);

  const char* badnum = "t,i,j,x\n1,1,1,1\n1,1,2,abc\n";
  CHECK(code_of(badnum) == errc::invalid_data);
  CHECK(message_of(badnum).find("line 3") != std::string::npos);
  CHECK(message_of(badnum).find("invalid x") != std::string::npos);

  CHECK(code_of("t,i,j,x\n0,1,1,5\n") == errc::invalid_data);
  CHECK(code_of("t,i,j,x\n1,1,5\n") == errc::invalid_data);
  CHECK(code_of("t,i,j,x\n1,1,1,1,9\n") == errc::invalid_data);
  CHECK(code_of("") == errc::invalid_data);
  CHECK(code_of("t,i,j,x\n") == errc::invalid_data);
  CHECK(code_of("t,i,j,x\n1,1,1,inf\n") == errc::invalid_data);
}

TEST_CASE("CSV round-trip preserves doubles bitwise") {
  ScenarioSpec spec;
  spec.p1 = 3;
  spec.p2 = 4;
  spec.n = 12;
  spec.cov = CovarianceSpec::banded();
  spec.seed = 31;
  const MatrixSeriesXd x = generate_series(spec);
  const MatrixSeriesXd back = parse_long_csv(format_long_csv(x), "mem");
  CHECK(x.flat() == back.flat());

  const std::string path = temp_name("roundtrip") + ".csv";
  write_long_csv(path, x);
  const MatrixSeriesXd from_disk = read_long_csv(path);
  CHECK(x.flat() == from_disk.flat());
  std::remove(path.c_str());
}

TEST_CASE("bench margin defaults") {
  CHECK(default_bench_nu("bench-size", 250) == 60);
  CHECK(default_bench_nu("bench-size", 500) == 80);
  CHECK(default_bench_nu("bench-power", 250) == 60);
  CHECK(default_bench_nu("bench-estimate", 250) == 40);
  CHECK(default_bench_nu("bench-size", 100) == 20);
  CHECK(default_bench_nu("bench-estimate", 100) == 20);
}

namespace {

// simulate -> detect round trip through run_command with a scenario file.
// Paths are keyed by tag, not run, so repeated invocations echo identical
// configs.
json detect_report(const std::string& scenario_json, std::uint64_t detect_seed,
                   int threads = 1, const std::string& out = "",
                   const std::string& tag = "fixed") {
  const std::string spath = "/tmp/matcpd_scn_" + tag + ".json";
  const std::string dpath = "/tmp/matcpd_ser_" + tag + ".csv";
  spit(spath, scenario_json);

  RunConfig sim;
  sim.command = "simulate";
  sim.input = spath;
  sim.out = dpath;
  run_command(sim);

  RunConfig det;
  det.command = "detect";
  det.input = dpath;
  det.B = 200;
  det.seed = detect_seed;
  det.threads = threads;
  det.out = out;
  json report = run_command(det);
  std::remove(spath.c_str());
  std::remove(dpath.c_str());
  return report;
}

const char* kShiftScenario = R"({
  "p1": 4, "p2": 5, "n": 80, "seed": 55,
  "covariance": {"kind": "identity"},
  "changes": [{"epoch": 25, "shift": {"kind": "one_mode", "cells": 5, "magnitude": 2.5}}]
})";

const char* kNullScenario = R"({
  "p1": 3, "p2": 3, "n": 60, "seed": 101,
  "covariance": {"kind": "identity"}
})";

}  // namespace

TEST_CASE("detect finds an injected shift through the full pipeline") {
  const std::string out = temp_name("detect") + ".json";
  const json report = detect_report(kShiftScenario, 11, 1, out);
  CHECK(report["results"]["verdict"] == "reject");
  const auto epoch = report["results"]["estimated_epoch"].get<long>();
  CHECK(std::abs(epoch - 25) <= 2);
  CHECK(report["config"]["nu"] == 16);  // floor(80 / 5)
  CHECK(report["results"]["data"]["n"] == 80);
  check_schema(report);

  // --out writes the same report (modulo wall clock) and the CUSUM table.
  const json from_disk = json::parse(slurp(out));
  CHECK(normalized(from_disk) == normalized(report));
  const std::string cusum = report["results"]["cusum_csv"].get<std::string>();
  std::istringstream rows(slurp(cusum));
  std::string line;
  std::getline(rows, line);
  CHECK(line == "epoch,mode1,mode2,dot,max");
  int count = 0;
  while (std::getline(rows, line))
    if (!line.empty()) ++count;
  CHECK(count == 80 - 2 * 16 + 1);
  std::remove(out.c_str());
  std::remove(cusum.c_str());
}

TEST_CASE("detect on null data fails to reject at the fixed seed") {
  const json report = detect_report(kNullScenario, 7);
  CHECK(report["results"]["verdict"] == "fail-to-reject");
  CHECK(!report["results"].contains("estimated_epoch"));
  check_schema(report);
}

TEST_CASE("reports are identical across reruns and thread counts") {
  const json a = detect_report(kShiftScenario, 11, 1);
  const json b = detect_report(kShiftScenario, 11, 1);
  const json c = detect_report(kShiftScenario, 11, 4);
  CHECK(normalized(a) == normalized(b));
  CHECK(normalized(a) == normalized(c));
}

TEST_CASE("single-norm detect reports one test") {
  const std::string spath = temp_name("scenario") + ".json";
  const std::string dpath = temp_name("series") + ".csv";
  spit(spath, kShiftScenario);
  RunConfig sim;
  sim.command = "simulate";
  sim.input = spath;
  sim.out = dpath;
  run_command(sim);

  RunConfig det;
  det.command = "detect";
  det.input = dpath;
  det.B = 100;
  det.seed = 3;
  det.norms = {NormSpec::mode1()};
  const json report = run_command(det);
  CHECK(report["results"]["per_norm"].size() == 1);
  CHECK(!report["results"].contains("adaptive"));
  CHECK(report["results"]["verdict"] == "reject");
  check_schema(report);
  std::remove(spath.c_str());
  std::remove(dpath.c_str());
}

TEST_CASE("segment recovers two shifts through the report pipeline") {
  const std::string spath = temp_name("scenario") + ".json";
  const std::string dpath = temp_name("series") + ".csv";
  spit(spath, R"({
    "p1": 2, "p2": 3, "n": 120, "seed": 78,
    "covariance": {"kind": "identity"},
    "changes": [
      {"epoch": 40, "shift": {"kind": "one_mode", "cells": 3, "magnitude": 2.5}},
      {"epoch": 80, "shift": {"kind": "block", "side": 1, "row": 2, "col": 2, "magnitude": -3.0}}
    ]
  })");
  RunConfig sim;
  sim.command = "simulate";
  sim.input = spath;
  sim.out = dpath;
  run_command(sim);

  RunConfig segc;
  segc.command = "segment";
  segc.input = dpath;
  segc.B = 100;
  segc.alpha = 0.01;
  segc.seed = 5;
  const json report = run_command(segc);
  const auto& cps = report["results"]["change_points"];
  REQUIRE(cps.size() == 2);
  CHECK(std::abs(cps[0].get<long>() - 40) <= 2);
  CHECK(std::abs(cps[1].get<long>() - 80) <= 2);
  CHECK(report["results"]["segment_means"].size() == 3);
  CHECK(report["results"]["nodes"][0]["tested"] == true);
  check_schema(report);
  std::remove(spath.c_str());
  std::remove(dpath.c_str());
}

TEST_CASE("constant components are counted after rescaling") {
  std::string csv = "t,i,j,x\n";
  for (int t = 1; t <= 30; ++t) {
    csv += std::to_string(t) + ",1,1,5\n";  // constant cell
    csv += std::to_string(t) + ",1,2," + std::to_string(t % 7) + ".5\n";
    csv += std::to_string(t) + ",2,1," + std::to_string((t * 3) % 11) + "\n";
    csv += std::to_string(t) + ",2,2," + std::to_string((t * 5) % 13) + "\n";
  }
  const std::string dpath = temp_name("const") + ".csv";
  spit(dpath, csv);
  RunConfig det;
  det.command = "detect";
  det.input = dpath;
  det.B = 50;
  const json report = run_command(det);
  CHECK(report["results"]["data"]["zero_scale_components"] == 1);
  check_schema(report);
  std::remove(dpath.c_str());
}

TEST_CASE("bench commands emit schema-conformant reports at smoke scale") {
  RunConfig size;
  size.command = "bench-size";
  size.reps = 2;
  size.B = 20;
  size.n = 60;
  size.p1 = 2;
  size.p2 = 2;
  size.nu = 12;
  size.seed = 3;
  size.covariances = {"cov1", "cov3"};
  const json size_report = run_command(size);
  CHECK(size_report["results"]["cells"].size() == 2);
  check_schema(size_report);

  RunConfig power;
  power.command = "bench-power";
  power.reps = 2;
  power.B = 20;
  power.n = 60;
  power.p1 = 4;
  power.p2 = 5;
  power.nu = 12;
  power.seed = 3;
  power.scenarios = {"10-1mode"};
  const json power_report = run_command(power);
  REQUIRE(power_report["results"]["scenarios"].size() == 1);
  CHECK(power_report["results"]["scenarios"][0]["points"].size() == 6);
  CHECK(power_report["results"]["u"] == 30);
  check_schema(power_report);

  RunConfig est;
  est.command = "bench-estimate";
  est.reps = 2;
  est.B = 30;
  est.n = 80;
  est.p1 = 4;
  est.p2 = 5;
  est.seed = 3;
  est.scenarios = {"10-1mode"};
  est.magnitude = 1.5;
  est.change_points = {20, 40, 60};
  const json est_report = run_command(est);
  CHECK(est_report["results"]["true_change_points"].size() == 3);
  check_schema(est_report);
}

TEST_CASE("run_command validates configuration") {
  auto code_of = [](const RunConfig& cfg) {
    try {
      run_command(cfg);
    } catch (const Error& e) {
      return e.code();
    }
    return errc::internal;
  };

  RunConfig cfg;
  cfg.command = "detect";
  CHECK(code_of(cfg) == errc::boundary);  // no input

  cfg.input = "/tmp/matcpd_does_not_exist.csv";
  CHECK(code_of(cfg) == errc::invalid_data);

  const std::string dpath = temp_name("tiny") + ".csv";
  spit(dpath, kTinyCsv);
  cfg.input = dpath;
  cfg.nu = 1;  // n = 2 leaves no interior epochs
  CHECK(code_of(cfg) == errc::boundary);
  std::remove(dpath.c_str());

  RunConfig sim;
  sim.command = "simulate";
  sim.input = "/tmp/whatever.json";
  CHECK(code_of(sim) == errc::boundary);  // --out required

  RunConfig bench;
  bench.command = "bench-size";
  bench.covariances = {"cov9"};
  bench.reps = 1;
  bench.n = 60;
  bench.p1 = 2;
  bench.p2 = 2;
  CHECK(code_of(bench) == errc::boundary);

  RunConfig power;
  power.command = "bench-power";
  power.reps = 1;
  power.n = 60;
  power.p1 = 4;
  power.p2 = 5;
  power.u = 5;  // inside the excluded margin
  CHECK(code_of(power) == errc::boundary);

  power.u = 30;
  power.scenarios = {"no-such-scenario"};
  CHECK(code_of(power) == errc::boundary);
}

// ---------------------------------------------------------------------------
// The installed binary

TEST_CASE("binary: detect on the shipped fixture") {
  const CliResult r =
      run_cli("detect " + fixture("example_series.csv") + " --B 100 --seed 4");
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  CHECK(report["command"] == "detect");
  CHECK(report["results"]["verdict"] == "reject");
  CHECK(std::abs(report["results"]["estimated_epoch"].get<long>() - 30) <= 2);
  check_schema(report);
}

TEST_CASE("binary: byte-identical reruns modulo wall clock") {
  const std::string args =
      "detect " + fixture("example_series.csv") + " --B 60 --seed 9";
  const CliResult a = run_cli(args);
  const CliResult b = run_cli(args);
  const CliResult c = run_cli(args + " --threads 8");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  REQUIRE(c.code == 0);
  auto canon = [](const CliResult& r) {
    json j = json::parse(r.out);
    j["wall_clock_sec"] = 0.0;
    return j.dump();
  };
  CHECK(canon(a) == canon(b));
  CHECK(canon(a) == canon(c));
}

TEST_CASE("binary: seed environment fallback and flag precedence") {
  const std::string args = "detect " + fixture("example_series.csv") + " --B 20";
  const CliResult env_only = run_cli(args, "MATCPD_SEED=42 ");
  REQUIRE(env_only.code == 0);
  CHECK(json::parse(env_only.out)["seed"] == 42);

  const CliResult flag_wins = run_cli(args + " --seed 7", "MATCPD_SEED=42 ");
  REQUIRE(flag_wins.code == 0);
  CHECK(json::parse(flag_wins.out)["seed"] == 7);
}

TEST_CASE("binary: simulate honors the seed override") {
  const std::string out = temp_name("simdata") + ".csv";
  const CliResult r = run_cli("simulate " + fixture("example_scenario.json") +
                              " --seed 5 --out " + out);
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  CHECK(report["config"]["scenario"]["seed"] == 5);
  check_schema(report);

  ScenarioSpec spec = load_scenario(fixture("example_scenario.json"));
  spec.seed = 5;
  const MatrixSeriesXd expect = generate_series(spec);
  const MatrixSeriesXd got = read_long_csv(out);
  CHECK(expect.flat() == got.flat());
  std::remove(out.c_str());
}

TEST_CASE("binary: shipped fixture matches its scenario") {
  const MatrixSeriesXd fixture_series = read_long_csv(fixture("example_series.csv"));
  const MatrixSeriesXd regen =
      generate_series(load_scenario(fixture("example_scenario.json")));
  CHECK(fixture_series.flat() == regen.flat());
}

TEST_CASE("binary: structured exit codes") {
  CHECK(run_cli("detect /tmp/matcpd_missing_file.csv").code == 3);

  const std::string bad = temp_name("badcsv") + ".csv";
  spit(bad, "t,i,j,x\n1,1,1,1\n2,1,1,3\n1,1,2,2\n");  // (2,1,2) missing
  CHECK(run_cli("detect " + bad).code == 2);
  std::remove(bad.c_str());

  CHECK(run_cli("bench-size --reps 1 --n 40 --p1 2 --p2 2 --cov cov9").code == 2);
  CHECK(run_cli("detect " + fixture("example_series.csv") +
                " --dependent --bandwidth nonsense --B 10")
            .code == 2);
  CHECK(run_cli("detect " + fixture("example_series.csv") + " --alpha 1.5").code != 0);
  CHECK(run_cli("").code != 0);  // a subcommand is required

  const CliResult err = run_cli("detect /tmp/matcpd_missing_file.csv");
  const json msg = json::parse(err.err);
  CHECK(msg["error"]["code"] == "invalid_data");
}

TEST_CASE("binary: bench-size single-replication smoke run") {
  const std::string out = temp_name("bsize") + ".json";
  const CliResult r = run_cli(
      "bench-size --reps 1 --n 60 --p1 2 --p2 2 --nu 12 --B 20 --seed 3 "
      "--cov cov1 --out " +
      out);
  REQUIRE(r.code == 0);
  const json report = json::parse(slurp(out));
  check_schema(report);
  CHECK(report["config"]["replications"] == 1);
  CHECK(report["config"]["bootstrap_replicates"] == 20);
  const json& cell = report["results"]["cells"][0];
  for (const char* key : {"rate_adapt", "rate_adapt_low_cost", "rate_mode1", "rate_mode2"}) {
    const double rate = cell[key].get<double>();
    CHECK((rate == 0.0 || rate == 1.0));
  }
  const std::string table = slurp(report["results"]["table_csv"].get<std::string>());
  CHECK(table.rfind("cov,rate_adapt,rate_adapt_low_cost,rate_mode1,rate_mode2,mc_se_adapt\n",
                    0) == 0);
  std::remove(out.c_str());
  std::remove(report["results"]["table_csv"].get<std::string>().c_str());
}

TEST_CASE("binary: default B is 400 for detect and 200 for bench") {
  const CliResult det =
      run_cli("detect " + fixture("example_series.csv") + " --seed 2");
  REQUIRE(det.code == 0);
  CHECK(json::parse(det.out)["config"]["bootstrap_replicates"] == 400);

  const CliResult bench = run_cli(
      "bench-size --reps 1 --n 40 --p1 2 --p2 2 --nu 8 --seed 2 --cov cov1");
  REQUIRE(bench.code == 0);
  CHECK(json::parse(bench.out)["config"]["bootstrap_replicates"] == 200);
}

TEST_CASE("binary: zero-magnitude estimation bench finds no change points") {
  const CliResult r = run_cli(
      "bench-estimate --reps 6 --n 80 --p1 4 --p2 5 --B 40 --seed 9 "
      "--scenario 10-1mode --magnitude 0 --cps 20,40,60");
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  check_schema(report);
  const json& hist = report["results"]["count_histogram"];
  int zero = hist.contains("0") ? hist["0"].get<int>() : 0;
  int others = 0;
  for (const auto& [key, v] : hist.items())
    if (key != "0") others += v.get<int>();
  CHECK(zero > others);
  CHECK(report["results"]["correct_rate"].get<double>() <= 0.2);
}
