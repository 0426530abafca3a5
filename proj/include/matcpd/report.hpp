#pragma once

// Command layer behind the CLI.  Each command resolves a RunConfig, executes,
// and returns a JSON report whose key order is canonical (alphabetical), so a
// rerun with the same config and seed is byte-identical apart from the
// wall-clock field.  Auxiliary CSVs (CUSUM curves, bench grids) are written
// next to the report when an output path is given.

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matcpd/core.hpp"

namespace matcpd {

struct RunConfig {
  std::string command;  // detect|segment|simulate|bench-size|bench-power|bench-estimate
  std::string input;    // long CSV (detect/segment) or scenario JSON (simulate)
  std::string out;      // report path ("" = stdout only); simulate: data CSV path

  std::optional<Eigen::Index> nu;  // absent = command-dependent default
  int B = 400;
  double alpha = 0.05;
  double gamma = 0.5;
  std::vector<NormSpec> norms = adaptive_norms();
  bool dependent = false;
  std::optional<double> bandwidth;  // absent = auto (dependent scheme only)
  std::uint64_t seed = 1;
  bool seed_given = false;  // simulate: an explicit seed overrides the scenario's
  int threads = 1;
  bool mad = true;
  Eigen::Index cluster_distance = 1;

  // Bench-only knobs.
  int reps = 500;
  bool paper_scale = false;  // R=1000, B=400
  Eigen::Index n = 250;
  Eigen::Index p1 = 5, p2 = 10;
  std::vector<std::string> covariances;  // cov1..cov4; command default if empty
  double ar1_rho = 0.0;                  // noise autocorrelation (bench-size)
  std::optional<Eigen::Index> u;         // change epoch (bench-power)
  std::vector<std::string> scenarios;    // power/estimate scenario filter
  std::optional<double> magnitude;       // bench-estimate shift size
  std::vector<Eigen::Index> change_points;  // bench-estimate truth
};

// Executes cfg.command and returns the full report.  Auxiliary CSV side
// effects happen here; the caller only prints or stores the JSON.
nlohmann::json run_command(const RunConfig& cfg);

// Canonical serialization: 2-space indent, sorted keys, trailing newline.
std::string dump_report(const nlohmann::json& report);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace matcpd
