#pragma once

#include <map>
#include <string>
#include <vector>

#include "matcpd/simulate.hpp"
#include "matcpd/testing.hpp"

// Replicated simulation studies: empirical size, power against shift
// magnitude, and multiple change point recovery.  Replication r of a study
// cell derives its data and bootstrap seeds from (cell stream, r), so every
// number is reproducible for any thread count; power study cells share one
// stream (common random numbers across the magnitude grid).

namespace matcpd {

struct BenchCommon {
  Eigen::Index n = 250;
  Eigen::Index p1 = 5, p2 = 10;
  Eigen::Index nu = 60;
  int B = 200;
  int R = 500;
  double alpha = 0.05;
  double gamma = 0.5;
  bool mad = true;
  MultiplierScheme scheme;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Monte Carlo standard error of a rejection rate.
inline double mc_se(double rate, int reps) {
  return std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps));
}

struct SizeCellResult {
  std::string cov_name;
  double rate_adapt = 0.0;     // parallel variant
  double rate_adapt_lc = 0.0;  // low-cost variant
  double rate_mode1 = 0.0;
  double rate_mode2 = 0.0;
  std::vector<double> p_ad;    // per-replication adaptive p-values (parallel)
  std::vector<double> p_ad_lc;
};

SizeCellResult run_size_cell(const BenchCommon& bc, const CovarianceSpec& cov,
                             const std::string& cov_name, double ar1_rho = 0.0);

struct PowerPoint {
  double magnitude = 0.0;
  double rate_adapt = 0.0;
  double rate_mode1 = 0.0;
  double rate_mode2 = 0.0;
};

struct PowerScenario {
  std::string name;
  ShiftSpec shape;           // magnitude field is replaced per grid point
  std::vector<double> grid;  // shift magnitudes, ascending, usually with 0
};

struct PowerScenarioResult {
  std::string name;
  std::vector<PowerPoint> points;
};

PowerScenarioResult run_power_scenario(const BenchCommon& bc, const PowerScenario& sc,
                                       const CovarianceSpec& cov, Eigen::Index u,
                                       int scenario_idx);

// Runs several scenarios, computing the shared a = 0 null cell only once.
std::vector<PowerScenarioResult> run_power_study(const BenchCommon& bc,
                                                 const std::vector<PowerScenario>& scs,
                                                 const CovarianceSpec& cov,
                                                 Eigen::Index u);

// The six alignment scenarios of the power study on a p1 x p2 grid.
std::vector<PowerScenario> default_power_scenarios(Eigen::Index p1, Eigen::Index p2);

struct EstimateBenchResult {
  int R = 0;
  double correct_rate = 0.0;  // fraction of replications finding the true count
  double mean_ari = 0.0;
  std::map<int, int> count_histogram;
};

EstimateBenchResult run_estimate_bench(const BenchCommon& bc, const CovarianceSpec& cov,
                                       ShiftSpec shape, double magnitude,
                                       const std::vector<Eigen::Index>& change_points);

// Boundary margin defaults used by the bench commands; detect/segment use
// floor(N/5) unconditionally.
Eigen::Index default_bench_nu(const std::string& command, Eigen::Index n);

}  // namespace matcpd
