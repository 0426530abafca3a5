#include "matcpd/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "matcpd/bench.hpp"
#include "matcpd/ingest.hpp"
#include "matcpd/scenario_json.hpp"
#include "matcpd/segmentation.hpp"
#include "matcpd/simulate.hpp"
#include "matcpd/testing.hpp"

namespace matcpd {

namespace {

using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  const auto dt = std::chrono::steady_clock::now() - t0;
  return std::chrono::duration<double>(dt).count();
}

// "report.json" -> "report_cusum.csv"; a path without the .json suffix keeps
// its full name as the stem.
std::string aux_path(const std::string& out, const std::string& tag) {
  std::string stem = out;
  const std::string ext = ".json";
  if (stem.size() > ext.size() &&
      stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0)
    stem.resize(stem.size() - ext.size());
  return stem + "_" + tag + ".csv";
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json norms_json(const std::vector<NormSpec>& specs) {
  json arr = json::array();
  for (const NormSpec& s : specs) arr.push_back(s.label());
  return arr;
}

json scheme_json(const ResolvedScheme& r) {
  json j;
  j["kind"] = r.scheme.kind == MultiplierScheme::Kind::independent ? "independent"
                                                                   : "dependent";
  j["bandwidth"] = r.bandwidth;
  j["jitter"] = r.jitter;
  return j;
}

json single_json(const SingleTestResult& r) {
  json j;
  j["norm"] = r.spec.label();
  j["statistic"] = r.statistic;
  j["argmax"] = r.argmax;
  j["pvalue"] = r.pvalue;
  j["quantile"] = r.quantile;
  j["reject_pvalue"] = r.reject_pvalue;
  j["reject_quantile"] = r.reject_quantile;
  j["degenerate"] = r.degenerate;
  return j;
}

MultiplierScheme make_scheme(const RunConfig& cfg) {
  if (!cfg.dependent) return MultiplierScheme::independent();
  if (cfg.bandwidth) {
    if (*cfg.bandwidth <= 0.0)
      throw Error(errc::boundary, "bandwidth must be positive");
    return MultiplierScheme::dependent(*cfg.bandwidth);
  }
  MultiplierScheme s;
  s.kind = MultiplierScheme::Kind::dependent;  // bandwidth resolved from data
  return s;
}

Eigen::Index resolve_nu(const RunConfig& cfg, Eigen::Index n) {
  if (cfg.nu) {
    check_margin(*cfg.nu, n, cfg.command.c_str());
    return *cfg.nu;
  }
  const Eigen::Index nu = cfg.command.rfind("bench", 0) == 0
                              ? default_bench_nu(cfg.command, n)
                              : n / 5;
  check_margin(nu, n, cfg.command.c_str());
  return nu;
}

json config_echo(const RunConfig& cfg, Eigen::Index nu, int B, int R) {
  json j;
  j["alpha"] = cfg.alpha;
  j["bootstrap_replicates"] = B;
  j["gamma"] = cfg.gamma;
  j["mad_scale"] = cfg.mad;
  j["norms"] = norms_json(cfg.norms);
  j["nu"] = nu;
  j["scheme"] = cfg.dependent ? "dependent" : "independent";
  if (cfg.dependent)
    j["bandwidth"] = cfg.bandwidth ? json(*cfg.bandwidth) : json("auto");
  // threads affect wall clock only, never results, so they are not part of
  // the reproducibility echo.
  if (!cfg.input.empty()) j["input"] = cfg.input;
  if (R > 0) j["replications"] = R;
  return j;
}

json data_json(const MatrixSeriesXd& x, const std::vector<Eigen::Index>& zero_scale) {
  json j;
  j["n"] = x.n();
  j["p1"] = x.p1();
  j["p2"] = x.p2();
  j["zero_scale_components"] = zero_scale.size();
  return j;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct LoadedSeries {
  MatrixSeriesXd series;
  std::vector<Eigen::Index> zero_scale;
};

LoadedSeries load_input(const RunConfig& cfg) {
  if (cfg.input.empty()) throw Error(errc::boundary, "no input file given");
  MatrixSeriesXd x = read_long_csv(cfg.input);
  if (!cfg.mad) return {std::move(x), {}};
  MadResult<double> mad = mad_scale(x);
  return {std::move(mad.series), std::move(mad.zero_scale)};
}

// One row per epoch, one column per requested norm, of the gamma-scaled CUSUM
// the tests maximize.
void write_cusum_csv(const std::string& path, const MatrixSeriesXd& x,
                     Eigen::Index nu, double gamma,
                     const std::vector<NormSpec>& specs) {
  const CusumProcess<double> c = cusum_process(x, nu, gamma);
  std::string text = "epoch";
  for (const NormSpec& s : specs) text += "," + std::string(s.label());
  text += "\n";
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(c.mats.size()); ++i) {
    text += std::to_string(c.epoch(i));
    for (const NormSpec& s : specs)
      text += "," + fmt(mode_norm(c.mats[static_cast<std::size_t>(i)], s));
    text += "\n";
  }
  write_text_file(path, text);
}

json run_detect(const RunConfig& cfg) {
  LoadedSeries in = load_input(cfg);
  const MatrixSeriesXd& x = in.series;
  const Eigen::Index nu = resolve_nu(cfg, x.n());
  BootstrapConfig bcfg{cfg.B, make_scheme(cfg), cfg.seed};
  TestOptions opts;
  opts.gamma = cfg.gamma;
  opts.norms = cfg.norms;
  opts.threads = cfg.threads;

  json res;
  res["data"] = data_json(x, in.zero_scale);
  if (cfg.norms.size() == 1) {
    const SingleTestResult r = mode_specific_test(x, cfg.norms[0], nu, cfg.alpha,
                                                  bcfg, cfg.gamma, cfg.threads);
    res["per_norm"] = json::array({single_json(r)});
    res["verdict"] = r.reject_pvalue ? "reject" : "fail-to-reject";
    if (r.reject_pvalue) res["estimated_epoch"] = r.argmax;
    const MultiplierDraws draws = MultiplierDraws::resolve(x.n(), bcfg.scheme, &x);
    ResolvedScheme rs;
    rs.scheme = bcfg.scheme;
    rs.bandwidth = draws.bandwidth();
    rs.jitter = draws.jitter();
    res["scheme"] = scheme_json(rs);
  } else {
    const AdaptiveTestResult r = adaptive_test(x, nu, cfg.alpha, bcfg, opts);
    json per = json::array();
    for (const SingleTestResult& s : r.per_norm) per.push_back(single_json(s));
    res["per_norm"] = std::move(per);
    json ad;
    ad["variant"] = "parallel";
    ad["t_ad"] = r.t_ad;
    ad["p_ad"] = r.p_ad;
    ad["selected_norm"] = r.selected.label();
    json mins = json::array();
    for (int idx : r.minimizer_idx)
      mins.push_back(r.per_norm[static_cast<std::size_t>(idx)].spec.label());
    ad["minimizers"] = std::move(mins);
    ad["reject"] = r.reject;
    ad["degenerate"] = r.degenerate;
    res["adaptive"] = std::move(ad);
    res["verdict"] = r.reject ? "reject" : "fail-to-reject";
    if (r.reject) {
      res["estimated_epoch"] = estimate_changepoint(r, cfg.cluster_distance).epoch;
    }
    res["scheme"] = scheme_json(r.resolved);
  }

  if (!cfg.out.empty()) {
    const std::string path = aux_path(cfg.out, "cusum");
    write_cusum_csv(path, x, nu, cfg.gamma, cfg.norms);
    res["cusum_csv"] = path;
  }

  json report;
  report["command"] = "detect";
  report["config"] = config_echo(cfg, nu, cfg.B, 0);
  report["results"] = std::move(res);
  return report;
}

json run_segment(const RunConfig& cfg) {
  LoadedSeries in = load_input(cfg);
  const MatrixSeriesXd& x = in.series;
  const Eigen::Index nu = resolve_nu(cfg, x.n());
  BootstrapConfig bcfg{cfg.B, make_scheme(cfg), cfg.seed};
  TestOptions opts;
  opts.gamma = cfg.gamma;
  opts.norms = cfg.norms;
  opts.threads = cfg.threads;
  SegmentationOptions sopts;
  sopts.cluster_distance = cfg.cluster_distance;

  const Segmentation seg = binary_segmentation(x, nu, cfg.alpha, bcfg, opts, sopts);

  json res;
  res["data"] = data_json(x, in.zero_scale);
  json cps = json::array();
  for (Eigen::Index u : seg.change_points) cps.push_back(u);
  res["change_points"] = std::move(cps);
  json means = json::array();
  for (const Eigen::MatrixXd& m : seg.segment_means) means.push_back(matrix_json(m));
  res["segment_means"] = std::move(means);
  json nodes = json::array();
  for (const SegmentationNode& nd : seg.nodes) {
    json n;
    n["start"] = nd.s;
    n["end"] = nd.e;
    n["depth"] = nd.depth;
    n["tested"] = nd.tested;
    n["rejected"] = nd.rejected;
    n["degenerate"] = nd.degenerate;
    if (nd.tested) {
      n["p_ad"] = nd.p_ad;
      n["t_ad"] = nd.t_ad;
      n["selected_norm"] = nd.selected.label();
    }
    if (nd.rejected) n["change_point"] = nd.change_point;
    nodes.push_back(std::move(n));
  }
  res["nodes"] = std::move(nodes);

  if (!cfg.out.empty()) {
    const std::string path = aux_path(cfg.out, "cusum");
    write_cusum_csv(path, x, nu, cfg.gamma, cfg.norms);
    res["cusum_csv"] = path;
  }

  json report;
  report["command"] = "segment";
  report["config"] = config_echo(cfg, nu, cfg.B, 0);
  report["results"] = std::move(res);
  return report;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

json run_simulate(const RunConfig& cfg) {
  if (cfg.input.empty())
    throw Error(errc::boundary, "simulate needs a scenario JSON file");
  if (cfg.out.empty())
    throw Error(errc::boundary, "simulate needs --out for the data CSV");
  ScenarioSpec spec = load_scenario(cfg.input);
  if (cfg.seed_given) spec.seed = cfg.seed;
  const MatrixSeriesXd x = generate_series(spec);
  const std::string text = format_long_csv(x);
  write_text_file(cfg.out, text);

  json res;
  res["n"] = x.n();
  res["p1"] = x.p1();
  res["p2"] = x.p2();
  res["path"] = cfg.out;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(text)));
  res["checksum_fnv1a"] = buf;

  json config;
  config["input"] = cfg.input;
  config["scenario"] = scenario_to_json(spec);

  json report;
  report["command"] = "simulate";
  report["config"] = std::move(config);
  report["results"] = std::move(res);
  return report;
}

CovarianceSpec covariance_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "cov1") return CovarianceSpec::identity();
  if (name == "cov2") return CovarianceSpec::kronecker_random(derive_seed(seed, 0xc2));
  if (name == "cov3") return CovarianceSpec::banded();
  if (name == "cov4") return CovarianceSpec::compound_symmetry();
  throw Error(errc::boundary, "unknown covariance '" + name +
                                  "' (expected cov1, cov2, cov3 or cov4)");
}

BenchCommon make_bench(const RunConfig& cfg, Eigen::Index nu) {
  BenchCommon bc;
  bc.n = cfg.n;
  bc.p1 = cfg.p1;
  bc.p2 = cfg.p2;
  bc.nu = nu;
  bc.B = cfg.paper_scale ? 400 : cfg.B;
  bc.R = cfg.paper_scale ? 1000 : cfg.reps;
  bc.alpha = cfg.alpha;
  bc.gamma = cfg.gamma;
  bc.mad = cfg.mad;
  bc.scheme = make_scheme(cfg);
  bc.seed = cfg.seed;
  bc.threads = cfg.threads;
  return bc;
}

json bench_config_echo(const RunConfig& cfg, const BenchCommon& bc) {
  json j = config_echo(cfg, bc.nu, bc.B, bc.R);
  j["n"] = bc.n;
  j["p1"] = bc.p1;
  j["p2"] = bc.p2;
  return j;
}

json run_bench_size(const RunConfig& cfg) {
  const Eigen::Index nu = resolve_nu(cfg, cfg.n);
  const BenchCommon bc = make_bench(cfg, nu);
  std::vector<std::string> covs = cfg.covariances;
  if (covs.empty()) covs = {"cov1", "cov4"};

  json cells = json::array();
  std::string csv =
      "cov,rate_adapt,rate_adapt_low_cost,rate_mode1,rate_mode2,mc_se_adapt\n";
  for (const std::string& name : covs) {
    const SizeCellResult cell =
        run_size_cell(bc, covariance_by_name(name, bc.seed), name, cfg.ar1_rho);
    json c;
    c["cov"] = name;
    c["rate_adapt"] = cell.rate_adapt;
    c["rate_adapt_low_cost"] = cell.rate_adapt_lc;
    c["rate_mode1"] = cell.rate_mode1;
    c["rate_mode2"] = cell.rate_mode2;
    c["mc_se_adapt"] = mc_se(cell.rate_adapt, bc.R);
    cells.push_back(std::move(c));
    csv += name + "," + fmt(cell.rate_adapt) + "," + fmt(cell.rate_adapt_lc) + "," +
           fmt(cell.rate_mode1) + "," + fmt(cell.rate_mode2) + "," +
           fmt(mc_se(cell.rate_adapt, bc.R)) + "\n";
  }

  json res;
  res["cells"] = std::move(cells);
  if (cfg.ar1_rho != 0.0) res["ar1_rho"] = cfg.ar1_rho;
  if (!cfg.out.empty()) {
    const std::string path = aux_path(cfg.out, "size");
    write_text_file(path, csv);
    res["table_csv"] = path;
  }

  json report;
  report["command"] = "bench-size";
  json config = bench_config_echo(cfg, bc);
  if (cfg.ar1_rho != 0.0) config["ar1_rho"] = cfg.ar1_rho;
  report["config"] = std::move(config);
  report["results"] = std::move(res);
  return report;
}

json run_bench_power(const RunConfig& cfg) {
  const Eigen::Index nu = resolve_nu(cfg, cfg.n);
  const BenchCommon bc = make_bench(cfg, nu);
  const std::string cov_name = cfg.covariances.empty() ? "cov4" : cfg.covariances[0];
  const CovarianceSpec cov = covariance_by_name(cov_name, bc.seed);
  const Eigen::Index u = cfg.u ? *cfg.u : bc.n / 2;
  if (u < bc.nu || u > bc.n - bc.nu)
    throw Error(errc::boundary, "change epoch u must lie in [nu, N - nu]");

  std::vector<PowerScenario> scs = default_power_scenarios(bc.p1, bc.p2);
  if (!cfg.scenarios.empty()) {
    std::vector<PowerScenario> kept;
    for (const std::string& want : cfg.scenarios) {
      bool found = false;
      for (const PowerScenario& sc : scs)
        if (sc.name == want) {
          kept.push_back(sc);
          found = true;
        }
      if (!found)
        throw Error(errc::boundary, "unknown power scenario '" + want + "'");
    }
    scs = std::move(kept);
  }

  const std::vector<PowerScenarioResult> results = run_power_study(bc, scs, cov, u);

  json arr = json::array();
  std::string csv = "scenario,magnitude,rate_adapt,rate_mode1,rate_mode2,mc_se_adapt\n";
  for (const PowerScenarioResult& sc : results) {
    json s;
    s["name"] = sc.name;
    json pts = json::array();
    for (const PowerPoint& p : sc.points) {
      json pj;
      pj["magnitude"] = p.magnitude;
      pj["rate_adapt"] = p.rate_adapt;
      pj["rate_mode1"] = p.rate_mode1;
      pj["rate_mode2"] = p.rate_mode2;
      pj["mc_se_adapt"] = mc_se(p.rate_adapt, bc.R);
      pts.push_back(std::move(pj));
      csv += sc.name + "," + fmt(p.magnitude) + "," + fmt(p.rate_adapt) + "," +
             fmt(p.rate_mode1) + "," + fmt(p.rate_mode2) + "," +
             fmt(mc_se(p.rate_adapt, bc.R)) + "\n";
    }
    s["points"] = std::move(pts);
    arr.push_back(std::move(s));
  }

  json res;
  res["cov"] = cov_name;
  res["scenarios"] = std::move(arr);
  res["u"] = u;
  if (!cfg.out.empty()) {
    const std::string path = aux_path(cfg.out, "power");
    write_text_file(path, csv);
    res["table_csv"] = path;
  }

  json report;
  report["command"] = "bench-power";
  json config = bench_config_echo(cfg, bc);
  config["cov"] = cov_name;
  config["u"] = u;
  report["config"] = std::move(config);
  report["results"] = std::move(res);
  return report;
}

// Shift shapes reused from the power study; scenario names select them.
ShiftSpec estimate_shape(const std::string& name, Eigen::Index p1, Eigen::Index p2,
                         double a, std::uint64_t seed) {
  for (PowerScenario& sc : default_power_scenarios(p1, p2))
    if (sc.name == name) {
      ShiftSpec s = sc.shape;
      s.magnitude = a;
      return s;
    }
  (void)seed;
  throw Error(errc::boundary, "unknown scenario '" + name + "'");
}

json run_bench_estimate(const RunConfig& cfg) {
  const Eigen::Index nu = resolve_nu(cfg, cfg.n);
  const BenchCommon bc = make_bench(cfg, nu);
  const std::string cov_name = cfg.covariances.empty() ? "cov1" : cfg.covariances[0];
  const CovarianceSpec cov = covariance_by_name(cov_name, bc.seed);
  const std::string scenario = cfg.scenarios.empty() ? "40-1mode" : cfg.scenarios[0];
  const double magnitude = cfg.magnitude ? *cfg.magnitude : 2.0;

  std::vector<Eigen::Index> cps = cfg.change_points;
  if (cps.empty())
    for (Eigen::Index k = 1; k <= 3; ++k) cps.push_back(k * bc.n / 4);

  const ShiftSpec shape = estimate_shape(scenario, bc.p1, bc.p2, magnitude, bc.seed);
  const EstimateBenchResult r = run_estimate_bench(bc, cov, shape, magnitude, cps);

  json res;
  res["cov"] = cov_name;
  res["scenario"] = scenario;
  res["magnitude"] = magnitude;
  json truth = json::array();
  for (Eigen::Index u : cps) truth.push_back(u);
  res["true_change_points"] = std::move(truth);
  res["correct_rate"] = r.correct_rate;
  res["mean_ari"] = r.mean_ari;
  json hist;
  for (const auto& [count, freq] : r.count_histogram)
    hist[std::to_string(count)] = freq;
  res["count_histogram"] = std::move(hist);
  if (!cfg.out.empty()) {
    std::string csv = "estimated_count,frequency\n";
    for (const auto& [count, freq] : r.count_histogram)
      csv += std::to_string(count) + "," + std::to_string(freq) + "\n";
    const std::string path = aux_path(cfg.out, "estimate");
    write_text_file(path, csv);
    res["table_csv"] = path;
  }

  json report;
  report["command"] = "bench-estimate";
  json config = bench_config_echo(cfg, bc);
  config["cov"] = cov_name;
  config["magnitude"] = magnitude;
  config["scenario"] = scenario;
  report["config"] = std::move(config);
  report["results"] = std::move(res);
  return report;
}

}  // namespace

std::string dump_report(const nlohmann::json& report) {
  return report.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(errc::boundary, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(errc::boundary, "write to '" + path + "' failed");
}

nlohmann::json run_command(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  json report;
  if (cfg.command == "detect")
    report = run_detect(cfg);
  else if (cfg.command == "segment")
    report = run_segment(cfg);
  else if (cfg.command == "simulate")
    report = run_simulate(cfg);
  else if (cfg.command == "bench-size")
    report = run_bench_size(cfg);
  else if (cfg.command == "bench-power")
    report = run_bench_power(cfg);
  else if (cfg.command == "bench-estimate")
    report = run_bench_estimate(cfg);
  else
    throw Error(errc::internal, "unknown command '" + cfg.command + "'");

  report["schema_version"] = "1";
  report["seed"] = cfg.seed;
  report["wall_clock_sec"] = seconds_since(t0);
  // simulate's --out is the data CSV itself; its report goes to stdout only.
  if (!cfg.out.empty() && cfg.command != "simulate")
    write_text_file(cfg.out, dump_report(report));
  return report;
}

}  // namespace matcpd
