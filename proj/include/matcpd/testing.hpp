#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "matcpd/bootstrap.hpp"
#include "matcpd/core.hpp"

// Bootstrap-calibrated change point tests.  A single-norm test compares the
// max-norm CUSUM statistic against its multiplier-bootstrap distribution; the
// adaptive test takes the smallest p-value across the four mode norms and
// calibrates that minimum against bootstrap analogues, either from a second
// independent multiplier world ("parallel") or by leave-one-out recycling of
// the first world ("low cost").

namespace matcpd {

// k-th order statistic with k = ceil(level * B); the smallest sample value t
// such that at least level * B of the sample is <= t.
inline double empirical_quantile(const std::vector<double>& values, double level) {
  if (values.empty()) throw Error(errc::boundary, "empirical_quantile: empty sample");
  if (!(level > 0.0 && level < 1.0))
    throw Error(errc::boundary, "empirical_quantile: level must be in (0,1)");
  const auto b = static_cast<double>(values.size());
  auto k = static_cast<std::size_t>(std::ceil(level * b));
  k = std::max<std::size_t>(k, 1);
  std::vector<double> copy(values);
  auto kth = copy.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(copy.begin(), kth, copy.end());
  return *kth;
}

struct SingleTestResult {
  NormSpec spec;
  double statistic = 0.0;
  Eigen::Index argmax = 0;       // earliest epoch attaining the maximum
  double pvalue = 1.0;           // #{T^b > T} / B
  double quantile = 0.0;         // empirical (1 - alpha) bootstrap quantile
  bool reject_pvalue = false;    // pvalue <= alpha; the authoritative verdict
  bool reject_quantile = false;  // statistic >= quantile
  bool degenerate = false;       // constant series short-circuit
  std::vector<double> bootstrap;
};

enum class AdaptiveVariant { parallel, low_cost };

struct AdaptiveTestResult {
  AdaptiveVariant variant = AdaptiveVariant::parallel;
  std::vector<SingleTestResult> per_norm;  // canonical norm order
  double t_ad = 1.0;                       // min per-norm p-value
  double p_ad = 1.0;                       // #{T_ad^b < T_ad} / B
  NormSpec selected;                       // first norm attaining t_ad
  std::vector<int> minimizer_idx;          // all indices attaining t_ad
  Eigen::Index estimated_epoch = 0;        // argmax of the selected norm
  bool reject = false;                     // p_ad <= alpha
  bool degenerate = false;
  double alpha = 0.05;
  ResolvedScheme resolved;
};

struct TestOptions {
  double gamma = 0.5;
  std::vector<NormSpec> norms = adaptive_norms();
  int threads = 1;
};

namespace detail {

inline std::vector<NormSpec> canonical_specs(std::vector<NormSpec> specs) {
  std::sort(specs.begin(), specs.end(),
            [](NormSpec a, NormSpec b) { return a.index() < b.index(); });
  specs.erase(std::unique(specs.begin(), specs.end()), specs.end());
  if (specs.empty()) throw Error(errc::boundary, "adaptive_test: no norms requested");
  return specs;
}

inline std::size_t count_greater(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(
      sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
}

// Shared machinery for both adaptive variants; world 1 always uses cfg.seed
// directly so its per-norm results agree with standalone mode_specific_test
// runs under the same seed.
struct AdaptiveEngineResult {
  std::vector<SingleTestResult> per_norm;
  double t_ad = 1.0;
  NormSpec selected;
  std::vector<int> minimizer_idx;
  Eigen::Index estimated_epoch = 0;
  std::optional<double> p_ad_parallel, p_ad_low_cost;
  bool degenerate = false;
  ResolvedScheme resolved;
};

// Seed tag separating the second multiplier world from the first.
constexpr std::uint64_t kSecondWorldTag = 0x32646c726f77ull;

inline AdaptiveEngineResult adaptive_engine(const MatrixSeriesXd& x, Eigen::Index nu,
                                            double alpha, const BootstrapConfig& cfg,
                                            const TestOptions& opts, bool want_parallel,
                                            bool want_low_cost) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(errc::boundary, "adaptive_test: alpha must be in (0,1)");
  if (want_low_cost && cfg.B < 2)
    throw Error(errc::boundary, "adaptive_test: low-cost variant needs B >= 2");
  const std::vector<NormSpec> specs = canonical_specs(opts.norms);
  const CusumProcess<double> cusum = cusum_process(x, nu, opts.gamma);

  AdaptiveEngineResult out;
  out.per_norm.resize(specs.size());
  std::vector<Statistic<double>> stats(specs.size());
  for (std::size_t s = 0; s < specs.size(); ++s)
    stats[s] = test_statistic(cusum, specs[s]);

  // A zero statistic means every CUSUM matrix vanished, i.e. the series is
  // constant; bootstrap calibration is then meaningless.
  if (stats[0].value == 0.0) {
    out.degenerate = true;
    for (std::size_t s = 0; s < specs.size(); ++s) {
      SingleTestResult& r = out.per_norm[s];
      r.spec = specs[s];
      r.statistic = 0.0;
      r.argmax = stats[s].argmax;
      r.pvalue = 1.0;
      r.degenerate = true;
      r.bootstrap.assign(static_cast<std::size_t>(cfg.B), 0.0);
      out.minimizer_idx.push_back(static_cast<int>(s));
    }
    out.t_ad = 1.0;
    out.selected = specs[0];
    out.estimated_epoch = stats[0].argmax;
    if (want_parallel) out.p_ad_parallel = 1.0;
    if (want_low_cost) out.p_ad_low_cost = 1.0;
    return out;
  }

  BootstrapRun world1 = run_bootstrap(x, nu, specs, cfg, opts.gamma, opts.threads);
  out.resolved = world1.resolved;
  const auto b = static_cast<double>(cfg.B);

  std::vector<std::vector<double>> sorted1(specs.size());
  for (std::size_t s = 0; s < specs.size(); ++s) {
    sorted1[s] = world1.samples[s].values;
    std::sort(sorted1[s].begin(), sorted1[s].end());
  }

  out.t_ad = 2.0;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    SingleTestResult& r = out.per_norm[s];
    r.spec = specs[s];
    r.statistic = stats[s].value;
    r.argmax = stats[s].argmax;
    r.pvalue = static_cast<double>(count_greater(sorted1[s], r.statistic)) / b;
    const auto k = std::max<std::size_t>(
        static_cast<std::size_t>(std::ceil((1.0 - alpha) * b)), 1);
    r.quantile = sorted1[s][k - 1];
    r.reject_pvalue = r.pvalue <= alpha;
    r.reject_quantile = r.statistic >= r.quantile;
    r.bootstrap = std::move(world1.samples[s].values);
    if (r.pvalue < out.t_ad) out.t_ad = r.pvalue;
  }
  for (std::size_t s = 0; s < specs.size(); ++s)
    if (out.per_norm[s].pvalue == out.t_ad)
      out.minimizer_idx.push_back(static_cast<int>(s));
  out.selected = specs[static_cast<std::size_t>(out.minimizer_idx.front())];
  out.estimated_epoch =
      out.per_norm[static_cast<std::size_t>(out.minimizer_idx.front())].argmax;

  if (want_parallel) {
    BootstrapConfig cfg2 = cfg;
    cfg2.seed = derive_seed(cfg.seed, kSecondWorldTag);
    const BootstrapRun world2 =
        run_bootstrap(x, nu, specs, cfg2, opts.gamma, opts.threads);
    std::vector<std::vector<double>> sorted2(specs.size());
    for (std::size_t s = 0; s < specs.size(); ++s) {
      sorted2[s] = world2.samples[s].values;
      std::sort(sorted2[s].begin(), sorted2[s].end());
    }
    std::size_t count = 0;
    for (int rep = 0; rep < cfg.B; ++rep) {
      double t_ad_b = 2.0;
      for (std::size_t s = 0; s < specs.size(); ++s) {
        const double tb = out.per_norm[s].bootstrap[static_cast<std::size_t>(rep)];
        const double pv = static_cast<double>(count_greater(sorted2[s], tb)) / b;
        t_ad_b = std::min(t_ad_b, pv);
      }
      if (t_ad_b < out.t_ad) ++count;
    }
    out.p_ad_parallel = static_cast<double>(count) / b;
  }

  if (want_low_cost) {
    // Reference world is the first one, excluding each replicate from its own
    // comparison set: a value is never strictly greater than itself, so the
    // strict count over all B replicates is already the leave-one-out count.
    std::size_t count = 0;
    for (int rep = 0; rep < cfg.B; ++rep) {
      double t_ad_b = 2.0;
      for (std::size_t s = 0; s < specs.size(); ++s) {
        const double tb = out.per_norm[s].bootstrap[static_cast<std::size_t>(rep)];
        const double pv =
            static_cast<double>(count_greater(sorted1[s], tb)) / (b - 1.0);
        t_ad_b = std::min(t_ad_b, pv);
      }
      if (t_ad_b < out.t_ad) ++count;
    }
    out.p_ad_low_cost = static_cast<double>(count) / b;
  }
  return out;
}

inline AdaptiveTestResult assemble(AdaptiveEngineResult&& eng, AdaptiveVariant variant,
                                   double alpha) {
  AdaptiveTestResult r;
  r.variant = variant;
  r.per_norm = std::move(eng.per_norm);
  r.t_ad = eng.t_ad;
  r.p_ad = variant == AdaptiveVariant::parallel ? *eng.p_ad_parallel
                                                : *eng.p_ad_low_cost;
  r.selected = eng.selected;
  r.minimizer_idx = std::move(eng.minimizer_idx);
  r.estimated_epoch = eng.estimated_epoch;
  r.degenerate = eng.degenerate;
  r.alpha = alpha;
  r.reject = !r.degenerate && r.p_ad <= alpha;
  r.resolved = eng.resolved;
  return r;
}

}  // namespace detail

inline SingleTestResult mode_specific_test(const MatrixSeriesXd& x, NormSpec spec,
                                           Eigen::Index nu, double alpha,
                                           const BootstrapConfig& cfg,
                                           double gamma = 0.5, int threads = 1) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(errc::boundary, "mode_specific_test: alpha must be in (0,1)");
  const CusumProcess<double> cusum = cusum_process(x, nu, gamma);
  const Statistic<double> stat = test_statistic(cusum, spec);

  SingleTestResult r;
  r.spec = spec;
  r.statistic = stat.value;
  r.argmax = stat.argmax;
  if (stat.value == 0.0) {
    r.pvalue = 1.0;
    r.degenerate = true;
    r.bootstrap.assign(static_cast<std::size_t>(cfg.B), 0.0);
    return r;
  }
  BootstrapRun run = run_bootstrap(x, nu, {spec}, cfg, gamma, threads);
  r.bootstrap = std::move(run.samples[0].values);
  std::vector<double> sorted(r.bootstrap);
  std::sort(sorted.begin(), sorted.end());
  r.pvalue = static_cast<double>(detail::count_greater(sorted, r.statistic)) /
             static_cast<double>(cfg.B);
  const auto k = std::max<std::size_t>(
      static_cast<std::size_t>(std::ceil((1.0 - alpha) * cfg.B)), 1);
  r.quantile = sorted[k - 1];
  r.reject_pvalue = r.pvalue <= alpha;
  r.reject_quantile = r.statistic >= r.quantile;
  return r;
}

inline AdaptiveTestResult adaptive_test(const MatrixSeriesXd& x, Eigen::Index nu,
                                        double alpha, const BootstrapConfig& cfg,
                                        const TestOptions& opts = {}) {
  return detail::assemble(detail::adaptive_engine(x, nu, alpha, cfg, opts, true, false),
                          AdaptiveVariant::parallel, alpha);
}

inline AdaptiveTestResult low_cost_adaptive_test(const MatrixSeriesXd& x,
                                                 Eigen::Index nu, double alpha,
                                                 const BootstrapConfig& cfg,
                                                 const TestOptions& opts = {}) {
  return detail::assemble(detail::adaptive_engine(x, nu, alpha, cfg, opts, false, true),
                          AdaptiveVariant::low_cost, alpha);
}

}  // namespace matcpd
