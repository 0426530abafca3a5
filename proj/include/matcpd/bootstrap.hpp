#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "matcpd/core.hpp"
#include "matcpd/hac.hpp"
#include "matcpd/linalg.hpp"
#include "matcpd/parallel.hpp"
#include "matcpd/rng.hpp"

// Multiplier bootstrap for the CUSUM test statistics.  Replicate b perturbs
// the segment-centered observations with scalar multipliers e_1..e_N and
// evaluates the same max-norm statistics as the observed series:
//
//   C_n^b = sqrt(n(N-n)/N) { (1/(N-n)) sum_{i>n} e_i (X_i - meanpost_n)
//                          - (1/n)    sum_{i<=n} e_i (X_i - meanpre_n) }.
//
// The sweep over epochs uses running sums, so one replicate costs O(N p)
// regardless of the number of epochs.  Multipliers for replicate b depend
// only on (seed, b); a replicate can be reproduced in isolation.

namespace matcpd {

enum class HacKernel { quadratic_spectral };

struct MultiplierScheme {
  enum class Kind { independent, dependent };
  Kind kind = Kind::independent;
  HacKernel kernel = HacKernel::quadratic_spectral;
  std::optional<double> bandwidth;  // dependent only; nullopt = Andrews plug-in

  static MultiplierScheme independent() { return {}; }
  static MultiplierScheme dependent(std::optional<double> l = std::nullopt) {
    return {Kind::dependent, HacKernel::quadratic_spectral, l};
  }
};

struct BootstrapConfig {
  int B = 400;
  MultiplierScheme scheme;
  std::uint64_t seed = 0;
};

// A multiplier scheme resolved against a concrete series length: for the
// dependent scheme this holds the Cholesky factor of the QS Toeplitz matrix.
class MultiplierDraws {
 public:
  static MultiplierDraws independent(Eigen::Index n) {
    MultiplierDraws d;
    d.n_ = n;
    return d;
  }

  static MultiplierDraws from_theta(const Eigen::MatrixXd& theta) {
    MultiplierDraws d;
    d.n_ = theta.rows();
    CholResult c = chol_with_jitter(theta, "draw_multipliers");
    d.chol_ = std::move(c.lower);
    d.jitter_ = c.jitter;
    return d;
  }

  // data supplies the series for the Andrews bandwidth; may be null when the
  // bandwidth is fixed or the scheme is independent.
  static MultiplierDraws resolve(Eigen::Index n, const MultiplierScheme& scheme,
                                 const MatrixSeriesXd* data) {
    if (scheme.kind == MultiplierScheme::Kind::independent) return independent(n);
    double l;
    if (scheme.bandwidth) {
      l = *scheme.bandwidth;
      if (!(l > 0.0))
        throw Error(errc::boundary, "draw_multipliers: bandwidth must be positive");
    } else {
      if (data == nullptr)
        throw Error(errc::boundary,
                    "draw_multipliers: automatic bandwidth requires data; fix the "
                    "bandwidth or resolve it with andrews_bandwidth first");
      l = andrews_bandwidth(*data);
    }
    MultiplierDraws d = from_theta(toeplitz_theta(n, l));
    d.bandwidth_ = l;
    return d;
  }

  Eigen::VectorXd draw(std::uint64_t seed) const {
    CounterRng rng(seed);
    Eigen::VectorXd z(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      z[i] = rng.normal(static_cast<std::uint64_t>(i));
    if (!chol_) return z;
    return chol_->triangularView<Eigen::Lower>() * z;
  }

  Eigen::Index n() const noexcept { return n_; }
  bool dependent() const noexcept { return chol_.has_value(); }
  double bandwidth() const noexcept { return bandwidth_; }
  double jitter() const noexcept { return jitter_; }

 private:
  Eigen::Index n_ = 0;
  std::optional<Eigen::MatrixXd> chol_;
  double bandwidth_ = 0.0;
  double jitter_ = 0.0;
};

inline Eigen::VectorXd draw_multipliers(Eigen::Index n, const MultiplierScheme& scheme,
                                        std::uint64_t seed) {
  return MultiplierDraws::resolve(n, scheme, nullptr).draw(seed);
}

// Direct evaluation of C_n^b at a single epoch; the reference the fast sweep
// is tested against.
inline Eigen::MatrixXd bootstrap_cusum_at(const MatrixSeriesXd& x, Eigen::Index n,
                                          const Eigen::VectorXd& e) {
  const Eigen::Index nn = x.n();
  if (n < 1 || n >= nn)
    throw Error(errc::boundary, "bootstrap_cusum_at: epoch out of range");
  if (e.size() != nn)
    throw Error(errc::boundary, "bootstrap_cusum_at: multiplier length mismatch");
  const auto& flat = x.flat();
  const Eigen::VectorXd mean_pre = flat.leftCols(n).rowwise().mean();
  const Eigen::VectorXd mean_post = flat.rightCols(nn - n).rowwise().mean();
  Eigen::VectorXd acc_pre = Eigen::VectorXd::Zero(x.p());
  Eigen::VectorXd acc_post = Eigen::VectorXd::Zero(x.p());
  for (Eigen::Index t = 0; t < n; ++t) acc_pre += e[t] * (flat.col(t) - mean_pre);
  for (Eigen::Index t = n; t < nn; ++t) acc_post += e[t] * (flat.col(t) - mean_post);
  const double dn = static_cast<double>(n), dnn = static_cast<double>(nn);
  const double w = std::sqrt(dn * (dnn - dn) / dnn);
  Eigen::VectorXd c = w * (acc_post / (dnn - dn) - acc_pre / dn);
  return Eigen::Map<const Eigen::MatrixXd>(c.data(), x.p1(), x.p2());
}

namespace detail {

// Evaluates the requested mode norms of a flat p-vector seen as p1 x p2,
// reusing scratch buffers across calls.  Slots follow NormSpec::index().
class NormEvaluator {
 public:
  NormEvaluator(Eigen::Index p1, Eigen::Index p2, const std::vector<NormSpec>& specs)
      : p1_(p1), p2_(p2), s_(NormSpec::isqrt(p1 * p2)), sq_(p1 * p2),
        scratch_(static_cast<std::size_t>(p1 * p2)) {
    for (NormSpec spec : specs) need_[static_cast<std::size_t>(spec.index())] = true;
  }

  // norms[k] is filled for every requested slot k.
  void eval(const Eigen::VectorXd& c, std::array<double, 4>& norms) {
    sq_ = c.array().square();
    Eigen::Map<const Eigen::MatrixXd> sq(sq_.data(), p1_, p2_);
    if (need_[0]) norms[0] = std::sqrt(sq.rowwise().sum().maxCoeff());
    if (need_[1]) norms[1] = std::sqrt(sq.colwise().sum().maxCoeff());
    if (need_[2]) {
      const Eigen::Index p = p1_ * p2_;
      std::copy(sq_.data(), sq_.data() + p, scratch_.begin());
      auto kth = scratch_.begin() + static_cast<std::ptrdiff_t>(p - s_);
      std::nth_element(scratch_.begin(), kth, scratch_.end());
      double acc = 0.0;
      for (auto it = kth; it != scratch_.end(); ++it) acc += *it;
      norms[2] = std::sqrt(acc);
    }
    if (need_[3]) norms[3] = std::sqrt(sq_.maxCoeff());
  }

  bool needs(int slot) const { return need_[static_cast<std::size_t>(slot)]; }

 private:
  Eigen::Index p1_, p2_, s_;
  Eigen::VectorXd sq_;
  std::vector<double> scratch_;
  std::array<bool, 4> need_{};
};

// Per-series state shared by all bootstrap replicates.  Observations are
// centered at the first one; the bootstrap process is invariant to that
// translation, and a constant series then yields exact zeros.
struct SweepContext {
  Eigen::Index nu = 0;
  double gamma = 0.5;
  Eigen::MatrixXd centered;  // p x N, col t-1 = vec(X_t - X_1)
  Eigen::MatrixXd prefix;    // p x (N+1), prefix.col(n) = sum_{t<=n} centered
  Eigen::VectorXd factor;    // per epoch: sqrt(n(N-n)/N) * gamma adjustment

  SweepContext(const MatrixSeriesXd& series, Eigen::Index margin, double g)
      : nu(margin), gamma(g) {
    const Eigen::Index n = series.n(), p = series.p();
    centered = series.flat().colwise() - series.flat().col(0);
    prefix.resize(p, n + 1);
    prefix.col(0).setZero();
    for (Eigen::Index t = 0; t < n; ++t)
      prefix.col(t + 1) = prefix.col(t) + centered.col(t);
    factor.resize(n - 2 * nu + 1);
    const double dn = static_cast<double>(n);
    for (Eigen::Index k = nu; k <= n - nu; ++k) {
      const double frac = static_cast<double>(k) / dn;
      const double w = frac * (1.0 - frac);
      // gamma != 0.5 rescales the bootstrap process exactly as it rescales
      // the observed CUSUM, so the calibration targets the same statistic.
      const double adj = (gamma == 0.5) ? 1.0 : std::pow(w, 0.5 - gamma);
      factor[k - nu] = std::sqrt(dn * w) * adj;
    }
  }

  Eigen::Index n() const { return centered.cols(); }
  Eigen::Index p() const { return centered.rows(); }
  Eigen::Index first_epoch() const { return nu; }
  Eigen::Index last_epoch() const { return n() - nu; }
};

// Runs per_epoch(n, c) for every epoch n in [nu, N-nu], where c is the
// gamma-adjusted bootstrap CUSUM as a flat p-vector.  O(N p) total.
template <class F>
void bootstrap_sweep(const SweepContext& ctx, const Eigen::VectorXd& e, F&& per_epoch) {
  const Eigen::Index n = ctx.n(), p = ctx.p();
  if (e.size() != n)
    throw Error(errc::boundary, "bootstrap_sweep: multiplier length mismatch");

  Eigen::VectorXd tot_ex = Eigen::VectorXd::Zero(p);
  for (Eigen::Index t = 0; t < n; ++t) tot_ex += e[t] * ctx.centered.col(t);
  const double tot_e = e.sum();
  const Eigen::VectorXd& tot_x = ctx.prefix.col(n);

  Eigen::VectorXd run_ex = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd c(p);
  double run_e = 0.0;
  const double dn = static_cast<double>(n);
  for (Eigen::Index k = 1; k <= ctx.last_epoch(); ++k) {
    run_ex += e[k - 1] * ctx.centered.col(k - 1);
    run_e += e[k - 1];
    if (k < ctx.first_epoch()) continue;
    const double f = ctx.factor[k - ctx.nu];
    const double pre = static_cast<double>(k), post = dn - pre;
    const double a = f / post;
    const double b = -f * (1.0 / post + 1.0 / pre);
    const double cc = -f * (tot_e - run_e) / (post * post);
    const double d = -cc + f * run_e / (pre * pre);
    c = a * tot_ex + b * run_ex + cc * tot_x + d * ctx.prefix.col(k);
    per_epoch(k, c);
  }
}

}  // namespace detail

struct BootstrapSample {
  NormSpec spec;
  std::vector<double> values;  // B max-norm statistics
};

struct ResolvedScheme {
  MultiplierScheme scheme;
  double bandwidth = 0.0;  // realized value; 0 for independent
  double jitter = 0.0;
};

struct BootstrapRun {
  std::vector<BootstrapSample> samples;  // aligned with the requested specs
  ResolvedScheme resolved;
};

// Per-replicate statistics for one multiplier vector; exposed for tests.
inline std::array<double, 4> bootstrap_statistics(const detail::SweepContext& ctx,
                                                  const Eigen::VectorXd& e,
                                                  detail::NormEvaluator& norms) {
  std::array<double, 4> best;
  best.fill(std::numeric_limits<double>::lowest());
  std::array<double, 4> cur{};
  detail::bootstrap_sweep(ctx, e, [&](Eigen::Index, const Eigen::VectorXd& c) {
    norms.eval(c, cur);
    for (int k = 0; k < 4; ++k)
      if (norms.needs(k) && cur[static_cast<std::size_t>(k)] > best[static_cast<std::size_t>(k)])
        best[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)];
  });
  return best;
}

inline BootstrapRun run_bootstrap(const MatrixSeriesXd& x, Eigen::Index nu,
                                  const std::vector<NormSpec>& specs,
                                  const BootstrapConfig& cfg, double gamma = 0.5,
                                  int threads = 1) {
  check_margin(nu, x.n(), "run_bootstrap");
  x.require_finite("run_bootstrap");
  if (cfg.B < 1) throw Error(errc::boundary, "run_bootstrap: need B >= 1");
  if (specs.empty()) throw Error(errc::boundary, "run_bootstrap: no norms requested");

  const MultiplierDraws draws = MultiplierDraws::resolve(x.n(), cfg.scheme, &x);
  const detail::SweepContext ctx(x, nu, gamma);

  BootstrapRun run;
  run.resolved = {cfg.scheme, draws.bandwidth(), draws.jitter()};
  run.samples.reserve(specs.size());
  for (NormSpec s : specs)
    run.samples.push_back({s, std::vector<double>(static_cast<std::size_t>(cfg.B))});

  parallel_for(cfg.B, threads, [&](std::int64_t b) {
    detail::NormEvaluator norms(x.p1(), x.p2(), specs);
    const Eigen::VectorXd e =
        draws.draw(derive_seed(cfg.seed, static_cast<std::uint64_t>(b)));
    const std::array<double, 4> stat = bootstrap_statistics(ctx, e, norms);
    for (std::size_t s = 0; s < specs.size(); ++s)
      run.samples[s].values[static_cast<std::size_t>(b)] =
          stat[static_cast<std::size_t>(specs[s].index())];
  });
  return run;
}

}  // namespace matcpd
