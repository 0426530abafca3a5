#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "matcpd/bootstrap.hpp"
#include "oracles.hpp"

using namespace matcpd;

namespace {

MatrixSeriesXd random_series(Eigen::Index p1, Eigen::Index p2, Eigen::Index n,
                             std::uint64_t seed) {
  MatrixSeriesXd x(p1, p2, n);
  CounterRng rng(seed);
  std::uint64_t k = 0;
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index c = 0; c < x.p(); ++c) x.flat()(c, t) = rng.normal(k++);
  return x;
}

}  // namespace

TEST_CASE("independent multipliers are reproducible standard normals") {
  const auto scheme = MultiplierScheme::independent();
  const Eigen::VectorXd a = draw_multipliers(5000, scheme, 42);
  const Eigen::VectorXd b = draw_multipliers(5000, scheme, 42);
  CHECK(a == b);
  CHECK(draw_multipliers(5000, scheme, 43) != a);
  CHECK(a.mean() == doctest::Approx(0.0).epsilon(0.05));
  CHECK(a.squaredNorm() / 5000.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("identity covariance reproduces the independent stream bitwise") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(200, 200);
  const MultiplierDraws dep = MultiplierDraws::from_theta(id);
  const MultiplierDraws ind = MultiplierDraws::independent(200);
  CHECK(dep.jitter() == 0.0);
  for (std::uint64_t seed : {1ull, 77ull, 123456ull}) {
    const Eigen::VectorXd a = dep.draw(seed), b = ind.draw(seed);
    REQUIRE(a.size() == b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("dependent multipliers carry the kernel autocorrelation") {
  const double l = 5.0;
  const MultiplierDraws draws =
      MultiplierDraws::resolve(400, MultiplierScheme::dependent(l), nullptr);
  CHECK(draws.dependent());
  CHECK(draws.bandwidth() == l);
  CHECK(draws.jitter() <= 1e-6);  // the QS Toeplitz matrix is near rank-deficient

  double c0 = 0.0, c1 = 0.0, c3 = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd e = draws.draw(static_cast<std::uint64_t>(r));
    c0 += e.squaredNorm() / 400.0;
    c1 += (e.head(399).dot(e.tail(399))) / 399.0;
    c3 += (e.head(397).dot(e.tail(397))) / 397.0;
  }
  c0 /= reps;
  c1 /= reps;
  c3 /= reps;
  CHECK(c0 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(c1 / c0 == doctest::Approx(qs_kernel(1.0 / l)).epsilon(0.08));
  CHECK(c3 / c0 == doctest::Approx(qs_kernel(3.0 / l)).epsilon(0.15));
}

TEST_CASE("scheme resolution boundary errors") {
  CHECK_THROWS_AS(MultiplierDraws::resolve(50, MultiplierScheme::dependent(), nullptr),
                  Error);
  CHECK_THROWS_AS(MultiplierDraws::resolve(50, MultiplierScheme::dependent(-1.0), nullptr),
                  Error);
  const MatrixSeriesXd x = random_series(2, 2, 80, 9);
  const MultiplierDraws d =
      MultiplierDraws::resolve(80, MultiplierScheme::dependent(), &x);
  CHECK(d.bandwidth() == andrews_bandwidth(x));
}

TEST_CASE("bootstrap_cusum_at matches the double-loop oracle") {
  const MatrixSeriesXd x = random_series(3, 5, 40, 31);
  const Eigen::VectorXd e = draw_multipliers(40, MultiplierScheme::independent(), 7);
  for (Eigen::Index n = 1; n < 40; ++n) {
    const Eigen::MatrixXd got = bootstrap_cusum_at(x, n, e);
    const Eigen::VectorXd want = oracle::bootstrap_cusum(x.flat(), e, n, 0.5);
    CHECK((Eigen::Map<const Eigen::VectorXd>(got.data(), x.p()) - want)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(bootstrap_cusum_at(x, 0, e), Error);
  CHECK_THROWS_AS(bootstrap_cusum_at(x, 40, e), Error);
}

TEST_CASE("epoch sweep equals the direct form at every epoch") {
  const MatrixSeriesXd x = random_series(4, 3, 50, 77);
  const Eigen::VectorXd e = draw_multipliers(50, MultiplierScheme::independent(), 3);
  const Eigen::Index nu = 4;

  for (double gamma : {0.5, 0.25}) {
    const detail::SweepContext ctx(x, nu, gamma);
    CHECK(ctx.first_epoch() == nu);
    CHECK(ctx.last_epoch() == 50 - nu);
    detail::bootstrap_sweep(ctx, e, [&](Eigen::Index n, const Eigen::VectorXd& c) {
      const Eigen::VectorXd want = oracle::bootstrap_cusum(x.flat(), e, n, gamma);
      CHECK((c - want).cwiseAbs().maxCoeff() < 1e-10);
    });
  }
}

TEST_CASE("constant multipliers collapse the bootstrap process") {
  const MatrixSeriesXd x = random_series(3, 3, 60, 15);
  const detail::SweepContext ctx(x, 5, 0.5);
  for (double val : {1.0, -3.7}) {
    const Eigen::VectorXd e = Eigen::VectorXd::Constant(60, val);
    detail::bootstrap_sweep(ctx, e, [&](Eigen::Index, const Eigen::VectorXd& c) {
      CHECK(c.cwiseAbs().maxCoeff() < 1e-12);
    });
  }
}

TEST_CASE("run_bootstrap replicates match a naive per-replicate evaluation") {
  const MatrixSeriesXd x = random_series(3, 4, 36, 50);
  const Eigen::Index nu = 5;
  BootstrapConfig cfg;
  cfg.B = 8;
  cfg.seed = 99;

  for (double gamma : {0.5, 0.25}) {
    const BootstrapRun run =
        run_bootstrap(x, nu, adaptive_norms(), cfg, gamma);
    REQUIRE(run.samples.size() == 4);
    const MultiplierDraws draws = MultiplierDraws::independent(36);
    for (int b = 0; b < cfg.B; ++b) {
      const Eigen::VectorXd e =
          draws.draw(derive_seed(cfg.seed, static_cast<std::uint64_t>(b)));
      std::array<double, 4> want;
      want.fill(0.0);
      for (Eigen::Index n = nu; n <= 36 - nu; ++n) {
        const Eigen::VectorXd c = oracle::bootstrap_cusum(x.flat(), e, n, gamma);
        const Eigen::Map<const Eigen::MatrixXd> m(c.data(), 3, 4);
        want[0] = std::max(want[0], oracle::mode1_norm(m));
        want[1] = std::max(want[1], oracle::mode2_norm(m));
        want[2] = std::max(want[2], oracle::dot_norm(m));
        want[3] = std::max(want[3], oracle::max_norm(m));
      }
      for (std::size_t s = 0; s < 4; ++s)
        CHECK(run.samples[s].values[static_cast<std::size_t>(b)] ==
              doctest::Approx(want[s]).epsilon(1e-10));
    }
  }
}

TEST_CASE("run_bootstrap is deterministic across thread counts") {
  const MatrixSeriesXd x = random_series(2, 5, 48, 4);
  BootstrapConfig cfg;
  cfg.B = 32;
  cfg.seed = 1234;
  const BootstrapRun one = run_bootstrap(x, 6, adaptive_norms(), cfg, 0.5, 1);
  const BootstrapRun eight = run_bootstrap(x, 6, adaptive_norms(), cfg, 0.5, 8);
  for (std::size_t s = 0; s < 4; ++s) CHECK(one.samples[s].values == eight.samples[s].values);

  BootstrapConfig other = cfg;
  other.seed = 1235;
  const BootstrapRun diff = run_bootstrap(x, 6, adaptive_norms(), other);
  CHECK(diff.samples[0].values != one.samples[0].values);
}

TEST_CASE("run_bootstrap argument checks and resolved scheme echo") {
  const MatrixSeriesXd x = random_series(2, 2, 30, 8);
  BootstrapConfig cfg;
  cfg.B = 0;
  CHECK_THROWS_AS(run_bootstrap(x, 5, adaptive_norms(), cfg), Error);
  cfg.B = 4;
  CHECK_THROWS_AS(run_bootstrap(x, 5, {}, cfg), Error);
  CHECK_THROWS_AS(run_bootstrap(x, 15, adaptive_norms(), cfg), Error);

  const BootstrapRun ind = run_bootstrap(x, 5, {NormSpec::mode1()}, cfg);
  CHECK(ind.resolved.bandwidth == 0.0);
  CHECK(ind.resolved.jitter == 0.0);

  cfg.scheme = MultiplierScheme::dependent(2.5);
  const BootstrapRun dep = run_bootstrap(x, 5, {NormSpec::mode1()}, cfg);
  CHECK(dep.resolved.bandwidth == 2.5);
  CHECK(dep.resolved.scheme.kind == MultiplierScheme::Kind::dependent);

  cfg.scheme = MultiplierScheme::dependent();
  const BootstrapRun autod = run_bootstrap(x, 5, {NormSpec::mode1()}, cfg);
  CHECK(autod.resolved.bandwidth == andrews_bandwidth(x));
}

TEST_CASE("bootstrap statistics are nonnegative and respect the norm order") {
  const MatrixSeriesXd x = random_series(4, 4, 44, 12);
  BootstrapConfig cfg;
  cfg.B = 64;
  cfg.seed = 5;
  const BootstrapRun run = run_bootstrap(x, 6, adaptive_norms(), cfg);
  for (int b = 0; b < cfg.B; ++b) {
    const auto idx = static_cast<std::size_t>(b);
    const double m1 = run.samples[0].values[idx];
    const double m2 = run.samples[1].values[idx];
    const double md = run.samples[2].values[idx];
    const double mx = run.samples[3].values[idx];
    CHECK(mx > 0.0);
    // Entrywise max never exceeds any subvector l2 maximum on any epoch, so
    // the max over epochs keeps the order.
    CHECK(mx <= m1 + 1e-12);
    CHECK(mx <= m2 + 1e-12);
    CHECK(mx <= md + 1e-12);
    // Square observations: the dot norm collects p1 = p2 entries.
    CHECK(md >= m1 - 1e-12);
    CHECK(md >= m2 - 1e-12);
  }
}
