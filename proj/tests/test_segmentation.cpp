#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "matcpd/segmentation.hpp"
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

void shift_row(MatrixSeriesXd& x, Eigen::Index row, Eigen::Index u, double a) {
  for (Eigen::Index t = u + 1; t <= x.n(); ++t)
    for (Eigen::Index j = 1; j <= x.p2(); ++j)
      x.flat()((j - 1) * x.p1() + (row - 1), t - 1) += a;
}

// Minimal rejected test result carrying the given argmaxes as minimizers.
AdaptiveTestResult fake_result(const std::vector<Eigen::Index>& argmaxes) {
  AdaptiveTestResult r;
  r.reject = true;
  for (std::size_t s = 0; s < argmaxes.size(); ++s) {
    SingleTestResult one;
    one.argmax = argmaxes[s];
    r.per_norm.push_back(one);
    r.minimizer_idx.push_back(static_cast<int>(s));
  }
  return r;
}

}  // namespace

TEST_CASE("changepoint estimate clusters tied minimizers") {
  // {100, 101} forms the largest cluster; its mean 100.5 rounds half down.
  ChangePointEstimate est = estimate_changepoint(fake_result({100, 101, 150}));
  CHECK(est.epoch == 100);
  CHECK(est.cluster == std::vector<Eigen::Index>{100, 101});
  CHECK(est.candidates == std::vector<Eigen::Index>{100, 101, 150});

  // Two singleton clusters tie on size; the earlier one wins.
  est = estimate_changepoint(fake_result({20, 10}));
  CHECK(est.epoch == 10);
  CHECK(est.cluster == std::vector<Eigen::Index>{10});

  // Equal-size clusters of two, earlier mean wins, 10.5 rounds to 10.
  est = estimate_changepoint(fake_result({30, 10, 31, 11}));
  CHECK(est.epoch == 10);

  // Chained candidates merge transitively within the distance.
  est = estimate_changepoint(fake_result({5, 6, 7, 20}));
  CHECK(est.cluster == std::vector<Eigen::Index>{5, 6, 7});
  CHECK(est.epoch == 6);

  // Distance zero only merges exact duplicates.
  est = estimate_changepoint(fake_result({5, 5, 6}), 0);
  CHECK(est.epoch == 5);
  CHECK(est.cluster == std::vector<Eigen::Index>{5, 5});

  // A wider distance merges everything.
  est = estimate_changepoint(fake_result({5, 6, 7, 20}), 13);
  CHECK(est.epoch == detail::round_half_down((5.0 + 6 + 7 + 20) / 4.0));

  AdaptiveTestResult not_rejected = fake_result({50});
  not_rejected.reject = false;
  CHECK_THROWS_AS(estimate_changepoint(not_rejected), Error);
  CHECK_THROWS_AS(estimate_changepoint(fake_result({50}), -1), Error);
}

TEST_CASE("round half down") {
  CHECK(detail::round_half_down(100.5) == 100);
  CHECK(detail::round_half_down(101.5) == 101);
  CHECK(detail::round_half_down(101.0) == 101);
  CHECK(detail::round_half_down(101.501) == 102);
  CHECK(detail::round_half_down(100.499) == 100);
}

TEST_CASE("partition from change points") {
  CHECK(partition_from_changepoints(6, {2, 4}) == std::vector<int>{0, 0, 1, 1, 2, 2});
  CHECK(partition_from_changepoints(4, {}) == std::vector<int>{0, 0, 0, 0});
  CHECK(partition_from_changepoints(3, {1}) == std::vector<int>{0, 1, 1});
  CHECK(partition_from_changepoints(3, {2}) == std::vector<int>{0, 0, 1});

  CHECK_THROWS_AS(partition_from_changepoints(0, {}), Error);
  CHECK_THROWS_AS(partition_from_changepoints(5, {0}), Error);
  CHECK_THROWS_AS(partition_from_changepoints(5, {5}), Error);
  CHECK_THROWS_AS(partition_from_changepoints(5, {3, 3}), Error);
  CHECK_THROWS_AS(partition_from_changepoints(5, {4, 2}), Error);
}

TEST_CASE("adjusted Rand index hand values") {
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(-0.5));
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {7, 7, 2, 2}) == 1.0);
  CHECK(adjusted_rand_index({0, 1, 2, 3}, {0, 0, 0, 0}) == 0.0);
  CHECK(adjusted_rand_index({4, 4, 4}, {1, 1, 1}) == 1.0);
  CHECK(adjusted_rand_index({0}, {3}) == 1.0);

  CHECK_THROWS_AS(adjusted_rand_index({0, 1}, {0}), Error);
  CHECK_THROWS_AS(adjusted_rand_index({}, {}), Error);
}

TEST_CASE("adjusted Rand index matches the pair-counting oracle") {
  CounterRng rng(31);
  std::uint64_t k = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 2 + rep % 40;
    const int ka = 1 + rep % 5, kb = 1 + (rep / 2) % 4;
    std::vector<int> a(n), b(n);
    for (std::size_t t = 0; t < n; ++t) {
      a[t] = static_cast<int>(rng.uniform_index(k++, static_cast<std::uint64_t>(ka)));
      b[t] = static_cast<int>(rng.uniform_index(k++, static_cast<std::uint64_t>(kb)));
    }
    CHECK(adjusted_rand_index(a, b) ==
          doctest::Approx(oracle::ari_pair_count(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("binary segmentation recovers two well-separated shifts") {
  MatrixSeriesXd x = random_series(3, 4, 150, 78);
  shift_row(x, 1, 50, 3.0);
  shift_row(x, 3, 100, 3.0);

  BootstrapConfig cfg;
  cfg.B = 100;
  cfg.seed = 5;
  const Segmentation seg = binary_segmentation(x, 15, 0.01, cfg);

  REQUIRE(seg.change_points.size() == 2);
  CHECK(std::abs(seg.change_points[0] - 50) <= 2);
  CHECK(std::abs(seg.change_points[1] - 100) <= 2);
  REQUIRE(seg.segment_means.size() == 3);

  // Means computed independently over the recovered segments.
  Eigen::Index from = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const Eigen::Index to = s < 2 ? seg.change_points[s] : x.n();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 4);
    for (Eigen::Index t = from + 1; t <= to; ++t) m += x.obs(t);
    m /= static_cast<double>(to - from);
    CHECK((seg.segment_means[s] - m).cwiseAbs().maxCoeff() < 1e-12);
    from = to;
  }

  // The node tree starts at the root and every rejected node splits inside
  // its own margin.
  REQUIRE(!seg.nodes.empty());
  CHECK(seg.nodes.front().s == 0);
  CHECK(seg.nodes.front().e == 150);
  CHECK(seg.nodes.front().tested);
  CHECK(seg.nodes.front().rejected);
  int rejected = 0;
  for (const SegmentationNode& node : seg.nodes) {
    CHECK(node.s < node.e);
    if (node.rejected) {
      ++rejected;
      CHECK(node.change_point >= node.s + 15);
      CHECK(node.change_point <= node.e - 15);
    }
    if (!node.tested) CHECK((node.e - node.s < 2 * 15 + 2 || node.depth >= 64));
  }
  CHECK(rejected == 2);
}

TEST_CASE("binary segmentation respects the length guard") {
  const MatrixSeriesXd x = random_series(2, 2, 11, 3);
  BootstrapConfig cfg;
  cfg.B = 20;
  const Segmentation seg = binary_segmentation(x, 5, 0.05, cfg);
  CHECK(seg.change_points.empty());
  REQUIRE(seg.nodes.size() == 1);
  CHECK(!seg.nodes.front().tested);
  REQUIRE(seg.segment_means.size() == 1);
}

TEST_CASE("binary segmentation is deterministic across thread counts") {
  MatrixSeriesXd x = random_series(2, 3, 120, 19);
  shift_row(x, 2, 60, 2.5);
  BootstrapConfig cfg;
  cfg.B = 60;
  cfg.seed = 23;
  TestOptions one, eight;
  one.threads = 1;
  eight.threads = 8;
  const Segmentation a = binary_segmentation(x, 12, 0.05, cfg, one);
  const Segmentation b = binary_segmentation(x, 12, 0.05, cfg, eight);
  CHECK(a.change_points == b.change_points);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    CHECK(a.nodes[k].p_ad == b.nodes[k].p_ad);
    CHECK(a.nodes[k].t_ad == b.nodes[k].t_ad);
  }
}

TEST_CASE("binary segmentation argument checks") {
  MatrixSeriesXd x = random_series(2, 2, 30, 1);
  BootstrapConfig cfg;
  cfg.B = 10;
  CHECK_THROWS_AS(binary_segmentation(x, 0, 0.05, cfg), Error);
  x.flat()(0, 5) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(binary_segmentation(x, 4, 0.05, cfg), Error);
}

TEST_CASE("null series yields no change points") {
  int splits = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const MatrixSeriesXd x = random_series(2, 2, 60, 500 + s);
    BootstrapConfig cfg;
    cfg.B = 60;
    cfg.seed = 900 + s;
    splits += static_cast<int>(binary_segmentation(x, 10, 0.05, cfg).change_points.size());
  }
  // 20 null runs at alpha = 0.05; a handful of false splits is plausible,
  // a systematic excess is not.
  CHECK(splits <= 4);
}
