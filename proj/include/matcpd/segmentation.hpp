#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "matcpd/core.hpp"
#include "matcpd/testing.hpp"

// Change point location and multiple change point recovery by binary
// segmentation on the adaptive test.
//
// The location estimate is the CUSUM argmax of the norm with the smallest
// p-value.  With strong signals several norms can tie at the minimum; their
// argmaxes are clustered (points within cluster_distance of a neighbour form
// one cluster) and the estimate is the rounded mean of the largest cluster,
// ties resolved toward the earlier cluster.

namespace matcpd {

struct ChangePointEstimate {
  Eigen::Index epoch = 0;               // the estimate
  std::vector<Eigen::Index> cluster;    // members of the winning cluster
  std::vector<Eigen::Index> candidates; // argmaxes of all minimizing norms, sorted
};

namespace detail {

// Round half down: ties between neighbouring integers go to the smaller one.
inline Eigen::Index round_half_down(double v) {
  return static_cast<Eigen::Index>(std::ceil(v - 0.5));
}

}  // namespace detail

inline ChangePointEstimate estimate_changepoint(const AdaptiveTestResult& test,
                                                Eigen::Index cluster_distance = 1) {
  if (!test.reject)
    throw Error(errc::boundary,
                "estimate_changepoint: the test did not reject; no change point to "
                "estimate");
  if (cluster_distance < 0)
    throw Error(errc::boundary, "estimate_changepoint: negative cluster distance");

  ChangePointEstimate out;
  for (int idx : test.minimizer_idx)
    out.candidates.push_back(test.per_norm[static_cast<std::size_t>(idx)].argmax);
  std::sort(out.candidates.begin(), out.candidates.end());

  std::size_t best_begin = 0, best_len = 0;
  double best_mean = 0.0;
  std::size_t begin = 0;
  while (begin < out.candidates.size()) {
    std::size_t end = begin + 1;
    while (end < out.candidates.size() &&
           out.candidates[end] - out.candidates[end - 1] <= cluster_distance)
      ++end;
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i)
      mean += static_cast<double>(out.candidates[i]);
    mean /= static_cast<double>(end - begin);
    const std::size_t len = end - begin;
    if (len > best_len || (len == best_len && mean < best_mean)) {
      best_begin = begin;
      best_len = len;
      best_mean = mean;
    }
    begin = end;
  }
  out.cluster.assign(out.candidates.begin() + static_cast<std::ptrdiff_t>(best_begin),
                     out.candidates.begin() +
                         static_cast<std::ptrdiff_t>(best_begin + best_len));
  out.epoch = detail::round_half_down(best_mean);
  return out;
}

struct SegmentationOptions {
  Eigen::Index cluster_distance = 1;
  int max_depth = 64;  // recursion safety cap
};

struct SegmentationNode {
  Eigen::Index s = 0, e = 0;  // the node covers observations s+1 .. e
  int depth = 0;
  bool tested = false;    // false when the length guard or depth cap stopped it
  bool rejected = false;
  bool degenerate = false;
  double p_ad = 1.0;
  double t_ad = 1.0;
  NormSpec selected;
  Eigen::Index change_point = 0;  // global epoch; 0 when not rejected
};

struct Segmentation {
  std::vector<Eigen::Index> change_points;     // sorted global epochs
  std::vector<Eigen::MatrixXd> segment_means;  // one per segment
  std::vector<SegmentationNode> nodes;         // preorder
};

namespace detail {

inline void segment_visit(const MatrixSeriesXd& x, Eigen::Index s, Eigen::Index e,
                          int depth, std::uint64_t path, Eigen::Index nu, double alpha,
                          const BootstrapConfig& cfg, const TestOptions& opts,
                          const SegmentationOptions& seg, Segmentation& out) {
  SegmentationNode node;
  node.s = s;
  node.e = e;
  node.depth = depth;
  if (e - s < 2 * nu + 2 || depth >= seg.max_depth) {
    out.nodes.push_back(node);
    return;
  }
  // Each node draws its multipliers from a seed keyed by its position in the
  // recursion tree, so results do not depend on traversal order.
  BootstrapConfig node_cfg = cfg;
  node_cfg.seed = derive_seed(cfg.seed, path);
  const MatrixSeriesXd sub = x.slice(s, e);
  const AdaptiveTestResult res = adaptive_test(sub, nu, alpha, node_cfg, opts);
  node.tested = true;
  node.rejected = res.reject;
  node.degenerate = res.degenerate;
  node.p_ad = res.p_ad;
  node.t_ad = res.t_ad;
  node.selected = res.selected;
  if (!res.reject) {
    out.nodes.push_back(node);
    return;
  }
  const ChangePointEstimate est = estimate_changepoint(res, seg.cluster_distance);
  const Eigen::Index u = s + est.epoch;
  node.change_point = u;
  out.nodes.push_back(node);
  out.change_points.push_back(u);
  segment_visit(x, s, u, depth + 1, 2 * path, nu, alpha, cfg, opts, seg, out);
  segment_visit(x, u, e, depth + 1, 2 * path + 1, nu, alpha, cfg, opts, seg, out);
}

}  // namespace detail

inline Segmentation binary_segmentation(const MatrixSeriesXd& x, Eigen::Index nu,
                                        double alpha, const BootstrapConfig& cfg,
                                        const TestOptions& opts = {},
                                        const SegmentationOptions& seg = {}) {
  if (nu < 1) throw Error(errc::boundary, "binary_segmentation: need nu >= 1");
  x.require_finite("binary_segmentation");
  Segmentation out;
  detail::segment_visit(x, 0, x.n(), 0, 1, nu, alpha, cfg, opts, seg, out);
  std::sort(out.change_points.begin(), out.change_points.end());

  Eigen::Index from = 0;
  for (std::size_t k = 0; k <= out.change_points.size(); ++k) {
    const Eigen::Index to =
        k < out.change_points.size() ? out.change_points[k] : x.n();
    Eigen::VectorXd mean = x.flat().middleCols(from, to - from).rowwise().mean();
    out.segment_means.emplace_back(
        Eigen::Map<const Eigen::MatrixXd>(mean.data(), x.p1(), x.p2()));
    from = to;
  }
  return out;
}

// Labels observations 1..n by the segment a sorted change point list induces:
// observation t gets the index of the first segment boundary >= t.
inline std::vector<int> partition_from_changepoints(
    Eigen::Index n, const std::vector<Eigen::Index>& change_points) {
  if (n < 1) throw Error(errc::boundary, "partition_from_changepoints: need n >= 1");
  Eigen::Index prev = 0;
  for (Eigen::Index u : change_points) {
    if (u <= prev || u >= n)
      throw Error(errc::boundary,
                  "partition_from_changepoints: change points must be strictly "
                  "increasing and inside (0, n)");
    prev = u;
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  int seg = 0;
  std::size_t next = 0;
  for (Eigen::Index t = 1; t <= n; ++t) {
    while (next < change_points.size() && t > change_points[next]) {
      ++seg;
      ++next;
    }
    labels[static_cast<std::size_t>(t - 1)] = seg;
  }
  return labels;
}

// Pair-counting adjusted Rand index; 1 when the partitions agree, including
// the degenerate case where both put everything in one cluster.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw Error(errc::boundary, "adjusted_rand_index: label vectors differ in length");
  if (a.empty()) throw Error(errc::boundary, "adjusted_rand_index: empty labels");

  std::unordered_map<int, int> ia, ib;
  std::vector<double> ca, cb;
  std::unordered_map<std::uint64_t, double> cell;
  auto idof = [](std::unordered_map<int, int>& m, std::vector<double>& c, int label) {
    auto [it, fresh] = m.try_emplace(label, static_cast<int>(c.size()));
    if (fresh) c.push_back(0.0);
    return it->second;
  };
  for (std::size_t t = 0; t < a.size(); ++t) {
    const int ra = idof(ia, ca, a[t]);
    const int rb = idof(ib, cb, b[t]);
    ca[static_cast<std::size_t>(ra)] += 1.0;
    cb[static_cast<std::size_t>(rb)] += 1.0;
    cell[(static_cast<std::uint64_t>(ra) << 32) | static_cast<std::uint64_t>(rb)] += 1.0;
  }
  auto comb2 = [](double m) { return m * (m - 1.0) / 2.0; };
  double sum_cells = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, m] : cell) sum_cells += comb2(m);
  for (double m : ca) sum_a += comb2(m);
  for (double m : cb) sum_b += comb2(m);
  const double total = comb2(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_cells - expected) / (max_index - expected);
}

}  // namespace matcpd
